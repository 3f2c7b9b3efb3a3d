"""Chess move prediction with masked next-token objectives at toy scale."""

__version__ = "0.1.0"
