"""Character-level tokenization, FEN flattening and padding."""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD = "<|pad|>"
BOS = "<|begin_of_text|>"
EOS = "<|end_of_text|>"
SPECIALS = (PAD, BOS, EOS)
_SPECIAL_RE = re.compile("(" + "|".join(re.escape(s) for s in SPECIALS) + ")")


class TokenizerError(ValueError):
    pass


class UnknownSymbolError(TokenizerError):
    def __init__(self, symbol: str, position: int):
        self.symbol = symbol
        self.position = position
        super().__init__(f"unknown symbol {symbol!r} at position {position}")


class SequenceOverflowError(TokenizerError):
    pass


# ---------------------------------------------------------------------------
# FEN run-length flattening


def _split_fen(fen_text: str) -> tuple[str, str]:
    placement, _, rest = fen_text.strip().partition(" ")
    return placement, rest


def flatten_fen(fen_text: str) -> str:
    """Replace every run-length digit in the placement field by that many periods.

    >>> flatten_fen("r1bqk2r/8/8/8/8/8/8/8 w - - 0 1").split()[0][:8]
    'r.bqk..r'
    """
    placement, rest = _split_fen(fen_text)
    ranks = placement.split("/")
    if len(ranks) != 8:
        raise TokenizerError(f"placement needs 8 ranks: {placement!r}")
    out = []
    for rank in ranks:
        flat = "".join("." * int(c) if c in "12345678" else c for c in rank)
        if len(flat) != 8 or any(c not in "pnbrqkPNBRQK." for c in flat):
            raise TokenizerError(f"malformed rank {rank!r}")
        out.append(flat)
    flat_placement = "/".join(out)
    return f"{flat_placement} {rest}" if rest else flat_placement


def unflatten_fen(flattened: str) -> str:
    placement, rest = _split_fen(flattened)
    ranks = placement.split("/")
    if len(placement) != 71 or len(ranks) != 8 or any(len(r) != 8 for r in ranks):
        raise TokenizerError(f"flattened placement must be 8 ranks of 8 symbols: {placement!r}")
    out = []
    for rank in ranks:
        packed = re.sub(r"\.+", lambda m: str(len(m.group(0))), rank)
        out.append(packed)
    packed_placement = "/".join(out)
    return f"{packed_placement} {rest}" if rest else packed_placement


# ---------------------------------------------------------------------------
# vocabulary


@dataclass(frozen=True)
class Vocabulary:
    symbols: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.symbols[: len(SPECIALS)] != SPECIALS:
            raise TokenizerError("vocabulary must start with the reserved specials")
        if len(set(self.symbols)) != len(self.symbols):
            raise TokenizerError("duplicate symbols in vocabulary")
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.index

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def bos_id(self) -> int:
        return self.index[BOS]

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    def serialize(self) -> str:
        return "\n".join(self.symbols) + "\n"

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


def _plain_chars(text: str) -> Iterable[str]:
    for piece in _SPECIAL_RE.split(text):
        if piece not in SPECIALS:
            yield from piece


def build_vocab(sample: Iterable[str]) -> Vocabulary:
    """Sorted distinct characters of the sample, after the three specials."""
    chars: set[str] = set()
    for text in sample:
        chars.update(_plain_chars(text))
    chars.discard("\n")
    chars.discard("\r")
    return Vocabulary(SPECIALS + tuple(sorted(chars)))


def token_length(text: str) -> int:
    """Number of ids ``char_tokenize`` would produce, without needing a vocabulary."""
    return sum(1 if piece in SPECIALS else len(piece) for piece in _SPECIAL_RE.split(text))


def char_tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """One id per character; special markers map to their reserved id."""
    ids = []
    pos = 0
    for piece in _SPECIAL_RE.split(text):
        if not piece:
            continue
        if piece in SPECIALS:
            ids.append(vocab.index[piece])
            pos += len(piece)
            continue
        for ch in piece:
            try:
                ids.append(vocab.index[ch])
            except KeyError:
                raise UnknownSymbolError(ch, pos) from None
            pos += 1
    return ids


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    return "".join(vocab.symbols[i] for i in ids)


@dataclass(frozen=True)
class MoveVocabulary:
    """One id per distinct SAN string, for move-level bookkeeping."""

    moves: tuple[str, ...]

    @classmethod
    def build(cls, sans: Iterable[str]) -> MoveVocabulary:
        return cls(tuple(sorted(set(sans))))

    def encode(self, san: str) -> int:
        return self.moves.index(san)

    def __len__(self) -> int:
        return len(self.moves)


# ---------------------------------------------------------------------------
# sequences


@dataclass
class TokenSequence:
    """Token ids plus the target mask ``loss_mask`` and the content mask ``attention_mask``.

    ``prefix_len`` is the number of conditioning tokens before the first target.
    """

    ids: list[int]
    loss_mask: list[int]
    attention_mask: list[int]
    prefix_len: int = 0

    def __post_init__(self):
        if not (len(self.ids) == len(self.loss_mask) == len(self.attention_mask)):
            raise TokenizerError("ids, loss_mask and attention_mask must share one length")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def target_span(self) -> tuple[int, int]:
        hits = [i for i, w in enumerate(self.loss_mask) if w]
        if not hits:
            raise TokenizerError("sequence has no target tokens")
        return hits[0], hits[-1] + 1

    @property
    def content_length(self) -> int:
        return sum(self.attention_mask)


def pad_sequence(seq: TokenSequence, target_len: int, pad_id: int = 0) -> TokenSequence:
    n = len(seq)
    if n > target_len:
        raise SequenceOverflowError(f"sequence of length {n} exceeds {target_len}")
    extra = target_len - n
    return TokenSequence(
        seq.ids + [pad_id] * extra,
        seq.loss_mask + [0] * extra,
        seq.attention_mask + [0] * extra,
        seq.prefix_len,
    )
