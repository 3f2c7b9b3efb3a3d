"""UCI engine client, best-move annotation, game generation and dataset files."""
from __future__ import annotations

import logging
import queue
import shlex
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .board import ChessError, GameHistory, apply_move, legal_moves, parse_fen, parse_pgn, parse_uci, serialize_fen
from .elo import GameRecord, Policy, RulesConfig, play_game

log = logging.getLogger(__name__)

MOCK_ENGINE_COMMAND = [sys.executable, "-m", "chessmask.mock_engine"]


class EngineError(RuntimeError):
    pass


class EngineTimeout(EngineError):
    pass


@dataclass(frozen=True)
class SearchLimits:
    movetime_ms: int | None = 50
    depth: int | None = None

    def go_command(self) -> str:
        if self.depth is not None:
            return f"go depth {self.depth}"
        return f"go movetime {self.movetime_ms}"

    def describe(self) -> str:
        return self.go_command()[3:]


class EngineHandle:
    """One engine process speaking UCI over stdin/stdout.

    ``transcript`` keeps every line as ``("<", sent)`` or (">", received).
    """

    def __init__(self, command: Sequence[str] | str, timeout: float = 10.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.ready = False
        self.skill_level: int | None = None
        self.transcript: list[tuple[str, str]] = []
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EngineError(f"cannot start engine {self.command}: {exc}") from None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line.rstrip("\r\n"))
        self._lines.put(None)

    def send(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise EngineError("engine process has exited")
        self.transcript.append(("<", line))
        try:
            assert self.proc.stdin is not None
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EngineError(f"engine pipe closed: {exc}") from None

    def expect(self, prefix: str, timeout: float | None = None) -> str:
        """Read lines until one starts with ``prefix``."""
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EngineTimeout(f"no {prefix!r} from engine within the deadline")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise EngineTimeout(f"no {prefix!r} from engine within the deadline") from None
            if line is None:
                raise EngineError(f"engine exited while waiting for {prefix!r}")
            self.transcript.append((">", line))
            if line.startswith(prefix):
                return line

    def sync(self) -> None:
        self.ready = False
        self.send("isready")
        self.expect("readyok")
        self.ready = True

    def new_game(self) -> None:
        self.send("ucinewgame")
        self.sync()

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.send("quit")
            except EngineError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self.ready = False

    def __enter__(self) -> EngineHandle:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def handshake(
    command: Sequence[str] | str,
    skill_level: int | None = None,
    timeout: float = 10.0,
) -> EngineHandle:
    """Start an engine and complete the uci/uciok and isready/readyok exchange."""
    handle = EngineHandle(command, timeout)
    try:
        handle.send("uci")
        handle.expect("uciok")
        if skill_level is not None:
            handle.send(f"setoption name Skill Level value {skill_level}")
            handle.skill_level = skill_level
        handle.sync()
    except EngineError:
        handle.close()
        raise
    return handle


def mock_engine_command(seed: int = 0, extra: Sequence[str] = ()) -> list[str]:
    return MOCK_ENGINE_COMMAND + ["--seed", str(seed), *extra]


def best_move(handle: EngineHandle, fen: str, limits: SearchLimits = SearchLimits(), moves_uci: Sequence[str] = ()) -> str:
    """Ask the engine for its move in ``fen`` and return it as SAN."""
    if not handle.ready:
        raise EngineError("engine is not ready (handshake incomplete)")
    board = parse_fen(fen)
    position = f"position fen {serialize_fen(board)}"
    if moves_uci:
        position += " moves " + " ".join(moves_uci)
        for text in moves_uci:
            board = apply_move(board, parse_uci(board, text))
    handle.send(position)
    handle.send(limits.go_command())
    line = handle.expect("bestmove")
    parts = line.split()
    if len(parts) < 2:
        raise EngineError(f"malformed engine reply {line!r}")
    try:
        return parse_uci(board, parts[1]).san
    except ChessError:
        raise EngineError(f"engine returned illegal or unparseable move {parts[1]!r} in {serialize_fen(board)}") from None


# ---------------------------------------------------------------------------
# annotation


@dataclass(frozen=True)
class AnnotatedPosition:
    fen: str
    legal_moves: tuple[str, ...]
    best_move: str

    def __post_init__(self):
        if self.best_move not in self.legal_moves:
            raise ValueError(f"best move {self.best_move!r} not legal in {self.fen}")

    def to_line(self) -> str:
        return f"{self.fen}\t{','.join(self.legal_moves)}\t{self.best_move}"

    @classmethod
    def from_line(cls, line: str) -> AnnotatedPosition:
        fen, moves, best = line.rstrip("\n").split("\t")
        return cls(fen, tuple(moves.split(",")), best)


@dataclass
class AnnotationFailure:
    index: int
    fen: str
    error: str


def annotate(fen: str, best: str) -> AnnotatedPosition:
    board = parse_fen(fen)
    return AnnotatedPosition(serialize_fen(board), tuple(m.san for m in legal_moves(board)), best)


def annotate_dataset(
    fens: Iterable[str],
    handle: EngineHandle | Callable[[str], str],
    limits: SearchLimits = SearchLimits(),
    failures: list[AnnotationFailure] | None = None,
) -> Iterator[AnnotatedPosition]:
    """Annotate positions in order; bad records are reported and skipped.

    ``handle`` may be an engine or any callable mapping a FEN to a SAN move.
    """
    ask = handle if callable(handle) and not isinstance(handle, EngineHandle) else (
        lambda fen: best_move(handle, fen, limits)  # type: ignore[arg-type]
    )
    for i, fen in enumerate(fens):
        try:
            board = parse_fen(fen)
            if not legal_moves(board):
                raise ChessError("position has no legal moves")
            record = annotate(fen, ask(serialize_fen(board)))
        except (ChessError, EngineError, ValueError) as exc:
            log.warning("record %d skipped (%s): %s", i, fen, exc)
            if failures is not None:
                failures.append(AnnotationFailure(i, fen, str(exc)))
            continue
        yield record


def write_annotated(path: str | Path, records: Iterable[AnnotatedPosition]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_line() + "\n")
            n += 1
    return n


def read_annotated(path: str | Path) -> list[AnnotatedPosition]:
    with open(path, encoding="utf-8") as fh:
        return [AnnotatedPosition.from_line(line) for line in fh if line.strip()]


def validate_annotated(records: Iterable[AnnotatedPosition]) -> list[str]:
    """Invariant sweep: problems found, empty when every record is consistent."""
    problems = []
    for i, rec in enumerate(records):
        try:
            board = parse_fen(rec.fen)
        except ChessError as exc:
            problems.append(f"{i}: bad FEN ({exc})")
            continue
        expected = tuple(m.san for m in legal_moves(board))
        if rec.legal_moves != expected:
            problems.append(f"{i}: legal move list differs from the rules engine")
        if rec.best_move not in expected:
            problems.append(f"{i}: best move {rec.best_move!r} is not legal")
    return problems


# ---------------------------------------------------------------------------
# games


class EnginePolicy:
    """Game-playing wrapper around an engine handle."""

    def __init__(self, handle: EngineHandle, limits: SearchLimits = SearchLimits(), name: str | None = None):
        self.handle = handle
        self.limits = limits
        self.name = name or " ".join(handle.command[-1:])

    def new_game(self) -> None:
        self.handle.new_game()

    def choose(self, history: GameHistory) -> str:
        start = serialize_fen(history.start)
        return best_move(self.handle, start, self.limits, [m.uci() for m in history.moves])


def load_opening_book(path: str | Path) -> list[list[str]]:
    """One opening per non-empty line, as SAN (move numbers allowed)."""
    book = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            games = parse_pgn(line)
            book.append(games[0].moves if games else [])
    return book


DEFAULT_OPENING_BOOK = (
    ("e4", "e5", "Nf3", "Nc6"),
    ("d4", "d5", "c4", "e6"),
    ("e4", "c5", "Nf3", "d6"),
    ("c4", "e5", "Nc3", "Nf6"),
    ("d4", "Nf6", "c4", "g6"),
    ("e4", "e6", "d4", "d5"),
    ("Nf3", "d5", "g3", "Nf6"),
    ("e4", "c6", "d4", "d5"),
)


def generate_games(
    white: Policy,
    black: Policy | Sequence[Policy],
    n: int,
    opening_book: Sequence[Sequence[str]] = DEFAULT_OPENING_BOOK,
    rules: RulesConfig | None = None,
) -> list[GameRecord]:
    """Play ``n`` games, openings drawn round-robin from the book.

    ``black`` may be a list of policies, also cycled round-robin. Games whose
    play fails on the engine side are discarded and logged.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    blacks = list(black) if isinstance(black, Sequence) else [black]
    book = [list(line) for line in opening_book] or [[]]
    games = []
    for i in range(n):
        game = play_game(white, blacks[i % len(blacks)], book[i % len(book)], rules)
        if game.transport_failure:
            log.warning("game %d discarded: %s", i, game.reason)
            continue
        games.append(game)
    return games


def write_pgn_corpus(path: str | Path, games: Iterable[GameRecord]) -> int:
    blocks = [g.pgn() for g in games]
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    return len(blocks)


def read_pgn_corpus(path: str | Path) -> list[list[str]]:
    return [g.moves for g in parse_pgn(Path(path).read_text(encoding="utf-8"))]
