"""Games, forfeits and Elo estimation against a calibrated opponent ladder."""
from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .board import (
    BLACK,
    WHITE,
    ChessError,
    GameHistory,
    MoveRecord,
    game_status,
    legal_moves,
    material_balance,
    parse_san,
    parse_uci,
    render_pgn,
)
from .mock_engine import MAX_SKILL, choose_move

log = logging.getLogger(__name__)

# approximate Elo of attenuated engine levels 0..10
STOCKFISH_LADDER = (1320, 1467, 1608, 1742, 1922, 2203, 2363, 2499, 2596, 2702, 2788)
DEFAULT_K = 16.0
DEFAULT_INITIAL_RATING = 1500.0
RESIGN = "resign"

WHITE_WIN, BLACK_WIN, DRAW = "1-0", "0-1", "1/2-1/2"
TERMINATIONS = ("checkmate", "draw rule", "forfeit", "adjudicated")


class EngineUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class LadderEntry:
    level: int
    rating: float


def default_ladder() -> list[LadderEntry]:
    return [LadderEntry(i, float(r)) for i, r in enumerate(STOCKFISH_LADDER)]


def check_ladder(ladder: Sequence[LadderEntry]) -> None:
    for a, b in zip(ladder, ladder[1:]):
        if not b.rating > a.rating:
            raise ValueError("ladder ratings must increase strictly with level")


def load_ladder(path: str | Path) -> list[LadderEntry]:
    with open(path, newline="") as fh:
        ladder = [LadderEntry(int(row["level"]), float(row["rating"])) for row in csv.DictReader(fh)]
    check_ladder(ladder)
    return ladder


def save_ladder(path: str | Path, ladder: Sequence[LadderEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "rating"])
        for entry in ladder:
            writer.writerow([entry.level, entry.rating])


# ---------------------------------------------------------------------------
# Elo arithmetic


def expected_score(r_self: float, r_opp: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((r_opp - r_self) / 400.0))


@dataclass
class MatchResult:
    opponent_rating: float
    games: int
    wins: int
    draws: int
    losses: int
    forfeits: int = 0
    level: int | None = None

    def __post_init__(self):
        if self.wins + self.draws + self.losses != self.games:
            raise ValueError("wins + draws + losses must equal games")
        if not 0 <= self.forfeits <= self.losses:
            raise ValueError("forfeits must not exceed losses")

    @property
    def score(self) -> float:
        """Wins plus half a point per draw."""
        return self.wins + 0.5 * self.draws


@dataclass
class EloLedger:
    rating: float = DEFAULT_INITIAL_RATING
    k: float = DEFAULT_K
    results: list[MatchResult] = field(default_factory=list)
    trajectory: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("K must be positive")
        if not self.trajectory:
            self.trajectory.append(self.rating)

    def record(self, result: MatchResult) -> float:
        self.rating = elo_update(self, result)
        self.results.append(result)
        self.trajectory.append(self.rating)
        return self.rating


def elo_update(ledger: EloLedger, result: MatchResult) -> float:
    """R + K * (score - N * E), E evaluated at the ledger's current rating."""
    e = expected_score(ledger.rating, result.opponent_rating)
    return ledger.rating + ledger.k * (result.score - result.games * e)


# ---------------------------------------------------------------------------
# policies


class Policy(Protocol):
    name: str

    def choose(self, history: GameHistory) -> str:
        """Return a move as SAN (long algebraic also accepted) or ``"resign"``."""


class MockEnginePolicy:
    """In-process scripted engine at a given skill level."""

    def __init__(self, skill: int = MAX_SKILL, seed: int = 0, name: str | None = None):
        self.skill = skill
        self.seed = seed
        self.name = name or f"mock-skill{skill}"

    def choose(self, history: GameHistory) -> str:
        return choose_move(history.board, self.skill, self.seed).san


class RandomPolicy:
    def __init__(self, seed: int = 0, name: str = "random"):
        self.rng = random.Random(seed)
        self.name = name

    def choose(self, history: GameHistory) -> str:
        moves = legal_moves(history.board)
        return moves[self.rng.randrange(len(moves))].san


class RatedPolicy(RandomPolicy):
    """Random mover carrying a nominal rating, for strength-adjudicated games."""

    def __init__(self, rating: float, seed: int = 0, name: str | None = None):
        super().__init__(seed, name or f"rated-{rating:g}")
        self.rating = rating


class ScriptedPolicy:
    """Plays a fixed list of outputs in order, then falls back to another policy (or resigns)."""

    def __init__(self, outputs: Sequence[str], name: str = "scripted", fallback: Policy | None = None):
        self.outputs = list(outputs)
        self.name = name
        self.fallback = fallback
        self._i = 0

    def new_game(self) -> None:
        self._i = 0

    def choose(self, history: GameHistory) -> str:
        if self._i < len(self.outputs):
            self._i += 1
            return self.outputs[self._i - 1]
        if self.fallback is not None:
            return self.fallback.choose(history)
        return RESIGN


class ResignPolicy:
    name = "resign"

    def choose(self, history: GameHistory) -> str:
        return RESIGN


# ---------------------------------------------------------------------------
# single games

Adjudicator = Callable[[GameHistory, Policy, Policy], str]


def material_adjudicator(history: GameHistory, white: Policy, black: Policy, margin: int = 3) -> str:
    balance = material_balance(history.board)
    if balance >= margin:
        return WHITE_WIN
    if balance <= -margin:
        return BLACK_WIN
    return DRAW


class StrengthAdjudicator:
    """Decide a capped game by sampling from the Elo model of the two ratings.

    Both policies need a ``rating`` attribute. Draws occur with probability
    ``draw_rate * 2 * min(E, 1 - E)`` so the expected score for White stays E.
    """

    def __init__(self, seed: int = 0, draw_rate: float = 0.2):
        self.rng = random.Random(seed)
        self.draw_rate = draw_rate

    def __call__(self, history: GameHistory, white: Policy, black: Policy) -> str:
        e = expected_score(white.rating, black.rating)  # type: ignore[attr-defined]
        p_draw = self.draw_rate * 2 * min(e, 1 - e)
        u = self.rng.random()
        if u < e - p_draw / 2:
            return WHITE_WIN
        if u < e + p_draw / 2:
            return DRAW
        return BLACK_WIN


@dataclass
class RulesConfig:
    illegal_limit: int = 5  # the attempt after this many consecutive illegal ones forfeits
    max_plies: int = 400
    adjudicator: Adjudicator | None = None


@dataclass
class GameRecord:
    moves: list[str]
    result: str
    white_id: str
    black_id: str
    termination: str
    reason: str = ""
    opening_plies: int = 0
    transport_failure: bool = False

    def pgn(self, **headers: str) -> str:
        tags = {"White": self.white_id, "Black": self.black_id, "Result": self.result, "Termination": self.reason or self.termination}
        tags.update(headers)
        return render_pgn(self.moves, self.result, tags)


def _resolve(history: GameHistory, text: str) -> MoveRecord:
    text = text.strip()
    try:
        return parse_san(history.board, text)
    except ChessError:
        return parse_uci(history.board, text)


def _loss_for(color: str) -> str:
    return BLACK_WIN if color == WHITE else WHITE_WIN


def play_game(
    white: Policy,
    black: Policy,
    opening: Sequence[str] = (),
    rules: RulesConfig | None = None,
) -> GameRecord:
    """Play one game to a rule-based end, a forfeit, a resignation or the ply cap."""
    rules = rules or RulesConfig()
    for p in (white, black):
        if hasattr(p, "new_game"):
            p.new_game()
    history = GameHistory.new()
    for san in opening:
        history = history.push(san)

    def record(result: str, termination: str, reason: str, failure: bool = False) -> GameRecord:
        return GameRecord(history.sans, result, white.name, black.name, termination, reason, len(opening), failure)

    while True:
        status = game_status(history)
        if status is not None:
            result, reason = status
            return record(result, "checkmate" if reason == "checkmate" else "draw rule", reason)
        if len(history.moves) >= rules.max_plies:
            judge = rules.adjudicator or material_adjudicator
            return record(judge(history, white, black), "adjudicated", "ply cap")
        color = history.board.side_to_move
        policy = white if color == WHITE else black
        illegal = 0
        while True:
            try:
                text = policy.choose(history)
            except Exception as exc:  # transport failure (engine crash, broken pipe, ...)
                log.warning("policy %s failed: %s", policy.name, exc)
                return record(_loss_for(color), "forfeit", f"transport failure: {exc}", True)
            if text is not None and text.strip() == RESIGN:
                return record(_loss_for(color), "adjudicated", "resignation")
            try:
                move = _resolve(history, text or "")
            except ChessError:
                illegal += 1
                if illegal > rules.illegal_limit:
                    return record(_loss_for(color), "forfeit", f"{illegal} consecutive illegal moves")
                continue
            history = history.push(move)
            break


def replay(record: GameRecord) -> GameHistory:
    history = GameHistory.new()
    for san in record.moves:
        history = history.push(san)
    return history


# ---------------------------------------------------------------------------
# tournaments


def color_schedule(games: int, white_only: bool = False) -> list[str]:
    """Colors for the rated policy: all White, or half White then half Black."""
    if white_only:
        return [WHITE] * games
    if games < 2 or games % 2:
        raise ValueError("games per level must be even and at least 2 for balanced colors")
    return [WHITE] * (games // 2) + [BLACK] * (games // 2)


@dataclass
class LevelRow:
    level: int
    rating: float
    games: int
    wins: int
    draws: int
    losses: int
    forfeits: int
    skipped: bool = False


@dataclass
class TournamentResult:
    ledger: EloLedger
    rows: list[LevelRow]
    games: list[GameRecord]
    white_only: bool = False
    skipped_levels: list[int] = field(default_factory=list)

    def table(self) -> str:
        lines = [f"{'level':>5} {'rating':>7} {'N':>5} {'W':>5} {'D':>5} {'L':>5} {'forfeit':>7}"]
        for r in self.rows:
            if r.skipped:
                lines.append(f"{r.level:>5} {r.rating:>7.0f}  skipped (engine unavailable)")
            else:
                lines.append(f"{r.level:>5} {r.rating:>7.0f} {r.games:>5} {r.wins:>5} {r.draws:>5} {r.losses:>5} {r.forfeits:>7}")
        note = " (White games only)" if self.white_only else ""
        lines.append(f"final rating {self.ledger.rating:.1f}{note}")
        return "\n".join(lines)

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"levels": out / "levels.csv", "summary": out / "rating.json", "pgn": out / "games.pgn"}
        with open(paths["levels"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "rating", "N", "W", "D", "L", "forfeits"])
            for r in self.rows:
                if not r.skipped:
                    writer.writerow([r.level, r.rating, r.games, r.wins, r.draws, r.losses, r.forfeits])
        summary = {
            "final_rating": self.ledger.rating,
            "k": self.ledger.k,
            "initial_rating": self.ledger.trajectory[0],
            "white_only": self.white_only,
            "skipped_levels": self.skipped_levels,
            "levels": [asdict(r) for r in self.rows],
        }
        paths["summary"].write_text(json.dumps(summary, indent=2) + "\n")
        paths["pgn"].write_text("\n\n".join(g.pgn() for g in self.games) + "\n")
        return paths


def _tally(games: Iterable[GameRecord], color: str) -> tuple[int, int, int, int]:
    w = d = l = f = 0
    win = WHITE_WIN if color == WHITE else BLACK_WIN
    for g in games:
        if g.result == DRAW:
            d += 1
        elif g.result == win:
            w += 1
        else:
            l += 1
            f += g.termination == "forfeit"
    return w, d, l, f


def run_tournament(
    policy: Policy,
    ladder: Sequence[LadderEntry],
    games_per_level: int,
    opponent_factory: Callable[[LadderEntry], Policy],
    white_only: bool = False,
    opening_book: Sequence[Sequence[str]] = ((),),
    rules: RulesConfig | None = None,
    initial_rating: float = DEFAULT_INITIAL_RATING,
    k: float = DEFAULT_K,
    update: str = "batch",
) -> TournamentResult:
    """Play ``policy`` against every ladder level and estimate its rating.

    ``update`` picks the rating granularity: ``"game"`` applies the Elo update
    after every game, ``"batch"`` once per (level, color) block of games.
    """
    if update not in ("game", "batch"):
        raise ValueError("update must be 'game' or 'batch'")
    check_ladder(ladder)
    colors = color_schedule(games_per_level, white_only)
    ledger = EloLedger(initial_rating, k)
    rows, all_games, skipped = [], [], []
    book = [list(line) for line in opening_book] or [[]]
    n_played = 0
    for entry in ladder:
        try:
            opponent = opponent_factory(entry)
        except EngineUnavailable as exc:
            log.warning("level %s skipped: %s", entry.level, exc)
            skipped.append(entry.level)
            rows.append(LevelRow(entry.level, entry.rating, 0, 0, 0, 0, 0, skipped=True))
            continue
        level_games: list[GameRecord] = []
        w = d = l = f = 0
        for color in (WHITE, BLACK):
            block = []
            for _ in range(colors.count(color)):
                opening = book[n_played % len(book)]
                n_played += 1
                pair = (policy, opponent) if color == WHITE else (opponent, policy)
                game = play_game(*pair, opening=opening, rules=rules)
                block.append(game)
                if update == "game":
                    ledger.record(MatchResult(entry.rating, 1, *_tally([game], color), entry.level))
            if not block:
                continue
            tally = _tally(block, color)
            if update == "batch":
                ledger.record(MatchResult(entry.rating, len(block), *tally, entry.level))
            w, d, l, f = w + tally[0], d + tally[1], l + tally[2], f + tally[3]
            level_games.extend(block)
        rows.append(LevelRow(entry.level, entry.rating, len(level_games), w, d, l, f))
        all_games.extend(level_games)
    return TournamentResult(ledger, rows, all_games, white_only, skipped)
