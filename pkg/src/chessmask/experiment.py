"""Toy-scale comparison of FEN prompts and PGN movetext as training representations.

Games are played between the greedy mock (skill 20) as White and weaker mocks
as Black. Every White move in those games is the greedy move, so one game set
yields both datasets: FEN prompts annotated with White's move, and the PGN
movetext of the same games.
"""
from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .board import initial_board, legal_move_list, legal_moves, serialize_fen, _make
from .elo import MockEnginePolicy, RulesConfig, material_adjudicator
from .engine import AnnotatedPosition, annotate, generate_games
from .evaluation import FEN, PGN, EvalItem, EvalReport, evaluate, fen_items, mean_ce, pgn_item, TEACHER_FORCED
from .mock_engine import greedy_move
from .model import BIDIRECTIONAL, CAUSAL, ModelConfig, build_model
from .train import TrainConfig, fen_samples, make_pgn_sample, make_vocab, train

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    train_games: int = 600
    eval_games: int = 100
    opening_plies: int = 4
    max_plies: int = 60
    black_skills: tuple[int, ...] = (0, 5, 10)
    seed: int = 0
    # model
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_seq_len: int = 640
    # optimization, shared by every condition
    steps: int = 3000
    batch_size: int = 32
    learning_rate: float = 2e-3
    min_lr: float = 2e-4
    warmup_iters: int = 50
    weight_decay: float = 0.0

    def model_config(self, vocab_size: int, mode: str) -> ModelConfig:
        return ModelConfig(
            vocab_size, self.n_layers, self.n_heads, self.d_model, self.d_ff, self.max_seq_len, mode
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            min_lr=self.min_lr,
            warmup_iters=self.warmup_iters,
            lr_decay_iters=self.steps,
            max_iters=self.steps,
            batch_size=self.batch_size,
            weight_decay=self.weight_decay,
            seed=self.seed,
            log_every=0,
        )


def random_openings(n: int, plies: int, seed: int) -> list[list[str]]:
    rng = random.Random(seed)
    book = []
    while len(book) < n:
        board, line = initial_board(), []
        for _ in range(plies):
            moves = legal_move_list(board)
            move = moves[rng.randrange(len(moves))]
            line.append(next(m.san for m in legal_moves(board) if m.move == move))
            board = _make(board, move)
        if legal_moves(board):
            book.append(line)
    return book


def play_corpus(n: int, cfg: ExperimentConfig, seed: int) -> list[list[str]]:
    """Move lists of ``n`` games, greedy White against the configured Black skills."""
    blacks = [MockEnginePolicy(skill, seed=seed * 1000 + i) for i, skill in enumerate(cfg.black_skills)]
    rules = RulesConfig(max_plies=cfg.max_plies, adjudicator=material_adjudicator)
    book = random_openings(n, cfg.opening_plies, seed)
    games = []
    for i in range(n):
        # one opening per game so no two games share a line
        games.extend(generate_games(MockEnginePolicy(20, seed), blacks[i % len(blacks)], 1, [book[i]], rules))
    return [list(g.moves) for g in games]


def white_positions(games: Sequence[Sequence[str]], skip: int) -> list[tuple[list[str], AnnotatedPosition]]:
    """(history, annotated position) for every White turn after the first ``skip`` plies."""
    out = []
    for moves in games:
        board = initial_board()
        for ply, san in enumerate(moves):
            if ply >= skip and ply % 2 == 0:
                rec = annotate(serialize_fen(board), greedy_move(board).san)
                out.append((list(moves[:ply]), rec))
            board = _make(board, next(m for m in legal_moves(board) if m.san == san).move)
    return out


@dataclass
class ConditionResult:
    name: str
    representation: str
    attention_mode: str
    mean_ce: float
    report: EvalReport
    seconds: float
    final_loss: float

    def row(self) -> dict:
        return {
            "condition": self.name,
            "representation": self.representation,
            "attention_mode": self.attention_mode,
            "mean_ce": self.mean_ce,
            **{k: v for k, v in self.report.row().items() if k != "mode"},
            "final_train_loss": self.final_loss,
            "seconds": self.seconds,
        }


@dataclass
class ExperimentData:
    vocab: object
    fen_train: list
    pgn_train: list
    fen_eval: list[EvalItem]
    pgn_eval: list[EvalItem]
    stats: dict = field(default_factory=dict)


def build_data(cfg: ExperimentConfig) -> ExperimentData:
    vocab = make_vocab()
    train_games = play_corpus(cfg.train_games, cfg, cfg.seed)
    eval_games = play_corpus(cfg.eval_games, cfg, cfg.seed + 7919)
    train_pos = white_positions(train_games, cfg.opening_plies)
    eval_pos = white_positions(eval_games, cfg.opening_plies)
    # positions with more legal moves than the prompt budget holds are left out of both representations
    fen_train, skipped = fen_samples([r for _, r in train_pos], vocab)
    pgn_train = [make_pgn_sample(g, vocab) for g in train_games]
    dropped: list[int] = []
    fen_eval = fen_items([r for _, r in eval_pos], vocab, skipped=dropped)
    gone = set(dropped)
    pgn_eval = [pgn_item(h, r.best_move, vocab) for i, (h, r) in enumerate(eval_pos) if i not in gone]
    stats = {
        "train_games": len(train_games),
        "eval_games": len(eval_games),
        "train_positions": len(fen_train),
        "eval_positions": len(fen_eval),
        "skipped_positions": len(skipped) + len(dropped),
        "fen_train_tokens": sum(len(s) for s in fen_train),
        "pgn_train_tokens": sum(len(s) for s in pgn_train),
        "max_fen_len": max(len(s) for s in fen_train),
        "max_pgn_len": max(len(s) for s in pgn_train),
    }
    return ExperimentData(vocab, fen_train, pgn_train, fen_eval, pgn_eval, stats)


CONDITIONS = {
    "fen_causal": (FEN, CAUSAL),
    "fen_bidirectional": (FEN, BIDIRECTIONAL),
    "pgn_causal": (PGN, CAUSAL),
}


def run_condition(name: str, data: ExperimentData, cfg: ExperimentConfig) -> ConditionResult:
    representation, mode = CONDITIONS[name]
    start = time.time()
    model = build_model(cfg.model_config(len(data.vocab), mode), seed=cfg.seed)
    samples = data.fen_train if representation == FEN else data.pgn_train
    result = train(model, samples, cfg.train_config(), data.vocab)
    items = data.fen_eval if representation == FEN else data.pgn_eval
    report = evaluate(model, items, TEACHER_FORCED, data.vocab)
    ce = mean_ce(model, items, representation)
    out = ConditionResult(name, representation, mode, ce, report, time.time() - start, result.final_loss)
    log.info("%s: ce %.4f best %.3f (%.0fs)", name, ce, report.best_rate, out.seconds)
    return out


def run_experiment(cfg: ExperimentConfig, conditions: Sequence[str] = tuple(CONDITIONS)) -> tuple[ExperimentData, dict[str, ConditionResult]]:
    data = build_data(cfg)
    return data, {name: run_condition(name, data, cfg) for name in conditions}


def write_results(out_dir: str | Path, cfg: ExperimentConfig, data: ExperimentData, results: dict[str, ConditionResult]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "config": asdict(cfg),
        "data": data.stats,
        "results": [r.row() for r in results.values()],
    }
    (out / "fen_vs_pgn.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
