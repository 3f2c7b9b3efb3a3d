"""Move judging, valid/legal/best rates, exposure bias, cross-entropy and histograms."""
from __future__ import annotations

import csv
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import torch

from .board import BoardState, ChessError, GameHistory, is_san_shaped, legal_moves, parse_fen, parse_san, pgn_to_fen, serialize_fen
from .model import TinyTransformer, generate_batch, sequence_loss, teacher_forced_predictions
from .prompts import PromptError, PromptTemplate, load_template, render_prompt
from .tokenizer import EOS, SPECIALS, TokenSequence, Vocabulary, char_tokenize, detokenize
from .train import collate, make_fen_sample, make_pgn_move_sample

log = logging.getLogger(__name__)

MALFORMED = "malformed"
VALID_SAN_ILLEGAL = "valid_san_illegal"
LEGAL_NOT_BEST = "legal_not_best"
BEST = "best"
CATEGORIES = (MALFORMED, VALID_SAN_ILLEGAL, LEGAL_NOT_BEST, BEST)

TEACHER_FORCED = "teacher_forced"
AUTOREGRESSIVE = "autoregressive"
FEN = "fen"
PGN = "pgn"

_CUT = re.compile(r"\s|" + re.escape(EOS))


class EvalError(ValueError):
    pass


def trim_output(text: str) -> str:
    """Generated move text up to the first whitespace or end-of-text marker."""
    return _CUT.split(text.lstrip(), 1)[0]


@dataclass(frozen=True)
class MoveJudgment:
    raw_output: str
    category: str

    @property
    def valid(self) -> bool:
        return self.category != MALFORMED

    @property
    def legal(self) -> bool:
        return self.category in (LEGAL_NOT_BEST, BEST)

    @property
    def best(self) -> bool:
        return self.category == BEST


def judge_move(output: str, board: BoardState, engine_best: str) -> MoveJudgment:
    """Valid means SAN-shaped on some board; legal is checked on ``board`` itself."""
    move = trim_output(output)
    if not is_san_shaped(move):
        return MoveJudgment(output, MALFORMED)
    try:
        record = parse_san(board, move)
    except ChessError:
        return MoveJudgment(output, VALID_SAN_ILLEGAL)
    try:
        best = parse_san(board, engine_best)
    except ChessError:
        raise EvalError(f"reference move {engine_best!r} is illegal in {serialize_fen(board)}") from None
    return MoveJudgment(output, BEST if record.move == best.move else LEGAL_NOT_BEST)


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class EvalItem:
    """One scored prediction: the tokenized sample, its board and the reference move."""

    sample: TokenSequence
    board: BoardState
    best: str
    representation: str = FEN


def fen_items(
    records: Sequence,
    vocab: Vocabulary,
    template: PromptTemplate | None = None,
    skipped: list[int] | None = None,
) -> list[EvalItem]:
    """From annotated positions (anything with fen, legal_moves, best_move).

    Positions whose prompt exceeds the template budget raise PromptError, or are
    left out and their indices appended to ``skipped`` when a list is given.
    """
    template = template or load_template()
    out = []
    for i, rec in enumerate(records):
        try:
            sample = make_fen_sample(rec.fen, rec.legal_moves, rec.best_move, vocab, template)
        except PromptError:
            if skipped is None:
                raise
            skipped.append(i)
            continue
        out.append(EvalItem(sample, parse_fen(rec.fen), rec.best_move, FEN))
    return out


def pgn_item(history: Sequence[str], best: str, vocab: Vocabulary) -> EvalItem:
    return EvalItem(make_pgn_move_sample(history, best, vocab), pgn_to_fen(history), best, PGN)


# ---------------------------------------------------------------------------
# reports


@dataclass
class EvalReport:
    n_samples: int
    valid_rate: float
    legal_rate: float
    best_rate: float
    mode: str
    judgments: list[MoveJudgment] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.best_rate <= self.legal_rate <= self.valid_rate <= 1.0):
            raise EvalError("rates must satisfy best <= legal <= valid <= 1")

    @classmethod
    def from_judgments(cls, judgments: Sequence[MoveJudgment], mode: str) -> EvalReport:
        n = len(judgments)
        if n == 0:
            raise EvalError("no judgments")
        return cls(
            n,
            sum(j.valid for j in judgments) / n,
            sum(j.legal for j in judgments) / n,
            sum(j.best for j in judgments) / n,
            mode,
            list(judgments),
        )

    def counts(self) -> dict[str, int]:
        c = Counter(j.category for j in self.judgments)
        return {k: c.get(k, 0) for k in CATEGORIES}

    def row(self) -> dict:
        return {
            "mode": self.mode,
            "n_samples": self.n_samples,
            "valid_rate": self.valid_rate,
            "legal_rate": self.legal_rate,
            "best_rate": self.best_rate,
        }

    def table(self) -> str:
        return (
            f"{self.mode:<15} n={self.n_samples:<6} valid {self.valid_rate:6.2%}  "
            f"legal {self.legal_rate:6.2%}  best {self.best_rate:6.2%}"
        )


def write_reports(path: str | Path, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(reports[0].row()))
        writer.writeheader()
        for r in reports:
            writer.writerow(r.row())


def _check(model: TinyTransformer, items: Sequence[EvalItem], vocab: Vocabulary | None) -> None:
    if not items:
        raise EvalError("empty evaluation set")
    if vocab is not None and len(vocab) != model.cfg.vocab_size:
        raise EvalError(f"vocabulary has {len(vocab)} symbols, model expects {model.cfg.vocab_size}")
    for item in items:
        if max(item.sample.ids) >= model.cfg.vocab_size:
            raise EvalError("sample ids fall outside the model vocabulary")


def _chunks(seq: Sequence, size: int):
    for i in range(0, len(seq), size):
        yield seq[i: i + size]


def stop_ids(vocab: Vocabulary) -> set[int]:
    """Tokens that end a generated move: end-of-text and anything containing whitespace."""
    return {vocab.eos_id} | {i for i, sym in enumerate(vocab.symbols) if any(c.isspace() for c in sym)}


def predictions(
    model: TinyTransformer,
    items: Sequence[EvalItem],
    mode: str,
    batch_size: int = 64,
    vocab: Vocabulary | None = None,
) -> list[list[int]]:
    """Predicted ids for each item.

    Teacher forcing reads the argmax over the reference span. Autoregressive
    decoding does not know where an item's move ends: it runs until a stop
    token or for as many tokens as the longest reference span in the dataset.
    """
    out: list[list[int]] = []
    model.eval()
    budget = max(s.target_span[1] - s.target_span[0] for s in (it.sample for it in items))
    stops = stop_ids(vocab) if vocab is not None else None
    for chunk in _chunks(items, batch_size):
        samples = [it.sample for it in chunk]
        if mode == TEACHER_FORCED:
            b = collate(samples)
            out.extend(teacher_forced_predictions(model, b.ids, b.pad_mask, b.loss_mask, b.prefix_len))
        elif mode == AUTOREGRESSIVE:
            prompts = [s.ids[: s.target_span[0]] for s in samples]
            gen = generate_batch(model, prompts, 0.0, budget, stops)
            out.extend(g[len(p):] for g, p in zip(gen, prompts))
        else:
            raise EvalError(f"unknown mode {mode!r}")
    return out


def evaluate(
    model: TinyTransformer,
    items: Sequence[EvalItem],
    mode: str,
    vocab: Vocabulary,
    batch_size: int = 64,
) -> EvalReport:
    _check(model, items, vocab)
    preds = predictions(model, items, mode, batch_size, vocab)
    judgments = [judge_move(detokenize(p, vocab), it.board, it.best) for p, it in zip(preds, items)]
    return EvalReport.from_judgments(judgments, mode)


@dataclass
class ExposureBias:
    teacher_forced: EvalReport
    autoregressive: EvalReport

    @property
    def deltas(self) -> dict[str, float]:
        tf, ar = self.teacher_forced, self.autoregressive
        return {
            "valid_rate": tf.valid_rate - ar.valid_rate,
            "legal_rate": tf.legal_rate - ar.legal_rate,
            "best_rate": tf.best_rate - ar.best_rate,
        }


def exposure_bias_delta(model: TinyTransformer, items: Sequence[EvalItem], vocab: Vocabulary, batch_size: int = 64) -> ExposureBias:
    return ExposureBias(
        evaluate(model, items, TEACHER_FORCED, vocab, batch_size),
        evaluate(model, items, AUTOREGRESSIVE, vocab, batch_size),
    )


@torch.no_grad()
def mean_ce(model: TinyTransformer, items: Sequence[EvalItem], representation: str, batch_size: int = 64) -> float:
    """Mean over samples of the summed token negative log-likelihood of the target move."""
    _check(model, items, None)
    if any(it.representation != representation for it in items):
        raise EvalError(f"dataset is not entirely {representation!r} samples")
    model.eval()
    total = 0.0
    for chunk in _chunks(items, batch_size):
        b = collate([it.sample for it in chunk])
        total += float(sequence_loss(model, b.ids, b.pad_mask, b.loss_mask, b.prefix_len, reduction="sum"))
    return total / len(items)


# ---------------------------------------------------------------------------
# chance rate and histogram


def chance_valid_rate(vocab: Vocabulary, length: int, n: int = 20000, seed: int = 0) -> float:
    """Fraction of uniform random token strings that read as SAN after trimming."""
    rng = random.Random(seed)
    ids = [i for i, s in enumerate(vocab.symbols) if s not in SPECIALS]
    hits = 0
    for _ in range(n):
        text = "".join(vocab.symbols[rng.choice(ids)] for _ in range(length))
        hits += is_san_shaped(trim_output(text))
    return hits / n


@dataclass
class Histogram:
    counts: Counter
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin", "count"])
            for k in sorted(self.counts):
                writer.writerow([k, self.counts[k]])


def legal_move_histogram(fens: Iterable[str]) -> Histogram:
    counts: Counter = Counter()
    skipped = []
    for i, fen in enumerate(fens):
        try:
            counts[len(legal_moves(parse_fen(fen)))] += 1
        except ChessError as exc:
            log.warning("position %d skipped: %s", i, exc)
            skipped.append((i, str(exc)))
    return Histogram(counts, skipped)


# ---------------------------------------------------------------------------
# the model as a player


class ModelPolicy:
    """Plays by prompting the model with the current FEN and its legal moves."""

    def __init__(
        self,
        model: TinyTransformer,
        vocab: Vocabulary,
        template: PromptTemplate | None = None,
        temperature: float = 0.0,
        seed: int = 0,
        max_new_tokens: int = 7,
        name: str = "model",
    ):
        self.model = model
        self.vocab = vocab
        self.template = template or load_template()
        self.temperature = temperature
        self.generator = torch.Generator().manual_seed(seed)
        self.max_new_tokens = max_new_tokens
        self.name = name

    def choose(self, history: GameHistory) -> str:
        board = history.board
        prompt = render_prompt(self.template, serialize_fen(board), [m.san for m in legal_moves(board)])
        ids = char_tokenize(prompt, self.vocab)
        out = generate_batch(self.model, [ids], self.temperature, self.max_new_tokens, self.vocab.eos_id, self.generator)[0]
        return trim_output(detokenize(out[len(ids):], self.vocab))
