"""Training loop, learning-rate schedule, gradient clipping and sample builders."""
from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, Sequence

import torch

from .board import IllegalMoveError, legal_moves, parse_fen, pgn_to_fen, render_movetext, serialize_fen
from .model import NonFiniteError, TinyTransformer, masked_ce_loss, save_checkpoint, shifted
from .prompts import PromptError, PromptTemplate, encode_fen_prompt, load_template
from .tokenizer import BOS, EOS, TokenSequence, Vocabulary, build_vocab, char_tokenize, pad_sequence

log = logging.getLogger(__name__)

# every character that can appear in a FEN, SAN list or PGN movetext
CHESS_ALPHABET = "abcdefgh0123456789 KQRBNPkqrbnp/-wx=+#O.,"


class TrainError(ValueError):
    pass


class NonFiniteGradient(NonFiniteError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    min_lr: float = 1e-4
    warmup_iters: int = 100
    lr_decay_iters: int = 5000
    max_iters: int = 5000
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.1
    grad_clip: float = 1.0
    clip_mode: str = "value"  # "value" clamps each component, "norm" rescales the global norm
    batch_size: int = 32
    grad_accum_steps: int = 1
    seed: int = 0
    checkpoint_every: int = 0  # 0 = only at the end (when a checkpoint path is given)
    log_every: int = 100

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.min_lr > 0):
            raise TrainError("learning rates must be positive")
        if self.min_lr > self.learning_rate:
            raise TrainError("min_lr must not exceed learning_rate")
        if self.warmup_iters < 1 or self.lr_decay_iters < 1:
            raise TrainError("warmup_iters and lr_decay_iters must be positive")
        if self.warmup_iters > self.lr_decay_iters:
            raise TrainError("warmup_iters must not exceed lr_decay_iters")
        if self.max_iters < 0:
            raise TrainError("max_iters must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise TrainError("betas must lie in (0, 1)")
        if not self.grad_clip > 0:
            raise TrainError("grad_clip must be positive")
        if self.clip_mode not in ("value", "norm"):
            raise TrainError(f"unknown clip_mode {self.clip_mode!r}")
        if self.batch_size < 1 or self.grad_accum_steps < 1:
            raise TrainError("batch_size and grad_accum_steps must be positive")

    @classmethod
    def paper(cls, **overrides) -> TrainConfig:
        """Fine-tuning hyperparameters of the 1.3B run, kept for reference."""
        base = dict(
            learning_rate=8e-5,
            min_lr=5e-6,
            warmup_iters=2000,
            lr_decay_iters=200_000,
            max_iters=200_000,
            beta1=0.9,
            beta2=0.95,
            grad_clip=1.0,
            batch_size=32,
            grad_accum_steps=1,
        )
        base.update(overrides)
        return cls(**base)


def save_train_config(cfg: TrainConfig, path: str | Path) -> None:
    lines = [f"{k} = {v}" for k, v in asdict(cfg).items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_train_config(path: str | Path) -> TrainConfig:
    """Read ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    values: dict = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or key not in types:
            raise TrainError(f"{path}:{n}: cannot parse {raw!r}")
        kind = types[key]
        try:
            values[key] = int(value) if kind == "int" else float(value) if kind == "float" else value
        except ValueError:
            raise TrainError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return TrainConfig(**values)


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warmup from 0, cosine decay to ``min_lr`` at ``lr_decay_iters``, flat after."""
    if step < 0:
        raise TrainError("step must be non-negative")
    if step < cfg.warmup_iters:
        return cfg.learning_rate * step / cfg.warmup_iters
    if step >= cfg.lr_decay_iters:
        return cfg.min_lr
    ratio = (step - cfg.warmup_iters) / (cfg.lr_decay_iters - cfg.warmup_iters)
    return cfg.min_lr + 0.5 * (1.0 + math.cos(math.pi * ratio)) * (cfg.learning_rate - cfg.min_lr)


def clip_gradients(grads: Sequence[torch.Tensor | None], limit: float, mode: str = "value", step: int | None = None):
    """Clip in place and return ``grads``. Non-finite gradients abort the run."""
    if not limit > 0:
        raise TrainError("clip limit must be positive")
    present = [g for g in grads if g is not None]
    for i, g in enumerate(present):
        if not torch.isfinite(g).all():
            bad = int((~torch.isfinite(g)).sum())
            raise NonFiniteGradient(f"step {step}: {bad} non-finite components in gradient tensor {i} {tuple(g.shape)}")
    if mode == "value":
        for g in present:
            g.clamp_(-limit, limit)
    elif mode == "norm":
        total = math.sqrt(sum(float((g.double() ** 2).sum()) for g in present))
        if total > limit:
            for g in present:
                g.mul_(limit / total)
    else:
        raise TrainError(f"unknown clip mode {mode!r}")
    return grads


def make_optimizer(params, cfg: TrainConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        params,
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )


# ---------------------------------------------------------------------------
# samples


def make_vocab(template_ids: Sequence[int] = (1,)) -> Vocabulary:
    """Character vocabulary covering the chess alphabet and the given templates."""
    texts = [load_template(i).text.replace("{FEN}", "").replace("{LEGAL_MOVES}", "").replace("{BEST_MOVE}", "") for i in template_ids]
    return build_vocab(texts + [CHESS_ALPHABET])


def make_pgn_sample(moves: Sequence[str], vocab: Vocabulary) -> TokenSequence:
    """Whole-game language-modelling sample: every token after the first is a target."""
    if not moves:
        raise TrainError("empty game")
    pgn_to_fen(moves)  # raises IllegalMoveError with the offending index
    ids = char_tokenize(BOS + render_movetext(moves) + EOS, vocab)
    n = len(ids)
    return TokenSequence(ids, [0] + [1] * (n - 1), [1] * n, prefix_len=1)


def make_pgn_move_sample(history: Sequence[str], move: str, vocab: Vocabulary) -> TokenSequence:
    """Movetext of ``history`` followed by ``move``, with the loss on that move's tokens only."""
    board = pgn_to_fen(history)
    if move not in {m.san for m in legal_moves(board)}:
        raise IllegalMoveError(move, index=len(history), fen=serialize_fen(board))
    ply = len(history)
    before = render_movetext(history)
    if ply % 2 == 0:
        before = (before + " " if before else "") + f"{ply // 2 + 1}. "
    else:
        before += " "
    prompt = char_tokenize(BOS + before, vocab)
    target = char_tokenize(move, vocab)
    ids = prompt + target
    mask = [0] * len(prompt) + [1] * len(target)
    return TokenSequence(ids, mask, [1] * len(ids), prefix_len=len(prompt))


def make_fen_sample(
    fen: str,
    legal: Sequence[str],
    best: str,
    vocab: Vocabulary,
    template: PromptTemplate | None = None,
) -> TokenSequence:
    """Rendered prompt with the loss only on the best-move tokens."""
    board = parse_fen(fen)
    if best not in {m.san for m in legal_moves(board)}:
        raise IllegalMoveError(best, fen=serialize_fen(board))
    return encode_fen_prompt(template or load_template(), fen, legal, best, vocab)


def fen_samples(records, vocab: Vocabulary, template: PromptTemplate | None = None) -> tuple[list[TokenSequence], list[int]]:
    """Samples for annotated positions, skipping those whose prompt exceeds the template budget.

    Returns the samples and the indices of the skipped records.
    """
    samples, skipped = [], []
    for i, rec in enumerate(records):
        try:
            samples.append(make_fen_sample(rec.fen, rec.legal_moves, rec.best_move, vocab, template))
        except PromptError as exc:
            log.debug("record %d skipped: %s", i, exc)
            skipped.append(i)
    if skipped:
        log.info("%d of %d positions exceed the prompt budget and were skipped", len(skipped), len(skipped) + len(samples))
    return samples, skipped


# ---------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    ids: torch.Tensor
    pad_mask: torch.Tensor
    loss_mask: torch.Tensor
    prefix_len: torch.Tensor

    def __len__(self) -> int:
        return self.ids.shape[0]


def collate(samples: Sequence[TokenSequence], pad_id: int = 0) -> Batch:
    """Right-pad to the longest sample of the batch."""
    width = max(len(s) for s in samples)
    padded = [pad_sequence(s, width, pad_id) for s in samples]
    return Batch(
        torch.tensor([s.ids for s in padded], dtype=torch.long),
        torch.tensor([s.attention_mask for s in padded], dtype=torch.long),
        torch.tensor([s.loss_mask for s in padded], dtype=torch.long),
        torch.tensor([s.prefix_len for s in padded], dtype=torch.long),
    )


def sample_stream(samples: Sequence[TokenSequence], seed: int) -> Iterator[TokenSequence]:
    """Endless stream of samples, reshuffled each epoch from a seeded RNG."""
    rng = random.Random(seed)
    order = list(range(len(samples)))
    while True:
        rng.shuffle(order)
        for i in order:
            yield samples[i]


def batch_loss(model: TinyTransformer, batch: Batch) -> torch.Tensor:
    logits, targets, w = shifted(model, batch.ids, batch.pad_mask, batch.loss_mask, batch.prefix_len)
    return masked_ce_loss(logits, targets, w)


def check_samples(samples: Sequence[TokenSequence], model: TinyTransformer, vocab: Vocabulary | None = None) -> None:
    cfg = model.cfg
    if vocab is not None and len(vocab) != cfg.vocab_size:
        raise TrainError(f"vocabulary has {len(vocab)} symbols, model expects {cfg.vocab_size}")
    for i, s in enumerate(samples):
        if len(s) > cfg.max_seq_len:
            raise TrainError(f"sample {i} has {len(s)} tokens, model max_seq_len is {cfg.max_seq_len}")
        if s.ids and (max(s.ids) >= cfg.vocab_size or min(s.ids) < 0):
            raise TrainError(f"sample {i} has token ids outside the model vocabulary")
        if not any(s.loss_mask[1:]):
            raise TrainError(f"sample {i} has no target tokens")


# ---------------------------------------------------------------------------
# loop


@dataclass
class TraceRow:
    step: int
    lr: float
    loss: float


@dataclass
class TrainResult:
    model: TinyTransformer
    trace: list[TraceRow] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.trace[-1].loss if self.trace else float("nan")


def write_trace(path: str | Path, trace: Sequence[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss"])
        for row in trace:
            writer.writerow([row.step, repr(row.lr), repr(row.loss)])


def train(
    model: TinyTransformer,
    samples: Sequence[TokenSequence],
    cfg: TrainConfig,
    vocab: Vocabulary | None = None,
    checkpoint_path: str | Path | None = None,
    trace_path: str | Path | None = None,
    pad_id: int = 0,
    extra: dict | None = None,
) -> TrainResult:
    """AdamW updates over ``grad_accum_steps`` micro-batches of ``batch_size`` each.

    The micro-batch losses are scaled by ``1 / grad_accum_steps`` so one update
    sees the mean per-sample loss over every sample it consumed.
    """
    if not samples:
        raise TrainError("empty dataset")
    check_samples(samples, model, vocab)
    torch.manual_seed(cfg.seed)
    stream = sample_stream(samples, cfg.seed)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = make_optimizer(params, cfg)
    vocab_hash = vocab.content_hash if vocab is not None else ""
    result = TrainResult(model)
    model.train()

    def checkpoint(step: int) -> None:
        if checkpoint_path is None:
            return
        path = Path(checkpoint_path)
        if cfg.checkpoint_every and step != cfg.max_iters:
            path = path.with_name(f"{path.stem}_step{step}{path.suffix}")
        save_checkpoint(path, model, vocab_hash, step, {"train_config": asdict(cfg), **(extra or {})})
        result.checkpoints.append(path)

    for step in range(cfg.max_iters):
        lr = lr_schedule(step, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        opt.zero_grad(set_to_none=True)
        total = 0.0
        for _ in range(cfg.grad_accum_steps):
            batch = collate([next(stream) for _ in range(cfg.batch_size)], pad_id)
            loss = batch_loss(model, batch) / cfg.grad_accum_steps
            if not torch.isfinite(loss):
                raise NonFiniteError(f"step {step}: non-finite loss {float(loss)}")
            loss.backward()
            total += loss.item()
        clip_gradients([p.grad for p in params], cfg.grad_clip, cfg.clip_mode, step)
        opt.step()
        result.trace.append(TraceRow(step, lr, total))
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d lr %.3g loss %.4f", step, lr, total)
        if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0 and step + 1 < cfg.max_iters:
            checkpoint(step + 1)
    model.eval()
    checkpoint(cfg.max_iters)
    if trace_path is not None:
        write_trace(trace_path, result.trace)
    return result
