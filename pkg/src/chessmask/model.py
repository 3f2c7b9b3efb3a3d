"""A small decoder-style transformer with a switchable attention mask.

Conventions: ``logits[:, t]`` scores the token at ``t + 1``. ``loss_mask[t] = 1``
marks ``ids[t]`` as a target, so it is predicted from ``logits[:, t - 1]``.

In bidirectional mode every token of the conditioning prefix (everything before
the first target) sees the whole prefix; target tokens see the prefix plus the
earlier targets. Without a prefix length the mask is all ones.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

CAUSAL = "causal"
BIDIRECTIONAL = "bidirectional"
MODES = (CAUSAL, BIDIRECTIONAL)
CHECKPOINT_MAGIC = b"CHESSMASK-CKPT 1\n"


class ModelError(ValueError):
    pass


class NonFiniteError(ModelError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 128
    d_ff: int = 512
    max_seq_len: int = 640
    attention_mode: str = CAUSAL
    dropout: float = 0.0
    fused_attention: bool = True  # torch's scaled_dot_product_attention; False = explicit softmax

    def __post_init__(self):
        for name in ("vocab_size", "n_layers", "n_heads", "d_model", "d_ff", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ModelError("d_model must be divisible by n_heads")
        if self.attention_mode not in MODES:
            raise ModelError(f"attention_mode must be one of {MODES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError("dropout must lie in [0, 1)")


def attention_mask(
    seq_len: int,
    mode: str,
    pad_mask: torch.Tensor | None = None,
    prefix_len: torch.Tensor | None = None,
) -> torch.Tensor:
    """Boolean [B, T, T] mask, True where query row may attend to key column."""
    device = pad_mask.device if pad_mask is not None else None
    tri = torch.ones(seq_len, seq_len, dtype=torch.bool, device=device).tril()
    batch = pad_mask.shape[0] if pad_mask is not None else (prefix_len.shape[0] if prefix_len is not None else 1)
    if mode == CAUSAL:
        mask = tri.expand(batch, seq_len, seq_len)
    elif mode == BIDIRECTIONAL:
        if prefix_len is None:
            mask = torch.ones(batch, seq_len, seq_len, dtype=torch.bool, device=device)
        else:
            pos = torch.arange(seq_len, device=device)
            in_prefix = pos[None, :] < prefix_len[:, None]  # [B, T] key inside conditioning block
            # prefix queries reach only prefix keys: causal order never lets them see a target
            mask = tri[None] | in_prefix[:, None, :]
    else:
        raise ModelError(f"unknown attention mode {mode!r}")
    if pad_mask is not None:
        mask = mask & pad_mask.bool()[:, None, :]
    # a row with nothing to attend to (pad queries) keeps its diagonal so softmax stays finite
    return mask | torch.eye(seq_len, dtype=torch.bool, device=device)[None]


class SelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model)
        self.proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)
        self.fused = cfg.fused_attention

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=2)
        shape = (b, t, self.n_heads, d // self.n_heads)
        q, k, v = (z.view(shape).transpose(1, 2) for z in (q, k, v))
        if self.fused:
            p = self.drop.p if self.training else 0.0
            y = F.scaled_dot_product_attention(q, k, v, attn_mask=mask[:, None], dropout_p=p)
            return self.proj(y.transpose(1, 2).reshape(b, t, d))
        att = (q @ k.transpose(-2, -1)) / math.sqrt(d // self.n_heads)
        att = att.masked_fill(~mask[:, None], float("-inf"))
        att = self.drop(att.softmax(dim=-1))
        y = (att @ v).transpose(1, 2).reshape(b, t, d)
        return self.proj(y)


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = SelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.ff = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model),
            nn.Dropout(cfg.dropout),
        )

    def forward(self, x, mask):
        x = x + self.attn(self.ln1(x), mask)
        return x + self.ff(self.ln2(x))


class TinyTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_seq_len, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        self.apply(self._init)

    @staticmethod
    def _init(module):
        if isinstance(module, nn.Linear):
            nn.init.normal_(module.weight, std=0.02)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Embedding):
            nn.init.normal_(module.weight, std=0.02)

    def forward(
        self,
        ids: torch.Tensor,
        pad_mask: torch.Tensor | None = None,
        mode: str | None = None,
        prefix_len: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if ids.dim() == 1:
            ids = ids[None]
        b, t = ids.shape
        if t > self.cfg.max_seq_len:
            raise ModelError(f"sequence length {t} exceeds max_seq_len {self.cfg.max_seq_len}")
        if pad_mask is None:
            pad_mask = torch.ones_like(ids)
        mask = attention_mask(t, mode or self.cfg.attention_mode, pad_mask, prefix_len)
        pos = torch.arange(t, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)[None]
        for block in self.blocks:
            x = block(x, mask)
        logits = self.head(self.ln_f(x))
        if not torch.isfinite(logits).all():
            raise NonFiniteError("non-finite logits; parameters have diverged")
        return logits


def build_model(cfg: ModelConfig, seed: int = 0, dtype: torch.dtype = torch.float32) -> TinyTransformer:
    torch.manual_seed(seed)
    return TinyTransformer(cfg).to(dtype)


# ---------------------------------------------------------------------------
# losses and scoring


def masked_ce_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    w: torch.Tensor,
    reduction: str = "mean",
) -> torch.Tensor:
    """Sum of ``-log p(target)`` over positions with ``w = 1``.

    ``logits`` [B, T, V] is already aligned with ``targets`` [B, T]. The per-row
    sums are averaged over the batch (``"mean"``), added (``"sum"``) or
    returned as is (``"none"``).
    """
    if logits.dim() == 2:
        logits, targets, w = logits[None], targets[None], w[None]
    w = w.to(logits.dtype)
    if (w.sum(dim=1) == 0).any():
        raise ModelError("loss mask selects no tokens")
    nll = -logits.log_softmax(dim=-1).gather(-1, targets[..., None].long()).squeeze(-1)
    per_row = torch.where(w > 0, nll * w, torch.zeros_like(nll)).sum(dim=1)
    if reduction == "none":
        return per_row
    if reduction == "sum":
        return per_row.sum()
    return per_row.mean()


def _as_tensor(x, dtype=torch.long) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x), dtype=dtype)


def shifted(model: TinyTransformer, ids, pad_mask, loss_mask, prefix_len=None, mode=None):
    """Run the model and align logits with next-token targets.

    Returns ``(logits [B, T-1, V], targets [B, T-1], w [B, T-1])``.
    """
    ids, pad_mask, loss_mask = (_as_tensor(x) for x in (ids, pad_mask, loss_mask))
    if prefix_len is not None:
        prefix_len = _as_tensor(prefix_len)
    logits = model(ids, pad_mask, mode=mode, prefix_len=prefix_len)
    return logits[:, :-1], ids[:, 1:], loss_mask[:, 1:]


def sequence_loss(model, ids, pad_mask, loss_mask, prefix_len=None, mode=None, reduction="mean"):
    logits, targets, w = shifted(model, ids, pad_mask, loss_mask, prefix_len, mode)
    return masked_ce_loss(logits, targets, w, reduction)


@torch.no_grad()
def teacher_forced_predictions(model, ids, pad_mask, loss_mask, prefix_len=None) -> list[list[int]]:
    """Argmax at every target position, conditioning on the ground-truth prefix."""
    logits, _, w = shifted(model, ids, pad_mask, loss_mask, prefix_len)
    best = logits.argmax(dim=-1)
    return [best[i][w[i].bool()].tolist() for i in range(best.shape[0])]


def _pick(logits: torch.Tensor, temperature: float, generator: torch.Generator | None) -> torch.Tensor:
    if temperature == 0:
        return logits.argmax(dim=-1)
    probs = (logits.double() / temperature).softmax(dim=-1)
    return torch.multinomial(probs, 1, generator=generator).squeeze(-1)


@torch.no_grad()
def generate(
    model: TinyTransformer,
    prompt_ids: Sequence[int],
    temperature: float = 0.0,
    max_new_tokens: int = 8,
    stop_id: int | Sequence[int] | None = None,
    generator: torch.Generator | None = None,
) -> list[int]:
    """Autoregressive extension of one prompt. Temperature 0 is argmax decoding."""
    return generate_batch(model, [list(prompt_ids)], temperature, [max_new_tokens], stop_id, generator)[0]


@torch.no_grad()
def generate_batch(
    model: TinyTransformer,
    prompts: Sequence[Sequence[int]],
    temperature: float = 0.0,
    max_new_tokens: Sequence[int] | int = 8,
    stop_id: int | Sequence[int] | None = None,
    generator: torch.Generator | None = None,
) -> list[list[int]]:
    """Greedy or sampled decoding of several prompts at once.

    Prompts are right-padded; pad columns are excluded from attention, so each
    row sees exactly its own prefix. In bidirectional mode the prompt is the
    conditioning block and generated tokens extend it causally.
    """
    if temperature < 0:
        raise ModelError("temperature must be non-negative")
    if any(len(p) == 0 for p in prompts):
        raise ModelError("empty prompt")
    n = len(prompts)
    budgets = [max_new_tokens] * n if isinstance(max_new_tokens, int) else list(max_new_tokens)
    stops = set() if stop_id is None else ({stop_id} if isinstance(stop_id, int) else set(stop_id))
    lengths = [len(p) for p in prompts]
    if max(lengths) > model.cfg.max_seq_len:
        raise ModelError("prompt exceeds max_seq_len")
    total = min(model.cfg.max_seq_len, max(l + b for l, b in zip(lengths, budgets)))
    ids = torch.zeros(n, total, dtype=torch.long)
    pad = torch.zeros(n, total, dtype=torch.long)
    for i, p in enumerate(prompts):
        ids[i, : len(p)] = torch.as_tensor(list(p))
        pad[i, : len(p)] = 1
    prefix = torch.as_tensor(lengths)
    out: list[list[int]] = [[] for _ in range(n)]
    active = [b > 0 for b in budgets]
    cur = list(lengths)
    was_training = model.training
    model.eval()
    try:
        while any(active):
            width = max(c for c, a in zip(cur, active) if a)
            logits = model(ids[:, :width], pad[:, :width], prefix_len=prefix)
            rows = [i for i in range(n) if active[i]]
            picked = _pick(logits[rows, [cur[i] - 1 for i in rows]], temperature, generator)
            for i, tok in zip(rows, picked.tolist()):
                out[i].append(tok)
                if tok in stops or len(out[i]) >= budgets[i] or cur[i] >= total:
                    active[i] = False
                    continue
                ids[i, cur[i]] = tok
                pad[i, cur[i]] = 1
                cur[i] += 1
    finally:
        model.train(was_training)
    return [list(p) + o for p, o in zip(prompts, out)]


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, model: TinyTransformer, vocab_hash: str, step: int, extra: dict | None = None) -> None:
    """Header line (JSON) followed by a little-endian float32 payload."""
    state = model.state_dict()
    manifest = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    header = {
        "config": asdict(model.cfg),
        "vocab_hash": vocab_hash,
        "step": step,
        "manifest": manifest,
        **(extra or {}),
    }
    payload = b"".join(v.detach().cpu().to(torch.float32).numpy().astype("<f4").tobytes() for v in state.values())
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        fh.write(payload)


def load_checkpoint(path: str | Path) -> tuple[TinyTransformer, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ModelError(f"{path} is not a checkpoint")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n).decode("utf-8"))
        payload = fh.read()
    model = TinyTransformer(ModelConfig(**header["config"]))
    flat = np.frombuffer(payload, dtype="<f4")
    state, offset = {}, 0
    for entry in header["manifest"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        state[entry["name"]] = torch.from_numpy(flat[offset: offset + size].copy()).reshape(entry["shape"])
        offset += size
    if offset != flat.size:
        raise ModelError("checkpoint payload size does not match manifest")
    model.load_state_dict(state)
    return model, header
