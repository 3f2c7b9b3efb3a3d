"""Prompt templates for the FEN pathway and the best-move loss mask."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .tokenizer import TokenSequence, Vocabulary, char_tokenize, flatten_fen, token_length

SLOTS = ("FEN", "LEGAL_MOVES", "BEST_MOVE")
_SLOT_RE = re.compile(r"\{(" + "|".join(SLOTS) + r")\}")

MAX_LEGAL_MOVES = 60
MOVE_TOKENS = 5  # per listed move, and per promotion best move
FEN_TOKENS = 89  # 71 flattened placement symbols plus the widest tail " w KQkq e3 100 100"
MOVE_SEPARATOR = ", "
DEFAULT_TEMPLATE = 1


class PromptError(ValueError):
    pass


class SpanNotFoundError(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: int
    segments: tuple[tuple[str, str], ...]  # ("literal", text) or ("slot", name)
    fixed_length: int

    def __post_init__(self):
        slots = [v for k, v in self.segments if k == "slot"]
        if slots.count("BEST_MOVE") != 1:
            raise PromptError("template needs exactly one BEST_MOVE slot")
        tail = self.segments[[i for i, s in enumerate(self.segments) if s == ("slot", "BEST_MOVE")][0] + 1:]
        if any(k == "slot" for k, _ in tail):
            raise PromptError("BEST_MOVE must be the final slot")

    @classmethod
    def from_text(cls, template_id: int, text: str) -> PromptTemplate:
        segments: list[tuple[str, str]] = []
        pos = 0
        for m in _SLOT_RE.finditer(text):
            if m.start() > pos:
                segments.append(("literal", text[pos: m.start()]))
            segments.append(("slot", m.group(1)))
            pos = m.end()
        if pos < len(text):
            segments.append(("literal", text[pos:]))
        literal = sum(token_length(v) for k, v in segments if k == "literal")
        budget = FEN_TOKENS + MAX_LEGAL_MOVES * MOVE_TOKENS + (MAX_LEGAL_MOVES - 1) * len(MOVE_SEPARATOR) + MOVE_TOKENS
        return cls(template_id, tuple(segments), literal + budget)

    @property
    def text(self) -> str:
        return "".join(v if k == "literal" else "{" + v + "}" for k, v in self.segments)


def _template_text(template_id: int) -> str:
    return resources.files("chessmask").joinpath("templates", f"prompt_{template_id}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_template(template_id: int = DEFAULT_TEMPLATE) -> PromptTemplate:
    if template_id not in range(1, 7):
        raise PromptError(f"unknown template {template_id}")
    return PromptTemplate.from_text(template_id, _template_text(template_id))


def template_from_file(path: str | Path, template_id: int = 0) -> PromptTemplate:
    return PromptTemplate.from_text(template_id, Path(path).read_text(encoding="utf-8"))


def render_prompt(
    template: PromptTemplate,
    fen: str,
    legal_moves: Sequence[str],
    best_move: str | None = None,
) -> str:
    """Fill the template. Without ``best_move`` the text stops right after the cue."""
    if not legal_moves:
        raise PromptError("legal move list is empty")
    if best_move is not None and best_move not in legal_moves:
        raise PromptError(f"best move {best_move!r} is not in the legal move list")
    values = {"FEN": flatten_fen(fen), "LEGAL_MOVES": MOVE_SEPARATOR.join(legal_moves)}
    out = []
    for kind, value in template.segments:
        if kind == "literal":
            out.append(value)
        elif value == "BEST_MOVE":
            if best_move is None:
                break
            out.append(best_move)
        else:
            out.append(values[value])
    text = "".join(out)
    if token_length(text) > template.fixed_length:
        raise PromptError(f"prompt needs {token_length(text)} tokens, budget is {template.fixed_length}")
    return text


def build_loss_mask(n_tokens: int, span: tuple[int, int]) -> list[int]:
    start, end = span
    if not (0 <= start < end <= n_tokens):
        raise SpanNotFoundError(f"span {span} not inside {n_tokens} tokens")
    return [1 if start <= i < end else 0 for i in range(n_tokens)]


def best_move_span(ids: Sequence[int], prompt_ids: Sequence[int], move_ids: Sequence[int]) -> tuple[int, int]:
    """Token span of the best move: directly after the inference prompt."""
    start = len(prompt_ids)
    end = start + len(move_ids)
    if list(ids[:start]) != list(prompt_ids) or list(ids[start:end]) != list(move_ids):
        raise SpanNotFoundError("rendered tokens do not contain the best move after the cue")
    return start, end


def encode_fen_prompt(
    template: PromptTemplate,
    fen: str,
    legal_moves: Sequence[str],
    best_move: str,
    vocab: Vocabulary,
) -> TokenSequence:
    """Tokenized training sample with the loss mask on the best-move span."""
    full = char_tokenize(render_prompt(template, fen, legal_moves, best_move), vocab)
    prompt = char_tokenize(render_prompt(template, fen, legal_moves), vocab)
    span = best_move_span(full, prompt, char_tokenize(best_move, vocab))
    return TokenSequence(full, build_loss_mask(len(full), span), [1] * len(full), prefix_len=span[0])
