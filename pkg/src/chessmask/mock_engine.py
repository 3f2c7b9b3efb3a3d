"""Deterministic scripted chess engine, usable in-process or as a UCI program.

Run ``python -m chessmask.mock_engine`` to get a line-protocol engine. The move
choice depends only on (seed, skill, position), so datasets built with it are
reproducible regardless of call order.

Skill 20 plays the greedy rule: a mating move if one exists, otherwise the
capture of the most valuable piece (cheapest attacker first), otherwise the
first legal move in SAN order. Lower skills replace the greedy choice by a
uniformly random legal move with probability ``(20 - skill) / 20``.
"""
from __future__ import annotations

import argparse
import hashlib
import random
import sys

from .board import (
    PIECE_VALUES,
    BoardState,
    MoveRecord,
    apply_move,
    initial_board,
    legal_moves,
    parse_fen,
    parse_uci,
    serialize_fen,
)

MAX_SKILL = 20


def position_rng(seed: int, skill: int, fen: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}|{skill}|{fen}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


def _victim_value(board: BoardState, move: MoveRecord) -> int:
    target = board.placement[move.to_square]
    return PIECE_VALUES[target.upper()] if target else PIECE_VALUES["P"]  # en passant


def greedy_move(board: BoardState, moves: list[MoveRecord] | None = None) -> MoveRecord:
    moves = moves if moves is not None else legal_moves(board)
    if not moves:
        raise ValueError("no legal moves")
    for m in moves:
        if m.is_mate:
            return m
    captures = [m for m in moves if m.is_capture]
    if captures:
        return min(
            captures,
            key=lambda m: (-_victim_value(board, m), PIECE_VALUES[board.placement[m.from_square].upper()] or 10, m.san),
        )
    return moves[0]


def choose_move(board: BoardState, skill: int = MAX_SKILL, seed: int = 0, fen: str | None = None) -> MoveRecord:
    moves = legal_moves(board)
    if not moves:
        raise ValueError("no legal moves")
    rng = position_rng(seed, skill, fen or serialize_fen(board))
    if rng.random() < (MAX_SKILL - skill) / MAX_SKILL:
        return moves[rng.randrange(len(moves))]
    return greedy_move(board, moves)


class MockEngine:
    """The UCI side of the mock: consumes command lines, returns reply lines."""

    def __init__(self, seed: int = 0, reply: str | None = None, name: str = "MockFish"):
        self.seed = seed
        self.skill = MAX_SKILL
        self.reply = reply
        self.name = name
        self.board = initial_board()

    def handle(self, line: str) -> list[str]:
        parts = line.split()
        if not parts:
            return []
        cmd = parts[0]
        if cmd == "uci":
            return [
                f"id name {self.name}",
                "id author chessmask",
                f"option name Skill Level type spin default {MAX_SKILL} min 0 max {MAX_SKILL}",
                "uciok",
            ]
        if cmd == "isready":
            return ["readyok"]
        if cmd == "setoption":
            text = line.split("name", 1)[1] if "name" in line else ""
            name, _, value = text.partition(" value ")
            if name.strip().lower() == "skill level":
                self.skill = max(0, min(MAX_SKILL, int(value.strip())))
            return []
        if cmd == "ucinewgame":
            self.board = initial_board()
            return []
        if cmd == "position":
            self._position(parts[1:])
            return []
        if cmd == "go":
            if self.reply:
                return [f"bestmove {self.reply}"]
            if not legal_moves(self.board):
                return ["bestmove (none)"]
            return [f"bestmove {choose_move(self.board, self.skill, self.seed).uci()}"]
        return []

    def _position(self, args: list[str]) -> None:
        if args and args[0] == "startpos":
            board, rest = initial_board(), args[1:]
        elif args and args[0] == "fen":
            board, rest = parse_fen(" ".join(args[1:7])), args[7:]
        else:
            return
        if rest and rest[0] == "moves":
            for text in rest[1:]:
                board = apply_move(board, parse_uci(board, text))
        self.board = board


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="scripted UCI mock engine")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reply", help="always answer this long-algebraic move")
    parser.add_argument("--silent", action="store_true", help="read commands but never answer")
    args = parser.parse_args(argv)
    engine = MockEngine(seed=args.seed, reply=args.reply)
    for raw in sys.stdin:
        line = raw.strip()
        if line == "quit":
            break
        if args.silent:
            continue
        for out in engine.handle(line):
            sys.stdout.write(out + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
