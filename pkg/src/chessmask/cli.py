"""Command-line entry point: gen-data, train, eval and tournament."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import random
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from . import __version__
from .board import ChessError, initial_board, legal_moves, pgn_to_fen, serialize_fen
from .elo import (
    DEFAULT_INITIAL_RATING,
    DEFAULT_K,
    EngineUnavailable,
    MockEnginePolicy,
    RandomPolicy,
    RulesConfig,
    default_ladder,
    load_ladder,
    material_adjudicator,
    run_tournament,
)
from .engine import (
    DEFAULT_OPENING_BOOK,
    EngineError,
    EnginePolicy,
    SearchLimits,
    annotate_dataset,
    generate_games,
    handshake,
    load_opening_book,
    mock_engine_command,
    read_annotated,
    read_pgn_corpus,
    validate_annotated,
    write_annotated,
    write_pgn_corpus,
)
from .evaluation import (
    AUTOREGRESSIVE,
    FEN,
    PGN,
    TEACHER_FORCED,
    EvalError,
    ModelPolicy,
    evaluate,
    exposure_bias_delta,
    fen_items,
    pgn_item,
    write_reports,
)
from .model import ModelConfig, ModelError, build_model, load_checkpoint
from .prompts import PromptError
from .tokenizer import TokenizerError, Vocabulary
from .train import TrainConfig, TrainError, fen_samples, load_train_config, make_pgn_sample, make_vocab, save_train_config, train

log = logging.getLogger("chessmask")

POSITIONS_FILE = "positions.tsv"
GAMES_FILE = "games.pgn"
VOCAB_FILE = "vocab.txt"
MANIFEST_FILE = "manifest.json"


class CliError(RuntimeError):
    pass


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: int
    arguments: dict
    config_hashes: dict[str, str] = field(default_factory=dict)
    dataset_hashes: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    started: float = field(default_factory=time.time)
    finished: float | None = None
    version: str = __version__

    def finish(self, out_dir: Path, outputs: Sequence[Path]) -> Path:
        self.outputs = [str(p) for p in outputs]
        self.finished = time.time()
        path = out_dir / MANIFEST_FILE
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}") from None
    return out


def _manifest(args: argparse.Namespace) -> RunManifest:
    arguments = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    return RunManifest(args.command, args.seed, arguments)


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    torch.manual_seed(seed)


def _engine_command(args) -> list[str]:
    return [args.engine] if args.engine else mock_engine_command(args.seed)


# ---------------------------------------------------------------------------
# gen-data


def cmd_gen_data(args: argparse.Namespace) -> int:
    out = _out_dir(args.out)
    manifest = _manifest(args)
    limits = SearchLimits(movetime_ms=args.movetime_ms, depth=args.depth)
    book = load_opening_book(args.openings) if args.openings else [list(line) for line in DEFAULT_OPENING_BOOK]
    if args.openings:
        manifest.config_hashes["openings"] = file_hash(args.openings)
    rules = RulesConfig(max_plies=args.max_plies, adjudicator=material_adjudicator)
    try:
        with handshake(_engine_command(args), skill_level=args.skill) as white, handshake(
            _engine_command(args), skill_level=args.opponent_skill
        ) as black:
            games = generate_games(EnginePolicy(white, limits, "white"), EnginePolicy(black, limits, "black"), args.games, book, rules)
            fens = []
            for g in games:
                board = initial_board()
                for san in g.moves:
                    if legal_moves(board):
                        fens.append(serialize_fen(board))
                    board = pgn_to_fen([san], board)
            rng = random.Random(args.seed)
            rng.shuffle(fens)
            fens = list(dict.fromkeys(fens))[: args.positions]
            records = list(annotate_dataset(fens, white, limits))
    except OSError as exc:
        raise CliError(f"engine unreachable: {exc}") from None
    problems = validate_annotated(records)
    if problems:
        raise CliError("generated dataset failed validation: " + "; ".join(problems[:5]))
    paths = [out / POSITIONS_FILE, out / GAMES_FILE, out / VOCAB_FILE]
    write_annotated(paths[0], records)
    write_pgn_corpus(paths[1], games)
    make_vocab().save(paths[2])
    manifest.finish(out, paths)
    print(f"{len(records)} positions, {len(games)} games -> {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def _load_vocab(data_dir: Path) -> Vocabulary:
    path = data_dir / VOCAB_FILE
    return Vocabulary.load(path) if path.exists() else make_vocab()


def _data_dir(path: str) -> Path:
    d = Path(path)
    if not d.is_dir():
        raise CliError(f"dataset directory {path} does not exist")
    return d


def cmd_train(args: argparse.Namespace) -> int:
    data = _data_dir(args.data)
    out = _out_dir(args.out)
    manifest = _manifest(args)
    _seed_everything(args.seed)
    vocab = _load_vocab(data)
    if args.config:
        cfg = load_train_config(args.config)
        manifest.config_hashes["train_config"] = file_hash(args.config)
    else:
        cfg = TrainConfig()
    overrides = {k: v for k, v in (("max_iters", args.steps), ("batch_size", args.batch_size), ("learning_rate", args.lr)) if v is not None}
    overrides["seed"] = args.seed
    if args.steps is not None:
        overrides["lr_decay_iters"] = args.steps
        overrides["warmup_iters"] = min(cfg.warmup_iters, args.steps)
    cfg = TrainConfig(**{**asdict(cfg), **overrides})
    if args.representation == FEN:
        src = data / POSITIONS_FILE
        samples, skipped = fen_samples(read_annotated(src), vocab)
        if skipped:
            print(f"skipped {len(skipped)} positions over the prompt budget")
    else:
        src = data / GAMES_FILE
        samples = [make_pgn_sample(g, vocab) for g in read_pgn_corpus(src)]
    manifest.dataset_hashes[src.name] = file_hash(src)
    model_cfg = ModelConfig(len(vocab), args.layers, args.heads, args.d_model, args.d_ff, args.max_seq_len, args.mask)
    model = build_model(model_cfg, seed=args.seed)
    paths = [out / "model.ckpt", out / "loss.csv", out / "train_config.txt"]
    save_train_config(cfg, paths[2])
    result = train(model, samples, cfg, vocab, paths[0], paths[1], extra={"representation": args.representation})
    manifest.finish(out, paths)
    print(f"trained {cfg.max_iters} steps, final loss {result.final_loss:.4f} -> {paths[0]}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _eval_items(data: Path, representation: str, vocab: Vocabulary):
    if representation == FEN:
        src = data / POSITIONS_FILE
        skipped: list[int] = []
        items = fen_items(read_annotated(src), vocab, skipped=skipped)
    else:
        # every ply of the corpus, with the move actually played as the reference
        src = data / GAMES_FILE
        items = [pgn_item(g[:i], g[i], vocab) for g in read_pgn_corpus(src) for i in range(len(g))]
    return src, items


def cmd_eval(args: argparse.Namespace) -> int:
    data = _data_dir(args.data)
    out = _out_dir(args.out)
    manifest = _manifest(args)
    model, header = load_checkpoint(args.checkpoint)
    vocab = _load_vocab(data)
    if header.get("vocab_hash") and header["vocab_hash"] != vocab.content_hash:
        raise CliError("vocabulary hash of the dataset does not match the checkpoint")
    representation = args.representation or header.get("representation", FEN)
    src, items = _eval_items(data, representation, vocab)
    if args.limit:
        items = items[: args.limit]
    manifest.dataset_hashes[src.name] = file_hash(src)
    manifest.config_hashes["checkpoint"] = file_hash(args.checkpoint)
    paths = [out / "report.csv"]
    if args.mode == "paired":
        bias = exposure_bias_delta(model, items, vocab, args.batch_size)
        reports = [bias.teacher_forced, bias.autoregressive]
        paths.append(out / "deltas.json")
        paths[1].write_text(json.dumps(bias.deltas, indent=2, sort_keys=True) + "\n")
    else:
        reports = [evaluate(model, items, args.mode, vocab, args.batch_size)]
    write_reports(paths[0], reports)
    manifest.finish(out, paths)
    for r in reports:
        print(r.table())
    return 0


# ---------------------------------------------------------------------------
# tournament


def _policy(args, vocab: Vocabulary | None):
    if args.checkpoint:
        model, header = load_checkpoint(args.checkpoint)
        vocab = vocab or make_vocab()
        if header.get("vocab_hash") and header["vocab_hash"] != vocab.content_hash:
            raise CliError("vocabulary hash does not match the checkpoint")
        return ModelPolicy(model, vocab, temperature=args.temperature, seed=args.seed, name=Path(args.checkpoint).stem)
    kind, _, value = args.policy.partition(":")
    if kind == "mock":
        return MockEnginePolicy(int(value or 20), args.seed)
    if kind == "random":
        return RandomPolicy(args.seed)
    raise CliError(f"no playable policy: {args.policy!r}")


def cmd_tournament(args: argparse.Namespace) -> int:
    out = _out_dir(args.out)
    manifest = _manifest(args)
    _seed_everything(args.seed)
    vocab = Vocabulary.load(args.vocab) if args.vocab else None
    policy = _policy(args, vocab)
    ladder = load_ladder(args.ladder) if args.ladder else default_ladder()
    if args.ladder:
        manifest.config_hashes["ladder"] = file_hash(args.ladder)
    if args.checkpoint:
        manifest.config_hashes["checkpoint"] = file_hash(args.checkpoint)
    limits = SearchLimits(movetime_ms=args.movetime_ms)
    handles = []

    def opponent(entry):
        if args.engine is None:
            # the mock's 0..20 skill scale stretched over the ladder levels
            skill = round(entry.level * 20 / max(1, len(ladder) - 1))
            return MockEnginePolicy(skill, args.seed + entry.level, name=f"mock-level{entry.level}")
        try:
            h = handshake([args.engine], skill_level=entry.level)
        except (OSError, EngineError) as exc:
            raise EngineUnavailable(str(exc)) from None
        handles.append(h)
        return EnginePolicy(h, limits, f"engine-level{entry.level}")

    rules = RulesConfig(max_plies=args.max_plies)
    try:
        result = run_tournament(
            policy,
            ladder,
            args.games_per_level,
            opponent,
            white_only=args.white_only,
            rules=rules,
            initial_rating=args.initial_rating,
            k=args.k,
            update=args.update,
        )
    finally:
        for h in handles:
            h.close()
    paths = list(result.write(out).values())
    manifest.finish(out, paths)
    print(result.table())
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chessmask", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        return sp

    g = command("gen-data", cmd_gen_data, "play engine games and annotate positions")
    g.add_argument("--engine", help="UCI engine binary (default: the bundled mock engine)")
    g.add_argument("--games", type=int, default=20)
    g.add_argument("--positions", type=int, default=100)
    g.add_argument("--skill", type=int, default=20, help="skill level of the annotating engine")
    g.add_argument("--opponent-skill", type=int, default=5)
    g.add_argument("--movetime-ms", type=int, default=50)
    g.add_argument("--depth", type=int)
    g.add_argument("--max-plies", type=int, default=80)
    g.add_argument("--openings", help="opening book file, one line per opening")

    t = command("train", cmd_train, "train a model on a generated dataset")
    t.add_argument("--data", required=True, help="directory written by gen-data")
    t.add_argument("--representation", choices=(FEN, PGN), default=FEN)
    t.add_argument("--mask", choices=("causal", "bidirectional"), default="causal")
    t.add_argument("--config", help="training config file (key = value)")
    t.add_argument("--steps", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--heads", type=int, default=4)
    t.add_argument("--d-model", type=int, default=64)
    t.add_argument("--d-ff", type=int, default=256)
    t.add_argument("--max-seq-len", type=int, default=640)

    e = command("eval", cmd_eval, "valid/legal/best rates of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--mode", choices=(TEACHER_FORCED, AUTOREGRESSIVE, "paired"), default=TEACHER_FORCED)
    e.add_argument("--representation", choices=(FEN, PGN))
    e.add_argument("--batch-size", type=int, default=64)
    e.add_argument("--limit", type=int, help="evaluate only the first N samples")

    r = command("tournament", cmd_tournament, "rate a policy against an engine ladder")
    who = r.add_mutually_exclusive_group()
    who.add_argument("--checkpoint")
    who.add_argument("--policy", default="mock:20", help="mock:SKILL or random")
    r.add_argument("--vocab", help="vocabulary file for a checkpoint policy")
    r.add_argument("--engine", help="UCI engine binary for the ladder (default: mock opponents)")
    r.add_argument("--ladder", help="CSV of level,rating")
    r.add_argument("--games-per-level", type=int, default=4)
    r.add_argument("--white-only", action="store_true")
    r.add_argument("--max-plies", type=int, default=200)
    r.add_argument("--movetime-ms", type=int, default=50)
    r.add_argument("--temperature", type=float, default=0.0)
    r.add_argument("--k", type=float, default=DEFAULT_K)
    r.add_argument("--initial-rating", type=float, default=DEFAULT_INITIAL_RATING)
    r.add_argument("--update", choices=("batch", "game"), default="batch")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, EngineError, ChessError, TokenizerError, PromptError, ModelError, TrainError, EvalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
