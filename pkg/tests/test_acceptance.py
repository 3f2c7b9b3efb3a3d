"""Acceptance suite: one pass/fail line per criterion, at the stated tolerances.

Criteria 6 and 7 train three toy models and take a while (see README).
"""
import math
import random
import time

import pytest
import torch

import naive_perft
from chessmask.board import START_FEN, initial_board, legal_moves, parse_fen, perft, random_game, serialize_fen
from chessmask.elo import (
    BLACK_WIN,
    EloLedger,
    MatchResult,
    MockEnginePolicy,
    RatedPolicy,
    ResignPolicy,
    RulesConfig,
    ScriptedPolicy,
    StrengthAdjudicator,
    default_ladder,
    elo_update,
    expected_score,
    play_game,
    run_tournament,
)
from chessmask.evaluation import exposure_bias_delta, fen_items
from chessmask.experiment import ExperimentConfig, run_experiment
from chessmask.model import BIDIRECTIONAL, CAUSAL, ModelConfig, build_model, masked_ce_loss, sequence_loss
from chessmask.tokenizer import flatten_fen, unflatten_fen
from chessmask.train import TrainConfig, clip_gradients, lr_schedule, make_optimizer, make_vocab
from test_evaluation import MOVE_VOCAB, LookupModel, annotated, memorize, single_token_items


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {n}: {detail}"

    return emit


def test_criterion_01_perft_oracle(verdict):
    start = time.time()
    ours = [perft(initial_board(), d) for d in (1, 2, 3)]
    oracle = [naive_perft.perft(naive_perft.load(START_FEN), d) for d in (1, 2, 3)]
    elapsed = time.time() - start
    ok = ours == oracle and oracle[:2] == [20, 400] and elapsed < 60
    verdict(1, ok, f"perft 1-3 {ours} vs oracle {oracle}, {elapsed:.1f}s")


def test_criterion_02_round_trips(verdict):
    rng = random.Random(2024)
    seen, failures = set(), 0
    while len(seen) < 10_000:
        for board in random_game(rng, rng.randrange(1, 120))[1:]:
            fen = serialize_fen(board)
            if fen in seen:
                continue
            seen.add(fen)
            back = parse_fen(fen)
            flat = flatten_fen(fen)
            if back != board or serialize_fen(back) != fen or unflatten_fen(flat) != fen or flatten_fen(unflatten_fen(flat)) != flat:
                failures += 1
    verdict(2, failures == 0, f"{len(seen)} distinct positions, {failures} round-trip failures")


def test_criterion_03_masking(verdict):
    torch.use_deterministic_algorithms(True)
    vocab, length = 40, 48
    cfg = dict(n_layers=2, n_heads=4, d_model=32, d_ff=64, max_seq_len=length)
    causal = build_model(ModelConfig(vocab, attention_mode=CAUSAL, **cfg), seed=0)
    bidir = build_model(ModelConfig(vocab, attention_mode=BIDIRECTIONAL, **cfg), seed=0)
    g = torch.Generator().manual_seed(3)
    identical = changed = 0
    with torch.no_grad():
        for _ in range(100):
            ids = torch.randint(0, vocab, (1, length), generator=g)
            t = int(torch.randint(1, length, (1,), generator=g))
            other = ids.clone()
            other[0, t] = (ids[0, t] + int(torch.randint(1, vocab, (1,), generator=g))) % vocab
            identical += torch.equal(causal(ids)[:, :t], causal(other)[:, :t])
            changed += not torch.equal(bidir(ids)[:, :t], bidir(other)[:, :t])
    verdict(3, identical == 100 and changed >= 95, f"causal prefixes identical in {identical}/100, bidirectional changed in {changed}/100")


def test_criterion_04_loss_mask_and_gradients(verdict):
    g = torch.Generator().manual_seed(0)
    logits = torch.randn(3, 12, 30, generator=g, dtype=torch.float64, requires_grad=True)
    w = torch.zeros(3, 12, dtype=torch.long)
    w[0, 4:7] = w[1, 9:11] = w[2, 2] = 1
    masked_ce_loss(logits, torch.randint(0, 30, (3, 12), generator=g), w).backward()
    off_zero = bool((logits.grad[w == 0] == 0).all())

    model = build_model(ModelConfig(30, n_layers=2, n_heads=2, d_model=16, d_ff=32, max_seq_len=16), seed=1, dtype=torch.float64)
    ids = torch.randint(0, 30, (2, 12), generator=g)
    pad = torch.ones_like(ids)
    w = torch.zeros_like(ids)
    w[:, 7:10] = 1
    model.zero_grad()
    sequence_loss(model, ids, pad, w).backward()
    worst, checked, h = 0.0, 0, 1e-4
    pick = torch.Generator().manual_seed(2)
    for p in model.parameters():
        for flat in torch.randperm(p.numel(), generator=pick)[: max(2, p.numel() // 50)].tolist():
            idx = torch.unravel_index(torch.tensor(flat), p.shape)
            analytic = p.grad[idx].item()
            with torch.no_grad():
                orig = p[idx].item()
                f = {}
                for k in (-2, -1, 1, 2):
                    p[idx] = orig + k * h
                    f[k] = sequence_loss(model, ids, pad, w).item()
                p[idx] = orig
            # five-point central difference: O(h^4) truncation, small rounding error at h = 1e-4
            numeric = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h)
            if abs(numeric) > 1e-7:
                worst = max(worst, abs(analytic - numeric) / abs(numeric))
                checked += 1
    ok = off_zero and worst <= 1e-4 and checked > 20
    verdict(4, ok, f"off-span logit gradient exactly zero: {off_zero}; worst FD relative error {worst:.2e} over {checked} parameters")


def test_criterion_05_schedule_and_adam(verdict):
    cfg = TrainConfig.paper()
    at_warmup, at_decay = lr_schedule(2000, cfg), lr_schedule(200_000, cfg)

    a, x0 = [1.0, 4.0, 0.25], [1.0, -2.0, 3.0]
    opt_cfg = TrainConfig(learning_rate=0.1, min_lr=0.1, weight_decay=0.1)
    x = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
    opt = make_optimizer([x], opt_cfg)
    for _ in range(5):
        opt.zero_grad()
        (0.5 * torch.tensor(a, dtype=torch.float64) * x * x).sum().backward()
        clip_gradients([x.grad], math.inf)
        opt.step()
    ref, m, v = list(x0), [0.0] * 3, [0.0] * 3
    b1, b2, lr, wd, eps = opt_cfg.beta1, opt_cfg.beta2, opt_cfg.learning_rate, opt_cfg.weight_decay, opt_cfg.eps
    for t in range(1, 6):
        for i in range(3):
            grad = a[i] * ref[i]
            ref[i] *= 1 - lr * wd
            m[i] = b1 * m[i] + (1 - b1) * grad
            v[i] = b2 * v[i] + (1 - b2) * grad * grad
            ref[i] -= lr * (m[i] / (1 - b1 ** t)) / (math.sqrt(v[i] / (1 - b2 ** t)) + eps)
    err = max(abs(p - q) for p, q in zip(x.tolist(), ref))
    ok = at_warmup == 8e-5 and at_decay == 5e-6 and err < 1e-10
    verdict(5, ok, f"lr(2000)={at_warmup:g}, lr(200000)={at_decay:g}, Adam closed-form error {err:.1e}")


@pytest.fixture(scope="module")
def experiment():
    start = time.time()
    cfg = ExperimentConfig()
    data, results = run_experiment(cfg)
    return cfg, data, results, time.time() - start


def test_criterion_06_fen_beats_pgn(experiment, verdict):
    cfg, data, results, seconds = experiment
    fen, pgn = results["fen_causal"], results["pgn_causal"]
    n = fen.report.n_samples
    gap = fen.report.best_rate - pgn.report.best_rate
    ok = fen.mean_ce < pgn.mean_ce and gap >= 0.03 and n >= 2000 and pgn.report.n_samples == n and seconds <= 7200
    verdict(
        6,
        ok,
        f"CE fen {fen.mean_ce:.3f} vs pgn {pgn.mean_ce:.3f}; best fen {fen.report.best_rate:.1%} vs pgn "
        f"{pgn.report.best_rate:.1%} (gap {gap * 100:.1f} points) over {n} positions, {seconds / 60:.0f} min",
    )


def test_criterion_07_condition_ordering(experiment, verdict):
    cfg, data, results, seconds = experiment
    bi, fc, pc = (results[k].report.best_rate for k in ("fen_bidirectional", "fen_causal", "pgn_causal"))
    ok = bi >= fc > pc and fc - pc >= 0.03 and results["fen_causal"].report.n_samples >= 2000
    verdict(7, ok, f"best-move rate fen+bidirectional {bi:.1%}, fen+causal {fc:.1%}, pgn+causal {pc:.1%}")


def test_criterion_08_elo(verdict):
    hand = [
        abs(expected_score(1500, 1500) - 0.5),
        abs(expected_score(1900, 1500) - 10 / 11),
        abs(elo_update(EloLedger(1900, 16), MatchResult(1500, 11, 10, 0, 1)) - 1900),
        abs(elo_update(EloLedger(1500, 16), MatchResult(1500, 1, 1, 0, 0)) - 1508),
    ]
    rules = RulesConfig(max_plies=0, adjudicator=StrengthAdjudicator(seed=0))
    result = run_tournament(RatedPolicy(2203, seed=0), default_ladder(), 200, lambda e: RatedPolicy(e.rating, e.level + 1), rules=rules)
    rating = result.ledger.rating
    ok = max(hand) <= 1e-9 and abs(rating - 2203) <= 100
    verdict(8, ok, f"hand values within {max(hand):.1e}; level-5 stand-in rated {rating:.1f} vs 2203 (200 games/level, scripted-strength mocks)")


def test_criterion_09_forfeit_threshold(verdict):
    six = play_game(ScriptedPolicy(["Ke2"] * 6, "six", fallback=ResignPolicy()), MockEnginePolicy(20))
    five = play_game(ScriptedPolicy(["Ke2"] * 5 + ["e4"], "five", fallback=ResignPolicy()), MockEnginePolicy(20))
    ok = six.termination == "forfeit" and six.result == BLACK_WIN and five.termination != "forfeit" and five.moves[:1] == ["e4"]
    verdict(9, ok, f"6 illegal: {six.termination} ({six.reason}); 5 illegal then legal: first move {five.moves[:1]}, ended by {five.reason}")


def test_criterion_10_exposure_bias(verdict):
    v = make_vocab()
    items = fen_items(annotated(8, seed=3), v)
    overrides = {tuple(it.sample.ids[: it.sample.target_span[1]]): v.index["4"] for it in items}
    multi = exposure_bias_delta(LookupModel(len(v), memorize([it.sample for it in items], overrides)), items, v)
    single_items = single_token_items(300)
    model = build_model(ModelConfig(len(MOVE_VOCAB), n_layers=2, n_heads=2, d_model=16, d_ff=32, max_seq_len=16), seed=0)
    single = exposure_bias_delta(model, single_items, MOVE_VOCAB)
    ok = multi.teacher_forced.best_rate > multi.autoregressive.best_rate and single.deltas["best_rate"] == 0.0
    verdict(
        10,
        ok,
        f"multi-token fixture best TF {multi.teacher_forced.best_rate:.0%} vs AR {multi.autoregressive.best_rate:.0%}; "
        f"single-token delta {single.deltas['best_rate']!r}",
    )
