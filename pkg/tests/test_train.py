import math
import random

import pytest
import torch
from hypothesis import given, strategies as st

from chessmask.board import IllegalMoveError, initial_board, legal_moves, parse_fen, pgn_to_fen, serialize_fen
from chessmask.model import CAUSAL, ModelConfig, build_model, load_checkpoint, masked_ce_loss, shifted
from chessmask.train import (
    NonFiniteGradient,
    TrainConfig,
    TrainError,
    clip_gradients,
    collate,
    load_train_config,
    lr_schedule,
    make_fen_sample,
    make_optimizer,
    make_pgn_move_sample,
    make_pgn_sample,
    make_vocab,
    save_train_config,
    train,
)
from chessmask.prompts import PromptTemplate
from chessmask.tokenizer import detokenize
from conftest import games

torch.use_deterministic_algorithms(True)

VOCAB = make_vocab()
RUY = ["e4", "e5", "Nf3", "Nc6", "Bb5", "a6"]


# -- schedule --------------------------------------------------------------------------


def test_paper_profile_schedule_points():
    cfg = TrainConfig.paper()
    assert lr_schedule(cfg.warmup_iters, cfg) == 8e-5
    assert lr_schedule(cfg.lr_decay_iters, cfg) == 5e-6
    assert lr_schedule(cfg.warmup_iters // 2, cfg) == pytest.approx(4e-5, rel=1e-15)
    assert lr_schedule(0, cfg) == 0.0
    assert lr_schedule(10 ** 7, cfg) == 5e-6


@given(st.floats(1e-5, 1e-2), st.floats(0.01, 1.0), st.integers(1, 500), st.integers(0, 5000))
def test_schedule_continuous_and_bounded(lr, frac, warmup, extra):
    cfg = TrainConfig(learning_rate=lr, min_lr=lr * frac, warmup_iters=warmup, lr_decay_iters=warmup + extra + 1)
    for s in (cfg.warmup_iters, cfg.lr_decay_iters):
        # the ramp and the cosine meet; so do the cosine and the floor
        left = cfg.learning_rate * s / cfg.warmup_iters if s == cfg.warmup_iters else cfg.min_lr
        assert abs(lr_schedule(s, cfg) - left) < 1e-12
    for s in range(0, cfg.lr_decay_iters + 5, max(1, cfg.lr_decay_iters // 17)):
        assert 0 <= lr_schedule(s, cfg) <= cfg.learning_rate


def test_schedule_is_monotone_after_warmup():
    cfg = TrainConfig(warmup_iters=10, lr_decay_iters=100)
    values = [lr_schedule(s, cfg) for s in range(10, 120)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_config_validation():
    with pytest.raises(TrainError):
        TrainConfig(learning_rate=1e-4, min_lr=1e-3)
    with pytest.raises(TrainError):
        TrainConfig(warmup_iters=10, lr_decay_iters=5)
    with pytest.raises(TrainError):
        TrainConfig(beta2=1.0)
    with pytest.raises(TrainError):
        lr_schedule(-1, TrainConfig())


def test_config_file_round_trip(tmp_path):
    cfg = TrainConfig(learning_rate=3e-4, batch_size=7, clip_mode="norm", seed=11)
    save_train_config(cfg, tmp_path / "c.cfg")
    assert load_train_config(tmp_path / "c.cfg") == cfg
    (tmp_path / "bad.cfg").write_text("learning_rate = fast\n")
    with pytest.raises(TrainError):
        load_train_config(tmp_path / "bad.cfg")
    (tmp_path / "unknown.cfg").write_text("# comment\nflux = 3\n")
    with pytest.raises(TrainError):
        load_train_config(tmp_path / "unknown.cfg")


# -- clipping and the update --------------------------------------------------------------


def test_clip_values():
    g = torch.tensor([2.5, -3.0, 0.5, -0.25, 1.0])
    clip_gradients([g], 1.0)
    assert g.tolist() == [1.0, -1.0, 0.5, -0.25, 1.0]
    h = torch.tensor([0.1, -0.2])
    clip_gradients([h, None], 1.0)
    assert h.tolist() == pytest.approx([0.1, -0.2])


def test_clip_matches_scalar_clamp():
    rng = random.Random(0)
    values = [rng.uniform(-4, 4) for _ in range(200)]
    g = torch.tensor(values, dtype=torch.float64)
    clip_gradients([g], 1.5)
    assert g.tolist() == [min(1.5, max(-1.5, v)) for v in values]


def test_clip_norm_mode():
    g = torch.tensor([3.0, 4.0], dtype=torch.float64)
    clip_gradients([g], 1.0, mode="norm")
    assert g.tolist() == pytest.approx([0.6, 0.8])


def test_clip_non_finite_aborts():
    with pytest.raises(NonFiniteGradient, match="step 7"):
        clip_gradients([torch.tensor([1.0, float("nan")])], 1.0, step=7)


def test_adam_matches_closed_form():
    """Three AdamW steps on f(x) = 0.5 * sum(a * x^2), recomputed with plain floats."""
    a = [1.0, 4.0, 0.25]
    x0 = [1.0, -2.0, 3.0]
    cfg = TrainConfig(learning_rate=0.1, min_lr=0.1, beta1=0.9, beta2=0.95, eps=1e-8, weight_decay=0.1)
    x = torch.tensor(x0, dtype=torch.float64, requires_grad=True)
    opt = make_optimizer([x], cfg)
    coef = torch.tensor(a, dtype=torch.float64)
    for _ in range(3):
        opt.zero_grad()
        (0.5 * coef * x * x).sum().backward()
        clip_gradients([x.grad], math.inf)
        opt.step()
    ref = list(x0)
    m = [0.0] * 3
    v = [0.0] * 3
    for t in range(1, 4):
        for i in range(3):
            g = a[i] * ref[i]
            ref[i] *= 1 - cfg.learning_rate * cfg.weight_decay
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g
            mhat = m[i] / (1 - cfg.beta1 ** t)
            vhat = v[i] / (1 - cfg.beta2 ** t)
            ref[i] -= cfg.learning_rate * mhat / (math.sqrt(vhat) + cfg.eps)
    for got, want in zip(x.tolist(), ref):
        assert abs(got - want) < 1e-10


# -- samples -------------------------------------------------------------------------------


def test_pgn_sample_masks_everything_after_first():
    s = make_pgn_sample(["e4", "e5"], VOCAB)
    assert detokenize(s.ids, VOCAB) == "<|begin_of_text|>1. e4 e5<|end_of_text|>"
    assert s.loss_mask == [0] + [1] * (len(s) - 1)


def test_pgn_sample_rejects():
    with pytest.raises(TrainError):
        make_pgn_sample([], VOCAB)
    with pytest.raises(IllegalMoveError):
        make_pgn_sample(["e4", "e4"], VOCAB)


def test_pgn_uniform_ce():
    sans = []
    board = initial_board()
    rng = random.Random(3)
    while len(sans) < 40:
        moves = legal_moves(board)
        m = moves[rng.randrange(len(moves))]
        sans.append(m.san)
        board = pgn_to_fen(sans)
    s = make_pgn_sample(sans, VOCAB)
    batch = collate([s])
    logits = torch.zeros(1, len(s) - 1, len(VOCAB), dtype=torch.float64)
    loss = masked_ce_loss(logits, batch.ids[:, 1:], batch.loss_mask[:, 1:])
    assert loss.item() == pytest.approx((len(s) - 1) * math.log(len(VOCAB)), rel=1e-12)


def test_pgn_move_sample():
    s = make_pgn_move_sample(RUY[:4], "Bb5", VOCAB)
    a, b = s.target_span
    assert detokenize(s.ids[:a], VOCAB) == "<|begin_of_text|>1. e4 e5 2. Nf3 Nc6 3. "
    assert detokenize(s.ids[a:b], VOCAB) == "Bb5"
    s = make_pgn_move_sample(RUY[:5], "a6", VOCAB)
    assert detokenize(s.ids[: s.target_span[0]], VOCAB).endswith("3. Bb5 ")
    with pytest.raises(IllegalMoveError):
        make_pgn_move_sample(RUY[:4], "Bb4", VOCAB)


def test_fen_sample_span():
    board = pgn_to_fen(RUY)
    legal = [m.san for m in legal_moves(board)]
    s = make_fen_sample(serialize_fen(board), legal, "Ba4", VOCAB)
    assert sum(s.loss_mask) == len("Ba4")
    promo = parse_fen("7k/P7/8/8/8/8/8/K7 w - - 0 1")
    s = make_fen_sample(serialize_fen(promo), [m.san for m in legal_moves(promo)], "a8=Q+", VOCAB)
    assert sum(s.loss_mask) == 5
    s = make_fen_sample(serialize_fen(board), legal, "O-O", VOCAB)
    assert sum(s.loss_mask) == 3
    with pytest.raises(IllegalMoveError):
        make_fen_sample(serialize_fen(board), legal + ["Qxf7"], "Qxf7", VOCAB)


def test_fen_gradient_zero_outside_span():
    board = pgn_to_fen(RUY)
    s = make_fen_sample(serialize_fen(board), [m.san for m in legal_moves(board)], "Ba4", VOCAB)
    model = build_model(ModelConfig(len(VOCAB), d_model=32, n_heads=2, d_ff=64), seed=0)
    b = collate([s])
    logits, targets, w = shifted(model, b.ids, b.pad_mask, b.loss_mask)
    logits.retain_grad()
    masked_ce_loss(logits, targets, w).backward()
    off = logits.grad[0][w[0] == 0]
    assert torch.equal(off, torch.zeros_like(off))


# -- the loop --------------------------------------------------------------------------------


def tiny_model(mode=CAUSAL, seed=0, dtype=torch.float32):
    cfg = ModelConfig(len(VOCAB), d_model=32, n_heads=2, d_ff=64, max_seq_len=128, attention_mode=mode)
    return build_model(cfg, seed, dtype)


def opening_samples(n, seed=0):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        sans, board = [], initial_board()
        for _ in range(rng.randrange(2, 7)):
            moves = legal_moves(board)
            sans.append(moves[rng.randrange(len(moves))].san)
            board = pgn_to_fen(sans)
        out.append(make_pgn_sample(sans, VOCAB))
    return out


def params_of(model):
    return [p.detach().clone() for p in model.parameters()]


def test_zero_steps_leave_params():
    model = tiny_model()
    before = params_of(model)
    result = train(model, opening_samples(4), TrainConfig(max_iters=0, warmup_iters=1, lr_decay_iters=1), VOCAB)
    assert result.trace == []
    assert all(torch.equal(a, b) for a, b in zip(before, params_of(model)))


def test_accumulation_matches_large_batch():
    # float64 keeps summation-order rounding far below the tolerance; Adam's
    # g / (|g| + eps) would otherwise amplify it on near-zero components
    samples = opening_samples(24)
    common = dict(learning_rate=1e-2, min_lr=1e-3, warmup_iters=2, lr_decay_iters=6, max_iters=6, seed=5)
    a, b = tiny_model(dtype=torch.float64), tiny_model(dtype=torch.float64)
    train(a, samples, TrainConfig(batch_size=2, grad_accum_steps=4, **common), VOCAB)
    train(b, samples, TrainConfig(batch_size=8, grad_accum_steps=1, **common), VOCAB)
    for pa, pb in zip(a.parameters(), b.parameters()):
        rel = (pa - pb).norm() / pb.norm()
        assert rel.item() < 1e-5


def test_bit_reproducible():
    samples = opening_samples(16)
    cfg = TrainConfig(learning_rate=5e-3, min_lr=5e-4, warmup_iters=2, lr_decay_iters=5, max_iters=5, batch_size=4)
    a, b = tiny_model(), tiny_model()
    ta = train(a, samples, cfg, VOCAB).trace
    tb = train(b, samples, cfg, VOCAB).trace
    assert ta == tb
    assert all(torch.equal(x, y) for x, y in zip(a.parameters(), b.parameters()))


def test_overfit_fixture():
    # a short template keeps sequences near 100 tokens; the move is determined by the prompt
    template = PromptTemplate.from_text(0, "<|begin_of_text|>{FEN} best {BEST_MOVE}<|end_of_text|>")
    rng = random.Random(9)
    samples, seen = [], set()
    while len(samples) < 32:
        sans, board = [], initial_board()
        for _ in range(rng.randrange(1, 6)):
            moves = legal_moves(board)
            sans.append(moves[rng.randrange(len(moves))].san)
            board = pgn_to_fen(sans)
        if serialize_fen(board) in seen:
            continue  # a repeated position with a different target could never be fit
        seen.add(serialize_fen(board))
        legal = [m.san for m in legal_moves(board)]
        samples.append(make_fen_sample(serialize_fen(board), legal, rng.choice(legal), VOCAB, template))
    cfg = TrainConfig(learning_rate=1e-2, min_lr=1e-3, warmup_iters=10, lr_decay_iters=200, max_iters=200,
                      batch_size=32, weight_decay=0.0)
    model = build_model(ModelConfig(len(VOCAB), d_model=64, n_heads=4, d_ff=256, max_seq_len=160), seed=0)
    result = train(model, samples, cfg, VOCAB)
    assert result.trace[0].loss > 10 * result.final_loss
    assert result.final_loss < 0.05


def test_trace_and_checkpoints(tmp_path):
    cfg = TrainConfig(warmup_iters=1, lr_decay_iters=4, max_iters=4, batch_size=2, checkpoint_every=2)
    result = train(tiny_model(), opening_samples(4), cfg, VOCAB, tmp_path / "m.ckpt", tmp_path / "loss.csv")
    lines = (tmp_path / "loss.csv").read_text().splitlines()
    assert lines[0] == "step,lr,loss" and len(lines) == 5
    assert [p.name for p in result.checkpoints] == ["m_step2.ckpt", "m.ckpt"]
    _, header = load_checkpoint(tmp_path / "m.ckpt")
    assert header["step"] == 4 and header["vocab_hash"] == VOCAB.content_hash


def test_rejects_mismatched_data():
    model = build_model(ModelConfig(10, d_model=16, n_heads=2, d_ff=32, max_seq_len=64))
    with pytest.raises(TrainError):
        train(model, opening_samples(2), TrainConfig(max_iters=1, warmup_iters=1, lr_decay_iters=1))
    with pytest.raises(TrainError):
        train(tiny_model(), [], TrainConfig())


@given(games(max_plies=12))
def test_pgn_samples_decode(sans):
    s = make_pgn_sample(sans, VOCAB)
    text = detokenize(s.ids, VOCAB)
    assert text.startswith("<|begin_of_text|>1. ") and text.endswith("<|end_of_text|>")
    assert sum(s.loss_mask) == len(s) - 1
