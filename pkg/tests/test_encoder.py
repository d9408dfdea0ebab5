import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alignfreeze.encoder import (
    EMB,
    AdamState,
    EncoderConfig,
    EncoderModel,
    FreezeMask,
    FreezeStrategy,
    adam_update,
    apply_freeze,
    backward,
    block_ids,
    forward,
    init_model,
    train_step,
    zero_grads,
)
from alignfreeze.errors import (
    ConfigError,
    GradientError,
    InputError,
    NumericError,
    StateError,
    StrategyError,
)
from oracles import model_fd_error

SMALL = EncoderConfig(num_layers=2, hidden_dim=8, num_heads=2, ffn_dim=12, vocab_size=20, max_seq_len=8)


def perturbed(cfg, seed):
    """float64 model whose biases and norm params are non-trivial."""
    m = init_model(cfg, seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 100)
    for _, name, p in m.named_parameters():
        p += 0.1 * rng.standard_normal(p.shape)
    return m


def test_init_is_deterministic():
    a, b = init_model(SMALL, 7), init_model(SMALL, 7)
    assert a.to_bytes() == b.to_bytes()
    assert init_model(SMALL, 8).to_bytes() != a.to_bytes()


def test_init_layer_norm_and_bias_values():
    m = init_model(SMALL, 0)
    for block, name, p in m.named_parameters():
        if name.endswith("_g"):
            assert np.all(p == 1.0)
        if name.startswith("b") or name.endswith("_b"):
            assert np.all(p == 0.0)
        assert p.dtype == np.float32


def test_parameter_shapes():
    m = init_model(SMALL, 0)
    assert m.params[EMB]["tok"].shape == (20, 8)
    assert m.params[EMB]["pos"].shape == (8, 8)
    assert m.params["layer_1"]["w1"].shape == (8, 12)
    assert m.params["layer_2"]["w2"].shape == (12, 8)
    assert m.blocks() == ["emb", "layer_1", "layer_2"]


@pytest.mark.parametrize(
    "kw",
    [dict(hidden_dim=65, num_heads=4), dict(num_layers=1), dict(vocab_size=0), dict(ffn_dim=-3)],
)
def test_config_errors(kw):
    with pytest.raises(ConfigError):
        EncoderConfig(**kw)


def test_forward_shapes_and_determinism():
    m = init_model(SMALL, 1)
    acts = forward(m, [1, 2, 3, 4, 5])
    assert len(acts) == SMALL.num_layers + 1
    assert all(h.shape == (5, 8) for h in acts.hidden)
    again = forward(m, [1, 2, 3, 4, 5])
    assert all(np.array_equal(x, y) for x, y in zip(acts.hidden, again.hidden))


def test_forward_batched_matches_single():
    m = init_model(SMALL, 1, dtype=np.float64)
    ids = np.array([[1, 2, 3], [4, 5, 6]])
    batched = forward(m, ids)
    for row in range(2):
        single = forward(m, ids[row])
        for k in range(3):
            np.testing.assert_allclose(batched[k][row], single[k], atol=1e-12)


@pytest.mark.parametrize("ids", [[20], [0, -1], list(range(9)), []])
def test_forward_input_errors(ids):
    with pytest.raises(InputError):
        forward(init_model(SMALL, 0), ids)


def test_backward_zero_upstream():
    m = init_model(SMALL, 0, dtype=np.float64)
    acts = forward(m, [1, 2, 3])
    g = backward(m, acts, {2: np.zeros((3, 8))})
    assert all(np.all(a == 0) for b in g.values() for a in b.values())


def test_backward_embedding_sparsity():
    m = init_model(SMALL, 0, dtype=np.float64)
    acts = forward(m, [4, 7, 9])
    up = np.zeros((3, 8))
    up[1] = 1.0
    g = backward(m, acts, {0: up})
    rows = np.flatnonzero(np.any(g[EMB]["tok"] != 0, axis=1))
    assert rows.tolist() == [7]
    assert np.flatnonzero(np.any(g[EMB]["pos"] != 0, axis=1)).tolist() == [1]
    for k in (1, 2):
        assert all(np.all(a == 0) for a in g[f"layer_{k}"].values())


def test_backward_rejects_stale_activations():
    m = init_model(SMALL, 0)
    acts = forward(m, [1, 2])
    train_step(m, zero_grads(m), FreezeMask(), AdamState(), 0.1)
    with pytest.raises(StateError):
        backward(m, acts, {-1: np.ones((2, 8))})
    with pytest.raises(StateError):
        backward(init_model(SMALL, 0), forward(m, [1, 2]), {-1: np.ones((2, 8))})


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_matches_finite_differences(seed):
    cfg = EncoderConfig(num_layers=2, hidden_dim=8, num_heads=2, ffn_dim=10, vocab_size=12, max_seq_len=6)
    m = perturbed(cfg, seed)
    rng = np.random.default_rng(seed)
    ids = rng.integers(0, 12, size=(2, 4))
    weights = [rng.standard_normal((2, 4, 8)) for _ in range(3)]

    def loss():
        a = forward(m, ids)
        return sum(float((a[k] * weights[k]).sum()) for k in range(3))

    grads = backward(m, forward(m, ids), dict(enumerate(weights)))
    assert model_fd_error(m, loss, grads) < 1e-4


# --- freezing ---------------------------------------------------------------------


def test_apply_freeze_examples():
    assert apply_freeze(FreezeStrategy("FrontHalf"), 6).frozen_blocks == {"emb", "layer_1", "layer_2", "layer_3"}
    assert apply_freeze(FreezeStrategy("BackHalf"), 6).frozen_blocks == {"layer_4", "layer_5", "layer_6"}
    assert apply_freeze(FreezeStrategy("RealignOnly", 0), 6).frozen_blocks == {f"layer_{k}" for k in range(1, 7)}
    assert apply_freeze(FreezeStrategy("FreezeOnly", 3), 6).frozen_blocks == {"layer_3"}
    assert apply_freeze(FreezeStrategy("Full"), 6).frozen_blocks == frozenset()
    # odd depth: front gets floor(L/2) layers
    assert apply_freeze("FrontHalf", 5).frozen_blocks == {"emb", "layer_1", "layer_2"}


@given(st.integers(2, 24))
def test_front_and_back_partition_blocks(L):
    front = apply_freeze("FrontHalf", L).frozen_blocks
    back = apply_freeze("BackHalf", L).frozen_blocks
    assert not front & back
    assert front | back == set(block_ids(L))


@pytest.mark.parametrize("text", ["RealignOnly(7)", "FreezeOnly(9)"])
def test_apply_freeze_out_of_range(text):
    with pytest.raises(StrategyError):
        apply_freeze(FreezeStrategy.parse(text), 6)


@pytest.mark.parametrize("text", ["Sideways", "RealignOnly", "Full(2)", "FreezeOnly(x)"])
def test_strategy_parse_errors(text):
    with pytest.raises(StrategyError):
        FreezeStrategy.parse(text)


def test_strategy_str_round_trip():
    for s in ("Full", "FrontHalf", "BackHalf", "RealignOnly(0)", "FreezeOnly(4)"):
        assert str(FreezeStrategy.parse(s)) == s


# --- optimizer ----------------------------------------------------------------------


def test_first_adam_step_closed_form():
    # m = 0.1, v = 0.001, m_hat = v_hat = 1, step = lr / (1 + eps)
    p, m, v = adam_update(np.array(1.0), np.array(1.0), 0.0, 0.0, 1, 0.1)
    assert p == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), abs=1e-15)
    assert p == pytest.approx(0.9)
    assert (m, v) == (pytest.approx(0.1), pytest.approx(0.001))


def test_train_step_respects_mask():
    m = init_model(SMALL, 0)
    before = {b: m.block_bytes(b) for b in m.blocks()}
    rng = np.random.default_rng(0)
    grads = {b: {n: rng.standard_normal(a.shape) for n, a in g.items()} for b, g in m.params.items()}
    opt = AdamState()
    mask = FreezeMask(frozenset({"emb"}))
    for _ in range(3):
        train_step(m, grads, mask, opt, 0.01)
    assert m.block_bytes("emb") == before["emb"]
    assert m.block_bytes("layer_1") != before["layer_1"]
    assert not any(k[0] == "emb" for k in opt.t)
    assert opt.t[("layer_1", "wq")] == 3


def test_train_step_zero_lr():
    m = init_model(SMALL, 0)
    before = m.to_bytes()
    grads = {b: {n: np.ones_like(a) for n, a in g.items()} for b, g in m.params.items()}
    train_step(m, grads, FreezeMask(), AdamState(), 0.0)
    assert m.to_bytes() == before


def test_train_step_errors():
    m = init_model(SMALL, 0)
    g = zero_grads(m)
    g["layer_1"]["wq"] = np.zeros((3, 3))
    with pytest.raises(GradientError):
        train_step(m, g, FreezeMask(), AdamState(), 0.1)
    g = zero_grads(m)
    g["emb"]["tok"][0, 0] = np.nan
    before = m.to_bytes()
    with pytest.raises(NumericError):
        train_step(m, g, FreezeMask(), AdamState(), 0.1)
    assert m.to_bytes() == before


# --- serialization ---------------------------------------------------------------------


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_serialization_round_trip(tmp_path, dtype):
    m = init_model(SMALL, 3, dtype=dtype)
    m.save(tmp_path / "m.afm")
    loaded = EncoderModel.load(tmp_path / "m.afm")
    assert loaded.config == m.config
    assert loaded.to_bytes() == m.to_bytes()
    for (b1, n1, p1), (b2, n2, p2) in zip(m.named_parameters(), loaded.named_parameters()):
        assert (b1, n1) == (b2, n2) and p1.dtype == p2.dtype
        np.testing.assert_array_equal(p1, p2)


def test_serialization_layout():
    import json
    import struct

    raw = init_model(SMALL, 0).to_bytes()
    assert raw[:8] == b"AFRZMDL1"
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + hlen])
    first = header["params"][0]
    assert (first["block"], first["name"], first["offset"]) == ("emb", "tok", 0)
    body = raw[16 + hlen :]
    assert len(body) == sum(e["nbytes"] for e in header["params"])
    tok = np.frombuffer(body[: first["nbytes"]], dtype="<f4").reshape(first["shape"])
    np.testing.assert_array_equal(tok, init_model(SMALL, 0).params["emb"]["tok"])
