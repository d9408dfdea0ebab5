"""A small pre-layer-norm transformer encoder written directly in numpy.

Parameters live in a two-level store ``params[block][name]`` where ``block`` is
``"emb"`` or ``"layer_k"`` (k = 1..L).  Freezing works on whole blocks.

The forward pass returns the hidden states after the embedding block and after
every layer, so any of them can feed the realignment loss; :func:`backward`
accepts upstream gradients on any subset of those states.
"""

from __future__ import annotations

import copy
import json
import re
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    GradientError,
    InputError,
    NumericError,
    StateError,
    StrategyError,
)

EMB = "emb"
MAGIC = b"AFRZMDL1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_GELU_C = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 4
    hidden_dim: int = 32
    num_heads: int = 4
    ffn_dim: int = 64
    vocab_size: int = 600
    max_seq_len: int = 32
    ln_eps: float = 1e-5

    def __post_init__(self):
        counts = ("num_layers", "hidden_dim", "num_heads", "ffn_dim", "vocab_size", "max_seq_len")
        for name in counts:
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.num_layers < 2:
            raise ConfigError("num_layers must be at least 2")
        if self.hidden_dim % self.num_heads:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} is not divisible by num_heads {self.num_heads}"
            )
        if not self.ln_eps > 0:
            raise ConfigError("ln_eps must be positive")

    @property
    def head_dim(self):
        return self.hidden_dim // self.num_heads

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def block_ids(num_layers: int) -> list:
    return [EMB] + [f"layer_{k}" for k in range(1, num_layers + 1)]


def block_name(k: int) -> str:
    """Block index to id: 0 is the embedding block, k >= 1 is ``layer_k``."""
    return EMB if k == 0 else f"layer_{k}"


@dataclass
class EncoderModel:
    config: EncoderConfig
    params: dict
    version: int = field(default=0, compare=False)

    @property
    def dtype(self):
        return self.params[EMB]["tok"].dtype

    def blocks(self):
        return list(self.params)

    def named_parameters(self):
        for block, group in self.params.items():
            for name, arr in group.items():
                yield block, name, arr

    def num_parameters(self):
        return sum(a.size for _, _, a in self.named_parameters())

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.config, copy.deepcopy(self.params), self.version)

    def astype(self, dtype) -> "EncoderModel":
        params = {b: {n: a.astype(dtype) for n, a in g.items()} for b, g in self.params.items()}
        return EncoderModel(self.config, params)

    def block_bytes(self, block: str) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes() for a in self.params[block].values())

    # serialization ---------------------------------------------------------

    def to_bytes(self) -> bytes:
        entries, chunks, offset = [], [], 0
        for block, name, arr in self.named_parameters():
            data = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
            entries.append(
                {
                    "block": block,
                    "name": name,
                    "shape": list(arr.shape),
                    "dtype": arr.dtype.newbyteorder("<").str,
                    "offset": offset,
                    "nbytes": len(data),
                }
            )
            chunks.append(data)
            offset += len(data)
        header = json.dumps(
            {"config": asdict(self.config), "params": entries},
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EncoderModel":
        if raw[: len(MAGIC)] != MAGIC:
            raise ValueError("not an encoder container (bad magic)")
        pos = len(MAGIC)
        (hlen,) = struct.unpack("<Q", raw[pos : pos + 8])
        pos += 8
        header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
        body = memoryview(raw)[pos + hlen :]
        params: dict = {}
        for e in header["params"]:
            chunk = body[e["offset"] : e["offset"] + e["nbytes"]]
            arr = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
            params.setdefault(e["block"], {})[e["name"]] = arr
        return cls(EncoderConfig.from_dict(header["config"]), params)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "EncoderModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _uniform(rng, shape, bound):
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: EncoderConfig, seed: int, dtype=np.float32) -> EncoderModel:
    """Deterministic initialization: Glorot-uniform matrices, zero biases,
    unit layer-norm gains. Embedding tables are uniform with per-coordinate
    variance 1/d."""
    if not isinstance(config, EncoderConfig):
        raise ConfigError("config must be an EncoderConfig")
    rng = np.random.default_rng(seed)
    d, f, V = config.hidden_dim, config.ffn_dim, config.vocab_size
    emb_bound = np.sqrt(3.0 / d)
    params = {
        EMB: {
            "tok": _uniform(rng, (V, d), emb_bound),
            "pos": _uniform(rng, (config.max_seq_len, d), 0.5 * emb_bound),
        }
    }
    glorot_dd = np.sqrt(6.0 / (d + d))
    glorot_df = np.sqrt(6.0 / (d + f))
    for k in range(1, config.num_layers + 1):
        params[f"layer_{k}"] = {
            "ln1_g": np.ones(d),
            "ln1_b": np.zeros(d),
            "wq": _uniform(rng, (d, d), glorot_dd),
            "bq": np.zeros(d),
            "wk": _uniform(rng, (d, d), glorot_dd),
            "bk": np.zeros(d),
            "wv": _uniform(rng, (d, d), glorot_dd),
            "bv": np.zeros(d),
            "wo": _uniform(rng, (d, d), glorot_dd),
            "bo": np.zeros(d),
            "ln2_g": np.ones(d),
            "ln2_b": np.zeros(d),
            "w1": _uniform(rng, (d, f), glorot_df),
            "b1": np.zeros(f),
            "w2": _uniform(rng, (f, d), glorot_df),
            "b2": np.zeros(d),
        }
    params = {b: {n: a.astype(dtype) for n, a in g.items()} for b, g in params.items()}
    return EncoderModel(config, params)


# --- forward / backward -----------------------------------------------------


def _layer_norm(x, g, b, eps):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd)


def _layer_norm_back(dy, g, cache):
    xhat, rstd = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(0)
    db = dy.reshape(-1, xhat.shape[-1]).sum(0)
    dxhat = dy * g
    dx = rstd * (
        dxhat
        - dxhat.mean(-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(-1, keepdims=True)
    )
    return dx, dg, db


def _gelu(u):
    inner = _GELU_C * (u + 0.044715 * u**3)
    t = np.tanh(inner)
    return 0.5 * u * (1.0 + t), t


def _gelu_grad(u, t):
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * u * u)


def _split_heads(x, h):
    b, n, d = x.shape
    return x.reshape(b, n, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def _sum_rows(x):
    return x.reshape(-1, x.shape[-1]).sum(0)


def _matmul_grad(inp, dout):
    """Weight gradient of ``inp @ W`` summed over every leading axis."""
    return inp.reshape(-1, inp.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])


def _layer_forward(p, x, cfg):
    h = cfg.num_heads
    a, ln1 = _layer_norm(x, p["ln1_g"], p["ln1_b"], cfg.ln_eps)
    q = _split_heads(a @ p["wq"] + p["bq"], h)
    k = _split_heads(a @ p["wk"] + p["bk"], h)
    v = _split_heads(a @ p["wv"] + p["bv"], h)
    scale = 1.0 / np.sqrt(cfg.head_dim)
    s = (q @ k.transpose(0, 1, 3, 2)) * scale
    s = s - s.max(-1, keepdims=True)
    e = np.exp(s)
    probs = e / e.sum(-1, keepdims=True)
    o = _merge_heads(probs @ v)
    x1 = x + o @ p["wo"] + p["bo"]
    c, ln2 = _layer_norm(x1, p["ln2_g"], p["ln2_b"], cfg.ln_eps)
    u = c @ p["w1"] + p["b1"]
    r, t = _gelu(u)
    y = x1 + r @ p["w2"] + p["b2"]
    cache = (a, ln1, q, k, v, probs, o, c, ln2, u, t, r)
    return y, cache


def _layer_backward(p, dy, cache, cfg):
    a, ln1, q, k, v, probs, o, c, ln2, u, t, r = cache
    g = {}
    # feed-forward sublayer
    g["w2"] = _matmul_grad(r, dy)
    g["b2"] = _sum_rows(dy)
    du = (dy @ p["w2"].T) * _gelu_grad(u, t)
    g["w1"] = _matmul_grad(c, du)
    g["b1"] = _sum_rows(du)
    dc = du @ p["w1"].T
    dx1_ln, g["ln2_g"], g["ln2_b"] = _layer_norm_back(dc, p["ln2_g"], ln2)
    dx1 = dy + dx1_ln
    # attention sublayer
    g["wo"] = _matmul_grad(o, dx1)
    g["bo"] = _sum_rows(dx1)
    do = _split_heads(dx1 @ p["wo"].T, cfg.num_heads)
    dprobs = do @ v.transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ do
    ds = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True))
    ds *= 1.0 / np.sqrt(cfg.head_dim)
    dq = _merge_heads(ds @ k)
    dk = _merge_heads(ds.transpose(0, 1, 3, 2) @ q)
    dv = _merge_heads(dv)
    g["wq"], g["bq"] = _matmul_grad(a, dq), _sum_rows(dq)
    g["wk"], g["bk"] = _matmul_grad(a, dk), _sum_rows(dk)
    g["wv"], g["bv"] = _matmul_grad(a, dv), _sum_rows(dv)
    da = dq @ p["wq"].T + dk @ p["wk"].T + dv @ p["wv"].T
    dx_ln, g["ln1_g"], g["ln1_b"] = _layer_norm_back(da, p["ln1_g"], ln1)
    return dx1 + dx_ln, g


class Activations:
    """Hidden states of one forward pass plus the cache needed by :func:`backward`.

    Indexing returns the hidden state after block ``i`` (0 = embeddings).
    For a 1-D input each state has shape ``(n, d)``; for a 2-D ``(b, n)`` input
    it is ``(b, n, d)``.
    """

    def __init__(self, model, token_ids, hidden, caches, batched):
        self._model_ref = id(model)
        self._version = model.version
        self.token_ids = token_ids
        self._hidden = hidden
        self._caches = caches
        self.batched = batched

    @property
    def hidden(self):
        if self.batched:
            return list(self._hidden)
        return [h[0] for h in self._hidden]

    def __getitem__(self, i):
        h = self._hidden[i]
        return h if self.batched else h[0]

    def __len__(self):
        return len(self._hidden)


def _check_ids(model, token_ids):
    ids = np.asarray(token_ids)
    if ids.dtype.kind not in "iu":
        if ids.size and not np.all(np.equal(np.mod(ids, 1), 0)):
            raise InputError("token ids must be integers")
        ids = ids.astype(np.int64)
    batched = ids.ndim == 2
    if ids.ndim == 1:
        ids = ids[None, :]
    if ids.ndim != 2:
        raise InputError("token ids must be a sequence or a (batch, length) array")
    n = ids.shape[1]
    if n == 0 or ids.shape[0] == 0:
        raise InputError("empty input sequence")
    if n > model.config.max_seq_len:
        raise InputError(f"sequence length {n} exceeds max_seq_len {model.config.max_seq_len}")
    if ids.min() < 0 or ids.max() >= model.config.vocab_size:
        bad = ids[(ids < 0) | (ids >= model.config.vocab_size)][0]
        raise InputError(f"token id {int(bad)} outside vocabulary of size {model.config.vocab_size}")
    return ids.astype(np.int64), batched


def forward(model: EncoderModel, token_ids) -> Activations:
    ids, batched = _check_ids(model, token_ids)
    cfg = model.config
    n = ids.shape[1]
    x = model.params[EMB]["tok"][ids] + model.params[EMB]["pos"][:n]
    hidden, caches = [x], []
    for k in range(1, cfg.num_layers + 1):
        x, cache = _layer_forward(model.params[f"layer_{k}"], x, cfg)
        hidden.append(x)
        caches.append(cache)
    return Activations(model, ids if batched else ids[0], hidden, caches, batched)


def zero_grads(model: EncoderModel) -> dict:
    return {b: {n: np.zeros_like(a) for n, a in g.items()} for b, g in model.params.items()}


def backward(model: EncoderModel, acts: Activations, upstream) -> dict:
    """Reverse-mode gradients of all parameters.

    ``upstream`` maps a block index (0..L, negative indices allowed) to the
    gradient of the objective with respect to that block's output, shaped like
    ``acts[i]``. Blocks not present receive no direct gradient.
    """
    if acts._model_ref != id(model) or acts._version != model.version:
        raise StateError("activations were computed by a different model state")
    cfg = model.config
    L = cfg.num_layers
    shape = acts._hidden[0].shape
    ups = {}
    for i, g in dict(upstream).items():
        i = i + L + 1 if i < 0 else i
        if not 0 <= i <= L:
            raise StateError(f"no hidden state with index {i}")
        g = np.asarray(g, dtype=model.dtype)
        if not acts.batched:
            g = g[None]
        if g.shape != shape:
            raise StateError(f"upstream gradient shape {g.shape} does not match {shape}")
        ups[i] = g
    grads = {}
    dx = ups.get(L, np.zeros(shape, dtype=model.dtype))
    for k in range(L, 0, -1):
        dx, grads[f"layer_{k}"] = _layer_backward(
            model.params[f"layer_{k}"], dx, acts._caches[k - 1], cfg
        )
        if k - 1 in ups:
            dx = dx + ups[k - 1]
    ids = acts.token_ids if acts.batched else acts.token_ids[None]
    dtok = np.zeros_like(model.params[EMB]["tok"])
    np.add.at(dtok, ids.reshape(-1), dx.reshape(-1, cfg.hidden_dim))
    dpos = np.zeros_like(model.params[EMB]["pos"])
    dpos[: shape[1]] = dx.sum(0)
    ordered = {EMB: {"tok": dtok, "pos": dpos}}
    for k in range(1, L + 1):
        ordered[f"layer_{k}"] = {n: grads[f"layer_{k}"][n] for n in model.params[f"layer_{k}"]}
    return ordered


def accumulate(total: dict, grads: dict) -> dict:
    for b, g in grads.items():
        for n, a in g.items():
            total[b][n] += a
    return total


# --- freezing -----------------------------------------------------------------


_STRATEGY_RE = re.compile(r"^(Full|FrontHalf|BackHalf|RealignOnly|FreezeOnly)(?:\((\d+)\))?$")


@dataclass(frozen=True)
class FreezeStrategy:
    variant: str
    k: int | None = None

    def __post_init__(self):
        if self.variant not in ("Full", "FrontHalf", "BackHalf", "RealignOnly", "FreezeOnly"):
            raise StrategyError(f"unknown freeze strategy {self.variant!r}")
        needs_k = self.variant in ("RealignOnly", "FreezeOnly")
        if needs_k and self.k is None:
            raise StrategyError(f"{self.variant} needs a block index")
        if not needs_k and self.k is not None:
            raise StrategyError(f"{self.variant} takes no block index")

    def __str__(self):
        return self.variant if self.k is None else f"{self.variant}({self.k})"

    @classmethod
    def parse(cls, text: str) -> "FreezeStrategy":
        m = _STRATEGY_RE.match(text.strip())
        if m is None:
            raise StrategyError(f"cannot parse freeze strategy {text!r}")
        return cls(m.group(1), None if m.group(2) is None else int(m.group(2)))


@dataclass(frozen=True)
class FreezeMask:
    frozen_blocks: frozenset = frozenset()

    def __contains__(self, block):
        return block in self.frozen_blocks


def apply_freeze(strategy: FreezeStrategy, num_layers: int) -> FreezeMask:
    if num_layers < 2:
        raise StrategyError("freezing strategies need at least 2 layers")
    if isinstance(strategy, str):
        strategy = FreezeStrategy.parse(strategy)
    L, half = num_layers, num_layers // 2
    v = strategy.variant
    if v in ("RealignOnly", "FreezeOnly") and not 0 <= strategy.k <= L:
        raise StrategyError(f"block index {strategy.k} outside 0..{L}")
    if v == "Full":
        frozen = set()
    elif v == "FrontHalf":
        frozen = {EMB} | {f"layer_{k}" for k in range(1, half + 1)}
    elif v == "BackHalf":
        frozen = {f"layer_{k}" for k in range(half + 1, L + 1)}
    elif v == "RealignOnly":
        frozen = set(block_ids(L)) - {block_name(strategy.k)}
    else:
        frozen = {block_name(strategy.k)}
    return FreezeMask(frozenset(frozen))


# --- optimizer ----------------------------------------------------------------


@dataclass
class AdamState:
    """Per-parameter first/second moments and step counts."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: dict = field(default_factory=dict)


def adam_update(param, grad, m, v, t, lr):
    """One bias-corrected Adam step; returns ``(param, m, v)``."""
    m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * grad * grad
    m_hat = m / (1 - ADAM_BETA1**t)
    v_hat = v / (1 - ADAM_BETA2**t)
    return param - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), m, v


def train_step(model: EncoderModel, grads: dict, mask: FreezeMask, opt_state: AdamState, lr: float):
    """Apply Adam to every block not in ``mask``.

    Frozen blocks are left untouched and their moments are not advanced.
    Returns ``(model, opt_state)``; both are updated in place.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    for block, name, p in model.named_parameters():
        g = grads.get(block, {}).get(name)
        if g is None:
            raise GradientError(f"missing gradient for {block}.{name}")
        g = np.asarray(g)
        if g.shape != p.shape:
            raise GradientError(f"gradient for {block}.{name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {block}.{name}")
    if lr == 0:
        return model, opt_state
    for block, name, p in model.named_parameters():
        if block in mask:
            continue
        key = (block, name)
        t = opt_state.t.get(key, 0) + 1
        m = opt_state.m.get(key, np.zeros_like(p))
        v = opt_state.v.get(key, np.zeros_like(p))
        new_p, m, v = adam_update(p, grads[block][name].astype(p.dtype), m, v, t, lr)
        model.params[block][name] = new_p.astype(p.dtype)
        opt_state.m[key], opt_state.v[key], opt_state.t[key] = m, v, t
    model.version += 1
    return model, opt_state
