"""A miniature decoder-only RoPE transformer with hand-written reverse mode.

Pre-norm residual blocks (RMS norm, causal multi-head attention, GELU MLP),
tied output head, float64 throughout. Attention rotates per-head queries and
keys with :func:`endprompt_lab.rope.rotate` at the supplied *effective*
positions, so interpolation and two-segment plans are purely a matter of what
positions the caller passes in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    NumericOverflowError,
    PositionOrderError,
    PositionStreamExhausted,
    TokenRangeError,
    ValidationError,
)
from .rope import AngularSpectrum, frequencies, rotate

RMS_EPS = 1e-6
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 257
    model_dim: int = 32
    num_heads: int = 2
    num_layers: int = 2
    mlp_ratio: int = 4
    rotary_base: float = 10000.0
    max_eval_positions: int = 1024
    tie_head: bool = True

    def __post_init__(self):
        for name in ("vocab_size", "model_dim", "num_heads", "num_layers", "mlp_ratio"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.model_dim % self.num_heads:
            raise ValidationError("model_dim must be divisible by num_heads")
        if self.head_dim % 2:
            raise ValidationError("head_dim must be even for rotary embedding")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads

    def spectrum(self) -> AngularSpectrum:
        return frequencies(self.head_dim, self.rotary_base)

    def to_dict(self) -> dict:
        return asdict(self)


Params = dict  # name -> float64 ndarray, insertion order is the canonical order


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    dm, hid = cfg.model_dim, cfg.model_dim * cfg.mlp_ratio
    shapes: dict[str, tuple[int, ...]] = {"embed": (cfg.vocab_size, dm)}
    for i in range(cfg.num_layers):
        p = f"layers.{i}."
        shapes[p + "norm1"] = (dm,)
        shapes[p + "wq"] = (dm, dm)
        shapes[p + "wk"] = (dm, dm)
        shapes[p + "wv"] = (dm, dm)
        shapes[p + "wo"] = (dm, dm)
        shapes[p + "norm2"] = (dm,)
        shapes[p + "w1"] = (dm, hid)
        shapes[p + "w2"] = (hid, dm)
    shapes["norm_f"] = (dm,)
    if not cfg.tie_head:
        shapes["head"] = (dm, cfg.vocab_size)
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    resid_scale = 1.0 / math.sqrt(2 * cfg.num_layers)
    params: Params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("norm"):
            params[name] = np.ones(shape)
        elif name == "embed":
            # rows of about unit norm, so the tied head starts with usable logits
            params[name] = rng.normal(0.0, 1.0 / math.sqrt(cfg.model_dim), shape)
        else:
            std = 1.0 / math.sqrt(shape[0])
            if leaf in ("wo", "w2"):
                std *= resid_scale
            params[name] = rng.normal(0.0, std, shape)
    return params


def copy_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}


# -- elementwise pieces -------------------------------------------------------

def _rms(x, gain):
    r = np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + RMS_EPS)
    xhat = x / r
    return xhat * gain, (xhat, r)


def _rms_back(dy, gain, cache):
    xhat, r = cache
    dgain = (dy * xhat).reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * gain
    dx = (dxhat - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)) / r
    return dx, dgain


def _gelu(u):
    t = np.tanh(_GELU_C * (u + 0.044715 * u * u * u))
    return 0.5 * u * (1.0 + t), t


def _gelu_back(du_out, u, t):
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * u * u)
    return du_out * (0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * dinner)


def _check_finite(x, where):
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError(where)


def check_inputs(cfg: ModelConfig, tokens: np.ndarray, positions: np.ndarray) -> None:
    if tokens.ndim != 2 or positions.shape != tokens.shape:
        raise ValidationError(f"tokens {tokens.shape} and positions {positions.shape} must both be [B, T]")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise TokenRangeError(f"token ids must lie in [0, {cfg.vocab_size})")
    if tokens.shape[1] > 1 and np.any(np.diff(positions, axis=1) <= 0):
        raise PositionOrderError("effective positions must be strictly increasing along each row")


# -- forward / backward ---------------------------------------------------------

def forward(cfg: ModelConfig, params: Params, tokens, eff_positions, keep_cache: bool = False):
    """Logits ``[B, T, V]``. With ``keep_cache`` also returns the tape for :func:`backward`."""
    tokens = np.asarray(tokens, dtype=np.int64)
    pos = np.asarray(eff_positions, dtype=np.float64)
    check_inputs(cfg, tokens, pos)
    B, T = tokens.shape
    H, D = cfg.num_heads, cfg.head_dim
    spec = cfg.spectrum()
    scale = 1.0 / math.sqrt(D)
    future = np.triu(np.ones((T, T), dtype=bool), k=1)
    rot_pos = pos[:, :, None]  # broadcast over heads

    h = params["embed"][tokens]
    tape: list = []
    for i in range(cfg.num_layers):
        p = f"layers.{i}."
        n1, c1 = _rms(h, params[p + "norm1"])
        q = (n1 @ params[p + "wq"]).reshape(B, T, H, D)
        k = (n1 @ params[p + "wk"]).reshape(B, T, H, D)
        v = (n1 @ params[p + "wv"]).reshape(B, T, H, D)
        qr = rotate(q, rot_pos, spec).transpose(0, 2, 1, 3)
        kr = rotate(k, rot_pos, spec).transpose(0, 2, 1, 3)
        vt = v.transpose(0, 2, 1, 3)
        att = (qr @ kr.transpose(0, 1, 3, 2)) * scale
        att[..., future] = -np.inf
        att -= att.max(axis=-1, keepdims=True)
        probs = np.exp(att)
        probs /= probs.sum(axis=-1, keepdims=True)
        o = (probs @ vt).transpose(0, 2, 1, 3).reshape(B, T, H * D)
        h = h + o @ params[p + "wo"]
        _check_finite(h, f"layer {i} attention")
        n2, c2 = _rms(h, params[p + "norm2"])
        u = n2 @ params[p + "w1"]
        g, t = _gelu(u)
        h = h + g @ params[p + "w2"]
        _check_finite(h, f"layer {i} mlp")
        if keep_cache:
            tape.append((n1, c1, qr, kr, vt, probs, o, n2, c2, u, g, t))
        else:
            del att, probs
    nf, cf = _rms(h, params["norm_f"])
    head = params["embed"].T if cfg.tie_head else params["head"]
    logits = nf @ head
    _check_finite(logits, "output head")
    if keep_cache:
        return logits, (tokens, pos, tape, nf, cf)
    return logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class LossValue:
    total: float
    mean: float  # nan when all weights are zero
    per_token: np.ndarray = field(repr=False)

    @property
    def mean_text(self) -> str:
        return "NA" if math.isnan(self.mean) else repr(self.mean)


def weighted_nll(logits, targets, weights) -> LossValue:
    """Weighted sum of next-token negative log likelihoods.

    ``logits[..., V]`` and ``targets``/``weights`` share leading shape. The
    normalized value ``total / sum(weights)`` is reported alongside.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if logits.shape[:-1] != targets.shape or targets.shape != weights.shape:
        raise ValidationError(f"shape mismatch: logits {logits.shape}, targets {targets.shape}, weights {weights.shape}")
    if np.any(weights < 0):
        raise ValidationError("loss weights must be non-negative")
    nll = -np.take_along_axis(log_softmax(logits), targets[..., None], axis=-1)[..., 0]
    wsum = float(weights.sum())
    if wsum == 0.0:
        warnings.warn("all loss weights are zero; normalized loss is undefined", RuntimeWarning, stacklevel=2)
        return LossValue(0.0, math.nan, nll)
    total = float(np.sum(weights * nll))
    return LossValue(total, total / wsum, nll)


def loss_and_grads(cfg: ModelConfig, params: Params, tokens, eff_positions, weights):
    """Weighted NLL of ``tokens[:, 1:]`` and its exact gradient with respect to ``params``."""
    logits, cache = forward(cfg, params, tokens, eff_positions, keep_cache=True)
    tokens = cache[0]
    weights = np.asarray(weights, dtype=np.float64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        loss = weighted_nll(logits[:, :-1], tokens[:, 1:], weights)
    dlogits = np.zeros_like(logits)
    if np.any(weights):
        probs = np.exp(log_softmax(logits[:, :-1]))
        np.put_along_axis(probs, tokens[:, 1:, None], np.take_along_axis(probs, tokens[:, 1:, None], -1) - 1.0, -1)
        dlogits[:, :-1] = probs * weights[..., None]
    return loss, backward(cfg, params, cache, dlogits)


def backward(cfg: ModelConfig, params: Params, cache, dlogits) -> Params:
    tokens, pos, tape, nf, cf = cache
    B, T = tokens.shape
    H, D = cfg.num_heads, cfg.head_dim
    spec = cfg.spectrum()
    scale = 1.0 / math.sqrt(D)
    rot_pos = pos[:, :, None]
    grads: Params = {k: np.zeros_like(v) for k, v in params.items()}

    flat = dlogits.reshape(-1, dlogits.shape[-1])
    nflat = nf.reshape(-1, nf.shape[-1])
    if cfg.tie_head:
        grads["embed"] += flat.T @ nflat
        dnf = dlogits @ params["embed"]
    else:
        grads["head"] += nflat.T @ flat
        dnf = dlogits @ params["head"].T
    dh, grads["norm_f"] = _rms_back(dnf, params["norm_f"], cf)

    for i in reversed(range(cfg.num_layers)):
        p = f"layers.{i}."
        n1, c1, qr, kr, vt, probs, o, n2, c2, u, g, t = tape[i]
        # mlp branch
        grads[p + "w2"] = g.reshape(-1, g.shape[-1]).T @ dh.reshape(-1, dh.shape[-1])
        dg = dh @ params[p + "w2"].T
        du = _gelu_back(dg, u, t)
        grads[p + "w1"] = n2.reshape(-1, n2.shape[-1]).T @ du.reshape(-1, du.shape[-1])
        dn2 = du @ params[p + "w1"].T
        dx, grads[p + "norm2"] = _rms_back(dn2, params[p + "norm2"], c2)
        dh = dh + dx
        # attention branch
        grads[p + "wo"] = o.reshape(-1, o.shape[-1]).T @ dh.reshape(-1, dh.shape[-1])
        do = (dh @ params[p + "wo"].T).reshape(B, T, H, D).transpose(0, 2, 1, 3)
        dprobs = do @ vt.transpose(0, 1, 3, 2)
        dvt = probs.transpose(0, 1, 3, 2) @ do
        datt = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
        datt *= scale
        dqr = datt @ kr
        dkr = datt.transpose(0, 1, 3, 2) @ qr
        dq = rotate(dqr.transpose(0, 2, 1, 3), -rot_pos, spec).reshape(B, T, H * D)
        dk = rotate(dkr.transpose(0, 2, 1, 3), -rot_pos, spec).reshape(B, T, H * D)
        dv = dvt.transpose(0, 2, 1, 3).reshape(B, T, H * D)
        n1f = n1.reshape(-1, n1.shape[-1])
        grads[p + "wq"] = n1f.T @ dq.reshape(-1, H * D)
        grads[p + "wk"] = n1f.T @ dk.reshape(-1, H * D)
        grads[p + "wv"] = n1f.T @ dv.reshape(-1, H * D)
        dn1 = dq @ params[p + "wq"].T + dk @ params[p + "wk"].T + dv @ params[p + "wv"].T
        dx, grads[p + "norm1"] = _rms_back(dn1, params[p + "norm1"], c1)
        dh = dh + dx
        _check_finite(dh, f"layer {i} backward")

    np.add.at(grads["embed"], tokens.reshape(-1), dh.reshape(-1, dh.shape[-1]))
    return grads


# -- decoding ---------------------------------------------------------------------

def greedy_decode(cfg: ModelConfig, params: Params, prompt, positions, n_new: int) -> np.ndarray:
    """Append ``n_new`` argmax tokens to ``prompt`` (``[T]`` or ``[B, T]``).

    ``positions`` is an iterable of effective positions consumed in order: one
    per prompt token, then one per generated token. Running out raises.
    """
    arr = np.asarray(prompt, dtype=np.int64)
    single = arr.ndim == 1
    seq = arr[None, :] if single else arr
    if seq.shape[1] == 0:
        raise ValidationError("prompt must be non-empty")
    stream = iter(positions)
    pos = []
    for _ in range(seq.shape[1] + n_new):
        try:
            pos.append(float(next(stream)))
        except StopIteration:
            raise PositionStreamExhausted(f"position stream ran out after {len(pos)} positions") from None
    pos_arr = np.asarray(pos)
    for _ in range(n_new):
        T = seq.shape[1]
        rows = np.broadcast_to(pos_arr[:T], seq.shape)
        logits = forward(cfg, params, seq, rows)
        nxt = np.argmax(logits[:, -1], axis=-1)
        seq = np.concatenate((seq, nxt[:, None]), axis=1)
    return seq[0] if single else seq
