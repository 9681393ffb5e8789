"""Adam training loop with linear warmup into a constant learning rate."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DivergenceError, ValidationError
from .model import ModelConfig, Params, copy_params, init_params, loss_and_grads

METRICS_HEADER = "step,lr,loss_sum,loss_mean,wall_ms"


@dataclass(frozen=True)
class Batch:
    """``tokens`` ``[B, T]``; integer ``positions`` plus ``scale``; ``weights`` ``[B, T-1]``."""

    tokens: np.ndarray
    positions: np.ndarray
    scale: float
    weights: np.ndarray

    def __post_init__(self):
        if self.tokens.shape != self.positions.shape or self.tokens.ndim != 2:
            raise ValidationError("tokens and positions must share shape [B, T]")
        if self.weights.shape != (self.tokens.shape[0], self.tokens.shape[1] - 1):
            raise ValidationError("weights must have shape [B, T-1]")
        if np.any(self.weights < 0):
            raise ValidationError("weights must be non-negative")

    @property
    def eff_positions(self) -> np.ndarray:
        return self.positions / self.scale

    def __len__(self) -> int:
        return int(self.tokens.shape[0])


@dataclass(frozen=True)
class Schedule:
    lr: float = 3e-4
    warmup_steps: int = 20
    max_steps: int = 200
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    grad_clip: float | None = None

    def lr_at(self, step: int) -> float:
        """Rate for the ``step``-th update (1-based): linear ramp, then constant."""
        if self.warmup_steps <= 0:
            return self.lr
        return self.lr * min(1.0, step / self.warmup_steps)


@dataclass
class TrainState:
    config: ModelConfig
    params: Params
    m: Params
    v: Params
    step: int = 0
    seed: int = 0

    @classmethod
    def fresh(cls, config: ModelConfig, seed: int, params: Params | None = None) -> "TrainState":
        p = init_params(config, seed) if params is None else copy_params(params)
        zeros = {k: np.zeros_like(x) for k, x in p.items()}
        return cls(config, p, zeros, {k: z.copy() for k, z in zeros.items()}, 0, seed)


@dataclass
class MetricRow:
    step: int
    lr: float
    loss_sum: float
    loss_mean: float
    wall_ms: float = 0.0

    def to_csv(self) -> str:
        mean = "NA" if math.isnan(self.loss_mean) else f"{self.loss_mean:.9g}"
        return f"{self.step},{self.lr:.9g},{self.loss_sum:.9g},{mean},{self.wall_ms:.3f}"


@dataclass
class TrainResult:
    state: TrainState
    metrics: list[MetricRow] = field(default_factory=list)

    def metrics_csv(self) -> str:
        return "\n".join([METRICS_HEADER] + [r.to_csv() for r in self.metrics]) + "\n"


def adam_step(state: TrainState, grads: Params, sched: Schedule) -> float:
    state.step += 1
    t = state.step
    lr = sched.lr_at(t)
    if sched.grad_clip is not None:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > sched.grad_clip:
            grads = {k: g * (sched.grad_clip / norm) for k, g in grads.items()}
    c1 = 1.0 - sched.beta1**t
    c2 = 1.0 - sched.beta2**t
    for k, p in state.params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= sched.beta1
        m += (1.0 - sched.beta1) * g
        v *= sched.beta2
        v += (1.0 - sched.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + sched.eps)
    return lr


def train(
    config: ModelConfig,
    batches: Iterable[Batch],
    schedule: Schedule,
    seed: int = 0,
    params: Params | None = None,
    record_wall_time: bool = False,
    log_every: int = 0,
    log=print,
) -> TrainResult:
    """Run ``schedule.max_steps`` updates.

    A sequence of batches is replayed in order as often as needed; a one-shot
    iterator must supply every step itself.

    Deterministic for a fixed seed and batch order. ``wall_ms`` stays 0 unless
    ``record_wall_time`` is set, so metric files are reproducible byte for byte.
    """
    state = TrainState.fresh(config, seed, params)
    result = TrainResult(state)
    if schedule.max_steps <= 0:
        return result
    source = _cycle(batches)
    for _ in range(schedule.max_steps):
        t0 = time.perf_counter()
        batch = next(source)
        loss, grads = loss_and_grads(config, state.params, batch.tokens, batch.eff_positions, batch.weights)
        if not math.isfinite(loss.total):
            raise DivergenceError(f"loss became non-finite at step {state.step + 1}: {loss.total}")
        lr = adam_step(state, grads, schedule)
        wall = (time.perf_counter() - t0) * 1e3 if record_wall_time else 0.0
        result.metrics.append(MetricRow(state.step, lr, loss.total, loss.mean, wall))
        if log_every and state.step % log_every == 0:
            log(f"step {state.step:6d}  lr {lr:.2e}  loss/token {loss.mean:.4f}")
    return result


def _cycle(batches: Iterable[Batch]) -> Iterator[Batch]:
    # sequences are replayed epoch after epoch; one-shot iterators must last
    if isinstance(batches, Sequence):
        if not batches:
            raise ValidationError("training data produced no batches")
        while True:
            yield from batches
    for b in batches:
        yield b
    raise ValidationError("batch iterator exhausted before max_steps")
