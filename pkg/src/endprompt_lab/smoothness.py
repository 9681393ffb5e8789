"""Derivative bounds for interpolated RoPE score polynomials.

A score ``S(d) = sum_j a_j cos(w_j d + phi_j)`` with every ``w_j <= w_max``
satisfies ``|S'| <= sum_j a_j w_j <= w_max * sum_j a_j`` and likewise
``|S''| <= w_max**2 * sum_j a_j``. Interpolation divides every ``w_j`` by the
scale, so both bounds shrink as the scale grows. :func:`bernstein_check`
measures the grid suprema and compares them against these bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidScaleError, UndefinedFrequencyError, UnsupportedOrderError
from .intervals import DistanceSet
from .plan import PlanSpec, gap_distances, observed_distances_closed_form
from .rope import AngularSpectrum, SubspaceDecomposition

CERT_TOL = 1e-9

CSV_HEADER = "amp_sum,omega_max,sup_S,sup_dS,sup_d2S,bound1,bound2,pass1,pass2"


@dataclass(frozen=True)
class TrigPolynomial:
    amplitudes: np.ndarray
    omegas: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.float64)
        w = np.asarray(self.omegas, dtype=np.float64)
        p = np.asarray(self.phases, dtype=np.float64)
        if not (a.shape == w.shape == p.shape) or a.ndim != 1:
            raise ValueError("amplitudes, omegas and phases must be 1-d and equally long")
        if np.any(a < 0):
            raise ValueError("amplitudes must be non-negative")
        if np.any(w <= 0):
            raise ValueError("frequencies must be positive")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "phases", p)

    @classmethod
    def from_components(cls, components) -> "TrigPolynomial":
        comps = list(components)
        if not comps:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0))
        a, w, p = zip(*comps)
        return cls(np.array(a), np.array(w), np.array(p))

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return list(zip(self.amplitudes.tolist(), self.omegas.tolist(), self.phases.tolist()))

    @property
    def omega_max(self) -> float:
        if self.omegas.size == 0:
            raise UndefinedFrequencyError("empty polynomial has no maximum frequency")
        return float(self.omegas.max())

    @property
    def amp_sum(self) -> float:
        return float(self.amplitudes.sum())


@dataclass(frozen=True)
class BoundReport:
    amp_sum: float
    omega_max: float
    sup_S: float
    sup_dS: float
    sup_d2S: float
    bound1: float
    bound2: float
    pass1: bool
    pass2: bool
    # literal form with the measured sup|S| in place of sum(a_j); informational
    literal_bound1: float = math.nan
    literal_bound2: float = math.nan

    def to_csv_row(self) -> str:
        reals = (self.amp_sum, self.omega_max, self.sup_S, self.sup_dS, self.sup_d2S, self.bound1, self.bound2)
        flags = ("true" if self.pass1 else "false", "true" if self.pass2 else "false")
        return ",".join([f"{x:.9g}" for x in reals] + list(flags))


def from_decomposition(dec: SubspaceDecomposition, spec: AngularSpectrum, s: float = 1.0) -> TrigPolynomial:
    if not s >= 1:
        raise InvalidScaleError(f"interpolation scale must be >= 1, got {s!r}")
    if len(dec) != spec.half:
        raise ValueError(f"decomposition has {len(dec)} subspaces, spectrum has {spec.half}")
    return TrigPolynomial(dec.amplitudes, spec.freqs / s, dec.phases)


def derivative(poly: TrigPolynomial, d, order: int = 0):
    """S, S' or S'' at ``d`` (scalar or array)."""
    if order not in (0, 1, 2):
        raise UnsupportedOrderError(f"derivative order must be 0, 1 or 2, got {order!r}")
    x = np.asarray(d, dtype=np.float64)
    ang = x[..., None] * poly.omegas + poly.phases
    if order == 0:
        out = np.cos(ang) @ poly.amplitudes
    elif order == 1:
        out = -(np.sin(ang) @ (poly.amplitudes * poly.omegas))
    else:
        out = -(np.cos(ang) @ (poly.amplitudes * poly.omegas**2))
    return float(out) if out.ndim == 0 else out


def evaluate(poly: TrigPolynomial, d):
    return derivative(poly, d, 0)


def grid_step(omega_max: float, d_lo: float, d_hi: float) -> float:
    return min(0.1 / omega_max, (d_hi - d_lo) / 1000.0)


_MAX_CANDIDATES = 4096


def _grid_sups(poly: TrigPolynomial, d_lo: float, d_hi: float) -> tuple[list[float], float]:
    """Grid maxima of |S|, |S'|, |S''| followed by a 10x refinement pass.

    The coarse grid can under-read a peak by at most ``step**2 / 8`` times the
    curvature bound ``sum_j a_j w_j**(k+2)``, so every grid point within that
    margin of the coarse maximum is refined, not just the argmax.
    """
    if not d_lo < d_hi:
        raise ValueError(f"empty domain [{d_lo}, {d_hi}]")
    step = grid_step(poly.omega_max, d_lo, d_hi)
    n = int(math.ceil((d_hi - d_lo) / step)) + 1
    grid = _backend.trig_grid_abs(poly.amplitudes, poly.omegas, poly.phases, d_lo, d_hi, step, n)
    offsets = np.linspace(-step, step, 21)
    sups = []
    for order in range(3):
        vals = grid[order]
        best = float(vals.max())
        curvature = float(np.sum(poly.amplitudes * poly.omegas ** (order + 2)))
        margin = curvature * step * step / 8.0 * 1.01 + 1e-15
        cand = np.flatnonzero(vals >= best - margin)
        if cand.size > _MAX_CANDIDATES:
            cand = cand[np.argsort(vals[cand], kind="stable")[-_MAX_CANDIDATES:]]
        centres = np.minimum(d_lo + cand * step, d_hi)
        fine = np.clip(centres[:, None] + offsets, d_lo, d_hi).ravel()
        refined = float(np.max(np.abs(derivative(poly, fine, order))))
        sups.append(max(best, refined))
    return sups, step


def sup_estimate(poly: TrigPolynomial, d_lo: float, d_hi: float, order: int = 0) -> float:
    if order not in (0, 1, 2):
        raise UnsupportedOrderError(f"derivative order must be 0, 1 or 2, got {order!r}")
    sups, _ = _grid_sups(poly, d_lo, d_hi)
    return sups[order]


def bernstein_check(poly: TrigPolynomial, d_lo: float, d_hi: float, tol: float = CERT_TOL) -> BoundReport:
    amp_sum = poly.amp_sum
    w = poly.omega_max
    if amp_sum == 0.0:
        sup_S = sup_dS = sup_d2S = 0.0
    else:
        (sup_S, sup_dS, sup_d2S), _ = _grid_sups(poly, d_lo, d_hi)
    bound1 = w * amp_sum
    bound2 = w * w * amp_sum
    return BoundReport(
        amp_sum=amp_sum,
        omega_max=w,
        sup_S=sup_S,
        sup_dS=sup_dS,
        sup_d2S=sup_d2S,
        bound1=bound1,
        bound2=bound2,
        pass1=sup_dS <= bound1 + tol,
        pass2=sup_d2S <= bound2 + tol,
        literal_bound1=w * sup_S,
        literal_bound2=w * w * sup_S,
    )


@dataclass(frozen=True)
class StabilityProfile:
    distances: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    in_gap: np.ndarray
    gap_max_slope: float
    observed: DistanceSet
    gap: DistanceSet

    def __len__(self) -> int:
        return int(self.distances.size)


def _stratified(ds: DistanceSet, count: int) -> np.ndarray:
    """``count`` integer distances spread evenly over the members of ``ds``."""
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    total = ds.cardinality()
    ranks = np.unique(np.round(np.linspace(0, total - 1, count)).astype(np.int64))
    if ranks.size < count:
        ranks = np.resize(ranks, count)
    starts = np.cumsum([0] + [hi - lo + 1 for lo, hi in ds])
    los = np.array([lo for lo, _ in ds])
    which = np.searchsorted(starts, ranks, side="right") - 1
    return los[which] + (ranks - starts[which])


def gap_stability_profile(
    dec: SubspaceDecomposition,
    spec: AngularSpectrum,
    s: float,
    plan_spec: PlanSpec,
    samples: int,
) -> StabilityProfile:
    """Score and slope sampled across observed and gap distances.

    Samples are split between the observed set and the gap in proportion to
    their sizes (at least one each). ``gap_max_slope`` is the grid sup of
    ``|S'|`` over the whole gap interval, not just over the samples.
    """
    gap = gap_distances(plan_spec)
    observed = observed_distances_closed_form(plan_spec)
    poly = from_decomposition(dec, spec, s)
    n_obs = observed.cardinality()
    n_gap = gap.cardinality()
    k_gap = min(samples - 1, max(1, round(samples * n_gap / (n_obs + n_gap)))) if samples > 1 else samples
    k_obs = samples - k_gap
    d = np.concatenate((_stratified(observed, k_obs), _stratified(gap, k_gap)))
    order = np.argsort(d, kind="stable")
    d = d[order]
    in_gap = np.concatenate((np.zeros(k_obs, bool), np.ones(k_gap, bool)))[order]
    (lo, hi), = gap.intervals
    if poly.amp_sum == 0.0:
        gap_max = 0.0
    elif lo == hi:
        gap_max = abs(derivative(poly, float(lo), 1))
    else:
        gap_max = sup_estimate(poly, float(lo), float(hi), 1)
    return StabilityProfile(
        distances=d,
        values=np.asarray(derivative(poly, d.astype(np.float64), 0)),
        slopes=np.asarray(derivative(poly, d.astype(np.float64), 1)),
        in_gap=in_gap,
        gap_max_slope=gap_max,
        observed=observed,
        gap=gap,
    )
