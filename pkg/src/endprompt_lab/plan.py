"""Positional plans: which assigned index every physical token receives.

Three kinds are supported:

``endprompt``
    context tokens keep ``0..a-1``; the ``b`` end-prompt tokens are moved to
    ``L-b..L-1``, so one short sequence realizes both local and near-``L``
    relative distances.
``pose``
    the sequence is cut into contiguous chunks and each chunk is shifted right
    by a random cumulative skip (a chunked position-skipping baseline).
``full``
    plain contiguous indices.

Effective positions divide the assigned indices by the interpolation scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import (
    CapacityError,
    EmptySequenceError,
    GapConditionError,
    InvalidScaleError,
    OverlapError,
    ValidationError,
)
from .intervals import DistanceSet

PLAN_KINDS = ("endprompt", "pose", "full")


@dataclass(frozen=True)
class PlanSpec:
    a: int
    b: int
    L: int
    s: float = 1.0

    def __post_init__(self):
        if self.a < 1 or self.b < 1:
            raise ValidationError(f"segment lengths must be >= 1 (a={self.a}, b={self.b})")
        if self.a + self.b > self.L:
            raise OverlapError(f"a + b = {self.a + self.b} exceeds target length L = {self.L}")
        if not self.s >= 1:
            raise InvalidScaleError(f"interpolation scale must be >= 1, got {self.s!r}")

    @property
    def gap_condition(self) -> bool:
        return self.L - self.a - self.b >= max(self.a, self.b)


@dataclass(frozen=True, eq=False)
class PositionPlan:
    assigned: np.ndarray
    scale: float = 1.0
    kind: str = "full"

    def __post_init__(self):
        arr = np.array(self.assigned, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise EmptySequenceError("a plan needs at least one position")
        if np.any(np.diff(arr) <= 0):
            raise ValidationError("assigned positions must be strictly increasing")
        if arr[0] < 0:
            raise ValidationError("assigned positions must be non-negative")
        if not self.scale >= 1:
            raise InvalidScaleError(f"interpolation scale must be >= 1, got {self.scale!r}")
        if self.kind not in PLAN_KINDS:
            raise ValidationError(f"unknown plan kind {self.kind!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "assigned", arr)

    def __len__(self) -> int:
        return int(self.assigned.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PositionPlan):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.scale == other.scale
            and np.array_equal(self.assigned, other.assigned)
        )


@dataclass(frozen=True)
class CoverageReport:
    observed: DistanceSet
    gap: DistanceSet
    coverage_fraction: float
    largest_gap_width: int
    kind: str = "full"
    a: int = 0
    b: int = 0
    L: int = 0
    s: float = 1.0

    def to_record(self) -> str:
        """One-line ``key=value`` record; ``intervals`` lists the observed set."""
        return (
            f"kind={self.kind} a={self.a} b={self.b} L={self.L} s={_fmt_scale(self.s)} "
            f"coverage_fraction={self.coverage_fraction:.6f} "
            f"largest_gap_width={self.largest_gap_width} intervals={self.observed}"
        )

    @classmethod
    def from_record(cls, line: str) -> "CoverageReport":
        fields = dict(tok.split("=", 1) for tok in line.split())
        L = int(fields["L"])
        observed = DistanceSet.parse(fields["intervals"])
        return cls(
            observed=observed,
            gap=observed.complement(0, L - 1),
            coverage_fraction=float(fields["coverage_fraction"]),
            largest_gap_width=int(fields["largest_gap_width"]),
            kind=fields["kind"],
            a=int(fields["a"]),
            b=int(fields["b"]),
            L=L,
            s=float(fields["s"]),
        )


def _fmt_scale(s: float) -> str:
    return str(int(s)) if float(s).is_integer() else repr(float(s))


def endprompt_plan(spec: PlanSpec) -> PositionPlan:
    a, b, L = spec.a, spec.b, spec.L
    assigned = np.concatenate((np.arange(a), np.arange(L - b, L)))
    return PositionPlan(assigned, spec.s, "endprompt")


def full_plan(n: int, s: float = 1.0) -> PositionPlan:
    if n < 1:
        raise EmptySequenceError("full plan needs n >= 1")
    return PositionPlan(np.arange(n), s, "full")


def chunk_sizes(n: int, chunks: int) -> list[int]:
    """Near-equal split; the first ``n % chunks`` chunks get one extra token."""
    q, r = divmod(n, chunks)
    return [q + (1 if c < r else 0) for c in range(chunks)]


def draw_pose_skips(chunks: int, budget: int, rng: np.random.Generator) -> list[int]:
    """Per-chunk skips ``u_c`` (``u_0 = 0``) whose cumulative sum stays within ``budget``.

    Cumulative offsets are sorted uniform draws from ``[0, budget]``.
    """
    offsets = np.sort(rng.integers(0, budget + 1, size=chunks - 1))
    return [0] + np.diff(np.concatenate(([0], offsets))).tolist()


def pose_plan_from_skips(n: int, chunks: int, L: int, s: float, skips) -> PositionPlan:
    sizes = chunk_sizes(n, chunks)
    if len(skips) != chunks or skips[0] != 0 or min(skips) < 0:
        raise ValidationError(f"need {chunks} non-negative skips starting with 0, got {skips}")
    if sum(skips) > L - n:
        raise CapacityError(f"total skip {sum(skips)} exceeds budget L - n = {L - n}")
    shift = np.repeat(np.cumsum(skips), sizes)
    return PositionPlan(np.arange(n) + shift, s, "pose")


def pose_plan(n: int, chunks: int, L: int, s: float, rng: np.random.Generator) -> PositionPlan:
    if chunks < 2 or chunks > n:
        raise ValidationError(f"chunks must lie in [2, n={n}], got {chunks}")
    if L - n < 0:
        raise CapacityError(f"sequence of {n} tokens does not fit target length {L}")
    return pose_plan_from_skips(n, chunks, L, s, draw_pose_skips(chunks, L - n, rng))


def check_pose_structure(assigned, chunks: int, L: int) -> bool:
    """True iff ``assigned`` could have come from :func:`pose_plan` with these arguments."""
    arr = np.asarray(assigned, dtype=np.int64)
    n = arr.size
    if arr[0] != 0 or arr[-1] > L - 1 or np.any(np.diff(arr) <= 0):
        return False
    bounds = np.cumsum([0] + chunk_sizes(n, chunks))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if np.any(np.diff(arr[lo:hi]) != 1):
            return False
    return True


def effective_positions(plan: PositionPlan) -> np.ndarray:
    return plan.assigned / plan.scale


def observed_distances_bruteforce(plan: PositionPlan) -> DistanceSet:
    """Every causal difference ``assigned[l] - assigned[r]``, ``r <= l``, by enumeration."""
    span = int(plan.assigned[-1] - plan.assigned[0]) + 1
    return DistanceSet.from_mask(_backend.mark_distances(plan.assigned, span))


def observed_distances_closed_form(spec: PlanSpec) -> DistanceSet:
    a, b, L = spec.a, spec.b, spec.L
    return DistanceSet([(0, a - 1), (0, b - 1), (L - a - b + 1, L - 1)])


def gap_distances(spec: PlanSpec) -> DistanceSet:
    if not spec.gap_condition:
        raise GapConditionError(
            f"L - a - b = {spec.L - spec.a - spec.b} < max(a, b) = {max(spec.a, spec.b)}"
        )
    return DistanceSet([(max(spec.a, spec.b), spec.L - spec.a - spec.b)])


def coverage_report(plan: PositionPlan, L: int, a: int | None = None, b: int | None = None) -> CoverageReport:
    if plan.assigned[-1] > L - 1:
        raise CapacityError(f"plan reaches {plan.assigned[-1]} beyond L - 1 = {L - 1}")
    window = DistanceSet([(0, L - 1)])
    observed = observed_distances_bruteforce(plan) & window
    gap = window - observed
    if a is None:
        a = len(plan)
        b = 0
    return CoverageReport(
        observed=observed,
        gap=gap,
        coverage_fraction=observed.cardinality() / L,
        largest_gap_width=gap.widest(),
        kind=plan.kind,
        a=a,
        b=b or 0,
        L=L,
        s=plan.scale,
    )


def make_plan(kind: str, a: int, b: int, L: int, s: float = 1.0, rng=None, chunks: int = 2) -> PositionPlan:
    """Dispatch on plan kind for a sequence of ``a`` context plus ``b`` prompt tokens."""
    if kind == "endprompt":
        return endprompt_plan(PlanSpec(a, b, L, s))
    if kind == "full":
        return full_plan(a + b, s)
    if kind == "pose":
        if rng is None:
            raise ValidationError("pose plans need a random generator")
        return pose_plan(a + b, chunks, L, s, rng)
    raise ValidationError(f"unknown plan kind {kind!r}")
