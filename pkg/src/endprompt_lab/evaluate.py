"""Toy long-context evaluation: single-needle retrieval and distance-bucketed NLL.

Evaluation always feeds contiguous positions ``0..T_eval-1`` divided by the
interpolation scale; the two-segment training mapping is never used here.

Layout of one task (``T_eval`` tokens in total)::

    [filler .. key value .. filler] [sep key] [value]
     haystack (needle at offset)     query     answer

Exact match is read off a single teacher-forced forward pass: by causality the
logits at the answer positions are the ones greedy decoding would see as long
as every earlier answer token was predicted correctly, so "all argmaxes equal
the answer" is the same event as "greedy decoding reproduces the answer".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import EOT_ID
from .errors import RangeError, TaskMismatchError, ValidationError
from .model import ModelConfig, Params, forward, log_softmax

EVAL_ASSUMPTION = "contiguous interpolated positions p/s at evaluation"


@dataclass(frozen=True)
class NiahConfig:
    T_eval: int = 1024
    key_len: int = 2
    value_len: int = 2
    vocab: tuple[int, ...] = tuple(range(97, 113))  # bytes 'a'..'p'
    depth_fraction: float = 0.0
    separator: int = EOT_ID

    def __post_init__(self):
        if self.key_len < 1 or self.value_len < 1:
            raise ValidationError("key and value need at least one token")
        if not 0.0 <= self.depth_fraction <= 1.0:
            raise ValidationError("depth_fraction must lie in [0, 1]")
        if len(set(self.vocab)) <= self.key_len + self.value_len:
            raise ValidationError("vocab too small to leave filler tokens after drawing the needle")
        if self.separator in self.vocab:
            raise ValidationError("separator must not be a haystack token")
        if self.reserved > self.T_eval:
            raise ValidationError(f"T_eval={self.T_eval} cannot hold needle, query and answer")

    @property
    def query_len(self) -> int:
        return 1 + self.key_len

    @property
    def reserved(self) -> int:
        return self.key_len + self.value_len + self.query_len + self.value_len

    @property
    def needle_offset(self) -> int:
        return int(math.floor(self.depth_fraction * (self.T_eval - self.reserved)))

    @property
    def retrieval_distance(self) -> int:
        """Last query token to first value token of the needle."""
        return (self.T_eval - self.value_len - 1) - (self.needle_offset + self.key_len)


@dataclass(frozen=True, eq=False)
class NiahTask:
    haystack: np.ndarray  # includes the needle
    key: np.ndarray
    value: np.ndarray
    needle_offset: int
    query: np.ndarray
    answer: np.ndarray
    T_eval: int

    @property
    def prompt(self) -> np.ndarray:
        return np.concatenate((self.haystack, self.query))

    @property
    def full(self) -> np.ndarray:
        return np.concatenate((self.haystack, self.query, self.answer))

    @property
    def distance(self) -> int:
        return (self.T_eval - self.answer.size - 1) - (self.needle_offset + self.key.size)


def gen_niah(rng: np.random.Generator, cfg: NiahConfig) -> NiahTask:
    vocab = np.asarray(cfg.vocab, dtype=np.int64)
    needle_syms = rng.choice(vocab, size=cfg.key_len + cfg.value_len, replace=False)
    key, value = needle_syms[: cfg.key_len], needle_syms[cfg.key_len :]
    filler_vocab = np.setdiff1d(vocab, needle_syms)
    hay_len = cfg.T_eval - cfg.query_len - cfg.value_len
    haystack = rng.choice(filler_vocab, size=hay_len)
    off = cfg.needle_offset
    haystack[off : off + needle_syms.size] = needle_syms
    query = np.concatenate(([cfg.separator], key))
    return NiahTask(haystack, key, value, off, query, value.copy(), cfg.T_eval)


def gen_tasks(seed: int, cfg: NiahConfig, n: int) -> list[NiahTask]:
    rng = np.random.default_rng(seed)
    return [gen_niah(rng, cfg) for _ in range(n)]


def eval_positions(T: int, s: float) -> np.ndarray:
    return np.arange(T, dtype=np.float64) / s


@dataclass
class TaskScores:
    correct: np.ndarray  # bool per task
    answer_nll: np.ndarray  # summed NLL of the answer tokens per task
    distances: np.ndarray


def score_tasks(
    cfg: ModelConfig,
    params: Params,
    tasks: Sequence[NiahTask],
    s: float,
    max_L: int | None = None,
    batch_size: int = 8,
    shift: float = 0.0,
) -> TaskScores:
    if not tasks:
        raise ValidationError("no tasks to evaluate")
    T = tasks[0].T_eval
    if any(t.T_eval != T for t in tasks):
        raise ValidationError("tasks in one call must share T_eval")
    if max_L is not None and T > max_L:
        raise RangeError(f"T_eval={T} exceeds the supported context L={max_L}")
    pos = eval_positions(T, s) + shift
    correct, nll, dist = [], [], []
    for start in range(0, len(tasks), batch_size):
        chunk = tasks[start : start + batch_size]
        seqs = np.stack([t.full for t in chunk])
        k = chunk[0].answer.size
        logits = forward(cfg, params, seqs, np.broadcast_to(pos, seqs.shape))
        ans_logits = logits[:, T - k - 1 : T - 1]
        targets = seqs[:, T - k :]
        correct.append(np.all(np.argmax(ans_logits, axis=-1) == targets, axis=1))
        lp = np.take_along_axis(log_softmax(ans_logits), targets[..., None], -1)[..., 0]
        nll.append(-lp.sum(axis=1))
        dist.extend(t.distance for t in chunk)
    return TaskScores(np.concatenate(correct), np.concatenate(nll), np.asarray(dist))


def make_buckets(a: int, b: int, L: int) -> list[tuple[int, int]]:
    """Local, gap and cross-segment regions of the two-segment plan, covering ``[0, L-1]``."""
    lo_gap, hi_gap = max(a, b), L - a - b
    buckets = [(0, a - 1)]
    if a <= lo_gap - 1:
        buckets.append((a, lo_gap - 1))
    if lo_gap <= hi_gap:
        buckets.append((lo_gap, hi_gap))
    buckets.append((hi_gap + 1, L - 1))
    return buckets


def bucket_name(lo: int, hi: int) -> str:
    return f"nll_{lo}_{hi}"


@dataclass
class EvalReport:
    model: str
    family: str
    T_eval: int
    n: int
    accuracy: float
    buckets: list[tuple[int, int]] = field(default_factory=list)
    bucket_nll: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return ["model", "family", "T_eval", "n", "accuracy"] + [bucket_name(lo, hi) for lo, hi in self.buckets]

    def row(self) -> list[str]:
        nlls = ["NA" if math.isnan(x) else f"{x:.6f}" for x in self.bucket_nll]
        return [self.model, self.family, str(self.T_eval), str(self.n), f"{self.accuracy:.6f}"] + nlls

    def to_csv(self) -> str:
        return ",".join(self.columns) + "\n" + ",".join(self.row()) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header, values = lines[0].split(","), lines[1].split(",")
        buckets = []
        for col in header[5:]:
            _, lo, hi = col.split("_")
            buckets.append((int(lo), int(hi)))
        return cls(
            model=values[0],
            family=values[1],
            T_eval=int(values[2]),
            n=int(values[3]),
            accuracy=float(values[4]),
            buckets=buckets,
            bucket_nll=[math.nan if v == "NA" else float(v) for v in values[5:]],
        )

    def nll_for(self, lo: int, hi: int) -> float:
        return self.bucket_nll[self.buckets.index((lo, hi))]


def distance_profile(scores: TaskScores, buckets: Sequence[tuple[int, int]]) -> list[float]:
    """Mean answer NLL per distance bucket (NaN for buckets with no task)."""
    out = []
    for lo, hi in buckets:
        sel = (scores.distances >= lo) & (scores.distances <= hi)
        out.append(float(scores.answer_nll[sel].mean()) if sel.any() else math.nan)
    return out


def bucket_regions(buckets: Sequence[tuple[int, int]], a: int, b: int, L: int) -> list[str]:
    """``observed`` / ``gap`` / ``mixed`` label per bucket relative to the training plan."""
    from .plan import PlanSpec, observed_distances_closed_form
    from .intervals import DistanceSet

    obs = observed_distances_closed_form(PlanSpec(a, b, L))
    labels = []
    for lo, hi in buckets:
        inter = (DistanceSet([(lo, hi)]) & obs).cardinality()
        labels.append("observed" if inter == hi - lo + 1 else "gap" if inter == 0 else "mixed")
    return labels


def eval_retrieval(
    cfg: ModelConfig,
    params: Params,
    tasks: Sequence[NiahTask],
    s: float,
    model_id: str = "model",
    max_L: int | None = None,
    buckets: Sequence[tuple[int, int]] | None = None,
    family: str = "niah_single",
    batch_size: int = 8,
) -> EvalReport:
    scores = score_tasks(cfg, params, tasks, s, max_L=max_L, batch_size=batch_size)
    T = tasks[0].T_eval
    buckets = list(buckets) if buckets else [(0, T - 1)]
    return EvalReport(
        model=model_id,
        family=family,
        T_eval=T,
        n=len(tasks),
        accuracy=float(scores.correct.mean()),
        buckets=buckets,
        bucket_nll=distance_profile(scores, buckets),
        meta={"positions": EVAL_ASSUMPTION, "scale": s},
    )


def compare(reports: Sequence[EvalReport]) -> str:
    """CSV table, one row per report, with a trailing ``best`` column.

    ``best`` lists the metrics on which that row wins (highest accuracy, lowest
    NLL per bucket), joined by ``;``; ties mark every tied row.
    """
    if not reports:
        raise ValidationError("nothing to compare")
    fam = {(r.family, r.T_eval) for r in reports}
    if len(fam) != 1:
        raise TaskMismatchError(f"reports mix task families / lengths: {sorted(fam)}")
    cols = reports[0].columns
    if any(r.columns != cols for r in reports):
        raise TaskMismatchError("reports have different bucket columns")
    marks: list[list[str]] = [[] for _ in reports]
    acc = [r.accuracy for r in reports]
    for i, a in enumerate(acc):
        if a == max(acc):
            marks[i].append("accuracy")
    for j, (lo, hi) in enumerate(reports[0].buckets):
        vals = [r.bucket_nll[j] for r in reports]
        finite = [v for v in vals if not math.isnan(v)]
        if not finite:
            continue
        for i, v in enumerate(vals):
            if v == min(finite):
                marks[i].append(bucket_name(lo, hi))
    lines = [",".join(cols + ["best"])]
    for r, m in zip(reports, marks):
        lines.append(",".join(r.row() + [";".join(m)]))
    return "\n".join(lines) + "\n"
