"""Byte corpus ingestion, end-prompt sample construction and the JSONL sample format.

A sample is ``context ++ cue``: ``a`` corpus bytes followed by one terminal cue
drawn uniformly from a :class:`CueSet`. Loss weights index *targets*: the
prediction of token ``t + 1`` carries ``context_weight`` when that token is
part of the context and ``prompt_weight`` when it is a cue token (so the
boundary prediction, last context token -> first cue token, is a prompt
prediction).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, GroupingError, ParseError, TokenRangeError, ValidationError
from .plan import PLAN_KINDS, check_pose_structure, make_plan
from .training import Batch

BYTE_VOCAB = 256
EOT_ID = 256  # reserved id past the byte range; single-token cue and query separator
VOCAB_SIZE = BYTE_VOCAB + 1

EP1_TEXT = "This is the end of text, please pay attention here"
EP3_TEXT = "End."

SAMPLE_KEYS = ("tokens", "positions", "weights", "meta")
META_KEYS = ("plan", "a", "b", "L", "s", "cue_id")


@dataclass(frozen=True)
class Cue:
    id: str
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.tokens:
            raise ValidationError(f"cue {self.id!r} is empty")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class CueSet:
    cues: tuple[Cue, ...]

    def __post_init__(self):
        if not self.cues:
            raise ValidationError("cue set must not be empty")
        ids = [c.id for c in self.cues]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate cue ids in {ids}")

    def __len__(self) -> int:
        return len(self.cues)

    def __getitem__(self, key: str) -> Cue:
        for c in self.cues:
            if c.id == key:
                return c
        raise KeyError(key)

    @property
    def max_len(self) -> int:
        return max(len(c) for c in self.cues)

    def only(self, cue_id: str) -> "CueSet":
        return CueSet((self[cue_id],))

    def draw(self, rng: np.random.Generator) -> Cue:
        return self.cues[int(rng.integers(len(self.cues)))]


def encode(text: str) -> tuple[int, ...]:
    return tuple(text.encode("utf-8"))


def default_cues() -> CueSet:
    """Explicit sentence, single reserved terminal token, minimal string."""
    return CueSet((
        Cue("EP_1", encode(EP1_TEXT)),
        Cue("EP_2", (EOT_ID,)),
        Cue("EP_3", encode(EP3_TEXT)),
    ))


DESK_EP1_TEXT = "Pay heed"


def desk_cues() -> CueSet:
    """Cue set whose longest member is 8 tokens, so a=120 samples stay within 128.

    The explicit-instruction cue is shortened; the other two are unchanged.
    """
    return CueSet((
        Cue("EP_1", encode(DESK_EP1_TEXT)),
        Cue("EP_2", (EOT_ID,)),
        Cue("EP_3", encode(EP3_TEXT)),
    ))


def ingest(stream: IO[bytes] | bytes | np.ndarray, a: int) -> list[np.ndarray]:
    """Non-overlapping windows of ``a`` tokens; the tail shorter than ``a`` is dropped.

    Bytes and binary streams are read as byte tokens. An integer array is taken
    as token ids directly, which lets a corpus carry the end-of-text id.
    """
    if a < 1:
        raise ValidationError("window length must be >= 1")
    if isinstance(stream, np.ndarray):
        arr = stream.astype(np.int64).ravel()
        if arr.size and (arr.min() < 0 or arr.max() >= VOCAB_SIZE):
            raise TokenRangeError(f"token ids must lie in [0, {VOCAB_SIZE})")
    else:
        raw = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
        arr = np.frombuffer(bytes(raw), dtype=np.uint8).astype(np.int64)
    n = arr.size // a
    return [arr[i * a : (i + 1) * a].copy() for i in range(n)]


@dataclass(frozen=True)
class SampleSpec:
    a: int
    L: int
    s: float = 1.0
    plan_kind: str = "endprompt"
    prompt_weight: float = 0.1
    context_weight: float = 1.0
    pose_chunks: int = 2

    def __post_init__(self):
        if self.a < 1:
            raise ValidationError("context length a must be >= 1")
        if not 0 < self.prompt_weight <= 1:
            raise ValidationError(f"prompt weight must lie in (0, 1], got {self.prompt_weight}")
        if self.context_weight < 0:
            raise ValidationError("context weight must be non-negative")
        if self.plan_kind not in PLAN_KINDS:
            raise ValidationError(f"unknown plan kind {self.plan_kind!r}")
        if not self.s >= 1:
            raise ValidationError(f"scale must be >= 1, got {self.s}")
        if self.plan_kind == "pose" and self.pose_chunks != 2:
            # the sample format revalidates pose positions as two chunks
            raise ValidationError("chunked samples support exactly two chunks")


@dataclass(frozen=True, eq=False)
class TrainingSample:
    tokens: np.ndarray
    positions: np.ndarray
    weights: np.ndarray
    plan: str
    a: int
    b: int
    L: int
    s: float
    cue_id: str

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrainingSample):
            return NotImplemented
        return (
            np.array_equal(self.tokens, other.tokens)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.weights, other.weights)
            and (self.plan, self.a, self.b, self.L, self.s, self.cue_id)
            == (other.plan, other.a, other.b, other.L, other.s, other.cue_id)
        )

    @property
    def group_key(self) -> tuple[int, int]:
        return (self.a, self.b)


def target_weights(a: int, b: int, context_weight: float, prompt_weight: float) -> np.ndarray:
    w = np.full(a + b - 1, float(prompt_weight))
    w[: a - 1] = context_weight
    return w


def make_sample(
    context: np.ndarray,
    cue_set: CueSet,
    spec: SampleSpec,
    rng: np.random.Generator,
    cue: Cue | None = None,
) -> TrainingSample:
    context = np.asarray(context, dtype=np.int64)
    if context.size != spec.a:
        raise ValidationError(f"context window has {context.size} tokens, spec wants {spec.a}")
    cue = cue_set.draw(rng) if cue is None else cue
    b = len(cue)
    if spec.a + b > spec.L:
        raise CapacityError(f"cue {cue.id!r} of length {b} does not fit: a + b = {spec.a + b} > L = {spec.L}")
    plan = make_plan(spec.plan_kind, spec.a, b, spec.L, spec.s, rng=rng, chunks=spec.pose_chunks)
    # weights are rounded to the 6-decimal wire precision up front so files round-trip exactly
    w = np.array([float(f"{x:.6f}") for x in target_weights(spec.a, b, spec.context_weight, spec.prompt_weight)])
    return TrainingSample(
        tokens=np.concatenate((context, np.asarray(cue.tokens, dtype=np.int64))),
        positions=plan.assigned.copy(),
        weights=w,
        plan=spec.plan_kind,
        a=spec.a,
        b=b,
        L=spec.L,
        s=float(spec.s),
        cue_id=cue.id,
    )


def build_samples(
    windows: Iterable[np.ndarray],
    cue_set: CueSet,
    spec: SampleSpec,
    rng: np.random.Generator,
    fixed_cue: str | None = None,
) -> list[TrainingSample]:
    """One sample per window. ``fixed_cue`` pins a single cue for the whole run."""
    cue = cue_set[fixed_cue] if fixed_cue else None
    return [make_sample(w, cue_set, spec, rng, cue=cue) for w in windows]


# -- serialization ------------------------------------------------------------------

def _fmt_scale(s: float):
    return int(s) if float(s).is_integer() else float(s)


def sample_to_line(sample: TrainingSample) -> str:
    weights = ",".join(f"{w:.6f}" for w in sample.weights)
    head = json.dumps({"tokens": sample.tokens.tolist(), "positions": sample.positions.tolist()}, separators=(",", ":"))
    meta = json.dumps(
        {"plan": sample.plan, "a": sample.a, "b": sample.b, "L": sample.L, "s": _fmt_scale(sample.s), "cue_id": sample.cue_id},
        separators=(",", ":"),
    )
    return head[:-1] + f',"weights":[{weights}],"meta":{meta}}}'


def write_samples(samples: Iterable[TrainingSample], sink: IO[str]) -> int:
    n = 0
    for s in samples:
        sink.write(sample_to_line(s))
        sink.write("\n")
        n += 1
    return n


def validate_sample(sample: TrainingSample) -> None:
    n = sample.a + sample.b
    if sample.tokens.size != n or sample.positions.size != n:
        raise ValidationError(f"expected {n} tokens and positions, got {sample.tokens.size}/{sample.positions.size}")
    if sample.weights.size != n - 1:
        raise ValidationError(f"expected {n - 1} weights, got {sample.weights.size}")
    if np.any(sample.tokens < 0) or np.any(sample.tokens >= VOCAB_SIZE):
        raise ValidationError("token id out of range")
    if np.any(sample.weights < 0):
        raise ValidationError("negative loss weight")
    if sample.plan == "pose":
        if not check_pose_structure(sample.positions, 2, sample.L):
            raise ValidationError("positions are not a valid two-chunk pose plan for the declared meta")
        return
    expected = make_plan(sample.plan, sample.a, sample.b, sample.L, sample.s).assigned
    if not np.array_equal(expected, sample.positions):
        raise ValidationError(f"positions do not match the declared {sample.plan!r} plan")


def line_to_sample(line: str, lineno: int = 0) -> TrainingSample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or tuple(obj) != SAMPLE_KEYS:
        raise ParseError(lineno, f"expected keys {list(SAMPLE_KEYS)}")
    meta = obj["meta"]
    if not isinstance(meta, dict) or tuple(meta) != META_KEYS:
        raise ParseError(lineno, f"expected meta keys {list(META_KEYS)}")
    try:
        sample = TrainingSample(
            tokens=np.asarray(obj["tokens"], dtype=np.int64),
            positions=np.asarray(obj["positions"], dtype=np.int64),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            plan=str(meta["plan"]),
            a=int(meta["a"]),
            b=int(meta["b"]),
            L=int(meta["L"]),
            s=float(meta["s"]),
            cue_id=str(meta["cue_id"]),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(lineno, str(exc)) from None
    try:
        validate_sample(sample)
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None
    return sample


def read_samples(source: IO[str] | str) -> Iterator[TrainingSample]:
    if isinstance(source, str):
        source = io.StringIO(source)
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        yield line_to_sample(line, lineno)


# -- batching -------------------------------------------------------------------------

def batch_from_samples(samples: Sequence[TrainingSample]) -> Batch:
    keys = {s.group_key for s in samples}
    if len(keys) != 1:
        raise GroupingError(f"a batch must share (a, b); got {sorted(keys)}")
    scales = {s.s for s in samples}
    if len(scales) != 1:
        raise GroupingError(f"a batch must share one scale; got {sorted(scales)}")
    return Batch(
        tokens=np.stack([s.tokens for s in samples]),
        positions=np.stack([s.positions for s in samples]),
        scale=samples[0].s,
        weights=np.stack([s.weights for s in samples]),
    )


def group_by_shape(samples: Iterable[TrainingSample]) -> dict[tuple[int, int], list[TrainingSample]]:
    """Stable grouping by ``(a, b)``; groups appear in first-seen order."""
    groups: dict[tuple[int, int], list[TrainingSample]] = {}
    for s in samples:
        groups.setdefault(s.group_key, []).append(s)
    return groups


def batcher(samples: Iterable[TrainingSample], batch_size: int) -> Iterator[Batch]:
    """Consecutive batches of ``batch_size`` (last may be short) in input order.

    Input must already be homogeneous in ``(a, b)``; use :func:`group_by_shape`
    for mixed-cue sample lists.
    """
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    chunk: list[TrainingSample] = []
    for s in samples:
        if chunk and s.group_key != chunk[0].group_key:
            raise GroupingError(f"mixed sample shapes {chunk[0].group_key} and {s.group_key} in one group")
        chunk.append(s)
        if len(chunk) == batch_size:
            yield batch_from_samples(chunk)
            chunk = []
    if chunk:
        yield batch_from_samples(chunk)


def shuffled_batches(samples: Sequence[TrainingSample], batch_size: int, rng: np.random.Generator) -> list[Batch]:
    """Shuffle, group by shape, batch each group, then shuffle the batch order."""
    order = rng.permutation(len(samples))
    groups = group_by_shape(samples[i] for i in order)
    batches = [b for g in groups.values() for b in batcher(g, batch_size)]
    return [batches[i] for i in rng.permutation(len(batches))]
