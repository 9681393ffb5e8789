"""Canonical sets of integers stored as sorted, disjoint, non-adjacent closed intervals."""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np


class DistanceSet:
    """Immutable integer set. Adjacent runs are merged, so equality is structural.

    >>> DistanceSet([(0, 3), (4, 6), (9, 9)])
    DistanceSet('0-6,9-9')
    """

    __slots__ = ("_iv",)

    def __init__(self, intervals: Iterable[tuple[int, int]] = ()):
        spans = sorted((int(lo), int(hi)) for lo, hi in intervals)
        merged: list[tuple[int, int]] = []
        for lo, hi in spans:
            if lo > hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
            if merged and lo <= merged[-1][1] + 1:
                if hi > merged[-1][1]:
                    merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        self._iv = tuple(merged)

    @classmethod
    def from_mask(cls, mask: np.ndarray, offset: int = 0) -> "DistanceSet":
        """Runs of True in a boolean array; element i stands for integer offset + i."""
        m = np.asarray(mask, dtype=bool)
        if m.size == 0:
            return cls()
        edges = np.diff(np.concatenate(([0], m.astype(np.int8), [0])))
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1) - 1
        return cls(zip((starts + offset).tolist(), (stops + offset).tolist()))

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "DistanceSet":
        return cls((v, v) for v in values)

    @classmethod
    def parse(cls, text: str) -> "DistanceSet":
        text = text.strip()
        if not text:
            return cls()
        out = []
        for part in text.split(","):
            lo, _, hi = _split_signed(part.strip())
            out.append((int(lo), int(hi)))
        return cls(out)

    @property
    def intervals(self) -> tuple[tuple[int, int], ...]:
        return self._iv

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self._iv)

    def __len__(self) -> int:
        return len(self._iv)

    def __bool__(self) -> bool:
        return bool(self._iv)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistanceSet):
            return NotImplemented
        return self._iv == other._iv

    def __hash__(self) -> int:
        return hash(self._iv)

    def __contains__(self, x: int) -> bool:
        return any(lo <= x <= hi for lo, hi in self._iv)

    def __repr__(self) -> str:
        return f"DistanceSet({str(self)!r})"

    def __str__(self) -> str:
        return ",".join(f"{lo}-{hi}" for lo, hi in self._iv)

    def cardinality(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self._iv)

    def values(self) -> list[int]:
        return [x for lo, hi in self._iv for x in range(lo, hi + 1)]

    def max(self) -> int:
        if not self._iv:
            raise ValueError("max of empty set")
        return self._iv[-1][1]

    def widest(self) -> int:
        """Number of integers in the largest interval (0 for the empty set)."""
        return max((hi - lo + 1 for lo, hi in self._iv), default=0)

    def union(self, other: "DistanceSet") -> "DistanceSet":
        return DistanceSet(self._iv + other._iv)

    __or__ = union

    def intersection(self, other: "DistanceSet") -> "DistanceSet":
        out = []
        i = j = 0
        a, b = self._iv, other._iv
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return DistanceSet(out)

    __and__ = intersection

    def difference(self, other: "DistanceSet") -> "DistanceSet":
        out = []
        for lo, hi in self._iv:
            cur = lo
            for olo, ohi in other._iv:
                if ohi < cur or olo > hi:
                    continue
                if olo > cur:
                    out.append((cur, olo - 1))
                cur = max(cur, ohi + 1)
                if cur > hi:
                    break
            if cur <= hi:
                out.append((cur, hi))
        return DistanceSet(out)

    __sub__ = difference

    def complement(self, lo: int, hi: int) -> "DistanceSet":
        """``[lo, hi]`` minus this set."""
        return DistanceSet([(lo, hi)]).difference(self)


def _split_signed(part: str) -> tuple[str, str, str]:
    # "lo-hi" where either bound may carry a leading minus sign
    idx = part.index("-", 1)
    return part[:idx], "-", part[idx + 1 :]
