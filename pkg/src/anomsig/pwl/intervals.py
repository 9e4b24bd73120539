"""Closed intervals and disjoint interval unions on the real line.

Intervals carry the exact feasible range of the scalar line parameter as
selection constraints accumulate. Endpoints may be infinite. All sets are
closed; boundaries have measure zero for every downstream probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

DEFAULT_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class FixedInterval:
    """Closed interval [lo, hi]; lo <= hi, either end may be infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"interval lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def full(cls) -> "FixedInterval":
        return cls(-math.inf, math.inf)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def is_degenerate(self, tol: float = 0.0) -> bool:
        return self.width <= tol

    def contains(self, z: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= z <= self.hi + slack

    def intersect(self, other: "FixedInterval") -> "FixedInterval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return FixedInterval(lo, hi)

    def shifted_clamp(self, z: float) -> "FixedInterval":
        """Smallest enlargement of self that contains z."""
        return FixedInterval(min(self.lo, z), max(self.hi, z))


class IntervalSet:
    """Finite union of disjoint closed intervals, sorted by position."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Sequence[FixedInterval]):
        ivs = tuple(intervals)
        for left, right in zip(ivs, ivs[1:]):
            if left.hi >= right.lo:
                raise ValueError("IntervalSet requires sorted disjoint intervals")
        self.intervals = ivs

    @classmethod
    def from_parts(
        cls, parts: Iterable[FixedInterval], merge_tol: float = DEFAULT_MERGE_TOL
    ) -> "IntervalSet":
        """Sort, then coalesce overlaps and sub-tolerance gaps."""
        ordered = sorted(parts, key=lambda iv: (iv.lo, iv.hi))
        merged: list[FixedInterval] = []
        for iv in ordered:
            if merged and iv.lo - merged[-1].hi < merge_tol:
                last = merged[-1]
                merged[-1] = FixedInterval(last.lo, max(last.hi, iv.hi))
            else:
                merged.append(iv)
        return cls(merged)

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self) -> Iterator[FixedInterval]:
        return iter(self.intervals)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def __repr__(self) -> str:
        body = ", ".join(f"[{iv.lo:.6g}, {iv.hi:.6g}]" for iv in self.intervals)
        return f"IntervalSet({body})"

    def contains(self, z: float, slack: float = 0.0) -> bool:
        return any(iv.contains(z, slack) for iv in self.intervals)

    def nearest_endpoint_distance(self, z: float) -> float:
        ends = [e for iv in self.intervals for e in (iv.lo, iv.hi) if math.isfinite(e)]
        if not ends:
            return math.inf
        return min(abs(z - e) for e in ends)

    def total_width(self) -> float:
        return sum(iv.width for iv in self.intervals)

    def bounding(self) -> FixedInterval:
        if not self.intervals:
            raise ValueError("empty IntervalSet has no bounds")
        return FixedInterval(self.intervals[0].lo, self.intervals[-1].hi)


def intervals_union(
    parts: Iterable[FixedInterval], merge_tol: float = DEFAULT_MERGE_TOL
) -> IntervalSet:
    """Union of collected intervals with sub-tolerance gaps coalesced."""
    return IntervalSet.from_parts(parts, merge_tol=merge_tol)
