"""Result record for one test: everything needed to report or replay it.

JSON encoding: interval endpoints use null for the infinities so the
document stays strict JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..pwl.intervals import FixedInterval, IntervalSet


def intervals_to_json(intervals: IntervalSet) -> list[list[float | None]]:
    return [
        [
            iv.lo if math.isfinite(iv.lo) else None,
            iv.hi if math.isfinite(iv.hi) else None,
        ]
        for iv in intervals
    ]


def intervals_from_json(doc: list[list[float | None]]) -> IntervalSet:
    return IntervalSet(
        [
            FixedInterval(
                -math.inf if lo is None else float(lo),
                math.inf if hi is None else float(hi),
            )
            for lo, hi in doc
        ]
    )


@dataclass(frozen=True)
class TestOutcome:
    region: list[int]
    lam: float
    z_obs: float
    sigma2: float
    truncation: IntervalSet
    p_selective: float
    p_naive: float
    p_bonferroni: float
    p_oc: float
    p_permutation: float | None
    plan_seed: int
    timings: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "region": list(self.region),
            "lambda": self.lam,
            "z_obs": self.z_obs,
            "sigma2": self.sigma2,
            "intervals": intervals_to_json(self.truncation),
            "p_selective": self.p_selective,
            "p_naive": self.p_naive,
            "p_bonferroni": self.p_bonferroni,
            "p_oc": self.p_oc,
            "p_permutation": self.p_permutation,
            "plan_seed": self.plan_seed,
            "timings": dict(self.timings),
            "counts": dict(self.counts),
        }
