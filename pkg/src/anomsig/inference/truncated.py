"""Truncated-Gaussian p-values with log-space tail arithmetic.

All interval masses are computed as log-probabilities via the stable
normal log-CDF, combined with logsumexp, so two-sided tail ratios stay
accurate far beyond the range where direct CDF differences underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc, log_ndtr, logsumexp

from ..errors import MassUnderflowError
from ..pwl.intervals import FixedInterval, IntervalSet


@dataclass(frozen=True)
class TruncatedGaussian:
    """N(0, sigma2) restricted to a union of intervals."""

    sigma2: float
    truncation: IntervalSet

    def __post_init__(self):
        if self.sigma2 <= 0.0 or not math.isfinite(self.sigma2):
            raise ValueError(f"variance must be positive and finite, got {self.sigma2}")


def _log_interval_mass(lo: float, hi: float, sigma: float) -> float:
    """log P(lo <= N(0, sigma^2) <= hi), stable in both tails."""
    l = lo / sigma
    u = hi / sigma
    if u <= l:
        return -math.inf
    if l > 0.0:
        # right tail: P = Phi-bar(l) - Phi-bar(u)
        base = log_ndtr(-l)
        rest = log_ndtr(-u) if math.isfinite(u) else -math.inf
    elif u < 0.0:
        # left tail, mirrored
        base = log_ndtr(u)
        rest = log_ndtr(l) if math.isfinite(l) else -math.inf
    else:
        # straddles zero: erf terms have opposite signs, no cancellation
        erf_u = erf(u / math.sqrt(2.0)) if math.isfinite(u) else 1.0
        erf_l = erf(l / math.sqrt(2.0)) if math.isfinite(l) else -1.0
        return math.log(0.5 * (erf_u - erf_l))
    if rest == -math.inf:
        return float(base)
    diff = rest - base
    if diff >= 0.0:
        # endpoints closer than tail resolution; mass is numerically zero
        return -math.inf
    return float(base + math.log1p(-math.exp(diff)))


def _log_mass_of_set(intervals: IntervalSet, sigma: float) -> float:
    logs = [_log_interval_mass(iv.lo, iv.hi, sigma) for iv in intervals]
    if not logs:
        return -math.inf
    return float(logsumexp(logs))


def _two_sided_clip(iv: FixedInterval, threshold: float) -> list[FixedInterval]:
    """Pieces of iv lying in (-inf, -threshold] or [threshold, inf)."""
    pieces = []
    if iv.lo <= -threshold:
        pieces.append(FixedInterval(iv.lo, min(iv.hi, -threshold)))
    if iv.hi >= threshold:
        pieces.append(FixedInterval(max(iv.lo, threshold), iv.hi))
    return pieces


def selective_p(z_obs: float, tg: TruncatedGaussian) -> float:
    """P(|Z| >= |z_obs|) for Z ~ N(0, sigma2) conditioned on the truncation."""
    sigma = math.sqrt(tg.sigma2)
    denom = _log_mass_of_set(tg.truncation, sigma)
    if denom == -math.inf:
        raise MassUnderflowError(
            "truncation mass underflow: no interval carries positive mass"
        )
    threshold = abs(z_obs)
    tail_logs = [
        _log_interval_mass(piece.lo, piece.hi, sigma)
        for iv in tg.truncation
        for piece in _two_sided_clip(iv, threshold)
    ]
    if not tail_logs:
        return 0.0
    numer = float(logsumexp(tail_logs))
    if numer == -math.inf:
        return 0.0
    return float(min(1.0, math.exp(min(numer - denom, 0.0))))


def naive_p(z_obs: float, sigma2: float) -> float:
    """Two-sided p-value ignoring selection: 2 Phi-bar(|z|/sigma)."""
    if sigma2 <= 0.0:
        raise ValueError(f"variance must be positive, got {sigma2}")
    return float(erfc(abs(z_obs) / math.sqrt(2.0 * sigma2)))


def log_naive_p(z_obs: float, sigma2: float) -> float:
    """log of naive_p, exact even when the p-value itself underflows."""
    if sigma2 <= 0.0:
        raise ValueError(f"variance must be positive, got {sigma2}")
    return float(math.log(2.0) + log_ndtr(-abs(z_obs) / math.sqrt(sigma2)))


def bonferroni_p(naive: float, n: int) -> float:
    """min(1, 2^n * naive) over the 2^n candidate regions, in log space."""
    if naive < 0.0:
        raise ValueError(f"p-value must be nonnegative, got {naive}")
    if naive == 0.0:
        return 0.0
    log_total = n * math.log(2.0) + math.log(naive)
    return 1.0 if log_total >= 0.0 else float(math.exp(log_total))


def bonferroni_p_from_log(log_naive: float, n: int) -> float:
    """Bonferroni correction fed directly with log(naive), avoiding the
    intermediate underflow when naive is below double-precision range."""
    log_total = n * math.log(2.0) + log_naive
    return 1.0 if log_total >= 0.0 else float(math.exp(log_total))


def oc_p(z_obs: float, sigma2: float, zsub: FixedInterval) -> float:
    """Selective p-value truncated to the single observed-anchor interval."""
    return selective_p(z_obs, TruncatedGaussian(sigma2, IntervalSet([zsub])))
