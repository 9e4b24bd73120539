"""Non-Gaussian noise families, standardized, with 1-Wasserstein
calibration against the standard normal.

Each family has a parameter at which it coincides with N(0,1) (param 0)
and moves away monotonically as the parameter grows; calibration bisects
the parameter so the standardized family sits at a requested W1 distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtri

from ..errors import CalibrationError, FamilyError

# param -> frozen scipy distribution (not yet standardized). param 0 must
# coincide with the normal; the cap keeps quantile tails numerically sane.
_FAMILY_CAPS = {
    "skew-normal": 60.0,
    "exp-modified-gaussian": 30.0,
    # generalized normal with shape beta = 2 - param; cap stops short of the
    # slow-quantile regime near the Laplace shape
    "generalized-normal": 1.1,
    # student-t with dof = 1/param; variance finite requires dof > 2
    "student-t": 0.45,
}

FAMILY_NAMES = tuple(_FAMILY_CAPS)


def _frozen(family: str, param: float):
    if family not in _FAMILY_CAPS:
        raise FamilyError(f"unknown family {family!r}; known: {FAMILY_NAMES}")
    if param < 0.0 or param > _FAMILY_CAPS[family]:
        raise FamilyError(
            f"{family} parameter must lie in [0, {_FAMILY_CAPS[family]}], got {param}"
        )
    if param == 0.0:
        return stats.norm()
    if family == "skew-normal":
        return stats.skewnorm(param)
    if family == "exp-modified-gaussian":
        return stats.exponnorm(param)
    if family == "generalized-normal":
        return stats.gennorm(2.0 - param)
    return stats.t(1.0 / param)


def _standardizer(dist) -> tuple[float, float]:
    mean, var = dist.stats(moments="mv")
    mean, var = float(mean), float(var)
    if not (math.isfinite(mean) and math.isfinite(var)) or var <= 0.0:
        raise FamilyError(f"family moments unusable: mean={mean}, var={var}")
    return mean, math.sqrt(var)


def sample_family(
    family: str, param: float, rng: np.random.Generator, size
) -> np.ndarray:
    """Standardized (zero-mean, unit-variance) iid draws."""
    dist = _frozen(family, param)
    mean, sd = _standardizer(dist)
    draws = dist.rvs(size=size, random_state=rng)
    return (np.asarray(draws, dtype=np.float64) - mean) / sd


def wasserstein1_to_std_normal(family: str, param: float) -> float:
    """W1 between the standardized family and N(0,1): the integral over
    (0,1) of the absolute quantile difference."""
    if param == 0.0:
        return 0.0
    dist = _frozen(family, param)
    mean, sd = _standardizer(dist)

    def integrand(u: float) -> float:
        q = (dist.ppf(u) - mean) / sd
        if not math.isfinite(q):
            raise FamilyError(f"non-finite quantile for {family} at u={u}")
        return abs(q - ndtri(u))

    # endpoint neighborhoods get their own panels: the quantile difference
    # grows (integrably) toward 0 and 1 for heavy-tailed members
    eps = 1e-9
    total = 0.0
    for a, b in ((eps, 1e-4), (1e-4, 0.5), (0.5, 1.0 - 1e-4), (1.0 - 1e-4, 1.0 - eps)):
        value, _ = integrate.quad(integrand, a, b, epsabs=1e-9, epsrel=1e-9, limit=300)
        total += value
    return total


@dataclass(frozen=True)
class CalibratedFamily:
    family: str
    target_w1: float
    param: float


def calibrate_family(family: str, target_w1: float) -> CalibratedFamily:
    """Parameter at which the family's W1 distance equals the target.

    Bisection over [0, cap]; monotonicity of W1 in the parameter is checked
    on the bracket before trusting it.
    """
    if target_w1 < 0.0:
        raise CalibrationError(f"target W1 must be nonnegative, got {target_w1}")
    if target_w1 == 0.0:
        return CalibratedFamily(family, 0.0, 0.0)
    cap = _FAMILY_CAPS.get(family)
    if cap is None:
        raise FamilyError(f"unknown family {family!r}; known: {FAMILY_NAMES}")

    probe = np.linspace(0.0, cap, 6)
    values = [wasserstein1_to_std_normal(family, p) for p in probe]
    if any(b < a - 1e-7 for a, b in zip(values, values[1:])):
        raise CalibrationError(
            f"W1 is not monotone in the {family} parameter on [0, {cap}]"
        )
    achievable = values[-1]
    if target_w1 > achievable:
        raise CalibrationError(
            f"target {target_w1} unreachable for {family}; achievable range "
            f"[0, {achievable:.6g}]"
        )

    lo, hi = 0.0, cap
    w_lo = 0.0
    for probe_p, probe_w in zip(probe, values):
        if probe_w <= target_w1:
            lo, w_lo = float(probe_p), probe_w
        else:
            hi = float(probe_p)
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        w_mid = wasserstein1_to_std_normal(family, mid)
        if abs(w_mid - target_w1) <= 2e-5:
            return CalibratedFamily(family, target_w1, mid)
        if w_mid < target_w1:
            lo, w_lo = mid, w_mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    if abs(w_lo - target_w1) <= 1e-4:
        return CalibratedFamily(family, target_w1, lo)
    raise CalibrationError(
        f"bisection failed to reach target {target_w1} for {family}"
    )
