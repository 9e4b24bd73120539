"""Test statistic and the nuisance decomposition onto a 1-D line.

The statistic is the mean difference over the detected region between the
test and reference images. Conditioning on the component orthogonal (in
the covariance metric) to the test direction reduces the stacked data to
the line a + b z with z the statistic itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..anomaly import AnomalyRegion
from ..covariance import CovarianceModel
from ..errors import CovarianceError, EmptyRegionError, ShapeError


@dataclass(frozen=True)
class TestInstance:
    """One observed image pair sharing a known pixel covariance."""

    x: np.ndarray
    x_ref: np.ndarray
    covariance: CovarianceModel

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        x_ref = np.asarray(self.x_ref, dtype=np.float64)
        if x.shape != x_ref.shape or x.ndim != 1:
            raise ShapeError(f"image shapes differ: {x.shape} vs {x_ref.shape}")
        if x.shape[0] != self.covariance.n:
            raise ShapeError(
                f"covariance dimension {self.covariance.n} != image length {x.shape[0]}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x_ref))):
            raise ShapeError("images must be finite")
        for arr in (x, x_ref):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_ref", x_ref)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.x_ref])


@dataclass(frozen=True)
class Decomposition:
    """Line representation (x; x_ref) = a + b * z with z the statistic."""

    nu: np.ndarray
    a: np.ndarray
    b: np.ndarray
    sigma2: float
    z_obs: float

    def line_at(self, z: float) -> np.ndarray:
        return self.a + self.b * z


def _region_indicator(region: AnomalyRegion, n: int) -> np.ndarray:
    if region.is_empty():
        raise EmptyRegionError("no anomaly detected; the test is undefined")
    if region.pixels[-1] >= n:
        raise ShapeError(f"region index {region.pixels[-1]} outside image of length {n}")
    ind = np.zeros(n)
    ind[region.pixels] = 1.0 / region.size
    return ind


def test_statistic(instance: TestInstance, region: AnomalyRegion) -> float:
    """Mean of x over the region minus mean of x_ref over it."""
    pix = region.pixels
    if region.is_empty():
        raise EmptyRegionError("no anomaly detected; the test is undefined")
    return float(instance.x[pix].mean() - instance.x_ref[pix].mean())


def decompose(instance: TestInstance, region: AnomalyRegion) -> Decomposition:
    """Split the stacked data into the test direction and its complement."""
    n = instance.n
    ind = _region_indicator(region, n)
    sigma_ind = instance.covariance.matvec(ind)
    quad = float(ind @ sigma_ind)
    sigma2 = 2.0 * quad
    if sigma2 <= 0.0:
        raise CovarianceError(f"test-direction variance must be positive, got {sigma2}")
    z_obs = float(ind @ instance.x - ind @ instance.x_ref)
    nu = np.concatenate([ind, -ind])
    b = np.concatenate([sigma_ind, -sigma_ind]) / sigma2
    a = instance.stacked() - b * z_obs
    return Decomposition(nu=nu, a=a, b=b, sigma2=sigma2, z_obs=z_obs)
