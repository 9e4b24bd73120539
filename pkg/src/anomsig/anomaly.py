"""Reconstruction-error map, smoothing filter, and threshold selection.

The error map is the pixelwise absolute value of a uniform smoothing
filter applied to (input - reconstruction); pixels at or above the
threshold form the anomaly region. The affine variant transports a line
through the same stages and returns the interval of z on which the
selected region is constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .diffusion.plan import ReconstructionPlan
from .diffusion.sampler import reconstruct_affine
from .errors import ShapeError
from .pwl.affine import AffineVector, affine_abs, threshold_interval
from .pwl.intervals import FixedInterval
from .unet.config import Weights
from .unet.layers import averaging_filter_matrix
from .unet.model import NoisePredictor


@dataclass(frozen=True)
class FilterSpec:
    """Uniform zero-padded smoothing filter; weights sum to 1 over the full
    kernel area, so border outputs are damped rather than renormalized."""

    kernel_size: int = 3

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ShapeError(f"kernel_size must be odd, got {self.kernel_size}")

    def matrix(self, side: int) -> np.ndarray:
        return _filter_matrix(side, self.kernel_size)


@lru_cache(maxsize=16)
def _filter_matrix(side: int, kernel_size: int) -> np.ndarray:
    mat = averaging_filter_matrix(side, kernel_size)
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class AnomalyRegion:
    """Pixel indices at or above the detection threshold, sorted ascending."""

    pixels: np.ndarray
    level: float

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.ndim != 1 or (pixels.size > 1 and np.any(np.diff(pixels) <= 0)):
            raise ShapeError("region pixels must be a strictly increasing 1-D index list")
        pixels = pixels.copy()
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def size(self) -> int:
        return int(self.pixels.size)

    def is_empty(self) -> bool:
        return self.pixels.size == 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnomalyRegion):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash(self.pixels.tobytes())


def _grid_side(n: int) -> int:
    side = math.isqrt(n)
    if side * side != n:
        raise ShapeError(f"length {n} is not a square image")
    return side


def error_map(x: np.ndarray, reconstruction: np.ndarray, filt: FilterSpec) -> np.ndarray:
    """E = |F(x - reconstruction)| on the 2-D grid, flattened."""
    x = np.asarray(x, dtype=np.float64)
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    if x.shape != reconstruction.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {reconstruction.shape}")
    side = _grid_side(x.shape[0])
    return np.abs(filt.matrix(side) @ (x - reconstruction))


def detect_region(error: np.ndarray, lam: float) -> AnomalyRegion:
    """Pixels with error at or above lam; empty regions are legal here."""
    if lam <= 0.0:
        raise ValueError(f"detection threshold must be positive, got {lam}")
    error = np.asarray(error, dtype=np.float64)
    return AnomalyRegion(np.flatnonzero(error >= lam), lam)


def error_line(
    line: AffineVector,
    anchor_z: float,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    filt: FilterSpec,
    current: FixedInterval | None = None,
) -> tuple[AffineVector, FixedInterval]:
    """Affine image of the error map for the test-image line (length n)."""
    if current is None:
        current = FixedInterval.full()
    side = _grid_side(len(line))
    recon, interval = reconstruct_affine(line, plan, net, anchor_z, current)
    diff = AffineVector(line.const - recon.const, line.coef - recon.coef)
    fmat = filt.matrix(side)
    filtered = AffineVector(fmat @ diff.const, fmat @ diff.coef)
    return affine_abs(filtered, anchor_z, interval)


def region_and_interval(
    line: AffineVector,
    anchor_z: float,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    filt: FilterSpec,
    lam: float,
    current: FixedInterval | None = None,
) -> tuple[AnomalyRegion, FixedInterval]:
    """Region selected at the anchor and the z-interval where it is constant.

    The line is the full stacked (test; reference) family of length 2n; only
    the first n coordinates enter the detection pipeline.
    """
    if len(line) % 2 != 0:
        raise ShapeError(f"expected a stacked line of even length, got {len(line)}")
    n = len(line) // 2
    test_line = AffineVector(line.const[:n], line.coef[:n])
    err, interval = error_line(test_line, anchor_z, plan, net, filt, current)
    pixels, interval = threshold_interval(err, lam, anchor_z, interval)
    return AnomalyRegion(pixels, lam), interval
