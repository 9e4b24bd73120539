"""Planted anomaly signals: a square patch of constant elevation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class SignalSpec:
    """Mean shift of magnitude delta on a square patch of pixel indices."""

    delta: float
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.ndim != 1 or pixels.size == 0:
            raise ShapeError("signal patch must be a nonempty 1-D index list")
        pixels = np.sort(pixels)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    def mean_vector(self, n: int) -> np.ndarray:
        if self.pixels[-1] >= n:
            raise ShapeError(f"patch index {self.pixels[-1]} outside image length {n}")
        mu = np.zeros(n)
        mu[self.pixels] = self.delta
        return mu


def patch_side(n: int) -> int:
    """Side of the planted square: ceil(sqrt(0.1 n)), capped by the image."""
    side = math.isqrt(n)
    if side * side != n:
        raise ShapeError(f"length {n} is not a square image")
    return min(side, math.ceil(math.sqrt(0.1 * n)))


def place_patch(n: int, delta: float, rng: np.random.Generator) -> SignalSpec:
    """Square patch at a uniformly random grid position."""
    side = math.isqrt(n)
    p = patch_side(n)
    r0 = int(rng.integers(0, side - p + 1))
    c0 = int(rng.integers(0, side - p + 1))
    rows = np.arange(r0, r0 + p)
    cols = np.arange(c0, c0 + p)
    pixels = (rows[:, None] * side + cols[None, :]).ravel()
    return SignalSpec(delta=delta, pixels=pixels)
