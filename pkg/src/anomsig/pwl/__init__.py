"""Exact piecewise-linear propagation primitives."""

from .affine import (
    AffineVector,
    LinearOp,
    affine_abs,
    affine_linear,
    affine_relu,
    refine_bounds,
    refine_interval,
    threshold_interval,
)
from .intervals import (
    DEFAULT_MERGE_TOL,
    FixedInterval,
    IntervalSet,
    intervals_union,
)

__all__ = [
    "AffineVector",
    "LinearOp",
    "FixedInterval",
    "IntervalSet",
    "DEFAULT_MERGE_TOL",
    "affine_linear",
    "affine_relu",
    "affine_abs",
    "threshold_interval",
    "refine_bounds",
    "refine_interval",
    "intervals_union",
]
