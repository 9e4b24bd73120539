"""Exact propagation of a 1-D affine family through piecewise-linear maps.

A vector-valued line z -> const + coef * z is pushed through linear
operators unchanged in form, while each nonlinearity (relu, abs,
thresholding) fixes its sign pattern at an anchor point and contributes
linear constraints that shrink the feasible interval of z. Within the
returned interval the affine output equals the concrete map exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import PropagationError, ShapeError
from .intervals import FixedInterval

# Relative slack for anchor containment after refinement. Thresholds are
# computed in floating point, so a constraint that is exactly active at the
# anchor may land on the wrong side by rounding; violations within this
# slack are clamped, larger ones indicate a bug.
ANCHOR_SLACK = 1e-12


@dataclass(frozen=True)
class AffineVector:
    """Vector-valued affine function of a scalar: z -> const + coef * z."""

    const: np.ndarray
    coef: np.ndarray

    def __post_init__(self):
        const = np.asarray(self.const, dtype=np.float64)
        coef = np.asarray(self.coef, dtype=np.float64)
        if const.shape != coef.shape:
            raise ShapeError(
                f"const shape {const.shape} != coef shape {coef.shape}"
            )
        object.__setattr__(self, "const", const)
        object.__setattr__(self, "coef", coef)

    def __len__(self) -> int:
        return self.const.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.const.shape

    def eval(self, z: float) -> np.ndarray:
        return self.const + self.coef * z

    @classmethod
    def constant(cls, values: np.ndarray) -> "AffineVector":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.zeros_like(values))


@dataclass(frozen=True)
class LinearOp:
    """Affine operator y = matrix @ x + offset (matrix None means identity).

    scale_shift builds the scalar special case y = scale * x + shift used by
    the diffusion updates; from_matrix covers convolution, pooling,
    upsampling, concatenation and any other linear layer once expressed as a
    dense matrix on flattened inputs.
    """

    matrix: np.ndarray | None = None
    offset: np.ndarray | float = 0.0
    scale: float = 1.0

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, offset: np.ndarray | float = 0.0) -> "LinearOp":
        return cls(matrix=np.asarray(matrix, dtype=np.float64), offset=offset)

    @classmethod
    def scale_shift(cls, scale: float, shift: np.ndarray | float = 0.0) -> "LinearOp":
        return cls(matrix=None, offset=shift, scale=float(scale))

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            if self.matrix.shape[1] != x.shape[0]:
                raise ShapeError(
                    f"operator expects {self.matrix.shape[1]} inputs, got {x.shape[0]}"
                )
            x = self.matrix @ x
        if self.scale != 1.0:
            x = self.scale * x
        return x + self.offset


def affine_linear(op: LinearOp, v: AffineVector) -> AffineVector:
    """Push the line through an affine operator; offset lands on const only."""
    if op.matrix is not None:
        if op.matrix.shape[1] != len(v):
            raise ShapeError(
                f"operator expects {op.matrix.shape[1]} inputs, got {len(v)}"
            )
        const = op.matrix @ v.const
        coef = op.matrix @ v.coef
    else:
        const = v.const.copy()
        coef = v.coef.copy()
    if op.scale != 1.0:
        const = op.scale * const
        coef = op.scale * coef
    const = const + op.offset
    return AffineVector(const, coef)


def refine_bounds(
    const: np.ndarray,
    coef: np.ndarray,
    keep_nonneg: np.ndarray,
    lo: float,
    hi: float,
    anchor_z: float,
) -> tuple[float, float]:
    """Endpoint form of refine_interval, for the hot path (no wrapping).

    keep_nonneg marks units whose affine value must stay >= 0; the rest must
    stay <= 0 (boundaries are measure zero, signs chosen at the anchor).
    Units with coef exactly zero contribute no constraint. The anchor must
    lie in the result; violations beyond relative slack raise.
    """
    pos = coef > 0.0
    neg = coef < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        thr = -const / coef
    hi_cand = np.where(np.where(keep_nonneg, neg, pos), thr, math.inf).min()
    lo_cand = np.where(np.where(keep_nonneg, pos, neg), thr, -math.inf).max()
    if hi_cand < hi:
        hi = float(hi_cand)
    if lo_cand > lo:
        lo = float(lo_cand)
    tol = ANCHOR_SLACK * max(
        1.0,
        abs(anchor_z),
        abs(lo) if math.isfinite(lo) else 0.0,
        abs(hi) if math.isfinite(hi) else 0.0,
    )
    if lo > anchor_z or hi < anchor_z:
        if lo - anchor_z > tol or anchor_z - hi > tol:
            raise PropagationError(
                f"refined interval [{lo}, {hi}] lost its anchor {anchor_z}"
            )
        lo = min(lo, anchor_z)
        hi = max(hi, anchor_z)
    if lo > hi:
        raise PropagationError(f"refinement produced empty interval [{lo}, {hi}]")
    return lo, hi


def refine_interval(
    const: np.ndarray,
    coef: np.ndarray,
    keep_nonneg: np.ndarray,
    current: FixedInterval,
    anchor_z: float,
) -> FixedInterval:
    """Intersect {z : sign(const + coef*z) matches keep_nonneg} with current."""
    lo, hi = refine_bounds(
        const, coef, keep_nonneg, current.lo, current.hi, anchor_z
    )
    return FixedInterval(lo, hi)


def affine_relu(
    v: AffineVector, anchor_z: float, current: FixedInterval
) -> tuple[AffineVector, FixedInterval]:
    """relu with signs fixed at the anchor; ties at zero count as active."""
    value = v.eval(anchor_z)
    active = value >= 0.0
    out = AffineVector(
        np.where(active, v.const, 0.0), np.where(active, v.coef, 0.0)
    )
    return out, refine_interval(v.const, v.coef, active, current, anchor_z)


def affine_abs(
    v: AffineVector, anchor_z: float, current: FixedInterval
) -> tuple[AffineVector, FixedInterval]:
    """Absolute value with signs fixed at the anchor; ties count as positive."""
    value = v.eval(anchor_z)
    nonneg = value >= 0.0
    sign = np.where(nonneg, 1.0, -1.0)
    out = AffineVector(sign * v.const, sign * v.coef)
    return out, refine_interval(v.const, v.coef, nonneg, current, anchor_z)


def threshold_interval(
    err: AffineVector, level: float, anchor_z: float, current: FixedInterval
) -> tuple[np.ndarray, FixedInterval]:
    """Units at or above level at the anchor, and the z-interval preserving
    that membership pattern. Ties at the level count as selected."""
    shifted_const = err.const - level
    value = shifted_const + err.coef * anchor_z
    selected = value >= 0.0
    interval = refine_interval(shifted_const, err.coef, selected, current, anchor_z)
    return np.flatnonzero(selected), interval
