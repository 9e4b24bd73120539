"""Noise-prediction network: concrete evaluation and exact affine transport.

The network is compiled once per weights into dense per-layer matrices on
flattened tensors, so a forward pass is a handful of GEMMs. Concrete and
affine evaluation share one traversal; they differ only in how relu gates
are decided (from the value, or from the line at the anchor plus interval
refinement), which keeps the two paths structurally identical.

Architecture (3 encoder levels, square grid, side divisible by 4):

    enc1 conv -> relu                    at side,   width w1   [skip]
    pool2, enc2 conv -> relu             at side/2, width w2   [skip]
    pool2, mid conv -> relu              at side/4, width w3
    up2, concat enc2, dec2 conv -> relu  at side/2, width w2
    up2, concat enc1, dec1 conv -> relu  at side,   width w1
    concat input, out conv               at side,   1 channel  [skip]

Each conv except `out` adds a per-channel bias plus a timestep term: a
sinusoidal embedding of t through a per-layer linear map. For fixed t that
is a constant offset, so the whole map is piecewise linear in the input.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..pwl.affine import AffineVector, refine_bounds
from ..pwl.intervals import FixedInterval
from .config import UNetConfig, Weights
from .layers import conv_matrix, pool_matrix, time_embedding, upsample_matrix


class _ConcreteGate:
    """Relu gates from the values themselves; optionally records masks."""

    __slots__ = ("record", "masks")

    def __init__(self, record: bool = False):
        self.record = record
        self.masks: list[np.ndarray] = []

    def relu(self, h: np.ndarray) -> np.ndarray:
        mask = h[0] >= 0.0
        if self.record:
            self.masks.append(mask.copy())
        h *= mask
        return h


class _AffineGate:
    """Relu gates fixed by the line's value at the anchor; each gate adds
    sign constraints that shrink the feasible interval."""

    __slots__ = ("anchor", "lo", "hi")

    def __init__(self, anchor: float, current: FixedInterval):
        self.anchor = anchor
        self.lo = current.lo
        self.hi = current.hi

    def relu(self, h: np.ndarray) -> np.ndarray:
        vals = h[1] * self.anchor
        vals += h[0]
        mask = vals >= 0.0
        self.lo, self.hi = refine_bounds(
            h[0], h[1], mask, self.lo, self.hi, self.anchor
        )
        h *= mask
        return h


class NoisePredictor:
    """Weights compiled to dense layer matrices for fast repeated evaluation."""

    def __init__(self, weights: Weights):
        cfg = weights.config
        self.config = cfg
        self._tensors = weights.tensors
        s = cfg.image_side
        self.n = s * s
        self._sides = (s, s // 2, s // 4)
        w1, w2, w3 = cfg.channel_widths
        self._widths = (w1, w2, w3)
        s2, s4 = s // 2, s // 4
        t = weights.tensors

        # All matrices in right-multiply form (in_dim, out_dim). Pooling,
        # upsampling, and the skip concatenations are folded into the conv
        # matrices, so one layer is one GEMM (two for layers with a skip).
        enc1 = conv_matrix(t["enc1.kernel"], s).T
        enc2 = conv_matrix(t["enc2.kernel"], s2).T
        mid = conv_matrix(t["mid.kernel"], s4).T
        dec2 = conv_matrix(t["dec2.kernel"], s2).T
        dec1 = conv_matrix(t["dec1.kernel"], s).T
        out = conv_matrix(t["out.kernel"], s).T
        self._enc1 = np.ascontiguousarray(enc1)
        self._enc2 = pool_matrix(w1, s).T @ enc2
        self._mid = pool_matrix(w2, s2).T @ mid
        split = w3 * s2 * s2
        self._dec2_up = upsample_matrix(w3, s4).T @ dec2[:split]
        self._dec2_skip = np.ascontiguousarray(dec2[split:])
        split = w2 * s * s
        self._dec1_up = upsample_matrix(w2, s2).T @ dec1[:split]
        self._dec1_skip = np.ascontiguousarray(dec1[split:])
        split = w1 * s * s
        self._out_main = np.ascontiguousarray(out[:split])
        self._out_skip = np.ascontiguousarray(out[split:])
        self._offset_cache: dict[int, list[np.ndarray]] = {}

    def _offsets(self, t: float) -> list[np.ndarray]:
        """Flattened constant offsets (bias + timestep term) per conv layer."""
        key = int(t)
        cached = self._offset_cache.get(key)
        if cached is not None:
            return cached
        emb = time_embedding(key, self.config.time_embed_dim)
        s, s2, s4 = self._sides
        areas = {"enc1": s * s, "enc2": s2 * s2, "mid": s4 * s4,
                 "dec2": s2 * s2, "dec1": s * s}
        offsets = []
        for name in ("enc1", "enc2", "mid", "dec2", "dec1"):
            per_ch = self._tensors[f"{name}.bias"] + self._tensors[f"{name}.time"] @ emb
            offsets.append(np.repeat(per_ch, areas[name]))
        offsets.append(np.repeat(self._tensors["out.bias"], s * s))
        self._offset_cache[key] = offsets
        return offsets

    def _run(self, rows: np.ndarray, t: float, gate) -> np.ndarray:
        """Shared traversal. rows: (R, n) with offsets applied to row 0 only."""
        if rows.shape[1] != self.n:
            raise ShapeError(f"expected {self.n} pixels, got {rows.shape[1]}")
        off = self._offsets(t)

        h = rows @ self._enc1
        h[0] += off[0]
        e1 = gate.relu(h)

        h = e1 @ self._enc2
        h[0] += off[1]
        e2 = gate.relu(h)

        h = e2 @ self._mid
        h[0] += off[2]
        m = gate.relu(h)

        h = m @ self._dec2_up
        h += e2 @ self._dec2_skip
        h[0] += off[3]
        d2 = gate.relu(h)

        h = d2 @ self._dec1_up
        h += e1 @ self._dec1_skip
        h[0] += off[4]
        d1 = gate.relu(h)

        out = d1 @ self._out_main
        out += rows @ self._out_skip
        out[0] += off[5]
        return out

    def predict(self, x: np.ndarray, t: float) -> np.ndarray:
        """Predicted noise for one flattened image."""
        x = np.asarray(x, dtype=np.float64)
        return self._run(x[None, :].copy(), t, _ConcreteGate())[0]

    def predict_with_signs(self, x: np.ndarray, t: float) -> tuple[np.ndarray, list[np.ndarray]]:
        """Prediction plus the relu gate masks, outermost layer first."""
        gate = _ConcreteGate(record=True)
        x = np.asarray(x, dtype=np.float64)
        out = self._run(x[None, :].copy(), t, gate)[0]
        return out, gate.masks

    def predict_affine(
        self,
        const: np.ndarray,
        coef: np.ndarray,
        t: float,
        anchor_z: float,
        current: FixedInterval,
    ) -> tuple[np.ndarray, np.ndarray, FixedInterval]:
        """Push the line z -> const + coef*z through the network.

        Returns the output line and the interval of z on which the relu
        gate pattern (hence the affine form) is exact.
        """
        gate = _AffineGate(anchor_z, current)
        rows = np.stack([const, coef]).astype(np.float64, copy=True)
        out = self._run(rows, t, gate)
        return out[0], out[1], FixedInterval(gate.lo, gate.hi)


def predict_noise(x: np.ndarray, t: float, weights: Weights) -> np.ndarray:
    """Noise prediction for a flattened image at timestep t."""
    return weights.compiled().predict(x, t)


def predict_noise_affine(
    line: AffineVector,
    t: float,
    weights: Weights,
    anchor_z: float,
    current: FixedInterval | None = None,
) -> tuple[AffineVector, FixedInterval]:
    """Exact affine image of a 1-D input family under the network at t."""
    if current is None:
        current = FixedInterval.full()
    const, coef, interval = weights.compiled().predict_affine(
        line.const, line.coef, t, anchor_z, current
    )
    return AffineVector(const, coef), interval
