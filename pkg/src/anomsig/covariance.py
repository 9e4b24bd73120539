"""Pixel-noise covariance models: identity and AR(1) over the flattened
pixel index. The AR kernel rho^|i-j| admits an exact O(n) recursive
sampler and matvec, so no dense factorization is needed at any n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import CovarianceError

_KIND_ALIASES = {
    "identity": "identity",
    "iid": "identity",
    "ar": "ar",
    "ar-correlation": "ar",
}


@dataclass(frozen=True)
class CovarianceModel:
    kind: str
    n: int
    rho: float = 0.5

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise CovarianceError(f"unknown covariance kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.n < 1:
            raise CovarianceError(f"dimension must be positive, got {self.n}")
        if kind == "ar" and not -1.0 < self.rho < 1.0:
            raise CovarianceError(
                f"ar correlation must lie in (-1, 1) for positive definiteness, got {self.rho}"
            )

    def sample(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        """Exact N(0, Sigma) draws; shape (n,) or (count, n)."""
        shape = (self.n,) if count is None else (count, self.n)
        eps = rng.standard_normal(shape)
        if self.kind == "identity":
            return eps
        # X_0 = e_0, X_i = rho X_{i-1} + sqrt(1-rho^2) e_i: stationary AR(1)
        # with unit variance and covariance rho^|i-j|, realized by lfilter.
        driven = eps.copy()
        driven[..., 1:] *= np.sqrt(1.0 - self.rho**2)
        return lfilter([1.0], [1.0, -self.rho], driven, axis=-1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Sigma @ v in O(n) via forward/backward geometric recursions."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise CovarianceError(f"expected shape ({self.n},), got {v.shape}")
        if self.kind == "identity":
            return v.copy()
        fwd = lfilter([1.0], [1.0, -self.rho], v)
        bwd = lfilter([1.0], [1.0, -self.rho], v[::-1])[::-1]
        return fwd + bwd - v

    def dense(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n)
        idx = np.arange(self.n)
        return self.rho ** np.abs(idx[:, None] - idx[None, :])

    def quad_form(self, v: np.ndarray) -> float:
        return float(v @ self.matvec(v))
