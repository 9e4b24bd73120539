"""Variance schedule for the noising process.

alpha_bars[t] is the running product of (1 - beta_s) for s <= t, with
alpha_bars[0] = 1 (empty product), so index t directly matches timestep t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ScheduleError


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    betas: np.ndarray
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if self.T < 1 or betas.shape != (self.T,):
            raise ScheduleError(f"need T>=1 betas, got T={self.T}, shape {betas.shape}")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ScheduleError("betas must lie strictly inside (0, 1)")
        alpha_bars = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        if np.any(np.diff(alpha_bars) >= 0.0) or alpha_bars[-1] <= 0.0:
            raise ScheduleError("alpha_bar must decrease strictly and stay positive")
        betas = betas.copy()
        betas.setflags(write=False)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @classmethod
    def linear(
        cls, T: int = 1000, beta_start: float = 1e-4, beta_end: float = 2e-2
    ) -> "NoiseSchedule":
        if not 0.0 < beta_start <= beta_end < 1.0:
            raise ScheduleError(
                f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )
        return cls(T=T, betas=np.linspace(beta_start, beta_end, T))

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ScheduleError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])
