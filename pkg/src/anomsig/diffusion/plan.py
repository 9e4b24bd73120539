"""Reconstruction plan: the subsequence of timesteps, stochasticity level,
and every noise draw frozen up front so a run is exactly replayable.

The plan serializes to JSON as {seed, T, beta_start, beta_end, t_start,
tau, eta, n}; noise vectors are regenerated from the seed on load, so the
document stays small while replay is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import PlanError
from .schedule import NoiseSchedule


def subsequence(t_start: int, num_steps: int) -> np.ndarray:
    """Evenly spaced timestep grid from t_start down to 0, inclusive.

    num_steps is the number of reverse transitions requested; rounding
    collisions at tiny t_start are deduplicated, shrinking the count.
    """
    if t_start < 0 or num_steps < 1:
        raise PlanError(f"need t_start >= 0 and num_steps >= 1, got {t_start}, {num_steps}")
    if t_start == 0:
        return np.array([0], dtype=np.int64)
    grid = np.rint(np.linspace(t_start, 0, num_steps + 1)).astype(np.int64)
    keep = np.concatenate([[True], np.diff(grid) != 0])
    return grid[keep]


@dataclass(frozen=True)
class ReconstructionPlan:
    """Frozen description of one noise-and-reconstruct run on length-n data."""

    n: int
    schedule: NoiseSchedule
    t_start: int
    taus: np.ndarray
    eta: float
    seed: int
    forward_eps: np.ndarray = field(init=False)
    step_eps: np.ndarray = field(init=False)
    sigmas: np.ndarray = field(init=False)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=np.int64)
        if self.n < 1:
            raise PlanError(f"n must be positive, got {self.n}")
        if self.eta < 0.0:
            raise PlanError(f"eta must be nonnegative, got {self.eta}")
        if taus[0] != self.t_start or taus[-1] != 0:
            raise PlanError("tau must start at t_start and end at 0")
        if np.any(np.diff(taus) >= 0):
            raise PlanError("tau must be strictly decreasing")
        if self.t_start > self.schedule.T:
            raise PlanError(f"t_start {self.t_start} exceeds schedule T {self.schedule.T}")
        taus.setflags(write=False)
        object.__setattr__(self, "taus", taus)

        legs = len(taus) - 1
        rng = np.random.default_rng(self.seed)
        forward_eps = rng.standard_normal(self.n)
        step_eps = rng.standard_normal((legs, self.n))
        abar = self.schedule.alpha_bars
        sigmas = np.zeros(legs)
        for i in range(legs):
            a_hi, a_lo = abar[taus[i]], abar[taus[i + 1]]
            var = (1.0 - a_lo) / (1.0 - a_hi) * (1.0 - a_hi / a_lo)
            sigmas[i] = self.eta * np.sqrt(max(var, 0.0))
            drift = 1.0 - a_lo - sigmas[i] ** 2
            if drift < -1e-12:
                raise PlanError(
                    f"eta={self.eta} makes the update coefficient imaginary at leg {i}"
                )
        for arr in (forward_eps, step_eps, sigmas):
            arr.setflags(write=False)
        object.__setattr__(self, "forward_eps", forward_eps)
        object.__setattr__(self, "step_eps", step_eps)
        object.__setattr__(self, "sigmas", sigmas)

    @classmethod
    def create(
        cls,
        n: int,
        schedule: NoiseSchedule,
        t_start: int = 460,
        num_steps: int = 5,
        eta: float = 1.0,
        seed: int = 0,
    ) -> "ReconstructionPlan":
        return cls(
            n=n,
            schedule=schedule,
            t_start=t_start,
            taus=subsequence(t_start, num_steps),
            eta=eta,
            seed=seed,
        )

    @property
    def num_legs(self) -> int:
        return len(self.taus) - 1

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "T": self.schedule.T,
            "beta_start": float(self.schedule.betas[0]),
            "beta_end": float(self.schedule.betas[-1]),
            "t_start": self.t_start,
            "tau": self.taus.tolist(),
            "eta": self.eta,
            "n": self.n,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ReconstructionPlan":
        try:
            schedule = NoiseSchedule.linear(
                T=doc["T"], beta_start=doc["beta_start"], beta_end=doc["beta_end"]
            )
            return cls(
                n=doc["n"],
                schedule=schedule,
                t_start=doc["t_start"],
                taus=np.asarray(doc["tau"], dtype=np.int64),
                eta=doc["eta"],
                seed=doc["seed"],
            )
        except (KeyError, TypeError) as exc:
            raise PlanError(f"malformed plan document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ReconstructionPlan":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise PlanError(f"plan file is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)
