"""Request/response models for the HTTP service.

Study requests mirror the harness StudyConfig field-for-field; weights
travel as their JSON document so the service stays stateless.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

DEFAULT_DELTAS = (1.0, 2.0, 3.0, 4.0)
DEFAULT_FAMILIES = (
    "skew-normal",
    "exp-modified-gaussian",
    "generalized-normal",
    "student-t",
)


class StudyParams(BaseModel):
    """Shared experiment knobs; defaults match the harness."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    n: int = 64
    cov: str = "iid"
    rho: float = 0.5
    lam: float = Field(default=0.8, alias="lambda")
    kernel: int = 3
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    tprime: int = 460
    steps: int = 5
    eta: float = 1.0
    alpha: float = 0.05
    trials: int = 500
    seed: int = 0
    workers: int = 0
    gamma_rel: float = 1e-4
    range_mult: float = 20.0
    permutations: int = 0
    deltas: list[float] = Field(default_factory=lambda: list(DEFAULT_DELTAS))
    families: list[str] = Field(default_factory=lambda: list(DEFAULT_FAMILIES))
    w1_targets: list[float] = Field(default_factory=lambda: [0.04])
    instances: int = 20
    grid_step: float = 1e-3


class TrainRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: StudyParams = Field(default_factory=StudyParams)
    train_steps: int = 3000
    train_images: int = 256
    batch_size: int = 16
    learning_rate: float = 3e-3
    momentum: float = 0.9


class TrainResponse(BaseModel):
    weights: dict
    initial_loss: float
    final_loss: float
    history: list[tuple[int, float]]


class StudyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: StudyParams = Field(default_factory=StudyParams)
    weights: dict


class StudyResponse(BaseModel):
    config: dict
    summary_rows: list[dict]
    trial_rows: list[dict]
    summary_csv: str
    trials_csv: str
    requested: int
    completed: int
    excluded_empty_region: int
    excluded_error: int
    error_messages: list[str]


class OracleCheckResponse(BaseModel):
    config: dict
    rows: list[dict]
    csv_text: str
    total_grid: int
    total_disagree: int
    agree_fraction: float
    all_within_2gamma: bool
    all_z_obs_in: bool
    max_eval_diff: float


class TestOneRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: list[float]
    x_ref: list[float]
    params: StudyParams = Field(default_factory=StudyParams)
    weights: dict
    plan_seed: int = 0
    permutation_seed: int = 0


class HealthResponse(BaseModel):
    status: str
    version: str
