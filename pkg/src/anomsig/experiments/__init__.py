"""Simulation studies, noise families, and planted signals."""

from ..covariance import CovarianceModel
from .families import (
    FAMILY_NAMES,
    CalibratedFamily,
    calibrate_family,
    sample_family,
    wasserstein1_to_std_normal,
)
from .harness import (
    OracleCheckResult,
    StudyConfig,
    StudyResult,
    clopper_pearson,
    render_csv,
    run_oracle_check,
    run_power,
    run_robustness,
    run_type1,
    train_denoiser,
)
from .signal import SignalSpec, patch_side, place_patch

__all__ = [
    "CovarianceModel",
    "FAMILY_NAMES",
    "CalibratedFamily",
    "calibrate_family",
    "sample_family",
    "wasserstein1_to_std_normal",
    "OracleCheckResult",
    "StudyConfig",
    "StudyResult",
    "clopper_pearson",
    "render_csv",
    "run_oracle_check",
    "run_power",
    "run_robustness",
    "run_type1",
    "train_denoiser",
    "SignalSpec",
    "patch_side",
    "place_patch",
]
