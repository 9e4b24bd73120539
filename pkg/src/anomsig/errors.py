"""Exception vocabulary shared across the package.

Every error raised on a contract violation derives from AnomsigError so
callers can distinguish library failures from programming mistakes, while
the extra ValueError/RuntimeError bases keep standard handling idiomatic.
"""

from __future__ import annotations


class AnomsigError(Exception):
    """Base class for all library errors."""


class ShapeError(AnomsigError, ValueError):
    """Array shapes do not match an operation's contract."""


class PropagationError(AnomsigError, RuntimeError):
    """Internal consistency of the exact propagation was violated.

    Raised when a refined interval fails to contain its anchor beyond
    numerical slack, or when the affine path disagrees with the concrete
    pipeline about the observed selection. Indicates a bug, not bad input.
    """


class EmptyRegionError(AnomsigError, ValueError):
    """No pixel exceeded the detection threshold; the test is undefined."""


class ScheduleError(AnomsigError, ValueError):
    """Invalid noise-schedule parameters."""


class PlanError(AnomsigError, ValueError):
    """Invalid reconstruction-plan parameters or serialization."""


class WeightsFormatError(AnomsigError, ValueError):
    """Malformed weights document or config/tensor mismatch."""


class TrainingDivergenceError(AnomsigError, RuntimeError):
    """Loss became non-finite during training.

    Carries the last finite parameter snapshot so callers can salvage it.
    """

    def __init__(self, message: str, last_weights=None):
        super().__init__(message)
        self.last_weights = last_weights


class CovarianceError(AnomsigError, ValueError):
    """Invalid covariance model parameters."""


class FamilyError(AnomsigError, ValueError):
    """Unknown noise family or invalid family parameter."""


class CalibrationError(AnomsigError, RuntimeError):
    """Family calibration failed to bracket or converge to the target."""


class SearchBudgetError(AnomsigError, RuntimeError):
    """Parametric search exhausted its step budget before covering the range.

    Carries how much of the range was covered so the failure is diagnosable.
    """

    def __init__(self, message: str, *, anchors: int, covered_to: float, z_max: float):
        super().__init__(message)
        self.anchors = anchors
        self.covered_to = covered_to
        self.z_max = z_max


class MassUnderflowError(AnomsigError, FloatingPointError):
    """Truncation mass underflowed to an unusable value."""
