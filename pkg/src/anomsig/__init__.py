"""Selective inference for diffusion-reconstruction anomaly detection.

Detects anomalous regions by comparing an image against its denoised
reconstruction, then tests the detected region's mean shift with p-values
that condition on the selection event. The selection event is resolved
exactly by propagating piecewise-linear reconstructions along the test
statistic's line and sweeping the activation pieces.
"""

from . import anomaly, covariance, diffusion, experiments, inference, pwl, unet
from .errors import AnomsigError

__version__ = "0.1.0"

__all__ = [
    "anomaly",
    "covariance",
    "diffusion",
    "experiments",
    "inference",
    "pwl",
    "unet",
    "AnomsigError",
    "__version__",
]
