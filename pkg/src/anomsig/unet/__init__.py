"""Small piecewise-linear U-Net denoiser: config, weights, inference, training."""

from .config import UNetConfig, Weights
from .model import NoisePredictor, predict_noise, predict_noise_affine
from .training import TrainConfig, TrainResult, train

__all__ = [
    "UNetConfig",
    "Weights",
    "NoisePredictor",
    "predict_noise",
    "predict_noise_affine",
    "TrainConfig",
    "TrainResult",
    "train",
]
