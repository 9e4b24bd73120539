"""Diffusion machinery: schedule, frozen reconstruction plan, samplers."""

from .plan import ReconstructionPlan, subsequence
from .sampler import forward_noise, reconstruct, reconstruct_affine, reverse_step
from .schedule import NoiseSchedule

__all__ = [
    "NoiseSchedule",
    "ReconstructionPlan",
    "subsequence",
    "forward_noise",
    "reverse_step",
    "reconstruct",
    "reconstruct_affine",
]
