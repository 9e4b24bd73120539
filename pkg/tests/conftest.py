"""Shared fixtures: a deliberately tiny network and short schedule so unit
tests exercise every code path in milliseconds. Acceptance-scale runs live
in test_acceptance.py with their own session fixtures.
"""

import numpy as np
import pytest

from anomsig.anomaly import FilterSpec
from anomsig.covariance import CovarianceModel
from anomsig.diffusion.plan import ReconstructionPlan
from anomsig.diffusion.schedule import NoiseSchedule
from anomsig.unet.config import UNetConfig, Weights

TINY_SIDE = 4
TINY_N = TINY_SIDE * TINY_SIDE


@pytest.fixture(scope="session")
def tiny_config() -> UNetConfig:
    return UNetConfig(
        image_side=TINY_SIDE, channel_widths=(2, 3, 4), kernel_size=3, time_embed_dim=4
    )


@pytest.fixture(scope="session")
def tiny_weights(tiny_config) -> Weights:
    return Weights.init_random(tiny_config, seed=7)


@pytest.fixture(scope="session")
def zero_weights(tiny_config) -> Weights:
    tensors = {
        name: np.zeros(shape) for name, shape in tiny_config.tensor_specs()
    }
    return Weights(tiny_config, tensors)


@pytest.fixture(scope="session")
def short_schedule() -> NoiseSchedule:
    return NoiseSchedule.linear(T=40, beta_start=1e-3, beta_end=2e-2)


@pytest.fixture(scope="session")
def tiny_plan(short_schedule) -> ReconstructionPlan:
    return ReconstructionPlan.create(
        TINY_N, short_schedule, t_start=30, num_steps=3, eta=1.0, seed=103
    )


@pytest.fixture(scope="session")
def tiny_filter() -> FilterSpec:
    return FilterSpec(kernel_size=3)


@pytest.fixture(scope="session")
def identity_cov() -> CovarianceModel:
    return CovarianceModel("identity", TINY_N)


@pytest.fixture(scope="session")
def tiny_pair() -> tuple[np.ndarray, np.ndarray]:
    # seed 3 with lam=0.4 yields a 4-pixel region under tiny_weights/tiny_plan
    rng = np.random.default_rng(3)
    return rng.standard_normal(TINY_N), rng.standard_normal(TINY_N)
