"""Noise-and-reconstruct pipeline, concrete and affine.

A test image is pushed part-way up the noising chain with frozen noise,
then denoised back along the plan's timestep subsequence. With every noise
draw frozen by the plan, the whole map x -> reconstruction is piecewise
linear, and the affine variant transports an input line exactly while
collecting the interval on which its relu pattern holds.
"""

from __future__ import annotations

import numpy as np

from ..pwl.affine import AffineVector
from ..pwl.intervals import FixedInterval
from ..unet.config import Weights
from ..unet.model import NoisePredictor
from .plan import ReconstructionPlan


def _predictor(net: Weights | NoisePredictor) -> NoisePredictor:
    return net if isinstance(net, NoisePredictor) else net.compiled()


def _leg_coeffs(plan: ReconstructionPlan, leg: int) -> tuple[int, float, float, float, float]:
    """(t_hi, scale0, root_hi, drift, sigma) for one denoising transition.

    The update is x' = scale0 * (x - root_hi * eps_hat) + drift * eps_hat
    + sigma * frozen_noise, which equals pulling the denoised estimate back
    to the target timestep plus the retained noise direction.
    """
    t_hi = int(plan.taus[leg])
    a_hi = plan.schedule.alpha_bar(t_hi)
    a_lo = plan.schedule.alpha_bar(int(plan.taus[leg + 1]))
    sigma = float(plan.sigmas[leg])
    drift = np.sqrt(max(1.0 - a_lo - sigma**2, 0.0))
    return t_hi, np.sqrt(a_lo / a_hi), np.sqrt(1.0 - a_hi), drift, sigma


def forward_noise(x: np.ndarray, plan: ReconstructionPlan) -> np.ndarray:
    """Noisy state at the plan's starting timestep, using the frozen draw."""
    a = plan.schedule.alpha_bar(plan.t_start)
    return np.sqrt(a) * np.asarray(x, dtype=np.float64) + np.sqrt(1.0 - a) * plan.forward_eps


def reverse_step(
    x_t: np.ndarray,
    leg: int,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    with_signs: bool = False,
):
    """One denoising transition taus[leg] -> taus[leg+1]."""
    predictor = _predictor(net)
    t_hi, scale0, root_hi, drift, sigma = _leg_coeffs(plan, leg)
    if with_signs:
        eps_hat, masks = predictor.predict_with_signs(x_t, t_hi)
    else:
        eps_hat = predictor.predict(x_t, t_hi)
        masks = None
    out = scale0 * (x_t - root_hi * eps_hat) + drift * eps_hat + sigma * plan.step_eps[leg]
    return (out, masks) if with_signs else out


def reconstruct(
    x: np.ndarray,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    record_signs: bool = False,
):
    """Full noise-then-denoise reconstruction of a flattened image.

    With record_signs, also returns the relu gate masks of every network
    evaluation (one list per leg), which defines the activation cell of x.
    """
    predictor = _predictor(net)
    state = forward_noise(x, plan)
    if not record_signs:
        for leg in range(plan.num_legs):
            state = reverse_step(state, leg, plan, predictor)
        return state
    signs: list[list[np.ndarray]] = []
    for leg in range(plan.num_legs):
        state, masks = reverse_step(state, leg, plan, predictor, with_signs=True)
        signs.append(masks)
    return state, signs


def reconstruct_affine(
    line: AffineVector,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    anchor_z: float,
    current: FixedInterval | None = None,
) -> tuple[AffineVector, FixedInterval]:
    """Exact affine image of an input line under the reconstruction map.

    Works on stacked (const, coef) rows: scalar coefficients multiply both,
    frozen noise enters const only, and each network evaluation refines the
    feasible interval around the anchor.
    """
    predictor = _predictor(net)
    if current is None:
        current = FixedInterval.full()
    a_start = plan.schedule.alpha_bar(plan.t_start)
    const = np.sqrt(a_start) * line.const + np.sqrt(1.0 - a_start) * plan.forward_eps
    coef = np.sqrt(a_start) * line.coef
    interval = current
    for leg in range(plan.num_legs):
        t_hi, scale0, root_hi, drift, sigma = _leg_coeffs(plan, leg)
        eps_const, eps_coef, interval = predictor.predict_affine(
            const, coef, t_hi, anchor_z, interval
        )
        const = (
            scale0 * (const - root_hi * eps_const)
            + drift * eps_const
            + sigma * plan.step_eps[leg]
        )
        coef = scale0 * (coef - root_hi * eps_coef) + drift * eps_coef
    return AffineVector(const, coef), interval
