"""Parametric sweep of the line a + b z: stitch together the intervals on
which the detected region equals the observed one.

Each anchor yields the activation cell around it and the region selected
there; the sweep advances just past the cell's upper end, so the whole
range is covered in finitely many exact pieces. The observed z's own cell
is computed first: it certifies consistency with the concrete pipeline
and doubles as the truncation of the over-conditioned baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..anomaly import AnomalyRegion, FilterSpec, region_and_interval
from ..diffusion.plan import ReconstructionPlan
from ..errors import PropagationError, SearchBudgetError
from ..pwl.affine import AffineVector
from ..pwl.intervals import DEFAULT_MERGE_TOL, FixedInterval, IntervalSet, intervals_union
from ..unet.config import Weights
from ..unet.model import NoisePredictor
from .decomposition import Decomposition, TestInstance


@dataclass(frozen=True)
class SearchConfig:
    range_mult: float = 20.0
    gamma_rel: float = 1e-4
    max_anchors: int = 1_000_000
    merge_tol: float = DEFAULT_MERGE_TOL


@dataclass(frozen=True)
class SearchOutcome:
    truncation: IntervalSet
    observed_piece: FixedInterval
    z_min: float
    z_max: float
    gamma: float
    anchors: int
    matched: int
    zero_width_skips: int


def search_range(z_obs: float, sigma: float, range_mult: float) -> tuple[float, float]:
    """Sweep bounds: +-range_mult sigma, stretched to keep z_obs interior."""
    return (
        min(-range_mult * sigma, z_obs - sigma),
        max(range_mult * sigma, z_obs + sigma),
    )


def parametric_search(
    instance: TestInstance,
    region: AnomalyRegion,
    decomposition: Decomposition,
    plan: ReconstructionPlan,
    net: Weights | NoisePredictor,
    filt: FilterSpec,
    lam: float,
    cfg: SearchConfig = SearchConfig(),
) -> SearchOutcome:
    """Truncation set {z : region(z) = observed region} over the sweep range."""
    sigma = math.sqrt(decomposition.sigma2)
    gamma = cfg.gamma_rel * sigma
    z_obs = decomposition.z_obs
    z_min, z_max = search_range(z_obs, sigma, cfg.range_mult)
    line = AffineVector(decomposition.a, decomposition.b)
    width_tol = 1e-12 * max(1.0, sigma)

    observed_region, observed_piece = region_and_interval(
        line, z_obs, plan, net, filt, lam
    )
    if observed_region != region:
        raise PropagationError(
            "affine propagation at z_obs selected a different region than the "
            f"concrete pipeline ({observed_region.size} vs {region.size} pixels)"
        )

    parts = [observed_piece]
    anchors = 1
    matched = 1
    skips = 0
    z = z_min
    while z <= z_max:
        if anchors >= cfg.max_anchors:
            raise SearchBudgetError(
                f"anchor budget {cfg.max_anchors} exhausted at z={z:.6g} "
                f"(target {z_max:.6g})",
                anchors=anchors,
                covered_to=z,
                z_max=z_max,
            )
        cell_region, piece = region_and_interval(line, z, plan, net, filt, lam)
        anchors += 1
        if piece.width <= width_tol:
            skips += 1
            z = max(z, piece.hi) + gamma
            continue
        if cell_region == region:
            parts.append(piece)
            matched += 1
        z = piece.hi + gamma

    truncation = intervals_union(parts, cfg.merge_tol)
    if not truncation.contains(z_obs):
        raise PropagationError(
            f"observed statistic {z_obs} missing from the truncation set"
        )
    return SearchOutcome(
        truncation=truncation,
        observed_piece=observed_piece,
        z_min=z_min,
        z_max=z_max,
        gamma=gamma,
        anchors=anchors,
        matched=matched,
        zero_width_skips=skips,
    )
