"""End-to-end single test: detect, decompose, search, and score."""

from __future__ import annotations

import time

import numpy as np

from ..anomaly import FilterSpec, detect_region, error_map
from ..covariance import CovarianceModel
from ..diffusion.plan import ReconstructionPlan
from ..diffusion.sampler import reconstruct
from ..errors import EmptyRegionError
from ..unet.config import Weights
from ..unet.model import NoisePredictor
from .decomposition import TestInstance, decompose
from .permutation import permutation_p
from .result import TestOutcome
from .search import SearchConfig, parametric_search
from .truncated import (
    TruncatedGaussian,
    bonferroni_p_from_log,
    log_naive_p,
    naive_p,
    oc_p,
    selective_p,
)


def run_single_test(
    x: np.ndarray,
    x_ref: np.ndarray,
    covariance: CovarianceModel,
    net: Weights | NoisePredictor,
    plan: ReconstructionPlan,
    filt: FilterSpec = FilterSpec(),
    lam: float = 0.8,
    search_cfg: SearchConfig = SearchConfig(),
    permutations: int = 0,
    permutation_seed: int = 0,
) -> TestOutcome:
    """Full pipeline on one image pair. Raises EmptyRegionError when no
    pixel reaches the detection threshold."""
    t_start = time.perf_counter()
    predictor = net if isinstance(net, NoisePredictor) else net.compiled()
    x = np.asarray(x, dtype=np.float64)

    recon = reconstruct(x, plan, predictor)
    region = detect_region(error_map(x, recon, filt), lam)
    if region.is_empty():
        raise EmptyRegionError("no anomaly detected; the test is undefined")

    instance = TestInstance(x, x_ref, covariance)
    decomp = decompose(instance, region)

    t_search = time.perf_counter()
    outcome = parametric_search(
        instance, region, decomp, plan, predictor, filt, lam, search_cfg
    )
    search_seconds = time.perf_counter() - t_search

    tg = TruncatedGaussian(decomp.sigma2, outcome.truncation)
    p_sel = selective_p(decomp.z_obs, tg)
    p_nv = naive_p(decomp.z_obs, decomp.sigma2)
    p_bf = bonferroni_p_from_log(log_naive_p(decomp.z_obs, decomp.sigma2), instance.n)
    p_oc_val = oc_p(decomp.z_obs, decomp.sigma2, outcome.observed_piece)
    p_perm = None
    if permutations > 0:
        p_perm = permutation_p(
            instance, plan, predictor, filt, lam, permutations, permutation_seed
        )

    return TestOutcome(
        region=region.pixels.tolist(),
        lam=lam,
        z_obs=decomp.z_obs,
        sigma2=decomp.sigma2,
        truncation=outcome.truncation,
        p_selective=p_sel,
        p_naive=p_nv,
        p_bonferroni=p_bf,
        p_oc=p_oc_val,
        p_permutation=p_perm,
        plan_seed=plan.seed,
        timings={
            "search_s": search_seconds,
            "total_s": time.perf_counter() - t_start,
        },
        counts={
            "anchors": outcome.anchors,
            "matched": outcome.matched,
            "zero_width_skips": outcome.zero_width_skips,
            "intervals": len(outcome.truncation),
        },
    )
