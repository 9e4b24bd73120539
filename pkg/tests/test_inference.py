"""Statistical core: statistic, decomposition, truncated-Gaussian p-values
(against an arbitrary-precision quadrature oracle), baselines, and the
parametric sweep (against a brute-force grid oracle).
"""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomsig.anomaly import AnomalyRegion, detect_region, error_map
from anomsig.covariance import CovarianceModel
from anomsig.diffusion.sampler import reconstruct
from anomsig.errors import (
    CovarianceError,
    EmptyRegionError,
    MassUnderflowError,
    SearchBudgetError,
)
from anomsig.inference.decomposition import TestInstance as Instance
from anomsig.inference.decomposition import decompose
from anomsig.inference.decomposition import test_statistic as statistic_value
from anomsig.inference.permutation import permutation_p, permutation_p_explicit
from anomsig.inference.pipeline import run_single_test
from anomsig.inference.result import intervals_from_json, intervals_to_json
from anomsig.inference.search import SearchConfig, parametric_search, search_range
from anomsig.inference.truncated import (
    TruncatedGaussian,
    bonferroni_p,
    bonferroni_p_from_log,
    log_naive_p,
    naive_p,
    oc_p,
    selective_p,
)
from anomsig.pwl.affine import AffineVector
from anomsig.pwl.intervals import FixedInterval, IntervalSet

from conftest import TINY_N

mpmath.mp.dps = 40


def quadrature_p(z_obs: float, sigma2: float, intervals) -> float:
    """Two-sided truncated p-value by adaptive quadrature of the density.

    Independent of the log-tail arithmetic in the implementation: clips the
    intervals, then integrates exp(-t^2 / 2 sigma^2) at 40-digit precision.
    """
    sigma = mpmath.sqrt(mpmath.mpf(sigma2))

    def pdf(t):
        return mpmath.exp(-(t * t) / (2 * sigma * sigma)) / (
            sigma * mpmath.sqrt(2 * mpmath.pi)
        )

    def mass(lo, hi):
        lo_m = mpmath.mpf("-inf") if lo == -math.inf else mpmath.mpf(lo)
        hi_m = mpmath.mpf("inf") if hi == math.inf else mpmath.mpf(hi)
        if hi_m <= lo_m:
            return mpmath.mpf(0)
        return mpmath.quad(pdf, [lo_m, hi_m])

    denom = sum((mass(iv.lo, iv.hi) for iv in intervals), mpmath.mpf(0))
    thr = abs(z_obs)
    numer = mpmath.mpf(0)
    for iv in intervals:
        if iv.lo <= -thr:
            numer += mass(iv.lo, min(iv.hi, -thr))
        if iv.hi >= thr:
            numer += mass(max(iv.lo, thr), iv.hi)
    return float(min(mpmath.mpf(1), numer / denom))


def random_union(rng: np.random.Generator) -> IntervalSet:
    """2-4 disjoint intervals, sometimes with an unbounded tail."""
    count = int(rng.integers(2, 5))
    points = np.sort(rng.uniform(-6, 6, size=2 * count))
    parts = [
        FixedInterval(points[2 * i], points[2 * i + 1]) for i in range(count)
    ]
    if rng.random() < 0.3:
        parts[-1] = FixedInterval(parts[-1].lo, math.inf)
    if rng.random() < 0.3:
        parts[0] = FixedInterval(-math.inf, parts[0].hi)
    return IntervalSet(parts)


class TestStatistic:
    def _instance(self, x, x_ref, n=None):
        n = len(x) if n is None else n
        return Instance(np.asarray(x, float), np.asarray(x_ref, float),
                            CovarianceModel("identity", n))

    def test_equal_images_zero(self):
        inst = self._instance(np.arange(4.0), np.arange(4.0))
        region = AnomalyRegion(np.array([1, 3]), 0.5)
        assert statistic_value(inst, region) == 0.0

    def test_direct_arithmetic(self):
        x = np.array([3.0, 5.0, 7.0, 7.0])
        x_ref = np.array([1.0, 1.0, 1.0, 1.0])
        region = AnomalyRegion(np.array([0, 1]), 0.5)
        assert statistic_value(self._instance(x, x_ref), region) == pytest.approx(3.0)

    def test_empty_region_raises(self):
        inst = self._instance(np.zeros(4), np.zeros(4))
        with pytest.raises(EmptyRegionError):
            statistic_value(inst, AnomalyRegion(np.array([], dtype=int), 0.5))

    def test_nu_form_matches_mean_difference(self):
        # dual-formula check: nu from the decomposition applied to the stack
        rng = np.random.default_rng(10)
        for kind in ("identity", "ar"):
            cov = CovarianceModel(kind, 9)
            x, x_ref = cov.sample(rng), cov.sample(rng)
            inst = Instance(x, x_ref, cov)
            pixels = np.sort(rng.choice(9, size=4, replace=False))
            region = AnomalyRegion(pixels, 0.5)
            direct = statistic_value(inst, region)
            nu = decompose(inst, region).nu
            assert abs(direct - float(nu @ inst.stacked())) < 1e-12


class TestDecompose:
    def test_identity_sigma2_closed_form(self):
        rng = np.random.default_rng(11)
        cov = CovarianceModel("identity", 16)
        inst = Instance(cov.sample(rng), cov.sample(rng), cov)
        for m in (1, 3, 8):
            region = AnomalyRegion(np.arange(m), 0.5)
            assert decompose(inst, region).sigma2 == pytest.approx(2.0 / m)

    def test_nu_identities_random_instances(self):
        rng = np.random.default_rng(12)
        for trial in range(100):
            n = int(rng.integers(2, 12))
            cov = CovarianceModel(
                "identity" if trial % 2 else "ar", n, rho=0.5
            )
            inst = Instance(cov.sample(rng), cov.sample(rng), cov)
            m = int(rng.integers(1, n + 1))
            pixels = np.sort(rng.choice(n, size=m, replace=False))
            d = decompose(inst, AnomalyRegion(pixels, 0.5))
            assert abs(float(d.nu @ d.b) - 1.0) < 1e-12
            assert abs(float(d.nu @ d.a)) < 1e-10

    def test_ar_sigma2_matches_dense(self):
        rng = np.random.default_rng(13)
        cov = CovarianceModel("ar", 10, rho=0.5)
        inst = Instance(cov.sample(rng), cov.sample(rng), cov)
        pixels = np.array([0, 2, 3, 7])
        d = decompose(inst, AnomalyRegion(pixels, 0.5))
        nu_half = np.zeros(10)
        nu_half[pixels] = 1.0 / 4
        tilde = np.block(
            [[cov.dense(), np.zeros((10, 10))], [np.zeros((10, 10)), cov.dense()]]
        )
        nu = np.concatenate([nu_half, -nu_half])
        assert d.sigma2 == pytest.approx(float(nu @ tilde @ nu), rel=1e-12)

    def test_line_reproduces_stack(self):
        rng = np.random.default_rng(14)
        cov = CovarianceModel("ar", 8, rho=0.5)
        inst = Instance(cov.sample(rng), cov.sample(rng), cov)
        d = decompose(inst, AnomalyRegion(np.array([1, 4, 5]), 0.5))
        np.testing.assert_allclose(d.line_at(d.z_obs), inst.stacked(), atol=1e-10)

    def test_statistic_identity_along_line(self):
        # T(a + b z) = z for every z, not only at the observed point
        rng = np.random.default_rng(15)
        cov = CovarianceModel("ar", 8, rho=0.5)
        inst = Instance(cov.sample(rng), cov.sample(rng), cov)
        d = decompose(inst, AnomalyRegion(np.array([0, 3]), 0.5))
        for z in (-2.5, 0.0, 1.7):
            assert abs(float(d.nu @ d.line_at(z)) - z) < 1e-12


class TestSelectiveP:
    def test_full_line_reduces_to_naive(self):
        tg = TruncatedGaussian(2.0, IntervalSet([FixedInterval.full()]))
        for z in (0.0, 0.8, -3.2):
            assert selective_p(z, tg) == pytest.approx(naive_p(z, 2.0), abs=1e-14)

    def test_all_mass_at_least_as_extreme(self):
        z = 1.3
        tg = TruncatedGaussian(1.0, IntervalSet([FixedInterval(z, math.inf)]))
        assert selective_p(z, tg) == 1.0

    def test_matches_quadrature_on_random_unions(self):
        rng = np.random.default_rng(16)
        for _ in range(12):
            sigma2 = float(rng.uniform(0.25, 4.0))
            union = random_union(rng)
            z = float(rng.uniform(-5, 5))
            got = selective_p(z, TruncatedGaussian(sigma2, union))
            want = quadrature_p(z, sigma2, union)
            assert abs(got - want) < 1e-8

    def test_deep_tail_matches_quadrature(self):
        # observed statistic twelve sigmas out: naive CDF differences would
        # underflow; the log-space route must still match quadrature
        sigma2 = 0.7
        sigma = math.sqrt(sigma2)
        union = IntervalSet(
            [FixedInterval(-14 * sigma, -11 * sigma),
             FixedInterval(-2 * sigma, 3 * sigma),
             FixedInterval(11.5 * sigma, math.inf)]
        )
        z = 12.0 * sigma
        got = selective_p(z, TruncatedGaussian(sigma2, union))
        want = quadrature_p(z, sigma2, union)
        assert got > 0.0
        assert abs(got - want) < 1e-8

    def test_underflow_raises(self):
        tg = TruncatedGaussian(1.0, IntervalSet([FixedInterval(5.0, 5.0)]))
        with pytest.raises(MassUnderflowError):
            selective_p(1.0, tg)

    def test_invalid_variance(self):
        with pytest.raises(ValueError):
            TruncatedGaussian(0.0, IntervalSet([FixedInterval.full()]))

    @given(
        z1=st.floats(0.0, 6.0),
        z2=st.floats(0.0, 6.0),
        lo=st.floats(-4.0, 0.0),
        hi=st.floats(0.5, 5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_magnitude(self, z1, z2, lo, hi):
        tg = TruncatedGaussian(
            1.0, IntervalSet([FixedInterval(lo, hi), FixedInterval(hi + 1.0, hi + 2.5)])
        )
        a, b = sorted((z1, z2))
        assert selective_p(b, tg) <= selective_p(a, tg) + 1e-12


class TestNaive:
    def test_zero_is_one(self):
        assert naive_p(0.0, 3.0) == 1.0

    def test_standard_quantile(self):
        sigma2 = 2.5
        z = 1.959964 * math.sqrt(sigma2)
        assert naive_p(z, sigma2) == pytest.approx(0.05, abs=1e-6)

    def test_matches_quadrature(self):
        rng = np.random.default_rng(17)
        full = IntervalSet([FixedInterval.full()])
        for _ in range(8):
            sigma2 = float(rng.uniform(0.3, 3.0))
            z = float(rng.uniform(-6, 6))
            assert abs(naive_p(z, sigma2) - quadrature_p(z, sigma2, full)) < 1e-10

    def test_log_form_consistent(self):
        for z, sigma2 in ((0.5, 1.0), (4.0, 2.0), (9.0, 1.0)):
            assert math.exp(log_naive_p(z, sigma2)) == pytest.approx(
                naive_p(z, sigma2), rel=1e-12
            )

    def test_log_form_survives_underflow(self):
        # 60 sigma: the plain p-value is flushed to zero, the log is finite
        assert naive_p(60.0, 1.0) == 0.0
        log_p = log_naive_p(60.0, 1.0)
        assert math.isfinite(log_p) and log_p < -1700

    def test_invalid_variance(self):
        with pytest.raises(ValueError):
            naive_p(1.0, 0.0)
        with pytest.raises(ValueError):
            log_naive_p(1.0, -1.0)


class TestBonferroni:
    def test_zero_stays_zero(self):
        assert bonferroni_p(0.0, 64) == 0.0

    def test_small_count_exact(self):
        assert bonferroni_p(0.2, 2) == pytest.approx(0.8, rel=1e-14)

    def test_log_space_product_below_one(self):
        # 2^64 * 1e-30 stays far below 1; frozen from exact log arithmetic
        assert bonferroni_p(1e-30, 64) == pytest.approx(
            1.8446744073709552e-11, rel=1e-10
        )

    def test_clamps_to_one(self):
        assert bonferroni_p(1e-30, 4096) == 1.0
        assert bonferroni_p(0.6, 2) == 1.0

    def test_from_log_consistent(self):
        for naive, n in ((0.2, 2), (1e-30, 64), (1e-30, 4096)):
            assert bonferroni_p_from_log(math.log(naive), n) == pytest.approx(
                bonferroni_p(naive, n), rel=1e-12
            )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            bonferroni_p(-0.1, 4)


class TestOcP:
    def test_full_line_is_naive(self):
        assert oc_p(1.4, 1.5, FixedInterval.full()) == pytest.approx(
            naive_p(1.4, 1.5), abs=1e-14
        )

    def test_one_sided_piece_matches_quadrature(self):
        sigma2 = 1.2
        sigma = math.sqrt(sigma2)
        z = 0.9
        piece = FixedInterval(z, z + sigma)
        got = oc_p(z, sigma2, piece)
        want = quadrature_p(z, sigma2, IntervalSet([piece]))
        assert abs(got - want) < 1e-10

    def test_symmetric_piece_equals_selective(self):
        z = 1.1
        piece = FixedInterval(-2.0, 2.0)
        assert oc_p(z, 1.0, piece) == selective_p(
            z, TruncatedGaussian(1.0, IntervalSet([piece]))
        )


class TestPermutation:
    def test_identity_permutation_tie_is_zero(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        inst = Instance(x, x_ref, identity_cov)
        p = permutation_p_explicit(
            inst, tiny_plan, tiny_weights, tiny_filter, 0.4,
            [np.arange(TINY_N)],
        )
        assert p == 0.0

    def test_constant_image_all_ties(
        self, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x = np.full(TINY_N, 5.0)
        x_ref = np.zeros(TINY_N)
        inst = Instance(x, x_ref, identity_cov)
        p = permutation_p(inst, tiny_plan, tiny_weights, tiny_filter, 0.05, 20, 0)
        assert p == 0.0

    def test_seeded_bitwise_reproducible(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        inst = Instance(x, x_ref, identity_cov)
        a = permutation_p(inst, tiny_plan, tiny_weights, tiny_filter, 0.4, 50, 42)
        b = permutation_p(inst, tiny_plan, tiny_weights, tiny_filter, 0.4, 50, 42)
        assert a == b
        assert 0.0 <= a <= 1.0

    def test_bad_count(self, tiny_pair, tiny_plan, tiny_weights, tiny_filter,
                       identity_cov):
        x, x_ref = tiny_pair
        inst = Instance(x, x_ref, identity_cov)
        with pytest.raises(ValueError):
            permutation_p(inst, tiny_plan, tiny_weights, tiny_filter, 0.4, 0, 0)

    def test_empty_observed_region_raises(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        inst = Instance(x, x_ref, identity_cov)
        with pytest.raises(EmptyRegionError):
            permutation_p(inst, tiny_plan, tiny_weights, tiny_filter, 50.0, 5, 0)


def _tiny_search_parts(tiny_pair, tiny_plan, tiny_weights, tiny_filter,
                       identity_cov, lam=0.4):
    x, x_ref = tiny_pair
    predictor = tiny_weights.compiled()
    recon = reconstruct(x, tiny_plan, predictor)
    region = detect_region(error_map(x, recon, tiny_filter), lam)
    inst = Instance(x, x_ref, identity_cov)
    decomp = decompose(inst, region)
    return inst, region, decomp, predictor


class TestParametricSearch:
    def test_search_range_contains_observation(self):
        lo, hi = search_range(25.0, 1.0, 20.0)
        assert lo <= -20.0 and hi >= 26.0
        lo, hi = search_range(0.0, 2.0, 20.0)
        assert (lo, hi) == (-40.0, 40.0)

    def test_observed_in_result_and_sorted(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        inst, region, decomp, predictor = _tiny_search_parts(
            tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
        )
        out = parametric_search(
            inst, region, decomp, tiny_plan, predictor, tiny_filter, 0.4
        )
        assert out.truncation.contains(decomp.z_obs)
        assert out.observed_piece.contains(decomp.z_obs)
        endpoints = [e for iv in out.truncation for e in (iv.lo, iv.hi)]
        finite = [e for e in endpoints if math.isfinite(e)]
        assert finite == sorted(finite)
        assert out.anchors >= 1 and out.matched >= 1

    def test_deterministic(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        inst, region, decomp, predictor = _tiny_search_parts(
            tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
        )
        runs = [
            parametric_search(
                inst, region, decomp, tiny_plan, predictor, tiny_filter, 0.4
            ).truncation
            for _ in range(2)
        ]
        assert runs[0] == runs[1]

    def test_grid_oracle(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        # brute-force membership: step the concrete pipeline across the range
        # and compare region equality against truncation membership
        inst, region, decomp, predictor = _tiny_search_parts(
            tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
        )
        out = parametric_search(
            inst, region, decomp, tiny_plan, predictor, tiny_filter, 0.4
        )
        line = AffineVector(decomp.a, decomp.b)
        grid = np.arange(out.z_min, out.z_max, 1e-2)
        disagreements = []
        for z in grid:
            x_z = line.eval(z)[:TINY_N]
            concrete = detect_region(
                error_map(x_z, reconstruct(x_z, tiny_plan, predictor), tiny_filter),
                0.4,
            )
            if (concrete == region) != out.truncation.contains(z):
                disagreements.append(z)
        for z in disagreements:
            assert out.truncation.nearest_endpoint_distance(z) <= 2 * out.gamma
        assert len(disagreements) <= max(1, len(grid) // 1000)

    def test_budget_error_attributes(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        inst, region, decomp, predictor = _tiny_search_parts(
            tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
        )
        with pytest.raises(SearchBudgetError) as exc:
            parametric_search(
                inst, region, decomp, tiny_plan, predictor, tiny_filter, 0.4,
                SearchConfig(max_anchors=2),
            )
        err = exc.value
        assert err.anchors == 2
        assert err.covered_to < err.z_max


class TestRunSingleTest:
    def test_outcome_fields(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        out = run_single_test(
            x, x_ref, identity_cov, tiny_weights, tiny_plan, tiny_filter, lam=0.4,
            permutations=10, permutation_seed=1,
        )
        predictor = tiny_weights.compiled()
        recon = reconstruct(x, tiny_plan, predictor)
        region = detect_region(error_map(x, recon, tiny_filter), 0.4)
        assert out.region == region.pixels.tolist()
        inst = Instance(x, x_ref, identity_cov)
        assert out.z_obs == pytest.approx(statistic_value(inst, region), abs=1e-12)
        assert out.sigma2 == pytest.approx(2.0 / region.size)
        for p in (out.p_selective, out.p_naive, out.p_bonferroni, out.p_oc,
                  out.p_permutation):
            assert 0.0 <= p <= 1.0
        assert out.p_oc >= 0.0 and out.truncation.contains(out.z_obs)
        assert out.counts["anchors"] >= 1
        assert out.timings["total_s"] > 0.0
        assert out.plan_seed == tiny_plan.seed

    def test_no_permutations_is_none(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        out = run_single_test(
            x, x_ref, identity_cov, tiny_weights, tiny_plan, tiny_filter, lam=0.4
        )
        assert out.p_permutation is None

    def test_empty_region_raises(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        with pytest.raises(EmptyRegionError):
            run_single_test(
                x, x_ref, identity_cov, tiny_weights, tiny_plan, tiny_filter,
                lam=50.0,
            )

    def test_json_round_trip(
        self, tiny_pair, tiny_plan, tiny_weights, tiny_filter, identity_cov
    ):
        x, x_ref = tiny_pair
        out = run_single_test(
            x, x_ref, identity_cov, tiny_weights, tiny_plan, tiny_filter, lam=0.4
        )
        doc = out.to_json_dict()
        assert intervals_from_json(doc["intervals"]) == out.truncation
        assert doc["p_permutation"] is None
        assert doc["lambda"] == 0.4


class TestIntervalsJson:
    def test_infinities_become_null(self):
        s = IntervalSet([FixedInterval(-math.inf, 1.0), FixedInterval(2.0, math.inf)])
        doc = intervals_to_json(s)
        assert doc == [[None, 1.0], [2.0, None]]
        assert intervals_from_json(doc) == s

    def test_finite_round_trip(self):
        s = IntervalSet([FixedInterval(-1.25, 0.5), FixedInterval(0.75, 3.5)])
        assert intervals_from_json(intervals_to_json(s)) == s
