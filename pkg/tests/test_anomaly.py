"""Error map, threshold selection, and the affine route to both."""

import math

import numpy as np
import pytest

from anomsig.anomaly import (
    AnomalyRegion,
    FilterSpec,
    detect_region,
    error_line,
    error_map,
    region_and_interval,
)
from anomsig.diffusion.sampler import reconstruct
from anomsig.errors import ShapeError
from anomsig.pwl.affine import AffineVector
from anomsig.pwl.intervals import FixedInterval

from conftest import TINY_N


def _loop_filter(img: np.ndarray, k: int) -> np.ndarray:
    """Nested-loop uniform filter, zero padded, full-area normalization."""
    side = math.isqrt(img.size)
    grid = img.reshape(side, side)
    out = np.zeros_like(grid)
    r = k // 2
    for i in range(side):
        for j in range(side):
            acc = 0.0
            for u in range(-r, r + 1):
                for v in range(-r, r + 1):
                    if 0 <= i + u < side and 0 <= j + v < side:
                        acc += grid[i + u, j + v]
            out[i, j] = acc / (k * k)
    return out.ravel()


class TestFilterSpec:
    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            FilterSpec(kernel_size=2)

    def test_matrix_rows_sum_to_one_in_interior(self):
        mat = FilterSpec(3).matrix(4)
        interior = 4 + 1
        assert mat[interior].sum() == pytest.approx(1.0)

    def test_corner_damped_by_full_area(self):
        # corner of a 3x3 kernel covers 4 in-bounds taps over divisor 9
        mat = FilterSpec(3).matrix(4)
        assert mat[0].sum() == pytest.approx(4.0 / 9.0)


class TestErrorMap:
    def test_perfect_reconstruction_zero(self, tiny_filter):
        x = np.random.default_rng(0).standard_normal(TINY_N)
        assert np.all(error_map(x, x, tiny_filter) == 0.0)

    def test_single_spike_spreads_uniformly(self, tiny_filter):
        # one pixel differing by 9 at an interior site -> 1.0 over its 3x3
        x = np.zeros(64)
        recon = np.zeros(64)
        x[8 * 3 + 3] = 9.0
        em = error_map(x, recon, tiny_filter)
        grid = em.reshape(8, 8)
        np.testing.assert_allclose(grid[2:5, 2:5], 1.0, atol=1e-12)
        assert grid[0, 0] == 0.0

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_matches_loop_filter(self, k):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(64)
        recon = rng.standard_normal(64)
        em = error_map(x, recon, FilterSpec(k))
        np.testing.assert_allclose(em, np.abs(_loop_filter(x - recon, k)), atol=1e-12)

    def test_shape_mismatch(self, tiny_filter):
        with pytest.raises(ShapeError):
            error_map(np.zeros(16), np.zeros(9), tiny_filter)

    def test_non_square_length(self, tiny_filter):
        with pytest.raises(ShapeError):
            error_map(np.zeros(15), np.zeros(15), tiny_filter)


class TestDetectRegion:
    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(ValueError):
            detect_region(np.ones(4), 0.0)

    def test_all_below_is_empty(self):
        region = detect_region(np.full(16, 0.1), 0.8)
        assert region.is_empty() and region.size == 0

    def test_simple_selection(self):
        region = detect_region(np.array([0.9, 0.7]), 0.8)
        assert region.pixels.tolist() == [0]

    def test_tie_at_threshold_selected(self):
        region = detect_region(np.array([0.8, 0.79999]), 0.8)
        assert region.pixels.tolist() == [0]

    def test_matches_comprehension(self):
        rng = np.random.default_rng(2)
        err = rng.uniform(0, 1, 100)
        region = detect_region(err, 0.6)
        assert region.pixels.tolist() == [i for i, e in enumerate(err) if e >= 0.6]


class TestAnomalyRegion:
    def test_unsorted_rejected(self):
        with pytest.raises(ShapeError):
            AnomalyRegion(np.array([3, 1]), 0.5)

    def test_duplicate_rejected(self):
        with pytest.raises(ShapeError):
            AnomalyRegion(np.array([1, 1]), 0.5)

    def test_equality_is_set_equality(self):
        a = AnomalyRegion(np.array([1, 4]), 0.5)
        b = AnomalyRegion(np.array([1, 4]), 0.9)
        assert a == b and hash(a) == hash(b)
        assert a != AnomalyRegion(np.array([1, 5]), 0.5)


class TestAffineRoute:
    def _line(self, rng):
        return AffineVector(
            rng.standard_normal(2 * TINY_N), rng.standard_normal(2 * TINY_N)
        )

    def test_odd_length_rejected(self, tiny_plan, tiny_weights, tiny_filter):
        line = AffineVector(np.zeros(15), np.zeros(15))
        with pytest.raises(ShapeError):
            region_and_interval(line, 0.0, tiny_plan, tiny_weights, tiny_filter, 0.4)

    def test_zero_coef_full_interval(self, tiny_plan, tiny_weights, tiny_filter):
        rng = np.random.default_rng(3)
        stacked = rng.standard_normal(2 * TINY_N)
        line = AffineVector.constant(stacked)
        region, iv = region_and_interval(
            line, 0.0, tiny_plan, tiny_weights, tiny_filter, 0.4
        )
        assert iv == FixedInterval.full()
        recon = reconstruct(stacked[:TINY_N], tiny_plan, tiny_weights)
        expected = detect_region(
            error_map(stacked[:TINY_N], recon, tiny_filter), 0.4
        )
        assert region == expected

    def test_region_constant_inside_interval(
        self, tiny_plan, tiny_weights, tiny_filter
    ):
        rng = np.random.default_rng(4)
        line = self._line(rng)
        region, iv = region_and_interval(
            line, 0.0, tiny_plan, tiny_weights, tiny_filter, 0.4
        )
        lo, hi = max(iv.lo, -20.0), min(iv.hi, 20.0)
        for z in rng.uniform(lo, hi, size=50):
            x = line.eval(z)[:TINY_N]
            concrete = detect_region(
                error_map(x, reconstruct(x, tiny_plan, tiny_weights), tiny_filter), 0.4
            )
            assert concrete == region

    def test_step_past_endpoint_changes_something(
        self, tiny_plan, tiny_weights, tiny_filter
    ):
        # just beyond a finite endpoint the region or a relu sign must differ
        rng = np.random.default_rng(5)
        moved = 0
        for _ in range(8):
            line = self._line(rng)
            region, iv = region_and_interval(
                line, 0.0, tiny_plan, tiny_weights, tiny_filter, 0.4
            )
            for z_out in (iv.hi + 1e-6, iv.lo - 1e-6):
                if not np.isfinite(z_out):
                    continue
                x = line.eval(z_out)[:TINY_N]
                recon, signs = reconstruct(
                    x, tiny_plan, tiny_weights, record_signs=True
                )
                outside_region = detect_region(
                    error_map(x, recon, tiny_filter), 0.4
                )
                x_in = line.eval(np.clip(0.0, iv.lo, iv.hi))[:TINY_N]
                _, signs_in = reconstruct(
                    x_in, tiny_plan, tiny_weights, record_signs=True
                )
                flat = lambda s: np.concatenate(
                    [m.ravel() for leg in s for m in leg]
                )
                if outside_region != region or not np.array_equal(
                    flat(signs), flat(signs_in)
                ):
                    moved += 1
        assert moved >= 6

    def test_error_line_matches_concrete(self, tiny_plan, tiny_weights, tiny_filter):
        rng = np.random.default_rng(6)
        line = AffineVector(
            rng.standard_normal(TINY_N), rng.standard_normal(TINY_N)
        )
        err, iv = error_line(line, 0.0, tiny_plan, tiny_weights, tiny_filter)
        for z in rng.uniform(max(iv.lo, -20), min(iv.hi, 20), size=10):
            x = line.eval(z)
            concrete = error_map(x, reconstruct(x, tiny_plan, tiny_weights), tiny_filter)
            assert np.max(np.abs(err.eval(z) - concrete)) < 1e-8
