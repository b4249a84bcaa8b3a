"""Unit tests for terrain generation and noisy step execution."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from uibo.acquisition import SearchRegion
from uibo.gp import Hyperparams, kernel_se
from uibo.simulate import (
    NoiseModel,
    Terrain,
    evaluate_terrain,
    execute_step,
    sample_terrain,
    segment_vibration,
)

REGION = SearchRegion(np.array([0.0, 0.0]), np.array([10.0, 10.0]))
KERNEL = Hyperparams(1.0, np.array([1.0, 1.0]), 0.1, 0.0)


def flat_terrain(level=2.0):
    """A terrain with zero weights: evaluates to ``level`` everywhere."""
    return Terrain(np.array([[5.0, 5.0]]), np.array([0.0]), KERNEL, level, REGION)


class TestTerrain:
    def test_same_seed_bitwise_identical(self):
        a = sample_terrain(123, REGION, 40, KERNEL)
        b = sample_terrain(123, REGION, 40, KERNEL)
        assert np.array_equal(a.centers, b.centers)
        assert np.array_equal(a.weights, b.weights)
        assert a.offset == b.offset

    def test_zero_weights_give_constant_offset(self):
        t = flat_terrain(3.5)
        rng = np.random.default_rng(0)
        probes = rng.uniform(0, 10, size=(20, 2))
        assert_allclose(evaluate_terrain(t, probes), 3.5)

    def test_floor_on_audit_grid(self):
        for seed in range(5):
            t = sample_terrain(seed, REGION, 80, KERNEL)
            grid = REGION.grid(200)
            values = evaluate_terrain(t, grid)
            assert values.min() >= 0.0
            assert_allclose(values.min(), 0.5, atol=1e-12)

    def test_single_center_peak_value(self):
        center = np.array([[4.0, 6.0]])
        t = Terrain(center, np.array([2.0]), KERNEL, 1.0, REGION)
        # at the center the kernel equals signal_var
        assert_allclose(evaluate_terrain(t, center[0]), 1.0 + 2.0 * 1.0, rtol=1e-14)

    def test_far_from_centers_reverts_to_offset(self):
        t = Terrain(np.array([[0.0, 0.0]]), np.array([3.0]), KERNEL, 1.25, REGION)
        assert_allclose(evaluate_terrain(t, [10.0, 10.0]), 1.25, atol=1e-6)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(7)
        t = sample_terrain(9, REGION, 30, KERNEL)
        probes = rng.uniform(0, 10, size=(15, 2))
        got = evaluate_terrain(t, probes)
        for i, x in enumerate(probes):
            want = t.offset + sum(
                w * float(kernel_se(x, c, KERNEL))
                for w, c in zip(t.weights, t.centers))
            assert_allclose(got[i], want, rtol=1e-12)

    def test_grid_variance_tracks_pointwise_variance_heuristic(self):
        # The pointwise variance of the random field at x is sum_j k(x, c_j)^2;
        # a single draw's empirical grid variance should be within [0.25x, 4x]
        # of the grid mean of that heuristic.
        t = sample_terrain(1, REGION, 80, KERNEL)
        grid = REGION.grid(100)
        empirical = evaluate_terrain(t, grid).var()
        k = kernel_se(grid[:, None, :], t.centers, KERNEL)
        heuristic = float(np.mean(np.sum(k**2, axis=1)))
        assert 0.25 * heuristic <= empirical <= 4.0 * heuristic

    def test_rejects_mismatched_centers_and_weights(self):
        with pytest.raises(ValueError):
            Terrain(np.zeros((3, 2)), np.zeros(2), KERNEL, 0.0, REGION)
        with pytest.raises(ValueError):
            sample_terrain(0, REGION, 0, KERNEL)


class TestNoiseModel:
    def test_rejects_negative_sd(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1, 0.0, 0.0)

    def test_zero_noise_allowed(self):
        n = NoiseModel(0.0, 0.0, 0.0)
        assert n.exec_sd == n.loc_sd == n.obs_sd == 0.0


class TestSegmentVibration:
    def test_constant_field_any_segment(self):
        t = flat_terrain(2.25)
        assert_allclose(segment_vibration(t, [0.0, 0.0], [9.0, 3.0]), 2.25, rtol=1e-12)

    def test_degenerate_segment_is_point_value(self):
        t = sample_terrain(3, REGION, 50, KERNEL)
        p = np.array([4.2, 5.1])
        assert segment_vibration(t, p, p) == evaluate_terrain(t, p)

    def test_half_segments_recompose(self):
        t = sample_terrain(4, REGION, 80, KERNEL)
        rng = np.random.default_rng(10)
        for _ in range(20):
            a, b = rng.uniform(0, 10, size=(2, 2))
            mid = a + rng.uniform(0.2, 0.8) * (b - a)
            l1 = np.linalg.norm(mid - a)
            l2 = np.linalg.norm(b - mid)
            whole = segment_vibration(t, a, b)
            parts = (l1 * segment_vibration(t, a, mid)
                     + l2 * segment_vibration(t, mid, b)) / (l1 + l2)
            assert_allclose(whole, parts, rtol=1e-3)


class TestExecuteStep:
    def test_zero_noise_reaches_target_exactly(self):
        t = sample_terrain(5, REGION, 50, KERNEL)
        target = np.array([3.3, 7.7])
        out = execute_step(t, [1.0, 1.0], target, NoiseModel(0.0, 0.0, 0.0), 42)
        assert np.array_equal(out.true_loc, target)
        assert np.array_equal(out.est_input.mean, target)
        assert out.observation == evaluate_terrain(t, target)
        assert not out.target_clamped

    def test_degenerate_step_has_zero_length(self):
        t = sample_terrain(5, REGION, 50, KERNEL)
        p = np.array([2.0, 2.0])
        out = execute_step(t, p, p, NoiseModel(0.0, 0.0, 0.0), 0)
        assert out.path_length == 0.0
        assert out.path_vibration == evaluate_terrain(t, p)

    def test_estimate_covariance_by_construction(self):
        t = sample_terrain(5, REGION, 50, KERNEL)
        out = execute_step(t, [1.0, 1.0], [2.0, 2.0], NoiseModel(0.05, 0.07, 0.1), 3)
        assert np.array_equal(out.est_input.cov, 0.07**2 * np.eye(2))

    def test_outside_target_clamped_and_flagged(self):
        t = sample_terrain(5, REGION, 50, KERNEL)
        out = execute_step(t, [5.0, 5.0], [12.0, 5.0], NoiseModel(0.0, 0.0, 0.0), 0)
        assert out.target_clamped
        assert_allclose(out.true_loc, [10.0, 5.0])

    def test_true_location_stays_inside_region(self):
        t = sample_terrain(5, REGION, 50, KERNEL)
        noise = NoiseModel(0.5, 0.0, 0.0)
        for seed in range(200):
            out = execute_step(t, [5.0, 5.0], [10.0, 10.0], noise, seed)
            assert REGION.contains(out.true_loc)

    def test_deterministic_given_seed(self):
        t = sample_terrain(6, REGION, 50, KERNEL)
        noise = NoiseModel(0.07, 0.07, 0.1)
        a = execute_step(t, [1.0, 1.0], [8.0, 2.0], noise, 77)
        b = execute_step(t, [1.0, 1.0], [8.0, 2.0], noise, 77)
        assert np.array_equal(a.true_loc, b.true_loc)
        assert np.array_equal(a.est_input.mean, b.est_input.mean)
        assert a.observation == b.observation

    def test_noise_scales_match_model(self):
        # Repeated executions toward a fixed interior target: per-axis sample
        # sd of the reached location tracks exec_sd, and of the estimation
        # error tracks loc_sd, both within 5%.
        t = sample_terrain(0, REGION, 80, KERNEL)
        noise = NoiseModel(0.07, 0.07, 0.1)
        target = np.array([5.0, 5.0])
        true_locs = np.empty((10_000, 2))
        est_err = np.empty((10_000, 2))
        for i in range(10_000):
            out = execute_step(t, target, target, noise, 10_000 + i)
            true_locs[i] = out.true_loc
            est_err[i] = out.est_input.mean - out.true_loc
        assert np.all(np.abs(true_locs.std(axis=0, ddof=1) - 0.07) < 0.05 * 0.07)
        assert np.all(np.abs(est_err.std(axis=0, ddof=1) - 0.07) < 0.05 * 0.07)

    def test_path_vibration_is_segment_mean(self):
        t = sample_terrain(8, REGION, 60, KERNEL)
        out = execute_step(t, [1.0, 2.0], [7.0, 8.0], NoiseModel(0.0, 0.0, 0.0), 0)
        assert out.path_vibration == segment_vibration(t, [1.0, 2.0], [7.0, 8.0])
        assert_allclose(out.path_length, np.hypot(6.0, 6.0), rtol=1e-15)
