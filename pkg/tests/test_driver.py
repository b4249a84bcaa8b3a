"""Unit tests for episode execution, scoring, and multi-trial benchmarks."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import uibo.driver as driver
from uibo.acquisition import AcqConfig, QueryPolicy, SearchRegion, UtParams
from uibo.driver import (
    IterationLog,
    MethodSpec,
    SimSetup,
    TrialRecord,
    canonical_name,
    compute_metrics,
    run_benchmark,
    run_episode,
    running_vibration_curve,
    wrmse,
)
from uibo.gp import (
    Dataset,
    GaussianInput,
    Hyperparams,
    IllConditionedDataError,
    fit_posterior,
    predict_many,
)
from uibo.simulate import NoiseModel, Terrain, sample_terrain

REGION = SearchRegion(np.array([0.0, 0.0]), np.array([10.0, 10.0]))
MODEL = Hyperparams(0.25, np.array([0.7, 0.7]), 1e-4, 4.45)
TERRAIN_KERNEL = Hyperparams(1.0, np.array([1.0, 1.0]), 0.1, 0.0)
NOISE = NoiseModel(0.07, 0.07, 0.1)
QUIET = NoiseModel(0.0, 0.0, 0.0)


def make_spec(planner="standard", acq_kind="ducb", budget=5, sigma_x=0.1,
              hyper=MODEL, **kwargs):
    qcov = sigma_x**2 * np.eye(2)
    policy = {
        "standard": QueryPolicy("deterministic", np.zeros((2, 2))),
        "unscented": QueryPolicy("unscented", qcov, UtParams()),
        "uncertain_inputs": QueryPolicy("distributional", qcov),
    }[planner]
    cfg = (AcqConfig(kappa=10.0, gamma=1.0) if acq_kind == "ducb"
           else AcqConfig(kappa=10.0, gamma=0.0, kind="entropy"))
    return MethodSpec(planner, acq_kind, cfg, policy, hyper, budget=budget, **kwargs)


def small_setup(**kwargs):
    defaults = dict(region=REGION, terrain_kernel=TERRAIN_KERNEL, n_centers=40,
                    noise=NOISE, eval_grid=25)
    defaults.update(kwargs)
    return SimSetup(**defaults)


def fabricated_record(lengths, vibrations, spec=None):
    """A synthetic completed record with the given per-step path stats."""
    spec = spec or make_spec(budget=len(lengths))
    logs = []
    pos = np.array([1.0, 1.0])
    for length, vib in zip(lengths, vibrations):
        pos = pos + np.array([length, 0.0])
        logs.append(IterationLog(
            target=pos.copy(), true_loc=pos.copy(),
            est_input=GaussianInput.at(pos), observation=vib,
            path_length=float(length), path_vibration=float(vib),
            target_clamped=False,
        ))
    return TrialRecord(terrain_seed=0, method=spec, start=np.array([1.0, 1.0]),
                       iterations=tuple(logs), final_hyper=MODEL)


class TestMethodSpec:
    def test_canonical_names(self):
        assert canonical_name("standard", "ducb") == "bo-ducb"
        assert canonical_name("unscented", "ducb") == "ubo-ducb"
        assert canonical_name("uncertain_inputs", "ducb") == "uibo-ducb"
        assert canonical_name("standard", "entropy") == "bo-es"
        assert canonical_name("uncertain_inputs", "entropy") == "uibo-es"

    def test_name_defaults_to_canonical(self):
        assert make_spec("uncertain_inputs", "ducb").name == "uibo-ducb"
        assert make_spec(name="custom").name == "custom"

    def test_planner_policy_mismatch_rejected(self):
        det = QueryPolicy("deterministic", np.zeros((2, 2)))
        cfg = AcqConfig(kappa=10.0, gamma=1.0)
        with pytest.raises(ValueError, match="distributional"):
            MethodSpec("uncertain_inputs", "ducb", cfg, det, MODEL)

    def test_unknown_planner_rejected(self):
        det = QueryPolicy("deterministic", np.zeros((2, 2)))
        cfg = AcqConfig(kappa=10.0, gamma=1.0)
        with pytest.raises(ValueError, match="planner"):
            MethodSpec("greedy", "ducb", cfg, det, MODEL)

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError, match="budget"):
            make_spec(budget=0)


class TestRunEpisode:
    def test_same_seed_identical_logs(self):
        terrain = sample_terrain(3, REGION, 40, TERRAIN_KERNEL)
        spec = make_spec("uncertain_inputs", budget=4)
        a = run_episode(terrain, spec, NOISE, [5.0, 5.0], seed=11)
        b = run_episode(terrain, spec, NOISE, [5.0, 5.0], seed=11)
        assert len(a.iterations) == len(b.iterations) == 4
        for la, lb in zip(a.iterations, b.iterations):
            assert np.array_equal(la.target, lb.target)
            assert np.array_equal(la.true_loc, lb.true_loc)
            assert la.observation == lb.observation

    def test_different_seeds_diverge(self):
        terrain = sample_terrain(3, REGION, 40, TERRAIN_KERNEL)
        spec = make_spec("standard", budget=3)
        a = run_episode(terrain, spec, NOISE, [5.0, 5.0], seed=1)
        b = run_episode(terrain, spec, NOISE, [5.0, 5.0], seed=2)
        assert not np.array_equal(a.iterations[-1].true_loc, b.iterations[-1].true_loc)

    def test_iteration_count_equals_budget(self):
        terrain = sample_terrain(5, REGION, 40, TERRAIN_KERNEL)
        for budget in (1, 3, 7):
            record = run_episode(terrain, make_spec(budget=budget), NOISE,
                                 [2.0, 8.0], seed=0)
            assert record.completed
            assert len(record.iterations) == budget

    def test_start_outside_region_rejected(self):
        terrain = sample_terrain(5, REGION, 40, TERRAIN_KERNEL)
        with pytest.raises(ValueError, match="region"):
            run_episode(terrain, make_spec(), NOISE, [-1.0, 5.0], seed=0)

    def test_planner_storage_typing(self):
        # the environment hands every planner the same Gaussian estimate;
        # only the uncertain-inputs planner keeps its covariance
        terrain = sample_terrain(9, REGION, 40, TERRAIN_KERNEL)
        for planner, keeps_cov in (("standard", False),
                                   ("unscented", False),
                                   ("uncertain_inputs", True)):
            record = run_episode(terrain, make_spec(planner, budget=3), NOISE,
                                 [5.0, 5.0], seed=4)
            for log in record.iterations:
                assert_allclose(log.est_input.cov, NOISE.loc_sd**2 * np.eye(2))
            data = Dataset()
            for log in record.iterations:
                stored = log.est_input if keeps_cov else GaussianInput.at(log.est_input.mean)
                data.append(stored, log.observation)
            expected = NOISE.loc_sd**2 * np.eye(2) if keeps_cov else np.zeros((2, 2))
            assert_allclose(data.covs(), np.broadcast_to(expected, (3, 2, 2)))

    def test_noise_free_deterministic_target_reached(self):
        terrain = sample_terrain(2, REGION, 40, TERRAIN_KERNEL)
        spec = make_spec("standard", budget=3, sigma_x=0.0)
        record = run_episode(terrain, spec, QUIET, [5.0, 5.0], seed=0)
        for log in record.iterations:
            assert_allclose(log.true_loc, log.target, atol=1e-12)
            assert_allclose(log.est_input.mean, log.true_loc, atol=1e-12)

    def test_budget_one_prior_ducb_stays_at_start(self):
        # with an empty dataset the posterior is the constant prior, so the
        # distance penalty alone shapes the surface and the argmax is the
        # start location (up to optimiser resolution)
        terrain = sample_terrain(6, REGION, 40, TERRAIN_KERNEL)
        spec = make_spec("standard", budget=1)
        start = np.array([3.3, 6.1])
        record = run_episode(terrain, spec, QUIET, start, seed=0)
        assert np.linalg.norm(record.iterations[0].target - start) < 0.05

    def test_failure_recorded_not_raised(self, monkeypatch):
        real = driver.fit_posterior

        def flaky(data, hyper):
            if len(data) >= 3:
                raise IllConditionedDataError("injected factorisation failure")
            return real(data, hyper)

        monkeypatch.setattr(driver, "fit_posterior", flaky)
        terrain = sample_terrain(2, REGION, 40, TERRAIN_KERNEL)
        record = run_episode(terrain, make_spec("standard", budget=6), NOISE,
                             [5.0, 5.0], seed=0)
        assert not record.completed
        assert record.failure == "iteration 2: injected factorisation failure"
        assert len(record.iterations) == 2
        assert record.metrics is None


class TestWrmse:
    def test_hand_case(self):
        assert abs(wrmse([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]) - 0.5773502691896258) < 1e-9

    def test_zero_at_exact_fit(self):
        f = np.linspace(0.0, 3.0, 17)
        assert wrmse(f, f) == 0.0

    def test_error_at_roughest_point_free(self):
        f = np.array([0.0, 1.0])
        assert wrmse([0.0, 99.0], f) == 0.0

    def test_degenerate_truth_rejected(self):
        with pytest.raises(ValueError, match="degenerate truth range"):
            wrmse([1.0, 2.0], [3.0, 3.0])

    def test_matches_weighted_loop(self):
        rng = np.random.default_rng(0)
        f = rng.normal(size=50)
        mu = f + rng.normal(scale=0.3, size=50)
        w = (f.max() - f) / (f.max() - f.min())
        expected = np.sqrt(np.mean((w * (mu - f)) ** 2))
        assert_allclose(wrmse(mu, f), expected, rtol=1e-12)

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal size"):
            wrmse([1.0, 2.0], [1.0, 2.0, 3.0])


class TestComputeMetrics:
    def test_distance_is_sum_of_true_displacements(self):
        terrain = sample_terrain(8, REGION, 40, TERRAIN_KERNEL)
        record = run_episode(terrain, make_spec("uncertain_inputs", budget=5),
                             NOISE, [4.0, 4.0], seed=3)
        metrics = compute_metrics(record, terrain, eval_grid=20)
        prev = record.start
        total = 0.0
        for log in record.iterations:
            total += float(np.linalg.norm(log.true_loc - prev))
            prev = log.true_loc
        assert abs(metrics.distance - total) < 1e-9

    def test_rmse_matches_manual_grid_fit(self):
        terrain = sample_terrain(8, REGION, 40, TERRAIN_KERNEL)
        record = run_episode(terrain, make_spec("standard", budget=5), NOISE,
                             [4.0, 4.0], seed=3)
        metrics = compute_metrics(record, terrain, eval_grid=20)
        data = Dataset((GaussianInput.at(l.est_input.mean), l.observation)
                       for l in record.iterations)
        post = fit_posterior(data, record.final_hyper)
        grid = REGION.grid(20)
        mu, _ = predict_many(post, grid)
        truth = terrain.evaluate(grid)
        assert_allclose(metrics.rmse, np.sqrt(np.mean((mu - truth) ** 2)), rtol=1e-12)

    def test_mean_vibration_is_length_weighted(self):
        record = fabricated_record([2.0, 1.0, 1.0], [4.0, 1.0, 1.0])
        flat = Terrain(np.array([[5.0, 5.0]]), np.array([1.0]), TERRAIN_KERNEL,
                       0.5, REGION)
        metrics = compute_metrics(record, flat, eval_grid=10)
        assert_allclose(metrics.mean_vibration, (2 * 4 + 1 + 1) / 4.0)
        assert_allclose(metrics.distance, 4.0)

    def test_relative_vibration_uses_baseline(self):
        record = fabricated_record([1.0, 1.0], [3.0, 1.0])
        flat = Terrain(np.array([[5.0, 5.0]]), np.array([1.0]), TERRAIN_KERNEL,
                       0.5, REGION)
        with_baseline = compute_metrics(record, flat, eval_grid=10,
                                        baseline_vibration=4.0)
        assert_allclose(with_baseline.relative_vibration, 0.5)
        without = compute_metrics(record, flat, eval_grid=10)
        assert without.relative_vibration == 1.0

    def test_nonpositive_baseline_rejected(self):
        record = fabricated_record([1.0], [1.0])
        flat = Terrain(np.array([[5.0, 5.0]]), np.array([1.0]), TERRAIN_KERNEL,
                       0.5, REGION)
        with pytest.raises(ValueError, match="baseline_vibration"):
            compute_metrics(record, flat, eval_grid=10, baseline_vibration=0.0)

    def test_failed_record_rejected(self):
        record = fabricated_record([1.0], [1.0])
        failed = TrialRecord(terrain_seed=0, method=record.method,
                             start=record.start, iterations=record.iterations,
                             final_hyper=MODEL, failure="iteration 0: boom")
        flat = Terrain(np.array([[5.0, 5.0]]), np.array([1.0]), TERRAIN_KERNEL,
                       0.5, REGION)
        with pytest.raises(ValueError, match="failed episode"):
            compute_metrics(failed, flat, eval_grid=10)

    def test_deterministic(self):
        terrain = sample_terrain(8, REGION, 40, TERRAIN_KERNEL)
        record = run_episode(terrain, make_spec(budget=4), NOISE, [4.0, 4.0], seed=5)
        a = compute_metrics(record, terrain, eval_grid=15)
        b = compute_metrics(record, terrain, eval_grid=15)
        assert a == b


class TestRunningVibrationCurve:
    def test_matches_cumulative_ratio(self):
        record = fabricated_record([2.0, 1.0, 3.0], [1.0, 4.0, 2.0])
        curve = running_vibration_curve(record)
        expected = np.array([
            2 * 1 / 2.0,
            (2 * 1 + 1 * 4) / 3.0,
            (2 * 1 + 1 * 4 + 3 * 2) / 6.0,
        ])
        assert_allclose(curve, expected, rtol=1e-12)

    def test_zero_length_prefix_falls_back_to_plain_mean(self):
        record = fabricated_record([0.0, 0.0, 2.0], [3.0, 1.0, 5.0])
        curve = running_vibration_curve(record)
        assert_allclose(curve[:2], [3.0, 2.0])
        assert_allclose(curve[2], (2 * 5.0) / 2.0)


class TestRunBenchmark:
    def test_same_seed_reproducible(self):
        setup = small_setup()
        methods = [make_spec("standard", budget=3),
                   make_spec("uncertain_inputs", budget=3)]
        a = run_benchmark(2, methods, setup, base_seed=7)
        b = run_benchmark(2, methods, setup, base_seed=7)
        for sa, sb in zip(a.summaries, b.summaries):
            assert sa == sb

    def test_methods_share_terrain_start_and_seed(self):
        setup = small_setup()
        methods = [make_spec("standard", budget=2),
                   make_spec("unscented", budget=2),
                   make_spec("uncertain_inputs", budget=2)]
        res = run_benchmark(2, methods, setup, base_seed=1)
        for t in range(2):
            seeds = {res.records[t][m.name].terrain_seed for m in methods}
            assert len(seeds) == 1
            starts = [res.records[t][m.name].start for m in methods]
            for s in starts[1:]:
                assert np.array_equal(s, starts[0])

    def test_trials_differ(self):
        setup = small_setup()
        res = run_benchmark(2, [make_spec(budget=2)], setup, base_seed=1)
        assert res.terrain_seeds[0] != res.terrain_seeds[1]
        assert not np.array_equal(res.starts[0], res.starts[1])

    def test_baseline_only_run_scores_unit_relvib(self):
        setup = small_setup()
        res = run_benchmark(2, [make_spec("standard", "entropy", budget=3)],
                            setup, base_seed=2)
        summary = res.summaries[0]
        assert summary.name == "bo-es"
        assert_allclose(summary.relvib_mean, 1.0)
        assert_allclose(summary.relvib_sd, 0.0)

    def test_missing_baseline_defaults_to_unit(self):
        setup = small_setup()
        res = run_benchmark(1, [make_spec("standard", "ducb", budget=3)],
                            setup, base_seed=2)
        assert res.records[0]["bo-ducb"].metrics.relative_vibration == 1.0

    def test_duplicate_names_rejected(self):
        setup = small_setup()
        methods = [make_spec(budget=2), make_spec(budget=2)]
        with pytest.raises(ValueError, match="unique"):
            run_benchmark(1, methods, setup, base_seed=0)

    def test_needs_at_least_one_trial(self):
        with pytest.raises(ValueError, match="at least 1"):
            run_benchmark(0, [make_spec(budget=2)], small_setup(), base_seed=0)

    def test_failures_counted_and_excluded(self, monkeypatch):
        real = driver.fit_posterior

        def flaky(data, hyper):
            if len(data) >= 2:
                raise IllConditionedDataError("injected factorisation failure")
            return real(data, hyper)

        monkeypatch.setattr(driver, "fit_posterior", flaky)
        res = run_benchmark(2, [make_spec(budget=4)], small_setup(), base_seed=0)
        summary = res.summaries[0]
        assert summary.failures == 2
        assert np.isnan(summary.rmse_mean)
        assert not res.records[0]["bo-ducb"].completed

    def test_curves_shape_and_mean(self):
        setup = small_setup()
        budget = 4
        res = run_benchmark(3, [make_spec(budget=budget)], setup, base_seed=5)
        mean, sd = res.curves["bo-ducb"]
        assert mean.shape == (budget,)
        assert sd.shape == (budget,)
        per_trial = np.array([
            running_vibration_curve(res.records[t]["bo-ducb"]) for t in range(3)
        ])
        assert_allclose(mean, per_trial.mean(axis=0), rtol=1e-12)
        assert_allclose(sd, per_trial.std(axis=0, ddof=1), rtol=1e-12)
