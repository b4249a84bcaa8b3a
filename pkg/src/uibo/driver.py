"""Exploration episodes, evaluation metrics, and multi-trial benchmarks.

An episode alternates acquisition maximisation with noisy step execution,
growing the surrogate's dataset. Planners differ in how they query the
surrogate (deterministic, sigma-point averaged, or distributional) and in
what they store (location estimates as exact points, or the full Gaussian
estimate). Benchmarks run every method on identical terrain/start/noise
draws so per-trial comparisons are paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    AcqConfig,
    QueryPolicy,
    SearchRegion,
    confidence_surface,
    maximise_acq,
    subtract_distance_penalty,
    unscented_average,
    variance_surface,
)
from .gp import (
    Dataset,
    GaussianInput,
    GpPosterior,
    HyperBounds,
    Hyperparams,
    IllConditionedDataError,
    NumericError,
    fit_hyperparameters,
    fit_posterior,
    predict_many,
)
from .simulate import NoiseModel, Terrain, execute_step, sample_terrain
from .validation import as_float_vector

PLANNERS = ("standard", "unscented", "uncertain_inputs")

# Acquisition maximisation defaults: 50x50 grid plus up to 100 refinement
# steps of at most 2d candidates each.
ACQ_GRID_PER_AXIS = 50
ACQ_REFINE_STEPS = 100

_PLANNER_TAGS = {"standard": "bo", "unscented": "ubo", "uncertain_inputs": "uibo"}
_ACQ_TAGS = {"ducb": "ducb", "entropy": "es"}


def canonical_name(planner: str, acq_kind: str) -> str:
    """Short method id, e.g. ('uncertain_inputs', 'ducb') -> 'uibo-ducb'."""
    return f"{_PLANNER_TAGS[planner]}-{_ACQ_TAGS[acq_kind]}"


@dataclass(frozen=True)
class MethodSpec:
    """One planner/acquisition variant with everything an episode needs."""

    planner: str
    acq_kind: str
    acq_cfg: AcqConfig
    query_policy: QueryPolicy
    model_hyper: Hyperparams
    budget: int = 50
    refit_every: int = 0
    refit_budget: int = 150
    name: str = ""

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"planner must be one of {PLANNERS}")
        if self.acq_kind not in _ACQ_TAGS:
            raise ValueError(f"acq_kind must be one of {tuple(_ACQ_TAGS)}")
        wanted_mode = {"standard": "deterministic", "unscented": "unscented",
                       "uncertain_inputs": "distributional"}[self.planner]
        if self.query_policy.mode != wanted_mode:
            raise ValueError(
                f"{self.planner} planner requires a {wanted_mode} query policy")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.refit_every < 0 or self.refit_budget < 1:
            raise ValueError("refit settings must be nonnegative/positive")
        if not self.name:
            object.__setattr__(self, "name", canonical_name(self.planner, self.acq_kind))


@dataclass(frozen=True)
class IterationLog:
    """One executed step as the planner saw and logged it."""

    target: np.ndarray
    true_loc: np.ndarray
    est_input: GaussianInput
    observation: float
    path_length: float
    path_vibration: float
    target_clamped: bool


@dataclass(frozen=True)
class MetricSet:
    """Episode-level scores; relative_vibration is against a shared baseline."""

    rmse: float
    wrmse: float
    distance: float
    mean_vibration: float
    relative_vibration: float

    def __post_init__(self):
        for name in ("rmse", "wrmse", "distance", "mean_vibration", "relative_vibration"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")


@dataclass(frozen=True)
class TrialRecord:
    """Everything one episode produced.

    ``failure`` carries the iteration index and message when the surrogate
    became unusable; failed records have fewer than ``budget`` iterations and
    no metrics.
    """

    terrain_seed: int
    method: MethodSpec
    start: np.ndarray
    iterations: tuple[IterationLog, ...]
    final_hyper: Hyperparams
    metrics: MetricSet | None = None
    failure: str | None = None

    @property
    def completed(self) -> bool:
        return self.failure is None


def _acquisition_surface(method: MethodSpec, post: GpPosterior, last_est: np.ndarray):
    """The batched utility surface this planner maximises at one iteration."""
    cfg = method.acq_cfg
    policy = method.query_policy
    if method.planner == "standard":
        if method.acq_kind == "ducb":
            return confidence_surface(post, last_est, cfg)
        return variance_surface(post)
    if method.planner == "unscented":
        if method.acq_kind == "ducb":
            # distance penalty applies to the target itself, outside the
            # sigma-point average
            base = confidence_surface(post, last_est, replace(cfg, gamma=0.0))
            return subtract_distance_penalty(unscented_average(base, policy),
                                             last_est, cfg.gamma)
        return unscented_average(variance_surface(post), policy)
    if method.acq_kind == "ducb":
        return confidence_surface(post, last_est, cfg, policy.query_cov)
    return variance_surface(post, policy.query_cov)


def stored_input(method: MethodSpec, est_input: GaussianInput) -> GaussianInput:
    """What the planner writes into its dataset for one estimate."""
    if method.planner == "uncertain_inputs":
        return est_input
    return GaussianInput.at(est_input.mean)


def run_episode(terrain: Terrain, method: MethodSpec, noise: NoiseModel,
                start, seed: int, acq_grid: int = ACQ_GRID_PER_AXIS) -> TrialRecord:
    """Run one full exploration episode; deterministic given ``seed``.

    Each iteration maximises the method's acquisition surface, executes the
    step under the noise model, stores the (planner-typed) estimate and
    observation, refits the posterior, and refits hyperparameters every
    ``refit_every`` iterations (0 disables refitting). Surrogate failures
    abort the episode and are recorded, not raised.
    """
    start = as_float_vector(start, "start")
    if not terrain.region.contains(start):
        raise ValueError("start must lie inside the region")
    states = np.random.SeedSequence(seed).generate_state(2 * method.budget, np.uint64)
    hyper = method.model_hyper
    data = Dataset()
    post = fit_posterior(data, hyper)
    from_true = start
    last_est = start
    logs: list[IterationLog] = []
    failure = None
    for t in range(method.budget):
        try:
            surface = _acquisition_surface(method, post, last_est)
            grid_budget = acq_grid**terrain.region.dim
            target = maximise_acq(surface, terrain.region,
                                  budget=grid_budget + 4 * ACQ_REFINE_STEPS,
                                  seed=int(states[2 * t + 1]),
                                  grid_per_axis=acq_grid,
                                  refine_steps=ACQ_REFINE_STEPS)
            outcome = execute_step(terrain, from_true, target, noise, int(states[2 * t]))
            data.append(stored_input(method, outcome.est_input), outcome.observation)
            if method.refit_every and (t + 1) % method.refit_every == 0:
                hyper = fit_hyperparameters(data, hyper, bounds=HyperBounds(),
                                            budget=method.refit_budget)
            post = fit_posterior(data, hyper)
        except (IllConditionedDataError, NumericError) as exc:
            failure = f"iteration {t}: {exc}"
            break
        logs.append(IterationLog(
            target=target,
            true_loc=outcome.true_loc,
            est_input=outcome.est_input,
            observation=outcome.observation,
            path_length=outcome.path_length,
            path_vibration=outcome.path_vibration,
            target_clamped=outcome.target_clamped,
        ))
        from_true = outcome.true_loc
        last_est = outcome.est_input.mean
    return TrialRecord(
        terrain_seed=-1,
        method=method,
        start=start,
        iterations=tuple(logs),
        final_hyper=hyper,
        failure=failure,
    )


def wrmse(posterior_mean_on_grid, truth_on_grid) -> float:
    """Root-mean-square error weighted toward the low-roughness range.

    Each residual is scaled by (max f - f_i) / (max f - min f) before
    squaring, so errors at the roughest points contribute nothing and errors
    at the smoothest points count fully.
    """
    mu = as_float_vector(np.ravel(posterior_mean_on_grid), "posterior_mean_on_grid")
    f = as_float_vector(np.ravel(truth_on_grid), "truth_on_grid")
    if mu.size != f.size:
        raise ValueError("grids must have equal size")
    spread = float(f.max() - f.min())
    if spread <= 0.0:
        raise ValueError("degenerate truth range: max equals min")
    weights = (f.max() - f) / spread
    return float(np.sqrt(np.mean(((mu - f) * weights) ** 2)))


def _posterior_from_record(record: TrialRecord) -> GpPosterior:
    data = Dataset()
    for log in record.iterations:
        data.append(stored_input(record.method, log.est_input), log.observation)
    return fit_posterior(data, record.final_hyper)


def compute_metrics(record: TrialRecord, terrain: Terrain, eval_grid: int = 100,
                    baseline_vibration: float | None = None) -> MetricSet:
    """Score a completed episode against the true terrain.

    Model quality compares the final posterior mean (queried at exact grid
    locations) with the terrain over a uniform eval_grid x eval_grid scan;
    travel cost sums segment lengths; experienced vibration is the
    length-weighted mean over segments, normalised by ``baseline_vibration``
    when one is supplied (1.0 otherwise).
    """
    if not record.completed:
        raise ValueError(f"cannot score a failed episode ({record.failure})")
    post = _posterior_from_record(record)
    grid = terrain.region.grid(eval_grid)
    mu, _ = predict_many(post, grid)
    truth = np.asarray(terrain.evaluate(grid), dtype=float)
    rmse = float(np.sqrt(np.mean((mu - truth) ** 2)))
    lengths = np.array([log.path_length for log in record.iterations])
    vibrations = np.array([log.path_vibration for log in record.iterations])
    distance = float(lengths.sum())
    if distance > 0.0:
        mean_vibration = float((lengths * vibrations).sum() / distance)
    else:
        mean_vibration = float(vibrations.mean()) if vibrations.size else 0.0
    if baseline_vibration is None:
        relative = 1.0
    elif baseline_vibration <= 0.0:
        raise ValueError("baseline_vibration must be positive")
    else:
        relative = mean_vibration / baseline_vibration
    return MetricSet(
        rmse=rmse,
        wrmse=wrmse(mu, truth),
        distance=distance,
        mean_vibration=mean_vibration,
        relative_vibration=relative,
    )


def running_vibration_curve(record: TrialRecord) -> np.ndarray:
    """Length-weighted mean experienced vibration after each iteration."""
    lengths = np.array([log.path_length for log in record.iterations])
    vibrations = np.array([log.path_vibration for log in record.iterations])
    cum_len = np.cumsum(lengths)
    cum_weighted = np.cumsum(lengths * vibrations)
    curve = np.empty(lengths.size)
    running_plain = np.cumsum(vibrations) / np.arange(1, lengths.size + 1)
    nonzero = cum_len > 0.0
    curve[nonzero] = cum_weighted[nonzero] / cum_len[nonzero]
    curve[~nonzero] = running_plain[~nonzero]
    return curve


@dataclass(frozen=True)
class SimSetup:
    """Shared environment settings for a benchmark run."""

    region: SearchRegion
    terrain_kernel: Hyperparams
    n_centers: int = 80
    floor: float = 0.5
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(0.07, 0.07, 0.1))
    eval_grid: int = 100
    acq_grid: int = ACQ_GRID_PER_AXIS


@dataclass(frozen=True)
class MethodSummary:
    """Across-trial aggregate for one method."""

    name: str
    rmse_mean: float
    rmse_sd: float
    wrmse_mean: float
    wrmse_sd: float
    distance_mean: float
    distance_sd: float
    relvib_mean: float
    relvib_sd: float
    failures: int


@dataclass(frozen=True)
class BenchmarkResult:
    """All artifacts of a multi-trial comparison.

    ``records[trial][name]`` holds the scored TrialRecord; ``curves[name]``
    is a (2, budget) array of across-trial mean and sd of the running
    vibration; ``terrains`` and ``starts`` are per-trial.
    """

    methods: tuple[MethodSpec, ...]
    records: tuple[dict, ...]
    summaries: tuple[MethodSummary, ...]
    curves: dict
    terrains: tuple[Terrain, ...]
    starts: tuple[np.ndarray, ...]
    terrain_seeds: tuple[int, ...]


def _aggregate(name: str, metric_sets: list[MetricSet], failures: int) -> MethodSummary:
    def stats(values):
        arr = np.array(values)
        if arr.size == 0:
            return float("nan"), float("nan")
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return float(arr.mean()), sd

    rmse_m, rmse_s = stats([m.rmse for m in metric_sets])
    wrmse_m, wrmse_s = stats([m.wrmse for m in metric_sets])
    dist_m, dist_s = stats([m.distance for m in metric_sets])
    rv_m, rv_s = stats([m.relative_vibration for m in metric_sets])
    return MethodSummary(name, rmse_m, rmse_s, wrmse_m, wrmse_s,
                         dist_m, dist_s, rv_m, rv_s, failures)


def run_benchmark(n_trials: int, methods: list[MethodSpec], setup: SimSetup,
                  base_seed: int) -> BenchmarkResult:
    """Run every method on ``n_trials`` shared terrain/start/noise draws.

    Within a trial all methods see the same terrain, the same start, and the
    same episode seed, so differences between rows are purely method-driven.
    The relative-vibration baseline is the standard-planner max-variance
    method's (bo-es) mean vibration on the same trial when that method is
    present, else 1. Failed episodes are excluded from aggregates and counted.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError("method names must be unique")
    baseline_name = canonical_name("standard", "entropy")
    terrains, starts, seeds, all_records = [], [], [], []
    per_method: dict[str, list[MetricSet]] = {m.name: [] for m in methods}
    failures = {m.name: 0 for m in methods}
    curves_raw: dict[str, list[np.ndarray]] = {m.name: [] for m in methods}
    for trial in range(n_trials):
        terrain_seed = int(np.random.SeedSequence((base_seed, trial, 0))
                           .generate_state(1, np.uint64)[0])
        terrain = sample_terrain(terrain_seed, setup.region, setup.n_centers,
                                 setup.terrain_kernel, setup.floor)
        start_rng = np.random.default_rng(np.random.SeedSequence((base_seed, trial, 1)))
        start = start_rng.uniform(setup.region.lower, setup.region.upper)
        episode_seed = int(np.random.SeedSequence((base_seed, trial, 2))
                           .generate_state(1, np.uint64)[0])
        records: dict[str, TrialRecord] = {}
        for method in methods:
            record = run_episode(terrain, method, setup.noise, start, episode_seed,
                                 acq_grid=setup.acq_grid)
            records[method.name] = replace(record, terrain_seed=terrain_seed)
        baseline = None
        if baseline_name in records and records[baseline_name].completed:
            baseline_metrics = compute_metrics(records[baseline_name], terrain,
                                               setup.eval_grid)
            baseline = baseline_metrics.mean_vibration
        for method in methods:
            record = records[method.name]
            if record.completed:
                metrics = compute_metrics(record, terrain, setup.eval_grid, baseline)
                records[method.name] = replace(record, metrics=metrics)
                per_method[method.name].append(metrics)
                curves_raw[method.name].append(running_vibration_curve(record))
            else:
                failures[method.name] += 1
        terrains.append(terrain)
        starts.append(start)
        seeds.append(terrain_seed)
        all_records.append(records)
    summaries = tuple(_aggregate(m.name, per_method[m.name], failures[m.name])
                      for m in methods)
    curves = {}
    for method in methods:
        rows = curves_raw[method.name]
        if rows:
            length = min(len(r) for r in rows)
            stacked = np.vstack([r[:length] for r in rows])
            sd = stacked.std(axis=0, ddof=1) if stacked.shape[0] > 1 \
                else np.zeros(stacked.shape[1])
            curves[method.name] = np.vstack([stacked.mean(axis=0), sd])
    return BenchmarkResult(
        methods=tuple(methods),
        records=tuple(all_records),
        summaries=summaries,
        curves=curves,
        terrains=tuple(terrains),
        starts=tuple(starts),
        terrain_seeds=tuple(seeds),
    )
