"""Acquisition functions over GP posteriors and their maximisation.

Three utility surfaces are provided: a distance-penalised upper confidence
bound over deterministic queries (``ducb``), its variant over a Gaussian
querying distribution (``ducb_uncertain``), and pure posterior variance
(``entropy_acq``). ``unscented_acq`` averages any deterministic-input
acquisition over the sigma points of the querying distribution, and
``maximise_acq`` optimises a surface over an axis-aligned box by grid scan
plus pattern-search refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gp import GaussianInput, GpPosterior, predict, predict_many
from .validation import as_cov_matrix, as_float_vector, nonnegative_scalar, readonly

MINIMISE = "minimise"
MAXIMISE = "maximise"

ACQ_KINDS = ("ducb", "entropy")
POLICY_MODES = ("deterministic", "unscented", "distributional")

# Fraction of the region width at which pattern-search refinement stops.
REFINE_STOP_FRACTION = 1e-4


@dataclass(frozen=True)
class AcqConfig:
    """Confidence-bound acquisition settings.

    ``kappa`` scales the exploration bonus, ``gamma`` the travel-distance
    penalty (per metre). ``objective_sense`` flips the sign of the posterior
    mean so that maximising the acquisition minimises or maximises the
    objective; ``kind`` selects the confidence-bound or variance-only family.
    """

    kappa: float = 1.0
    gamma: float = 0.0
    objective_sense: str = MINIMISE
    kind: str = "ducb"

    def __post_init__(self):
        object.__setattr__(self, "kappa", nonnegative_scalar(self.kappa, "kappa"))
        object.__setattr__(self, "gamma", nonnegative_scalar(self.gamma, "gamma"))
        if self.objective_sense not in (MINIMISE, MAXIMISE):
            raise ValueError(f"objective_sense must be one of {(MINIMISE, MAXIMISE)}")
        if self.kind not in ACQ_KINDS:
            raise ValueError(f"kind must be one of {ACQ_KINDS}")


@dataclass(frozen=True)
class SearchRegion:
    """Axis-aligned box of admissible locations."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = readonly(as_float_vector(self.lower, "lower"))
        upper = readonly(as_float_vector(self.upper, "upper"))
        if lower.size != upper.size:
            raise ValueError("lower and upper must have the same dimension")
        if not np.all(lower < upper):
            raise ValueError("lower must be strictly below upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clamp(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def grid(self, n_per_axis: int) -> np.ndarray:
        """Uniform (n_per_axis**dim, dim) grid, rows in lexicographic order."""
        axes = [np.linspace(lo, hi, n_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class UtParams:
    """Unscented-transform spread parameters (alpha, beta, kappa).

    ``kappa=None`` selects 3 - d, which together with alpha = 1 makes the
    transform exact for quadratics. ``beta`` enters only covariance weights,
    which scalar averaging never uses.
    """

    alpha: float = 1.0
    beta: float = 0.0
    kappa: float | None = None

    def lam(self, dim: int) -> float:
        kappa = (3.0 - dim) if self.kappa is None else self.kappa
        return self.alpha**2 * (dim + kappa) - dim


@dataclass(frozen=True)
class QueryPolicy:
    """How a planner queries the surrogate around a target location.

    ``deterministic`` ignores ``query_cov``; ``unscented`` averages over
    sigma points of N(target, query_cov); ``distributional`` hands the full
    Gaussian to the uncertain-input posterior.
    """

    mode: str
    query_cov: np.ndarray
    ut_params: UtParams = field(default_factory=UtParams)

    def __post_init__(self):
        if self.mode not in POLICY_MODES:
            raise ValueError(f"mode must be one of {POLICY_MODES}")
        cov = np.atleast_2d(np.asarray(self.query_cov, dtype=float))
        cov = readonly(as_cov_matrix(cov, cov.shape[-1], "query_cov"))
        object.__setattr__(self, "query_cov", cov)

    @property
    def dim(self) -> int:
        return self.query_cov.shape[0]


def ducb(post: GpPosterior, x, last_loc, cfg: AcqConfig) -> float:
    """Distance-penalised confidence bound at a deterministic location.

    For a minimisation objective this is -mean + kappa*sd - gamma*distance,
    with Euclidean distance from ``last_loc``; maximisation keeps the mean's
    sign. Larger values are always better.
    """
    x = as_float_vector(x, "x")
    last_loc = as_float_vector(last_loc, "last_loc")
    mean, var = predict(post, GaussianInput.at(x))
    signed = -mean if cfg.objective_sense == MINIMISE else mean
    return signed + cfg.kappa * math.sqrt(var) - cfg.gamma * float(np.linalg.norm(x - last_loc))


def ducb_uncertain(post: GpPosterior, target, policy: QueryPolicy, last_mean,
                   cfg: AcqConfig) -> float:
    """Distance-penalised confidence bound over a Gaussian querying distribution.

    The surrogate is queried with N(target, policy.query_cov); the distance
    penalty runs from the last location estimate's mean to the target.
    """
    if policy.mode != "distributional":
        raise ValueError("ducb_uncertain requires a distributional query policy")
    target = as_float_vector(target, "target")
    last_mean = as_float_vector(last_mean, "last_mean")
    mean, var = predict(post, GaussianInput(target, policy.query_cov))
    signed = -mean if cfg.objective_sense == MINIMISE else mean
    return signed + cfg.kappa * math.sqrt(var) \
        - cfg.gamma * float(np.linalg.norm(target - last_mean))


def entropy_acq(post: GpPosterior, x_or_dist: GaussianInput) -> float:
    """Posterior variance at a (possibly Gaussian) input; maximiser is the
    highest-uncertainty point. No distance penalty."""
    _, var = predict(post, x_or_dist)
    return var


def sigma_points(mean, cov, ut: UtParams) -> tuple[np.ndarray, np.ndarray]:
    """Sigma points and mean weights of N(mean, cov), shape (2d+1, d) and (2d+1,).

    The spread uses the symmetric matrix square root of (d + lambda)·cov, so a
    singular covariance simply collapses the affected points onto the mean.
    """
    mean = as_float_vector(mean, "mean")
    d = mean.size
    cov = as_cov_matrix(cov, d, "cov")
    lam = ut.lam(d)
    scale = d + lam
    if scale <= 0:
        raise ValueError("unscented parameters give nonpositive d + lambda")
    weights = np.full(2 * d + 1, 1.0 / (2.0 * scale))
    weights[0] = lam / scale
    if not cov.any():
        spread = np.zeros((d, d))
    else:
        eigval, eigvec = np.linalg.eigh(scale * cov)
        spread = eigvec @ np.diag(np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T
    points = np.vstack([mean, mean + spread.T, mean - spread.T])
    return points, weights


def unscented_acq(base_acq, target, policy: QueryPolicy) -> float:
    """Weighted average of a deterministic-input acquisition over sigma points.

    ``base_acq`` maps a location vector to a scalar utility; the result is
    sum_k w_k * base_acq(chi_k) for the sigma points of N(target, query_cov).
    """
    if policy.mode != "unscented":
        raise ValueError("unscented_acq requires an unscented query policy")
    points, weights = sigma_points(target, policy.query_cov, policy.ut_params)
    return float(sum(w * base_acq(p) for w, p in zip(weights, points)))


def confidence_surface(post: GpPosterior, last_loc, cfg: AcqConfig, query_cov=None):
    """Batched counterpart of ducb/ducb_uncertain: (m, d) locations -> (m,) values.

    ``query_cov=None`` queries deterministically (matching :func:`ducb`); a
    covariance matrix queries N(row, query_cov) (matching
    :func:`ducb_uncertain` with the same distance convention).
    """
    last_loc = as_float_vector(last_loc, "last_loc")

    def evaluator(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        mean, var = predict_many(post, points, query_cov)
        signed = -mean if cfg.objective_sense == MINIMISE else mean
        values = signed + cfg.kappa * np.sqrt(var)
        if cfg.gamma:
            values = values - cfg.gamma * np.linalg.norm(points - last_loc, axis=-1)
        return values

    return evaluator


def variance_surface(post: GpPosterior, query_cov=None):
    """Batched counterpart of entropy_acq: (m, d) locations -> (m,) variances."""

    def evaluator(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _, var = predict_many(post, points, query_cov)
        return var

    return evaluator


def unscented_average(base_surface, policy: QueryPolicy):
    """Batched counterpart of unscented_acq for a whole surface.

    Returns an evaluator computing sum_k w_k * base_surface(points + delta_k),
    where delta_k are the sigma-point offsets of N(0, query_cov).
    """
    if policy.mode != "unscented":
        raise ValueError("unscented_average requires an unscented query policy")
    offsets, weights = sigma_points(np.zeros(policy.dim), policy.query_cov, policy.ut_params)

    def evaluator(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(points.shape[0])
        for w, delta in zip(weights, offsets):
            total += w * np.asarray(base_surface(points + delta), dtype=float)
        return total

    return evaluator


def subtract_distance_penalty(surface, last_loc, gamma: float):
    """Wrap a surface with a -gamma * ||row - last_loc|| travel penalty."""
    last_loc = as_float_vector(last_loc, "last_loc")
    gamma = nonnegative_scalar(gamma, "gamma")

    def evaluator(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(surface(points), dtype=float) \
            - gamma * np.linalg.norm(points - last_loc, axis=-1)

    return evaluator


def maximise_acq(evaluator, region: SearchRegion, budget: int, seed: int,
                 grid_per_axis: int = 50, refine_steps: int = 100) -> np.ndarray:
    """Best location of a scalar field over the region, by grid + pattern search.

    ``evaluator`` maps an (m, d) array of locations to an (m,) array of
    utilities. A uniform lexicographic grid is scanned first (ties break to
    the lowest row index), then compass pattern search refines from the best
    cell: the step starts at one grid cell, halves whenever no axis move
    improves, and stops below 1e-4 of the region width. ``budget`` caps total
    evaluator rows and must cover the grid; the result is never worse than
    any grid point, and is deterministic given ``seed``.
    """
    grid = region.grid(grid_per_axis)
    if budget < grid.shape[0]:
        raise ValueError(f"budget {budget} is below the grid size {grid.shape[0]}")
    values = np.asarray(evaluator(grid), dtype=float)
    best_idx = int(np.argmax(values))
    best_x = grid[best_idx]
    best_val = values[best_idx]
    used = grid.shape[0]

    rng = np.random.default_rng(seed)
    step = region.width / max(grid_per_axis - 1, 1)
    min_step = REFINE_STOP_FRACTION * region.width
    for _ in range(refine_steps):
        if np.all(step < min_step) or used >= budget:
            break
        axes = rng.permutation(region.dim)
        candidates = []
        for axis in axes:
            for sign in (1.0, -1.0):
                cand = best_x.copy()
                cand[axis] += sign * step[axis]
                candidates.append(region.clamp(cand))
        candidates = np.array(candidates)[: max(budget - used, 0)]
        if candidates.size == 0:
            break
        cand_vals = np.asarray(evaluator(candidates), dtype=float)
        used += candidates.shape[0]
        k = int(np.argmax(cand_vals))
        if cand_vals[k] > best_val:
            best_val = cand_vals[k]
            best_x = candidates[k]
        else:
            step = step / 2.0
    return best_x
