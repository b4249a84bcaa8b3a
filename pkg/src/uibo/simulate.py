"""Synthetic terrain-roughness environments and noisy step execution.

Terrains are random weighted sums of squared-exponential kernels around
uniform centers, shifted so the field stays positive. Executing a step toward
a target injects execution noise (reached location), localisation noise (the
reported estimate), and observation noise, and accumulates the roughness
experienced along the straight travelled segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acquisition import SearchRegion
from .gp import GaussianInput, Hyperparams, kernel_se
from .validation import as_float_vector, finite_scalar, nonnegative_scalar, readonly

# Resolution of the audit grid used to anchor the terrain's positive floor.
FLOOR_GRID = 200
# Minimum value of the shifted field on the audit grid.
DEFAULT_FLOOR = 0.5
# Spacing of roughness samples along a travelled segment, in units of the
# smallest kernel length scale.
PATH_STEP_FRACTION = 0.05


@dataclass(frozen=True)
class Terrain:
    """A fixed roughness field: offset + sum_j weights[j] * k(x, centers[j]).

    ``kernel_hyper.noise_var`` plays no role; only the kernel shape matters.
    """

    centers: np.ndarray
    weights: np.ndarray
    kernel_hyper: Hyperparams
    offset: float
    region: SearchRegion

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        weights = as_float_vector(self.weights, "weights")
        if centers.shape[0] != weights.size:
            raise ValueError("one weight per center required")
        if centers.shape[1] != self.region.dim:
            raise ValueError("center dimension must match the region")
        object.__setattr__(self, "centers", readonly(centers))
        object.__setattr__(self, "weights", readonly(weights))
        object.__setattr__(self, "offset", finite_scalar(self.offset, "offset"))

    def evaluate(self, x):
        return evaluate_terrain(self, x)


@dataclass(frozen=True)
class NoiseModel:
    """Standard deviations of the three noise sources, all in natural units:
    execution and localisation in metres, observation in output units."""

    exec_sd: float
    loc_sd: float
    obs_sd: float

    def __post_init__(self):
        for name in ("exec_sd", "loc_sd", "obs_sd"):
            object.__setattr__(self, name, nonnegative_scalar(getattr(self, name), name))


@dataclass(frozen=True)
class StepOutcome:
    """What one executed step produced.

    ``true_loc`` is where the step actually landed (hidden from planners);
    ``est_input`` is the localisation estimate, a Gaussian with covariance
    loc_sd^2 * I by construction; ``path_vibration`` is the mean roughness
    along the travelled segment of length ``path_length``. ``target_clamped``
    flags a commanded target that had to be pulled back inside the region.
    """

    true_loc: np.ndarray
    est_input: GaussianInput
    observation: float
    path_vibration: float
    path_length: float
    target_clamped: bool


def evaluate_terrain(terrain: Terrain, x) -> float | np.ndarray:
    """Roughness at ``x``: offset + weighted kernel sum; broadcasts over
    leading axes of ``x``."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    k = kernel_se(x[..., None, :], terrain.centers, terrain.kernel_hyper)
    value = terrain.offset + k @ terrain.weights
    return float(value) if scalar else value


def sample_terrain(seed: int, region: SearchRegion, n_centers: int,
                   kernel_hyper: Hyperparams, floor: float = DEFAULT_FLOOR) -> Terrain:
    """Draw a random terrain: uniform centers, standard-normal weights, and an
    offset placing the minimum over a 200x200 audit grid at ``floor``."""
    if n_centers < 1:
        raise ValueError("n_centers must be at least 1")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(region.lower, region.upper, size=(n_centers, region.dim))
    weights = rng.standard_normal(n_centers)
    raw = Terrain(centers, weights, kernel_hyper, 0.0, region)
    grid = region.grid(FLOOR_GRID)
    offset = -float(np.min(evaluate_terrain(raw, grid))) + floor
    return Terrain(centers, weights, kernel_hyper, offset, region)


def segment_vibration(terrain: Terrain, start, end) -> float:
    """Mean roughness along the straight segment from ``start`` to ``end``.

    Computed as the trapezoid-rule line integral over samples spaced every
    PATH_STEP_FRACTION of the smallest kernel length scale, normalised by the
    segment length. A zero-length segment reduces to the point value.
    """
    start = as_float_vector(start, "start")
    end = as_float_vector(end, "end")
    length = float(np.linalg.norm(end - start))
    if length == 0.0:
        return float(evaluate_terrain(terrain, start))
    step = PATH_STEP_FRACTION * float(np.min(terrain.kernel_hyper.length_scales))
    n_samples = max(2, int(math.ceil(length / step)) + 1)
    fractions = np.linspace(0.0, 1.0, n_samples)
    points = start + fractions[:, None] * (end - start)
    return float(np.trapezoid(evaluate_terrain(terrain, points), fractions))


def execute_step(terrain: Terrain, from_true, target, noise: NoiseModel,
                 rng_seed) -> StepOutcome:
    """Travel from ``from_true`` toward ``target`` under the noise model.

    The commanded target is clamped into the region (and flagged) if needed;
    the reached location adds execution noise and is clamped again; the
    observation adds output noise at the reached location; the localisation
    estimate adds its own offset with covariance loc_sd^2 * I. Noise draws
    come in a fixed order (execution, localisation, observation), so outcomes
    are deterministic given ``rng_seed``.
    """
    from_true = as_float_vector(from_true, "from_true")
    target = as_float_vector(target, "target")
    region = terrain.region
    clamped = region.clamp(target)
    was_clamped = not np.array_equal(clamped, target)
    rng = np.random.default_rng(rng_seed)
    d = region.dim
    true_loc = region.clamp(clamped + rng.normal(0.0, noise.exec_sd, size=d))
    est_mean = true_loc + rng.normal(0.0, noise.loc_sd, size=d)
    observation = evaluate_terrain(terrain, true_loc) + rng.normal(0.0, noise.obs_sd)
    est_input = GaussianInput(est_mean, noise.loc_sd**2 * np.eye(d))
    return StepOutcome(
        true_loc=readonly(true_loc),
        est_input=est_input,
        observation=float(observation),
        path_vibration=segment_vibration(terrain, from_true, true_loc),
        path_length=float(np.linalg.norm(true_loc - from_true)),
        target_clamped=was_clamped,
    )
