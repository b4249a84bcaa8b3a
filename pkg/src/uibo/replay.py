"""Offline refits of recorded exploration logs.

A replay consumes two CSV files: observations (location estimates with their
2x2 covariances and the vibration measured there) and validation points
(precise locations with ground-truth vibration). It fits the surrogate twice
on the same rows — once honouring the recorded covariances and once treating
every estimate as exact — refitting hyperparameters by marginal likelihood in
both modes, then scores each posterior against the validation set. The two
rows make the value of modelling input uncertainty directly comparable on
one dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .driver import wrmse
from .gp import (
    Dataset,
    GaussianInput,
    GpPosterior,
    HyperBounds,
    Hyperparams,
    fit_hyperparameters,
    fit_posterior,
    log_marginal_likelihood,
    predict_many,
)

OBS_COLUMNS = ("x_mean", "y_mean", "cov_xx", "cov_xy", "cov_yy", "vibration")
VAL_COLUMNS = ("x", "y", "vibration")

REPLAY_MODES = ("uncertain", "deterministic")


class ReplayDataError(ValueError):
    """A replay input file that cannot be used, with file/line context."""


def _read_rows(path, columns) -> tuple[np.ndarray, list[int]]:
    """Numeric rows of a headed CSV plus each row's 1-based line number."""
    try:
        handle = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise ReplayDataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ReplayDataError(f"{path}: file is empty") from None
        if [h.strip() for h in header] != list(columns):
            raise ReplayDataError(
                f"{path} line 1: expected header {','.join(columns)}")
        rows, linenos = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise ReplayDataError(
                    f"{path} line {lineno}: expected {len(columns)} fields, "
                    f"got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ReplayDataError(
                    f"{path} line {lineno}: non-numeric field") from None
            if not all(np.isfinite(values)):
                raise ReplayDataError(f"{path} line {lineno}: non-finite value")
            rows.append(values)
            linenos.append(lineno)
    if not rows:
        raise ReplayDataError(f"{path}: no data rows")
    return np.array(rows, dtype=float), linenos


def read_observations(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse an observation log into (means, covariances, vibrations)."""
    rows, linenos = _read_rows(path, OBS_COLUMNS)
    means = rows[:, 0:2]
    vibrations = rows[:, 5]
    covs = np.empty((len(rows), 2, 2))
    for i, (xx, xy, yy) in enumerate(rows[:, 2:5]):
        cov = np.array([[xx, xy], [xy, yy]])
        eigs = np.linalg.eigvalsh(cov)
        if eigs[0] < -1e-12 * max(1.0, abs(eigs[1])):
            raise ReplayDataError(
                f"{path} line {linenos[i]}: covariance is not positive "
                f"semidefinite (eigenvalues {eigs[0]:.3e}, {eigs[1]:.3e})")
        covs[i] = cov
    return means, covs, vibrations


def read_validation(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a validation table into (locations, vibrations)."""
    rows, _ = _read_rows(path, VAL_COLUMNS)
    return rows[:, 0:2], rows[:, 2]


def default_replay_bounds(means: np.ndarray, vibrations: np.ndarray) -> HyperBounds:
    """Search box for refits, scaled to the data extent.

    Length scales are confined to (roughly) between a thousandth of and twice
    the map span, the noise to at most ten times the output variance, and the
    mean to the observed range padded by itself — wide enough for any
    plausible fit, tight enough to exclude the degenerate flat-fit corner.
    """
    span = float(np.ptp(means, axis=0).max())
    if span <= 0.0:
        span = 1.0
    out_var = float(np.var(vibrations))
    out_range = float(np.ptp(vibrations))
    if out_var <= 0.0:
        out_var, out_range = 1.0, 1.0
    lo, hi = float(vibrations.min()), float(vibrations.max())
    return HyperBounds(
        signal_var=(1e-6 * out_var, 1e3 * out_var),
        length_scales=(1e-3 * span, 2.0 * span),
        noise_var=(1e-9 * out_var, 10.0 * out_var),
        mean_const=(lo - out_range, hi + out_range),
    )


@dataclass(frozen=True)
class ReplayFit:
    """One refitted posterior and its validation scores."""

    mode: str
    hyper: Hyperparams
    posterior: GpPosterior
    lml: float
    rmse: float
    wrmse: float


@dataclass(frozen=True)
class ReplayResult:
    """Both replay fits over one observation/validation pair."""

    uncertain: ReplayFit
    deterministic: ReplayFit
    n_observations: int
    n_validation: int

    def fits(self) -> tuple[ReplayFit, ReplayFit]:
        return (self.uncertain, self.deterministic)


def _mode_dataset(mode: str, means, covs, vibrations) -> Dataset:
    if mode == "uncertain":
        entries = ((GaussianInput(m, c), float(v))
                   for m, c, v in zip(means, covs, vibrations))
    else:
        entries = ((GaussianInput.at(m), float(v))
                   for m, v in zip(means, vibrations))
    return Dataset(entries)


def run_replay(obs_path, val_path, init: Hyperparams,
               bounds: HyperBounds | None = None,
               opt_budget: int = 150) -> ReplayResult:
    """Fit both replay modes on one observation log and score them.

    Hyperparameters are refitted per mode by bounded likelihood maximisation
    starting from ``init`` (a degenerate bound pins a field); when no bounds
    are given they are derived from the data extent. The weighted error uses
    the validation vibration range for its weights, so a constant validation
    column is rejected.
    """
    means, covs, vibrations = read_observations(obs_path)
    locations, truth = read_validation(val_path)
    bounds = bounds if bounds is not None else default_replay_bounds(means, vibrations)
    fits = {}
    for mode in REPLAY_MODES:
        data = _mode_dataset(mode, means, covs, vibrations)
        hyper = fit_hyperparameters(data, init, bounds=bounds, budget=opt_budget)
        posterior = fit_posterior(data, hyper)
        mu, _ = predict_many(posterior, locations)
        fits[mode] = ReplayFit(
            mode=mode,
            hyper=hyper,
            posterior=posterior,
            lml=log_marginal_likelihood(data, hyper),
            rmse=float(np.sqrt(np.mean((mu - truth) ** 2))),
            wrmse=wrmse(mu, truth),
        )
    return ReplayResult(fits["uncertain"], fits["deterministic"],
                        n_observations=len(vibrations),
                        n_validation=len(truth))
