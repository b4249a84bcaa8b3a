"""Scikit-learn style front end for the uncertain-input GP model.

The functional core in :mod:`uibo.gp` works with explicit datasets and
posterior objects; this wrapper packages the same model behind the familiar
``fit``/``predict``/``score`` surface so it can sit in pipelines, grid
searches, or quick notebook experiments. Input uncertainty enters through an
optional ``X_cov`` argument on both ``fit`` and ``predict``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .gp import (
    Dataset,
    GaussianInput,
    HyperBounds,
    Hyperparams,
    fit_hyperparameters,
    fit_posterior,
    log_marginal_likelihood,
    predict_many,
)


def _row_covariances(X_cov, n, d):
    """Normalise ``X_cov`` to an (n, d, d) stack; ``None`` means exact inputs."""
    if X_cov is None:
        return np.zeros((n, d, d))
    arr = np.asarray(X_cov, dtype=float)
    if arr.shape == (d, d):
        return np.broadcast_to(arr, (n, d, d)).copy()
    if arr.shape == (n, d, d):
        return arr.copy()
    raise ValueError(
        f"X_cov must have shape ({d}, {d}) or ({n}, {d}, {d}), got {arr.shape}")


class UncertainInputGPRegressor(RegressorMixin, BaseEstimator):
    """GP regression whose training and query inputs may be Gaussian estimates.

    Parameters
    ----------
    signal_var : float, prior variance of the latent function.
    length_scale : float or array-like, SE kernel length scale per feature
        (a scalar is shared across features).
    noise_var : float, observation noise variance.
    mean_const : float, constant prior mean.
    optimize : bool, refine the four hyperparameters on ``fit`` by bounded
        maximisation of the log-marginal likelihood, starting from the
        constructor values.
    opt_budget : int, likelihood-evaluation cap for that refinement.

    Attributes set by ``fit``: ``hyper_`` (possibly refined), ``posterior_``,
    ``lml_``, ``X_train_``, ``y_train_``, ``n_features_in_``.
    """

    def __init__(self, signal_var=1.0, length_scale=1.0, noise_var=1e-4,
                 mean_const=0.0, optimize=False, opt_budget=150):
        self.signal_var = signal_var
        self.length_scale = length_scale
        self.noise_var = noise_var
        self.mean_const = mean_const
        self.optimize = optimize
        self.opt_budget = opt_budget

    def _initial_hyper(self, d):
        scales = np.asarray(self.length_scale, dtype=float)
        if scales.ndim == 0:
            scales = np.full(d, float(scales))
        if scales.shape != (d,):
            raise ValueError(
                f"length_scale must be scalar or length {d}, got shape {scales.shape}")
        return Hyperparams(float(self.signal_var), scales,
                           float(self.noise_var), float(self.mean_const))

    def fit(self, X, y, X_cov=None):
        """Fit the posterior on (possibly uncertain) inputs.

        ``X_cov`` gives input covariances: one (d, d) matrix shared by all
        rows, an (n, d, d) stack with one matrix per row, or ``None`` for
        exact inputs.
        """
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        covs = _row_covariances(X_cov, n, d)
        data = Dataset((GaussianInput(X[i], covs[i]), float(y[i]))
                       for i in range(n))
        hyper = self._initial_hyper(d)
        if self.optimize:
            hyper = fit_hyperparameters(data, hyper, bounds=HyperBounds(),
                                        budget=int(self.opt_budget))
        self.hyper_ = hyper
        self.posterior_ = fit_posterior(data, hyper)
        self.lml_ = log_marginal_likelihood(data, hyper)
        self.X_train_ = X
        self.y_train_ = y
        self.n_features_in_ = d
        return self

    def predict(self, X, X_cov=None, return_std=False):
        """Posterior mean (and optionally standard deviation) at ``X``.

        ``X_cov`` is a single (d, d) covariance shared by every query row, or
        ``None`` for exact queries.
        """
        check_is_fitted(self, ["posterior_", "hyper_"])
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the model was fitted with "
                f"{self.n_features_in_}")
        cov = None
        if X_cov is not None:
            cov = np.asarray(X_cov, dtype=float)
            d = self.n_features_in_
            if cov.shape != (d, d):
                raise ValueError(
                    f"X_cov must be a single ({d}, {d}) covariance shared by "
                    f"all query rows, got shape {cov.shape}")
        mean, var = predict_many(self.posterior_, X, cov)
        if return_std:
            return mean, np.sqrt(np.maximum(var, 0.0))
        return mean
