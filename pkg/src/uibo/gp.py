"""Gaussian process regression over deterministic and Gaussian-distributed inputs.

The covariance between two Gaussian-distributed locations is the expectation of
the squared-exponential kernel under both input distributions, which has a
closed form for Gaussian inputs. Deterministic locations are the zero-covariance
special case, so a single posterior implementation serves both settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .validation import (
    as_cov_matrix,
    as_float_vector,
    check_dim,
    finite_scalar,
    positive_scalar,
    readonly,
)

# Posterior variances may dip this far below zero before we treat the result
# as a numerical failure rather than round-off.
VARIANCE_SLACK = 1e-9

# Diagonal jitter ladder for Cholesky recovery, as multiples of signal_var.
JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


class IllConditionedDataError(RuntimeError):
    """Raised when the Gram matrix cannot be factorised even with jitter."""


class NumericError(RuntimeError):
    """Raised on internal numerical failures (e.g. variance far below zero)."""


@dataclass(frozen=True)
class GaussianInput:
    """A Gaussian belief over an input location, N(mean, cov).

    ``cov`` equal to the zero matrix encodes an exactly known location.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = readonly(as_float_vector(self.mean, "mean"))
        cov = readonly(as_cov_matrix(self.cov, mean.size, "cov"))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def at(cls, mean) -> "GaussianInput":
        """An exactly known location (zero covariance)."""
        mean = as_float_vector(mean, "mean")
        return cls(mean, np.zeros((mean.size, mean.size)))

    @classmethod
    def isotropic(cls, mean, var: float) -> "GaussianInput":
        """A location with isotropic Gaussian uncertainty ``var`` per axis."""
        mean = as_float_vector(mean, "mean")
        return cls(mean, float(var) * np.eye(mean.size))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def is_deterministic(self) -> bool:
        return not self.cov.any()


@dataclass(frozen=True)
class Hyperparams:
    """Squared-exponential kernel and constant-mean hyperparameters.

    ``signal_var`` and ``noise_var`` are in squared output units;
    ``length_scales`` holds one positive length scale per input dimension,
    and ``mean_const`` is the constant prior mean.
    """

    signal_var: float
    length_scales: np.ndarray
    noise_var: float
    mean_const: float

    def __post_init__(self):
        object.__setattr__(self, "signal_var", positive_scalar(self.signal_var, "signal_var"))
        object.__setattr__(self, "noise_var", positive_scalar(self.noise_var, "noise_var"))
        object.__setattr__(self, "mean_const", finite_scalar(self.mean_const, "mean_const"))
        ls = as_float_vector(self.length_scales, "length_scales")
        if np.any(ls <= 0.0):
            raise ValueError("length_scales must all be positive")
        object.__setattr__(self, "length_scales", readonly(ls))

    @property
    def dim(self) -> int:
        return self.length_scales.size

    @property
    def w_diag(self) -> np.ndarray:
        """Diagonal of the length-scale matrix W (squared length scales)."""
        return self.length_scales**2


class Dataset:
    """Ordered (GaussianInput, observed value) pairs sharing one input dimension.

    Iteration order is append order; the row index of an entry in the Gram
    matrix is its list position. Mutation is single-writer: fitted posteriors
    snapshot the entries they were built from.
    """

    def __init__(self, entries: Iterable[tuple[GaussianInput, float]] = ()):
        self._entries: list[tuple[GaussianInput, float]] = []
        for inp, value in entries:
            self.append(inp, value)

    def append(self, inp: GaussianInput, value: float) -> None:
        if not isinstance(inp, GaussianInput):
            raise TypeError("dataset inputs must be GaussianInput instances")
        if self._entries and inp.dim != self.dim:
            raise ValueError(f"input has dimension {inp.dim}, dataset holds {self.dim}")
        self._entries.append((inp, finite_scalar(value, "value")))

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[GaussianInput, float]]:
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    @property
    def dim(self) -> int:
        if not self._entries:
            raise ValueError("empty dataset has no dimension")
        return self._entries[0][0].dim

    def means(self) -> np.ndarray:
        return np.array([inp.mean for inp, _ in self._entries], dtype=float)

    def covs(self) -> np.ndarray:
        return np.array([inp.cov for inp, _ in self._entries], dtype=float)

    def values(self) -> np.ndarray:
        return np.array([value for _, value in self._entries], dtype=float)

    def copy(self) -> "Dataset":
        out = Dataset()
        out._entries = list(self._entries)
        return out


def kernel_se(a, b, hyper: Hyperparams):
    """Squared-exponential kernel between deterministic locations.

    ``a`` and ``b`` broadcast over leading axes; the trailing axis is the
    input dimension.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_dim(a.shape[-1], hyper.dim, "a")
    check_dim(b.shape[-1], hyper.dim, "b")
    scaled = (a - b) / hyper.length_scales
    return hyper.signal_var * np.exp(-0.5 * np.sum(scaled * scaled, axis=-1))


def kernel_uise(p: GaussianInput, q: GaussianInput, same_index: bool, hyper: Hyperparams) -> float:
    """Expected squared-exponential covariance between two Gaussian inputs.

    ``same_index`` marks the two arguments as the same dataset entry (or the
    same query instance), which drops the determinant normaliser so that the
    self-covariance of any input equals ``signal_var`` exactly. With two
    zero-covariance inputs this reduces exactly to :func:`kernel_se`.
    """
    check_dim(p.dim, hyper.dim, "p")
    check_dim(q.dim, hyper.dim, "q")
    if p.is_deterministic and q.is_deterministic:
        return float(kernel_se(p.mean, q.mean, hyper))
    spread = p.cov + q.cov
    widened = spread + np.diag(hyper.w_diag)
    diff = p.mean - q.mean
    try:
        quad = float(diff @ np.linalg.solve(widened, diff))
        numer = hyper.signal_var * math.exp(-0.5 * quad)
        if same_index:
            return numer
        denom = math.sqrt(np.linalg.det(widened) / np.prod(hyper.w_diag))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - W > 0 prevents this
        raise NumericError(f"expected-kernel factorisation failed: {exc}") from exc
    return numer / denom


def _cross_cov(means_a: np.ndarray, cov_a: np.ndarray | None,
               means_b: np.ndarray, covs_b: np.ndarray,
               hyper: Hyperparams) -> np.ndarray:
    """(m, n) expected-kernel matrix between query rows and dataset rows.

    All queries share one covariance ``cov_a`` (``None`` means zero). Entries
    are cross-covariances, i.e. never same-index.
    """
    if cov_a is None:
        cov_a = np.zeros((hyper.dim, hyper.dim))
    spread = covs_b + cov_a[None]  # (n, d, d)
    if not spread.any():
        return kernel_se(means_a[:, None, :], means_b[None, :, :], hyper)
    widened = spread + np.diag(hyper.w_diag)[None]
    inv = np.linalg.inv(widened)
    denom = np.sqrt(np.linalg.det(widened) / np.prod(hyper.w_diag))  # (n,)
    diff = means_a[:, None, :] - means_b[None, :, :]  # (m, n, d)
    quad = np.einsum("mni,nij,mnj->mn", diff, inv, diff)
    return hyper.signal_var * np.exp(-0.5 * quad) / denom[None, :]


def gram_matrix(data: Dataset, hyper: Hyperparams) -> np.ndarray:
    """Gram matrix of the expected kernel plus output-noise diagonal.

    Off-diagonal entries use distinct-index covariances; diagonal entries are
    exactly ``signal_var + noise_var``.
    """
    n = len(data)
    if n == 0:
        raise ValueError("gram_matrix requires a nonempty dataset")
    check_dim(data.dim, hyper.dim, "dataset")
    means = data.means()
    covs = data.covs()
    if not covs.any():
        gram = kernel_se(means[:, None, :], means[None, :, :], hyper)
    else:
        spread = covs[:, None] + covs[None, :]  # (n, n, d, d)
        widened = spread + np.diag(hyper.w_diag)[None, None]
        inv = np.linalg.inv(widened)
        denom = np.sqrt(np.linalg.det(widened) / np.prod(hyper.w_diag))
        diff = means[:, None, :] - means[None, :, :]
        quad = np.einsum("abi,abij,abj->ab", diff, inv, diff)
        gram = hyper.signal_var * np.exp(-0.5 * quad) / denom
    gram = 0.5 * (gram + gram.T)
    np.fill_diagonal(gram, hyper.signal_var + hyper.noise_var)
    return gram


@dataclass(frozen=True)
class GpPosterior:
    """Immutable fitted GP state answering mean/variance queries.

    ``chol`` is the lower Cholesky factor of the (possibly jittered) Gram
    matrix and ``alpha`` the precomputed weight vector K^-1 (z - mean_const).
    An empty dataset yields the prior-only posterior.
    """

    dataset: Dataset
    hyper: Hyperparams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    means: np.ndarray
    covs: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.alpha.size

    def __len__(self) -> int:
        return self.n


def fit_posterior(data: Dataset, hyper: Hyperparams) -> GpPosterior:
    """Factorise the Gram matrix and precompute prediction weights.

    An empty dataset returns a prior-only posterior (mean ``mean_const``,
    variance ``signal_var``). On Cholesky failure a diagonal jitter ladder is
    tried before giving up with :class:`IllConditionedDataError`.
    """
    d = hyper.dim
    n = len(data)
    snapshot = data.copy()
    if n == 0:
        empty = np.zeros(0)
        return GpPosterior(snapshot, hyper, np.zeros((0, 0)), empty, 0.0,
                           np.zeros((0, d)), np.zeros((0, d, d)), empty)
    check_dim(data.dim, d, "dataset")
    gram = gram_matrix(data, hyper)
    chol = None
    jitter_used = 0.0
    for scale in (0.0,) + JITTER_LADDER:
        jitter_used = scale * hyper.signal_var
        try:
            chol = cholesky(gram + jitter_used * np.eye(n), lower=True)
            break
        except LinAlgError:
            continue
    if chol is None:
        attempted = ", ".join(f"{s * hyper.signal_var:.3e}" for s in (0.0,) + JITTER_LADDER)
        raise IllConditionedDataError(
            f"ill-conditioned dataset: Cholesky failed after jitter sequence [{attempted}]")
    resid = data.values() - hyper.mean_const
    alpha = cho_solve((chol, True), resid)
    return GpPosterior(snapshot, hyper, chol, alpha, jitter_used,
                       data.means(), data.covs(), data.values())


def _clamp_variance(var, slack: float = VARIANCE_SLACK):
    low = np.min(var) if np.ndim(var) else var
    if low < -slack:
        raise NumericError(f"posterior variance {low:.3e} below -{slack:g}")
    return np.maximum(var, 0.0)


def predict(post: GpPosterior, query: GaussianInput) -> tuple[float, float]:
    """Posterior mean and variance at one (possibly Gaussian) query input.

    The query's prior self-covariance uses the same-instance rule, so it is
    ``signal_var`` for any query covariance. With a deterministic query and a
    deterministic dataset this is standard GP prediction.
    """
    hyper = post.hyper
    check_dim(query.dim, hyper.dim, "query")
    if post.n == 0:
        return hyper.mean_const, hyper.signal_var
    kvec = _cross_cov(query.mean[None, :], query.cov, post.means, post.covs, hyper)[0]
    mean = hyper.mean_const + kvec @ post.alpha
    half = solve_triangular(post.chol, kvec, lower=True)
    var = hyper.signal_var - half @ half
    return float(mean), float(_clamp_variance(var))


def predict_many(post: GpPosterior, means, cov=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`predict` for query rows sharing one covariance.

    ``means`` is (m, d); ``cov`` is a single (d, d) covariance applied to all
    rows (``None`` for deterministic queries). Returns (means, variances).
    """
    hyper = post.hyper
    means = np.atleast_2d(np.asarray(means, dtype=float))
    check_dim(means.shape[1], hyper.dim, "query")
    m = means.shape[0]
    if cov is not None:
        cov = as_cov_matrix(cov, hyper.dim, "cov")
    if post.n == 0:
        return (np.full(m, hyper.mean_const), np.full(m, hyper.signal_var))
    kmat = _cross_cov(means, cov, post.means, post.covs, hyper)  # (m, n)
    mean = hyper.mean_const + kmat @ post.alpha
    half = solve_triangular(post.chol, kmat.T, lower=True)  # (n, m)
    var = hyper.signal_var - np.einsum("nm,nm->m", half, half)
    return mean, _clamp_variance(var)


def log_marginal_likelihood(data: Dataset, hyper: Hyperparams) -> float:
    """Gaussian log-marginal likelihood of the data, via the Cholesky factor."""
    if len(data) == 0:
        return 0.0
    post = fit_posterior(data, hyper)
    resid = post.values - hyper.mean_const
    logdet = 2.0 * float(np.sum(np.log(np.diag(post.chol))))
    return float(-0.5 * resid @ post.alpha - 0.5 * logdet - 0.5 * post.n * math.log(2.0 * math.pi))


@dataclass(frozen=True)
class HyperBounds:
    """Box constraints for hyperparameter search, one (low, high) per field.

    ``length_scales`` bounds apply to every dimension. A degenerate interval
    (low == high) pins that field.
    """

    signal_var: tuple[float, float] = (1e-6, 1e6)
    length_scales: tuple[float, float] = (1e-3, 1e3)
    noise_var: tuple[float, float] = (1e-8, 1e4)
    mean_const: tuple[float, float] = (-1e6, 1e6)

    def contains(self, hyper: Hyperparams) -> bool:
        lo, hi = self.signal_var
        ok = lo <= hyper.signal_var <= hi
        lo, hi = self.length_scales
        ok &= bool(np.all((hyper.length_scales >= lo) & (hyper.length_scales <= hi)))
        lo, hi = self.noise_var
        ok &= lo <= hyper.noise_var <= hi
        lo, hi = self.mean_const
        ok &= lo <= hyper.mean_const <= hi
        return ok


def _pack(hyper: Hyperparams) -> np.ndarray:
    return np.concatenate([
        [math.log(hyper.signal_var)],
        np.log(hyper.length_scales),
        [math.log(hyper.noise_var), hyper.mean_const],
    ])


def _unpack(theta: np.ndarray, d: int) -> Hyperparams:
    return Hyperparams(
        signal_var=math.exp(theta[0]),
        length_scales=np.exp(theta[1:1 + d]),
        noise_var=math.exp(theta[1 + d]),
        mean_const=theta[2 + d],
    )


def _theta_bounds(bounds: HyperBounds, d: int) -> tuple[np.ndarray, np.ndarray]:
    lo = [math.log(bounds.signal_var[0])]
    hi = [math.log(bounds.signal_var[1])]
    lo += [math.log(bounds.length_scales[0])] * d
    hi += [math.log(bounds.length_scales[1])] * d
    lo += [math.log(bounds.noise_var[0]), bounds.mean_const[0]]
    hi += [math.log(bounds.noise_var[1]), bounds.mean_const[1]]
    return np.array(lo), np.array(hi)


def fit_hyperparameters(data: Dataset, init: Hyperparams,
                        bounds: HyperBounds | None = None,
                        budget: int = 200) -> Hyperparams:
    """Maximise the log-marginal likelihood by bounded compass search.

    Positive fields move in log space, ``mean_const`` in linear space.
    Proposals outside the bounds are clipped; a proposal is accepted only if
    it strictly improves the likelihood, so the result is never worse than
    ``init``. ``budget`` caps the number of likelihood evaluations (the
    initial point included), and pathological data falls back to ``init``.
    """
    if bounds is None:
        bounds = HyperBounds()
    if not bounds.contains(init):
        raise ValueError("bounds must contain the initial hyperparameters")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    d = init.dim

    def objective(theta: np.ndarray) -> float:
        try:
            return log_marginal_likelihood(data, _unpack(theta, d))
        except (IllConditionedDataError, NumericError, OverflowError):
            return -math.inf

    lo, hi = _theta_bounds(bounds, d)
    theta = np.clip(_pack(init), lo, hi)
    theta0 = theta.copy()
    best = objective(theta)
    used = 1
    if not math.isfinite(best):
        return init
    width = hi - lo
    step = np.where(width > 0, width / 8.0, 0.0)
    min_step = 1e-3 * np.where(width > 0, width, 1.0)
    moved = False
    while used < budget and np.any(step >= min_step):
        improved = False
        for i in range(theta.size):
            if step[i] <= 0.0:
                continue
            for sign in (1.0, -1.0):
                if used >= budget:
                    break
                cand = theta.copy()
                cand[i] = min(max(cand[i] + sign * step[i], lo[i]), hi[i])
                if cand[i] == theta[i]:
                    continue
                val = objective(cand)
                used += 1
                if val > best:
                    theta, best = cand, val
                    improved = True
                    moved = True
                    break
        if not improved:
            step *= 0.5
    if not moved:
        return init
    # Coordinates that never left their starting value keep the exact field
    # from ``init`` (the log/exp round trip is not bitwise faithful).
    fitted = _unpack(theta, d)
    same = theta == theta0
    return Hyperparams(
        signal_var=init.signal_var if same[0] else fitted.signal_var,
        length_scales=np.where(same[1:1 + d], init.length_scales, fitted.length_scales),
        noise_var=init.noise_var if same[1 + d] else fitted.noise_var,
        mean_const=init.mean_const if same[2 + d] else fitted.mean_const,
    )
