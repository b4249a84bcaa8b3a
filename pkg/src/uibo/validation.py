"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

# Absolute tolerance for symmetry of covariance matrices.
SYMMETRY_ATOL = 1e-10
# Eigenvalues of a covariance matrix may dip this far below zero before we
# reject the matrix as not positive semi-definite.
PSD_EIG_SLACK = 1e-10


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def as_cov_matrix(cov, dim: int, name: str = "cov") -> np.ndarray:
    """Coerce ``cov`` to a ``dim x dim`` symmetric PSD float matrix.

    A scalar or 1-D vector is promoted to a diagonal matrix. Symmetry is
    required within ``SYMMETRY_ATOL`` and eigenvalues may not fall below
    ``-PSD_EIG_SLACK``.
    """
    arr = np.asarray(cov, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(dim)
    elif arr.ndim == 1:
        if arr.size != dim:
            raise ValueError(f"{name} diagonal must have length {dim}, got {arr.size}")
        arr = np.diag(arr)
    if arr.shape != (dim, dim):
        raise ValueError(f"{name} must have shape ({dim}, {dim}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    if np.max(np.abs(arr - arr.T), initial=0.0) > SYMMETRY_ATOL:
        raise ValueError(f"{name} must be symmetric within {SYMMETRY_ATOL:g}")
    if arr.any() and np.linalg.eigvalsh(arr)[0] < -PSD_EIG_SLACK:
        raise ValueError(f"{name} must be positive semi-definite (eigenvalue below -{PSD_EIG_SLACK:g})")
    return arr


def positive_scalar(x, name: str = "value") -> float:
    val = float(x)
    if not np.isfinite(val) or val <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {x!r}")
    return val


def nonnegative_scalar(x, name: str = "value") -> float:
    val = float(x)
    if not np.isfinite(val) or val < 0.0:
        raise ValueError(f"{name} must be a non-negative finite number, got {x!r}")
    return val


def finite_scalar(x, name: str = "value") -> float:
    val = float(x)
    if not np.isfinite(val):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return val


def check_dim(actual: int, expected: int, name: str = "input") -> None:
    if actual != expected:
        raise ValueError(f"{name} has dimension {actual}, expected {expected}")


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a float copy of ``arr`` with the writeable flag cleared."""
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out
