"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_is_fitted

from .grid import Measure, ScalarField

__all__ = ["check_points", "check_atoms", "check_measure", "check_medium_params", "check_is_fitted"]


def check_points(X, N: int) -> np.ndarray:
    """Return ``X`` as a float ``(M, N)`` array of finite points."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != N:
        raise ValueError(f"expected points with {N} coordinates, got {X.shape[1]}")
    return X


def check_atoms(X, N: int) -> np.ndarray:
    """Rows ``(x_1, ..., x_N, mass)`` with positive masses."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != N + 1:
        raise ValueError(f"atom rows need {N} coordinates and a mass ({N + 1} columns), got {X.shape[1]}")
    if np.any(X[:, -1] <= 0):
        raise ValueError("atom masses must be positive")
    return X


def check_measure(X, N: int) -> Measure:
    """Accept a :class:`Measure`, a density field or an atom table."""
    if isinstance(X, Measure):
        m = X
    elif isinstance(X, ScalarField):
        m = Measure(density=X)
    else:
        A = check_atoms(X, N)
        m = Measure(atoms=[(row[:N], row[N]) for row in A])
    if m.is_empty():
        raise ValueError("the measure is empty")
    if m.ndim != N:
        raise ValueError(f"measure has dimension {m.ndim}, expected {N}")
    return m


def check_medium_params(N, k) -> None:
    if N not in (2, 3):
        raise ValueError(f"N must be 2 or 3, got {N!r}")
    if not (np.isfinite(k) and k >= 0):
        raise ValueError(f"k must be finite and >= 0, got {k!r}")
