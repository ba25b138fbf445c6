"""Estimator interface around the balayage solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_measure, check_medium_params, check_points
from .balayage import SweepConfig, sweep
from .grid import GridSpec
from .radial import Medium


class PartialBalayage(BaseEstimator):
    """Partial balayage of a measure onto a constant density.

    Parameters
    ----------
    N : int
        Dimension, 2 or 3.
    k : float
        Wavenumber.
    rho : float
        Target density.
    h : float
        Grid spacing of the automatic box.
    box : GridSpec, optional
        Explicit computational box.
    omega_threshold : float
        Cells with ``u > omega_threshold * h^2`` form the saturated set.
    inner_tol, outer_tol : float
        Solver tolerances, see :class:`SweepConfig`.
    compute_lambda1 : bool
        Estimate the first eigenvalue of the saturated set.

    Attributes
    ----------
    result_ : BalayageResult
    omega_ : Mask
    V_, u_ : ScalarField
    feasible_ : bool
    lambda1_ : float

    Examples
    --------
    >>> est = PartialBalayage(N=2, k=1.0, h=0.1).fit([[0.0, 0.0, 3.0]])
    >>> bool(est.predict([[0.0, 0.0]])[0])
    True
    """

    def __init__(
        self,
        N=2,
        k=1.0,
        rho=1.0,
        h=0.05,
        box=None,
        omega_threshold=1e-6,
        inner_tol=1e-10,
        outer_tol=1e-10,
        compute_lambda1=True,
    ):
        self.N = N
        self.k = k
        self.rho = rho
        self.h = h
        self.box = box
        self.omega_threshold = omega_threshold
        self.inner_tol = inner_tol
        self.outer_tol = outer_tol
        self.compute_lambda1 = compute_lambda1

    def _config(self) -> SweepConfig:
        return SweepConfig(
            box=self.box,
            h=self.h,
            omega_threshold=self.omega_threshold,
            inner_tol=self.inner_tol,
            outer_tol=self.outer_tol,
            compute_lambda1=self.compute_lambda1,
        )

    def fit(self, X, y=None):
        """Sweep the measure ``X``.

        ``X`` is a :class:`Measure`, a density :class:`ScalarField`, or an
        array with rows ``(x_1, ..., x_N, mass)`` describing atoms.
        """
        check_medium_params(self.N, self.k)
        if self.box is not None and not isinstance(self.box, GridSpec):
            raise TypeError("box must be a GridSpec")
        mu = check_measure(X, self.N)
        self.medium_ = Medium(self.N, self.k)
        self.result_ = sweep(mu, self.rho, self.medium_, self._config())
        self.omega_ = self.result_.omega
        self.V_ = self.result_.V
        self.u_ = self.result_.u
        self.feasible_ = self.result_.feasible
        self.lambda1_ = self.result_.lambda1_omega
        self.n_features_in_ = self.N
        return self

    def _lookup(self, X, attr, fill):
        check_is_fitted(self, "result_")
        values = getattr(self, attr).values if attr != "omega_" else self.omega_.flags
        P = check_points(X, self.N)
        spec = self.result_.spec
        idx = np.floor((P - spec.lower) / spec.h).astype(int)
        inside = np.all((idx >= 0) & (idx < np.asarray(spec.shape)), axis=1)
        out = np.full(len(P), fill, dtype=np.asarray(values).dtype)
        if inside.any():
            out[inside] = np.asarray(values)[tuple(idx[inside].T)]
        return out

    def predict(self, X):
        """Membership of the points in the saturated set."""
        return self._lookup(X, "omega_", False)

    def decision_function(self, X):
        """``u = U - V`` at the cells containing the points (0 outside the box)."""
        return self._lookup(X, "u_", 0.0)

    def transform(self, X):
        """Swept potential ``V`` at the cells containing the points, as a column."""
        return self._lookup(X, "V_", np.nan)[:, None]

    def fit_predict(self, X, points):
        return self.fit(X).predict(points)
