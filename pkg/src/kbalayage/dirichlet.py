"""Dirichlet problems for ``Delta + k^2`` on discrete open sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from ._linalg import LinearSolver, neighbour_pairs, restricted_operator
from .balayage import lambda1_estimate
from .grid import Mask, Measure, ScalarField, potential, potential_at
from .radial import Medium

__all__ = [
    "DirichletProblem",
    "SpectralInfeasibilityError",
    "solve",
    "harmonic_measure_potential",
]


class SpectralInfeasibilityError(ValueError):
    """The set does not satisfy ``lambda_1 > k^2``, so the problem is not uniquely solvable."""


@dataclass
class DirichletProblem:
    """Boundary-value problem ``(Delta_h + k^2) w = 0`` on ``mask``.

    Parameters
    ----------
    mask : Mask
        The open set; its cells are the unknowns.
    boundary_data : ScalarField, optional
        Values read on the cells adjacent to ``mask``.
    medium : Medium
    levelset : callable, optional
        ``levelset(points) < 0`` inside the continuous domain. When given
        together with ``boundary_function`` the boundary is located between
        cells and a Shortley-Weller stencil is used (second-order accurate
        for curved boundaries).
    boundary_function : callable, optional
        Boundary values ``g(points)`` for the Shortley-Weller mode.
    """

    mask: Mask
    boundary_data: Optional[ScalarField] = None
    medium: Optional[Medium] = None
    levelset: Optional[Callable] = None
    boundary_function: Optional[Callable] = None

    def __post_init__(self):
        if self.medium is None:
            raise ValueError("a Medium is required")
        sw = self.levelset is not None
        if sw != (self.boundary_function is not None):
            raise ValueError("levelset and boundary_function must be given together")
        if not sw and self.boundary_data is None:
            raise ValueError("boundary_data is required")
        if self.boundary_data is not None and self.boundary_data.spec != self.mask.spec:
            raise ValueError("boundary data must live on the mask grid")


def _check_spectrum(mask: Mask, k: float) -> float:
    lam = lambda1_estimate(mask, convention="center")
    if lam <= k * k:
        raise SpectralInfeasibilityError(
            f"discrete lambda_1 = {lam:.6g} does not exceed k^2 = {k * k:.6g}; "
            "the maximum principle fails and the Dirichlet problem is not uniquely solvable"
        )
    return lam


def solve(problem: DirichletProblem, check_spectrum: bool = True) -> ScalarField:
    """Solve the discrete Dirichlet problem.

    Returns a field equal to the solution on ``mask`` and to the boundary
    data elsewhere (zero elsewhere in the Shortley-Weller mode).
    """
    mask = problem.mask
    if mask.empty():
        raise ValueError("empty domain")
    spec = mask.spec
    k = problem.medium.k
    if check_spectrum:
        _check_spectrum(mask, k)
    if problem.levelset is not None:
        return _solve_shortley_weller(problem)
    if mask.touches_border(1):
        raise ValueError("the domain must stay one cell away from the grid boundary")
    h = spec.h
    idx = np.flatnonzero(mask.flags.ravel())
    A, _ = restricted_operator(idx, spec.shape, h, k)
    g = np.asarray(problem.boundary_data.values).ravel()
    flags = mask.flags.ravel()
    rhs = np.zeros(idx.size)
    for nb, valid in neighbour_pairs(idx, spec.shape):
        outside = valid & ~flags[np.where(valid, nb, 0)]
        rhs[outside] += g[nb[outside]]
    w = LinearSolver(A, spec.ndim).solve(rhs, atol=1e-12 * max(1.0, np.max(np.abs(rhs))))
    out = g.copy()
    out[idx] = w
    return ScalarField(spec, out.reshape(spec.shape))


def _solve_shortley_weller(problem: DirichletProblem) -> ScalarField:
    spec = problem.mask.spec
    h = spec.h
    k = problem.medium.k
    phi = problem.levelset
    g = problem.boundary_function
    flags = problem.mask.flags
    idx = np.flatnonzero(flags.ravel())
    n = idx.size
    pos = np.full(spec.size, -1, dtype=np.int64)
    pos[idx] = np.arange(n)
    pts = spec.points(flags)
    rows, cols, vals = [], [], []
    diag = np.full(n, -(k * k))
    rhs = np.zeros(n)
    dirs = list(neighbour_pairs(idx, spec.shape))
    for ax in range(spec.ndim):
        lo_nb, lo_valid = dirs[2 * ax]
        hi_nb, hi_valid = dirs[2 * ax + 1]
        # distances to the neighbour or to the boundary, per side
        dist = []
        bval = []
        inner = []
        for nb, valid, sgn in ((lo_nb, lo_valid, -1.0), (hi_nb, hi_valid, 1.0)):
            j = np.full(n, -1, dtype=np.int64)
            j[valid] = pos[nb[valid]]
            d = np.full(n, h)
            gv = np.zeros(n)
            for i in np.flatnonzero(j < 0):
                x0 = pts[i]
                e = np.zeros(spec.ndim)
                e[ax] = sgn
                f = lambda s: float(phi((x0 + s * e)[None, :])[0])
                f0, f1 = f(0.0), f(h)
                if f1 < 0:
                    s = h
                else:
                    s = brentq(f, 0.0, h, xtol=1e-14 * h) if f0 < 0 else 1e-12 * h
                s = max(s, 1e-6 * h)
                d[i] = s
                gv[i] = float(g((x0 + s * e)[None, :])[0])
            dist.append(d)
            bval.append(gv)
            inner.append(j)
        hl, hr = dist
        # u_xx ~ 2/(hl+hr) [ (u_r - u_i)/hr - (u_i - u_l)/hl ]
        cl = 2.0 / (hl * (hl + hr))
        cr = 2.0 / (hr * (hl + hr))
        diag += cl + cr
        for c, j, gv in ((cl, inner[0], bval[0]), (cr, inner[1], bval[1])):
            ins = j >= 0
            rows.append(np.flatnonzero(ins))
            cols.append(j[ins])
            vals.append(-c[ins])
            rhs[~ins] += c[~ins] * gv[~ins]
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ) + sp.diags(diag)
    lu = spla.splu(A.tocsc())
    w = lu.solve(rhs)
    w = w + lu.solve(rhs - A @ w)
    out = np.zeros(spec.size)
    out[idx] = w
    return ScalarField(spec, out.reshape(spec.shape))


def harmonic_measure_potential(
    mask: Mask, z, medium: Medium, check_spectrum: bool = True, levelset: Optional[Callable] = None
) -> ScalarField:
    """Potential ``W`` of the k-harmonic measure of ``mask`` for the pole ``z``.

    ``W`` equals ``U^{delta_z}`` off ``mask`` and solves the Dirichlet
    problem with that boundary data on ``mask``. The boundary measure itself
    is never formed.

    Parameters
    ----------
    mask : Mask
    z : point
        Pole, inside a cell of ``mask``.
    medium : Medium
    check_spectrum : bool
        Refuse sets with ``lambda_1 <= k^2``.
    levelset : callable, optional
        Continuous description of the domain (negative inside). The boundary
        data are then read on the true boundary with the Shortley-Weller
        stencil instead of on the neighbouring cell centres.
    """
    spec = mask.spec
    zi = spec.index_of(z)
    if not (all(0 <= a < n for a, n in zip(zi, spec.shape)) and mask.flags[zi]):
        raise ValueError("the pole must lie in a cell of the domain")
    pole = Measure.atom(z, 1.0)
    U = potential(pole, spec, medium)
    # the pole sits inside the mask, so only regular values are read
    data = ScalarField(spec, np.where(U.singular, 0.0, U.values))
    if levelset is None:
        return solve(DirichletProblem(mask, data, medium), check_spectrum=check_spectrum)
    prob = DirichletProblem(mask, None, medium, levelset, lambda pts: potential_at(pole, pts, medium))
    inside = solve(prob, check_spectrum=check_spectrum)
    return ScalarField(spec, np.where(mask.flags, inside.values, data.values))
