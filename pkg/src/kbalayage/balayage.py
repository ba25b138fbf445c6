"""Partial balayage solver.

The sweep computes ``u = U - V``, the smallest nonnegative grid function
with ``-(Delta_h + k^2) u >= mu_h - rho_h``. This is a linear
complementarity problem

    u >= 0,   A u - f >= 0,   u (A u - f) = 0,

with ``A = -(Delta_h + k^2)`` and ``f = mu_h - rho_h``. It is solved by
monotone growth of the active set ``S = {u > 0}``. Starting from
``S = {f > 0}``, each step solves ``A u = f`` on ``S`` with ``u = 0``
elsewhere and then adds every cell where ``A u < f``. While the first
Dirichlet eigenvalue of ``S`` exceeds ``k^2`` the restricted matrix is an
M-matrix, ``u`` grows monotonically and ``S`` never leaves the true
saturated set. Once the spectral condition fails the restricted solution
changes sign or blows up, which is how infeasibility shows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from ._linalg import LinearSolver, SolveError, restricted_operator, smallest_eigenvalue
from .grid import GridSpec, Mask, Measure, ScalarField, auto_grid, helmholtz_apply, potential, rasterize
from .radial import Medium

__all__ = [
    "SweepConfig",
    "BalayageResult",
    "StructureReport",
    "ScanResult",
    "GeometryReport",
    "ConfigurationError",
    "sweep",
    "sweep_from_potential",
    "sweep_signed",
    "structure_check",
    "lambda1_estimate",
    "feasibility_scan",
    "geometry_bound_check",
]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    """Solver settings.

    Parameters
    ----------
    box : GridSpec, optional
        Computational box. When omitted it is sized from the support of the
        measure (only allowed for constant ``rho``).
    h : float
        Grid spacing for the automatic box.
    inner_tol : float
        A cell joins the active set when ``A u - f < -inner_tol``.
    outer_tol : float
        Max-norm residual target for the linear solve on the active set.
    max_outer : int
        Cap on active-set growth steps.
    omega_threshold : float
        ``omega = {u > omega_threshold * h^2}``.
    divergence_bound : float, optional
        Declare infeasibility when ``max u`` exceeds it. Default is 1000
        times the largest regular value of ``U``.
    margin_cells : int
        Extra cells added around the automatic box.
    boundary_cells : int
        Infeasible when the active set comes this close to the box edge.
    compute_lambda1 : bool
        Estimate the first eigenvalue of ``omega`` for feasible runs.
    """

    box: Optional[GridSpec] = None
    h: float = 0.05
    inner_tol: float = 1e-10
    outer_tol: float = 1e-10
    max_outer: int = 100_000
    omega_threshold: float = 1e-6
    divergence_bound: Optional[float] = None
    margin_cells: int = 10
    boundary_cells: int = 2
    compute_lambda1: bool = True

    def __post_init__(self):
        for name in ("h", "inner_tol", "outer_tol", "omega_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class BalayageResult:
    """Outcome of a sweep.

    ``V = U - u``; ``B`` is the swept measure ``-(Delta_h + k^2) V`` as a
    cell density, computed as ``mu_h - A u``; ``omega = {u > theta h^2}``;
    ``Omega = {B >= rho - 10 h}``.
    """

    V: ScalarField
    u: ScalarField
    U: ScalarField
    B: Measure
    omega: Mask
    Omega: Mask
    active: Mask
    source: ScalarField
    rho: ScalarField
    medium: Medium
    feasible: bool
    converged: bool
    iterations: int
    lambda1_omega: float = float("nan")
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)

    @property
    def spec(self) -> GridSpec:
        return self.U.spec

    def summary(self) -> dict:
        B = self.B.density
        lam = self.lambda1_omega
        return {
            "feasible": bool(self.feasible),
            "converged": bool(self.converged),
            "status": self.status,
            "iterations": int(self.iterations),
            "lambda1_omega": None if not math.isfinite(lam) else float(lam),
            "omega_cell_count": int(self.omega.count),
            "omega_volume": float(self.omega.volume),
            "B_total_mass": float(B.total()) if B is not None else 0.0,
            "residuals": structure_check(self).as_dict() if self.converged else None,
        }


def _rho_array(rho, spec: GridSpec) -> np.ndarray:
    if isinstance(rho, ScalarField):
        if rho.spec != spec:
            raise ConfigurationError("rho must live on the computational grid")
        r = np.array(rho.values)
    else:
        r = np.full(spec.shape, float(rho))
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise ConfigurationError("rho must be finite and bounded below by a positive constant")
    return r


def _border(shape, cells):
    b = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[ax] = slice(0, cells)
        b[tuple(sl)] = True
        sl[ax] = slice(shape[ax] - cells, shape[ax])
        b[tuple(sl)] = True
    return b


def _solve_lcp(f, spec, k, config, initial_active, bound):
    """Active-set growth. Returns (u, S, status, iterations, info)."""
    shape = spec.shape
    h = spec.h
    N = spec.ndim
    h2 = h * h
    border = _border(shape, config.boundary_cells)
    fflat = f.ravel()
    S = fflat > config.inner_tol
    if initial_active is not None:
        S |= np.asarray(initial_active, dtype=bool).ravel()
    u = np.zeros(fflat.size)
    info = {}
    if not S.any():
        return u.reshape(shape), S.reshape(shape), "ok", 0, info
    if (S & border.ravel()).any():
        return u.reshape(shape), S.reshape(shape), "boundary", 0, info
    it = 0
    while True:
        it += 1
        idx = np.flatnonzero(S)
        A, _ = restricted_operator(idx, shape, h, k)
        b = h2 * fflat[idx]
        try:
            solver = LinearSolver(A, N)
            uS = solver.solve(b, x0=u[idx], atol=h2 * config.outer_tol)
        except SolveError as exc:
            info["error"] = str(exc)
            u[idx] = 0.0
            return u.reshape(shape), S.reshape(shape), "spectral", it, info
        umax = float(uS.max())
        if uS.min() < -1e-9 * max(1.0, umax):
            info["min_u"] = float(uS.min())
            u[idx] = uS
            return u.reshape(shape), S.reshape(shape), "spectral", it, info
        u[:] = 0.0
        u[idx] = uS
        if umax > bound:
            info["max_u"] = umax
            return u.reshape(shape), S.reshape(shape), "divergence", it, info
        resid = helmholtz_residual(u.reshape(shape), f, h, k).ravel()
        grow = (~S) & (resid < -config.inner_tol)
        if not grow.any():
            info["max_u"] = umax
            return u.reshape(shape), S.reshape(shape), "ok", it, info
        S |= grow
        if (grow & border.ravel()).any():
            return u.reshape(shape), S.reshape(shape), "boundary", it, info
        if it >= config.max_outer:
            return u.reshape(shape), S.reshape(shape), "max_iterations", it, info


def helmholtz_residual(u: np.ndarray, f: np.ndarray, h: float, k: float) -> np.ndarray:
    """``A u - f`` on the full grid (zero extension outside)."""
    from .grid import _apply_stencil

    return _apply_stencil(u, h, k) - f


def sweep_from_potential(
    U: ScalarField,
    rho: Union[float, ScalarField] = 1.0,
    medium: Optional[Medium] = None,
    config: Optional[SweepConfig] = None,
    off_support_measure: Optional[Measure] = None,
    source: Optional[ScalarField] = None,
    initial_active=None,
) -> BalayageResult:
    """Sweep a measure known through its potential ``U`` on a grid.

    Parameters
    ----------
    U : ScalarField
        Potential of the measure on the computational grid.
    rho : float or ScalarField
        Target density.
    medium : Medium
    config : SweepConfig, optional
        ``config.box`` is ignored; the grid of ``U`` is used.
    off_support_measure : Measure, optional
        When given, its rasterisation is used as the source density.
    source : ScalarField, optional
        Source density ``mu_h``. Defaults to the discrete operator applied
        to ``U``, which requires ``U`` to have no singular cells.
    initial_active : array of bool, optional
        Cells known to lie in the saturated set (warm start). Must be a
        subset of the true answer.
    """
    if medium is None:
        raise ConfigurationError("a Medium is required")
    config = config or SweepConfig()
    spec = U.spec
    if spec.ndim != medium.N:
        raise ConfigurationError("grid and medium dimensions differ")
    if source is None and off_support_measure is not None:
        source = rasterize(off_support_measure, spec)
    if source is None:
        if U.singular.any():
            raise ConfigurationError("U has singular cells; pass the source density explicitly")
        mu = np.array(helmholtz_apply(U, medium).values)
        mu[_border(spec.shape, 1)] = 0.0
        source = ScalarField(spec, mu)
    mu_h = np.asarray(source.values)
    rho_h = _rho_array(rho, spec)
    f = mu_h - rho_h
    bound = config.divergence_bound
    if bound is None:
        bound = 1e3 * max(abs(U.regular_max()), 1.0)
    border = _border(spec.shape, config.boundary_cells + 1)
    if np.any((mu_h > 0) & border):
        raise ConfigurationError("the measure is too close to the box boundary; enlarge the box")

    u, S, status, it, info = _solve_lcp(f, spec, medium.k, config, initial_active, bound)
    h = spec.h
    feasible = status == "ok"
    converged = status == "ok"
    Bvals = mu_h - (helmholtz_residual(u, f, h, medium.k) + f)
    if not feasible:
        # the failed iterate has no meaning as a measure
        Bvals = np.clip(Bvals, 0.0, None)
    omega = Mask(spec, u > config.omega_threshold * h * h)
    Omega = Mask(spec, Bvals >= rho_h - 10 * h)
    V = ScalarField(spec, np.where(U.singular, U.values, U.values - u), U.singular)
    lam = float("nan")
    if feasible and config.compute_lambda1 and not omega.empty():
        lam = lambda1_estimate(omega)
    info["divergence_bound"] = bound
    return BalayageResult(
        V=V,
        u=ScalarField(spec, u),
        U=U,
        B=Measure(density=ScalarField(spec, Bvals)),
        omega=omega,
        Omega=Omega,
        active=Mask(spec, S),
        source=ScalarField(spec, mu_h),
        rho=ScalarField(spec, rho_h),
        medium=medium,
        feasible=feasible,
        converged=converged,
        iterations=it,
        lambda1_omega=lam,
        status=status,
        diagnostics=info,
    )


def resolve_box(mu: Measure, rho, medium: Medium, config: SweepConfig) -> GridSpec:
    if config.box is not None:
        return config.box
    if isinstance(rho, ScalarField):
        raise ConfigurationError("a variable rho needs an explicit box")
    if float(rho) != 1.0:
        # the geometric bound scales with rho through mu / rho
        mu = mu.scaled(1.0 / float(rho))
    return auto_grid(mu, medium, config.h, config.margin_cells)


def sweep(
    mu: Measure,
    rho: Union[float, ScalarField] = 1.0,
    medium: Optional[Medium] = None,
    config: Optional[SweepConfig] = None,
    initial_active=None,
) -> BalayageResult:
    """Partial balayage of ``mu`` onto ``rho``.

    Parameters
    ----------
    mu : Measure
    rho : float or ScalarField
        Constant or cellwise target density, bounded away from 0.
    medium : Medium
    config : SweepConfig, optional
    initial_active : array of bool, optional
        Warm start, see :func:`sweep_from_potential`.

    Returns
    -------
    BalayageResult
    """
    if medium is None:
        raise ConfigurationError("a Medium is required")
    config = config or SweepConfig()
    spec = resolve_box(mu, rho, medium, config)
    source = rasterize(mu, spec)
    U = potential(mu, spec, medium)
    return sweep_from_potential(U, rho, medium, config, source=source, initial_active=initial_active)


def sweep_signed(
    mu_plus: Measure,
    mu_minus: Measure,
    medium: Medium,
    config: SweepConfig,
) -> tuple[BalayageResult, ScalarField]:
    """Sweep a signed measure ``mu_plus - mu_minus`` onto density 1.

    Uses ``rho = 1 + mu_minus`` for ``mu_plus`` and returns the result
    together with ``V - U^{mu_minus}``. Needs an explicit box.
    """
    if config.box is None:
        raise ConfigurationError("signed sweeps need an explicit box")
    spec = config.box
    rho = ScalarField(spec, 1.0 + np.asarray(rasterize(mu_minus, spec).values))
    res = sweep(mu_plus, rho, medium, config)
    Um = potential(mu_minus, spec, medium)
    return res, res.V - Um


# -- reports -----------------------------------------------------------------


@dataclass
class StructureReport:
    """Cellwise residuals of the structure of the swept measure.

    ``excess`` is ``max(B - rho)``. ``on_omega`` is ``max |B - rho|`` over
    ``omega``. ``off_omega`` is ``max |B - mu|`` away from the closure of
    ``omega`` (the complement of ``omega`` dilated by one cell).
    ``interface_mass`` is the mass of ``|B - mu|`` on the one-cell layer
    around ``omega``, where cells are partially covered.
    """

    excess: float
    on_omega: float
    off_omega: float
    omega_outside_Omega: int
    interface_mass: float
    h: float

    def passes(self, factor: float = 10.0, excess_tol: float = 1e-9) -> bool:
        tol = factor * self.h
        return self.excess <= excess_tol and self.on_omega <= tol and self.off_omega <= tol

    def as_dict(self) -> dict:
        return {
            "max_B_minus_rho": self.excess,
            "max_abs_B_minus_rho_on_omega": self.on_omega,
            "max_abs_B_minus_mu_off_omega": self.off_omega,
            "omega_cells_outside_Omega": self.omega_outside_Omega,
            "interface_mass": self.interface_mass,
        }


def structure_check(result: BalayageResult, mu=None, rho=None) -> StructureReport:
    """Compare the swept measure with ``rho`` on omega and ``mu`` off omega."""
    spec = result.spec
    B = np.asarray(result.B.density.values)
    mu_h = np.asarray(result.source.values) if mu is None else np.asarray(rasterize(mu, spec).values)
    rho_h = np.asarray(result.rho.values) if rho is None else _rho_array(rho, spec)
    om = result.omega.flags
    closure = result.omega.dilate(1).flags
    excess = float(np.max(B - rho_h))
    on = float(np.max(np.abs(B - rho_h)[om])) if om.any() else 0.0
    off_mask = ~closure
    off = float(np.max(np.abs(B - mu_h)[off_mask])) if off_mask.any() else 0.0
    layer = closure & ~om
    iface = float(np.abs(B - mu_h)[layer].sum() * spec.cell_volume)
    outside = int((om & ~result.Omega.dilate(1).flags).sum())
    return StructureReport(excess, on, off, outside, iface, spec.h)


def lambda1_estimate(mask: Mask, convention: str = "face", rtol: float = 1e-6) -> float:
    """First Dirichlet eigenvalue of ``-Delta_h`` on the cells of ``mask``.

    Parameters
    ----------
    mask : Mask
    convention : {"face", "center"}
        Where the zero boundary value sits: on the faces of the outermost
        cells, which makes the domain exactly the union of cells, or on the
        centres of the neighbouring outside cells.
    rtol : float
        Relative tolerance of the inverse iteration.

    Returns
    -------
    float
        The minimum over connected components is obtained automatically.
    """
    if mask.empty():
        raise ValueError("lambda1 of an empty set is undefined")
    idx = np.flatnonzero(mask.flags.ravel())
    A, _ = restricted_operator(idx, mask.spec.shape, mask.spec.h, 0.0, ghost=convention)
    lam, _ = smallest_eigenvalue(A, mask.spec.ndim, rtol=rtol)
    return lam / mask.spec.h**2


@dataclass
class ScanResult:
    """Bracket ``(lower, upper)`` for the feasibility threshold of a family."""

    lower: float
    upper: float
    unbounded: bool
    runs: list = field(default_factory=list)
    last_feasible: Optional[BalayageResult] = None

    @property
    def width(self) -> float:
        return self.upper - self.lower


def feasibility_scan(
    family: Callable[[float], Measure],
    medium: Medium,
    config: SweepConfig,
    t_feasible: float,
    t_infeasible: Optional[float] = None,
    resolution: float = 0.1,
    t_max: float = 1e6,
    rho: Union[float, ScalarField] = 1.0,
) -> ScanResult:
    """Bisection for the largest parameter with a nonempty admissible class.

    ``family(t)`` must be nondecreasing in ``t``. The saturated set of the
    last feasible run is reused as the initial active set of later runs,
    which is valid because that set grows with the measure.
    """
    if medium.k == 0:
        # the classical problem is solvable for every finite mass
        return ScanResult(t_feasible, math.inf, True)
    cfg = replace(config, compute_lambda1=False)
    probe = t_infeasible if t_infeasible is not None else t_feasible
    if cfg.box is None:
        cfg = replace(cfg, box=resolve_box(family(probe), rho, medium, cfg))
    runs = []
    warm = None

    def run(t):
        nonlocal warm
        res = sweep(family(t), rho, medium, cfg, initial_active=warm)
        runs.append((t, res.feasible, res.status))
        if res.feasible:
            warm = res.active.flags
        return res

    first = run(t_feasible)
    if not first.feasible:
        raise ValueError(f"the lower parameter {t_feasible} is not feasible ({first.status})")
    last_ok = first
    lo = t_feasible
    hi = t_infeasible
    if hi is None:
        hi = 2 * lo
        while True:
            if hi > t_max:
                return ScanResult(lo, math.inf, True, runs, last_ok)
            res = run(hi)
            if not res.feasible:
                break
            lo, last_ok = hi, res
            hi *= 2
    else:
        saved = warm
        res = run(hi)
        warm = saved
        if res.feasible:
            return ScanResult(hi, math.inf, True, runs, res)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        res = run(mid)
        if res.feasible:
            lo, last_ok = mid, res
        else:
            hi = mid
    return ScanResult(lo, hi, False, runs, last_ok)


@dataclass
class GeometryReport:
    inner_radius: float
    outer_radius: float
    bound: float
    holds: bool


def geometry_bound_check(result: BalayageResult, epsilon: float, center=None) -> GeometryReport:
    """Check that omega lies in ``B_{R + 2 epsilon + 2h}`` about ``center``.

    ``R`` is the smallest distance from ``center`` to the boundary of
    omega, measured at the midpoints of faces between omega and its
    complement.
    """
    spec = result.spec
    om = result.omega.flags
    c = np.zeros(spec.ndim) if center is None else np.asarray(center, dtype=float)
    if not om.any():
        return GeometryReport(0.0, 0.0, 2 * epsilon + 2 * spec.h, True)
    mids = []
    for ax in range(spec.ndim):
        a = [slice(None)] * spec.ndim
        b = [slice(None)] * spec.ndim
        a[ax] = slice(0, -1)
        b[ax] = slice(1, None)
        cross = om[tuple(a)] != om[tuple(b)]
        idx = np.argwhere(cross)
        pts = spec.lower + (idx + 0.5) * spec.h
        pts[:, ax] += 0.5 * spec.h
        mids.append(pts)
    mids = np.concatenate(mids)
    R = float(np.min(np.linalg.norm(mids - c, axis=1)))
    far = float(np.max(np.linalg.norm(spec.points(om) - c, axis=1)))
    bound = R + 2 * epsilon + 2 * spec.h
    return GeometryReport(R, far, bound, far <= bound)
