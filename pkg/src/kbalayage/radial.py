"""Closed-form radial quantities for the operator Delta + k^2.

These functions form the analytic layer of the package: the fundamental
solution, the mean-value kernels ``c_k`` and ``d_k``, the critical radius
``R_k``, potentials of uniform spheres and balls, and the explicit answers
for sweeping point masses, uniform balls and uniform spheres.

Every routine accepts ``k = 0`` where it makes sense and then falls back to
the classical Newtonian (N = 3) or logarithmic (N = 2) formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .specfun import bessel_j, bessel_y, first_positive_zero

__all__ = [
    "Medium",
    "RadialSweep",
    "psi",
    "c_k",
    "d_k",
    "r_k",
    "ball_volume",
    "sphere_area",
    "potential_sphere",
    "potential_ball",
    "ball_self_integral",
    "point_mass_radius",
    "ball_sweep_radius",
    "f_T",
    "f_T_prime",
    "w_xi",
    "w_xi_prime",
    "critical_radii",
    "sphere_sweep",
    "null_ball_radius",
    "approximate_t_T",
]

_ROOT_XTOL = 1e-14


@dataclass(frozen=True)
class Medium:
    """Ambient dimension ``N`` and wavenumber ``k``.

    Parameters
    ----------
    N : int
        Spatial dimension, 2 or 3.
    k : float
        Wavenumber, ``k >= 0``. ``k = 0`` is the Laplace case.
    """

    N: int
    k: float

    def __post_init__(self):
        if self.N not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.N}")
        k = float(self.k)
        if not math.isfinite(k) or k < 0:
            raise ValueError(f"wavenumber must be finite and >= 0, got {self.k}")
        object.__setattr__(self, "k", k)

    @property
    def alpha(self) -> float:
        return (self.N - 2) / 2.0

    @property
    def half_N(self) -> float:
        return self.N / 2.0

    @property
    def classical(self) -> bool:
        return self.k == 0.0

    def with_k(self, k: float) -> "Medium":
        return Medium(self.N, k)


@dataclass(frozen=True)
class RadialSweep:
    """Closed-form description of a radial swept set.

    ``kind`` is ``"ball"``, ``"annulus"`` or ``"infeasible"``. For a ball
    ``inner`` is 0. ``mass_coefficient`` is the multiplier of the source
    (for sphere sweeps, the surface density of the shell that produces this
    set). ``case`` records which branch of the sphere analysis applied.
    """

    kind: str
    inner: float = 0.0
    outer: float = 0.0
    mass_coefficient: float = float("nan")
    case: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return self.kind != "infeasible"


def _arr(r):
    a = np.asarray(r, dtype=float)
    return a, a.ndim == 0


def _out(x, scalar):
    return float(x) if scalar else x


def ball_volume(N: int, r):
    """Lebesgue measure of a ball of radius ``r`` in dimension ``N``."""
    r = np.asarray(r, dtype=float)
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1) * r**N


def sphere_area(N: int, r):
    """Surface measure of a sphere of radius ``r`` in dimension ``N``."""
    r = np.asarray(r, dtype=float)
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2) * r ** (N - 1)


def _origin_limit(medium: Medium) -> float:
    # limit of r^{-alpha} J_alpha(k r) as r -> 0
    a = medium.alpha
    return medium.k**a / (2**a * math.gamma(a + 1))


def _rJ(medium: Medium, r: np.ndarray) -> np.ndarray:
    """``r^{-alpha} J_alpha(k r)`` with its limit at r = 0."""
    a, k = medium.alpha, medium.k
    out = np.full(r.shape, _origin_limit(medium))
    pos = r > 0
    if pos.any():
        rp = r[pos]
        out[pos] = rp ** (-a) * bessel_j(a, k * rp)
    return out


def _rY(medium: Medium, r: np.ndarray) -> np.ndarray:
    a, k = medium.alpha, medium.k
    return r ** (-a) * bessel_y(a, k * r)


def psi(medium: Medium, r):
    """Fundamental solution of ``-(Delta + k^2)`` as a function of ``|x|``.

    Parameters
    ----------
    medium : Medium
    r : float or ndarray
        Distances, strictly positive.

    Returns
    -------
    float or ndarray
        For ``k > 0`` this is ``b r^{-alpha} Y_alpha(k r)`` with
        ``b = -k^alpha / (2^{alpha+2} pi^alpha)``; it reduces to
        ``cos(k r) / (4 pi r)`` when N = 3 and ``-Y_0(k r) / 4`` when N = 2.
    """
    r, scalar = _arr(r)
    if np.any(r <= 0):
        raise ValueError("psi requires r > 0")
    N, k = medium.N, medium.k
    if k == 0:
        if N == 3:
            val = 1.0 / (4 * math.pi * r)
        else:
            val = -np.log(r) / (2 * math.pi)
    elif N == 3:
        val = np.cos(k * r) / (4 * math.pi * r)
    else:
        val = -0.25 * bessel_y(0, k * r)
    return _out(val, scalar)


def c_k(medium: Medium, r):
    """Ball mean-value kernel ``c_k(r) = (2 pi r / k)^{N/2} J_{N/2}(k r)``.

    Equal to the volume of ``B_r`` when ``k = 0``.
    """
    r, scalar = _arr(r)
    if np.any(r < 0):
        raise ValueError("c_k requires r >= 0")
    N, k = medium.N, medium.k
    if k == 0:
        return _out(ball_volume(N, r), scalar)
    if N == 3:
        kr = k * r
        # 4 pi (sin kr - kr cos kr) / k^3, with a series for small kr
        small = kr < 0.3
        big = np.where(small, 1.0, kr)
        x2 = kr * kr
        ser = kr**3 * (1 / 3 - x2 * (1 / 30 - x2 * (1 / 840 - x2 * (1 / 45360 - x2 * (1 / 3991680 - x2 / 518918400)))))
        val = np.where(
            small,
            4 * math.pi * ser / k**3,
            4 * math.pi * (np.sin(big) - big * np.cos(big)) / k**3,
        )
        return _out(val, scalar)
    val = (2 * math.pi * r / k) * bessel_j(1, k * r)
    return _out(val, scalar)


def d_k(medium: Medium, r):
    """Sphere mean-value kernel ``d_k(r) = (2 pi r)^{N/2} J_alpha(k r) / k^alpha``.

    Equal to the area of ``dB_r`` when ``k = 0``; ``c_k' = d_k``.
    """
    r, scalar = _arr(r)
    if np.any(r < 0):
        raise ValueError("d_k requires r >= 0")
    N, k = medium.N, medium.k
    if k == 0:
        return _out(sphere_area(N, r), scalar)
    if N == 3:
        val = 4 * math.pi * r * np.sin(k * r) / k
    else:
        val = 2 * math.pi * r * bessel_j(0, k * r)
    return _out(val, scalar)


def r_k(medium: Medium) -> float:
    """Critical radius ``R_k = j_{alpha,1} / k``; ``inf`` when ``k = 0``."""
    if medium.k == 0:
        return math.inf
    return first_positive_zero(medium.alpha) / medium.k


def null_ball_radius(medium: Medium) -> float:
    """Radius ``j_{N/2,1} / k``, the first positive zero of ``c_k``.

    A uniform ball of this radius has vanishing potential outside itself,
    since its exterior potential is ``c_k(t) Psi_k``.
    """
    if medium.k == 0:
        return math.inf
    return first_positive_zero(medium.half_N) / medium.k


def potential_sphere(medium: Medium, t: float, r):
    """Potential of the surface measure on the sphere of radius ``t``.

    Parameters
    ----------
    medium : Medium
    t : float
        Sphere radius, ``t > 0``.
    r : float or ndarray
        Distances from the centre, ``r >= 0``.
    """
    if t <= 0:
        raise ValueError("sphere radius must be positive")
    r, scalar = _arr(r)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    N, k, a = medium.N, medium.k, medium.alpha
    if k == 0:
        m = np.maximum(r, t)
        val = t * t / m if N == 3 else -t * np.log(m)
        return _out(val, scalar)
    inner = r <= t
    val = np.empty(r.shape)
    if inner.any():
        b = -math.pi * t ** (N / 2) * bessel_y(a, k * t) / 2
        val[inner] = b * _rJ(medium, r[inner])
    if (~inner).any():
        c = -math.pi * t ** (N / 2) * bessel_j(a, k * t) / 2
        val[~inner] = c * _rY(medium, r[~inner])
    return _out(val, scalar)


def potential_ball(medium: Medium, t: float, r):
    """Potential of Lebesgue measure restricted to the ball of radius ``t``."""
    if t <= 0:
        raise ValueError("ball radius must be positive")
    r, scalar = _arr(r)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    N, k, a = medium.N, medium.k, medium.alpha
    inner = r <= t
    val = np.empty(r.shape)
    if k == 0:
        ri, ro = r[inner], r[~inner]
        if N == 3:
            val[inner] = (3 * t * t - ri * ri) / 6
            val[~inner] = t**3 / (3 * ro)
        else:
            val[inner] = -0.5 * t * t * math.log(t) + (t * t - ri * ri) / 4
            val[~inner] = -0.5 * t * t * np.log(ro)
        return _out(val, scalar)
    if inner.any():
        ak = -math.pi * t ** (N / 2) * bessel_y(N / 2, k * t) / (2 * k)
        val[inner] = ak * _rJ(medium, r[inner]) - 1.0 / k**2
    if (~inner).any():
        c = -math.pi * t ** (N / 2) * bessel_j(N / 2, k * t) / (2 * k)
        val[~inner] = c * _rY(medium, r[~inner])
    return _out(val, scalar)


def ball_self_integral(medium: Medium, a: float) -> float:
    """Integral of ``Psi_k`` over the ball of radius ``a`` centred at 0."""
    return float(potential_ball(medium, a, 0.0))


def _increasing_root(f, lo, hi, target):
    return brentq(lambda x: f(x) - target, lo, hi, xtol=_ROOT_XTOL, maxiter=500)


def point_mass_radius(medium: Medium, c: float) -> RadialSweep:
    """Swept ball for the point mass ``c delta``.

    The swept set is ``B_r`` with ``c_k(r) = c``, which exists if and only if
    ``c <= c_k(R_k)``.
    """
    if not c > 0:
        raise ValueError("mass must be positive")
    if medium.k == 0:
        r = (c / float(ball_volume(medium.N, 1.0))) ** (1.0 / medium.N)
        return RadialSweep("ball", 0.0, r, c)
    R = r_k(medium)
    cmax = float(c_k(medium, R))
    if c > cmax:
        return RadialSweep("infeasible", mass_coefficient=c)
    if c == cmax:
        return RadialSweep("ball", 0.0, R, c)
    r = _increasing_root(lambda x: float(c_k(medium, x)), 0.0, R, c)
    return RadialSweep("ball", 0.0, r, c)


def ball_sweep_radius(medium: Medium, c: float, R: float) -> RadialSweep:
    """Swept ball for the uniform density ``c`` on ``B_R`` (``c > 1``).

    The answer is ``B_r`` with ``c_k(r) = c c_k(R)``; it exists if and only
    if ``R < R_k`` and ``c <= c_k(R_k) / c_k(R)``.
    """
    if not c > 1:
        raise ValueError("density must exceed 1 (otherwise nothing is swept)")
    if not R > 0:
        raise ValueError("source radius must be positive")
    if medium.k == 0:
        return RadialSweep("ball", 0.0, R * c ** (1.0 / medium.N), c)
    Rk = r_k(medium)
    if R >= Rk:
        return RadialSweep("infeasible", mass_coefficient=c)
    target = c * float(c_k(medium, R))
    cmax = float(c_k(medium, Rk))
    if target > cmax * (1 + 1e-15):
        return RadialSweep("infeasible", mass_coefficient=c)
    if target >= cmax:
        return RadialSweep("ball", 0.0, Rk, c)
    r = _increasing_root(lambda x: float(c_k(medium, x)), R, Rk, target)
    return RadialSweep("ball", 0.0, r, c)


# -- sphere sweeps ----------------------------------------------------------


def _need_k(medium):
    if medium.k <= 0:
        raise ValueError("this quantity is only defined for k > 0")


def f_T(medium: Medium, T: float, xi):
    """``f_T(xi) = xi^{N/2} [J_{N/2}(k xi) Y_alpha(k T) - Y_{N/2}(k xi) J_alpha(k T)]``.

    The value at ``xi = 0`` is the limit
    ``J_alpha(k T) 2^{N/2} Gamma(N/2) / (pi k^{N/2})``.
    """
    _need_k(medium)
    xi, scalar = _arr(xi)
    if np.any(xi < 0):
        raise ValueError("xi must be >= 0")
    N, k, a = medium.N, medium.k, medium.alpha
    n2 = N / 2
    JaT = bessel_j(a, k * T)
    YaT = bessel_y(a, k * T)
    out = np.empty(xi.shape)
    zero = xi == 0
    if zero.any():
        out[zero] = JaT * 2**n2 * math.gamma(n2) / (math.pi * k**n2)
    if (~zero).any():
        x = xi[~zero]
        out[~zero] = x**n2 * (bessel_j(n2, k * x) * YaT - bessel_y(n2, k * x) * JaT)
    return _out(out, scalar)


def f_T_prime(medium: Medium, T: float, r):
    """Derivative ``k r^{N/2} [J_alpha(k r) Y_alpha(k T) - Y_alpha(k r) J_alpha(k T)]``."""
    _need_k(medium)
    r, scalar = _arr(r)
    if np.any(r <= 0):
        raise ValueError("r must be > 0")
    k, a = medium.k, medium.alpha
    val = k * r ** (medium.N / 2) * (
        bessel_j(a, k * r) * bessel_y(a, k * T) - bessel_y(a, k * r) * bessel_j(a, k * T)
    )
    return _out(val, scalar)


def w_xi(medium: Medium, xi: float, r):
    """``w_xi(r) = k^{-2} [1 - (pi k / 2) r^{-alpha} f_r(xi)]`` for ``r > 0``."""
    _need_k(medium)
    r, scalar = _arr(r)
    if np.any(r <= 0):
        raise ValueError("r must be > 0")
    N, k, a = medium.N, medium.k, medium.alpha
    n2 = N / 2
    Jx = bessel_j(n2, k * xi)
    Yx = bessel_y(n2, k * xi)
    fr = xi**n2 * (Jx * bessel_y(a, k * r) - Yx * bessel_j(a, k * r))
    val = (1.0 - 0.5 * math.pi * k * r ** (-a) * fr) / k**2
    return _out(val, scalar)


def w_xi_prime(medium: Medium, xi: float, r):
    """Closed-form derivative of :func:`w_xi` in ``r``."""
    _need_k(medium)
    r, scalar = _arr(r)
    if np.any(r <= 0):
        raise ValueError("r must be > 0")
    N, k, a = medium.N, medium.k, medium.alpha
    n2 = N / 2
    val = (
        0.5
        * math.pi
        * xi**n2
        * r ** (-a)
        * (bessel_j(n2, k * xi) * bessel_y(n2, k * r) - bessel_y(n2, k * xi) * bessel_j(n2, k * r))
    )
    return _out(val, scalar)


def _cross(medium, T, r):
    a, k = medium.alpha, medium.k
    return bessel_j(a, k * r) * bessel_y(a, k * T) - bessel_y(a, k * r) * bessel_j(a, k * T)


def _sign_change_roots(g, grid):
    grid = np.asarray(grid, dtype=float)
    vals = g(grid)
    roots = []
    for i in range(len(grid) - 1):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0.0:
            roots.append(float(grid[i]))
        elif (v0 > 0) != (v1 > 0) and v1 != 0.0:
            roots.append(brentq(lambda x: float(g(np.array([x]))[0]), grid[i], grid[i + 1], xtol=_ROOT_XTOL))
    return roots


def critical_radii(medium: Medium, T: float) -> tuple[float, float]:
    """Neighbours ``(J_1, J_2)`` of ``T`` in the list ``0, zeros of f_T'``."""
    _need_k(medium)
    if T <= 0:
        raise ValueError("T must be positive")
    k = medium.k
    g = lambda r: _cross(medium, T, r)
    step = min(math.pi / (16 * k), T / 16)
    gap = 1e-7 * max(T, 1.0)
    below = _sign_change_roots(g, np.arange(step, T - gap, step).tolist() + [T - gap])
    below = [x for x in below if x < T - gap]
    J1 = max(below) if below else 0.0
    lo = T + gap
    while True:
        grid = lo + step * np.arange(0, 65)
        above = _sign_change_roots(g, grid)
        if above:
            return J1, min(above)
        lo = float(grid[-1])


def sphere_sweep(medium: Medium, T: float, t: float) -> RadialSweep:
    """Swept set of a uniform shell on ``dB_T`` indexed by the level ``t``.

    Parameters
    ----------
    medium : Medium
        Must have ``k > 0``.
    T : float
        Shell radius with ``J_alpha(k T) != 0``.
    t : float
        Level of ``f_T``; at most ``f_T(T) = 2 T^alpha / (pi k)``.

    Returns
    -------
    RadialSweep
        A ball (case d) or an annulus (cases a to c). ``mass_coefficient`` is
        the shell surface density whose sweep gives this set. For cases a
        and b the returned annulus is the sweep only when ``t >= t_T``,
        which is not checked here (see :func:`approximate_t_T`).
    """
    _need_k(medium)
    k, a = medium.k, medium.alpha
    if T <= 0:
        raise ValueError("T must be positive")
    if abs(bessel_j(a, k * T)) < 1e-12:
        raise ValueError("J_alpha(kT) = 0: the shell radius is excluded")
    top = 2 * T**a / (math.pi * k)
    if t > top * (1 + 1e-14):
        raise ValueError(f"level t={t} exceeds the maximum f_T(T)={top}")
    dT = float(d_k(medium, T))
    if t >= top:
        return RadialSweep("annulus", T, T, 0.0, "degenerate")
    Rk = r_k(medium)
    J1, J2 = critical_radii(medium, T)
    f = lambda x: float(f_T(medium, T, x))
    f0 = f(0.0)

    if T < Rk:
        fR = f(Rk)
        if f0 >= t >= fR:
            xi2 = Rk if t == fR else brentq(lambda x: f(x) - t, T, min(Rk, J2), xtol=_ROOT_XTOL)
            return RadialSweep("ball", 0.0, xi2, float(c_k(medium, xi2)) / dT, "d")
        if f0 >= fR and t < fR:
            return RadialSweep("infeasible", case="c")
        case = "b" if f0 < fR else "c"
    else:
        case = "a"

    lo1 = f(J1)
    lo2 = f(J2)
    if t <= max(lo1, lo2):
        return RadialSweep("infeasible", case=case)
    xi1 = brentq(lambda x: f(x) - t, J1, T, xtol=_ROOT_XTOL)
    xi2 = brentq(lambda x: f(x) - t, T, J2, xtol=_ROOT_XTOL)
    mass = (float(c_k(medium, xi2)) - float(c_k(medium, xi1))) / dT
    return RadialSweep("annulus", xi1, xi2, mass, case)


def approximate_t_T(medium: Medium, T: float, h: float, tol: float | None = None) -> tuple[float, float]:
    """Grid estimate of the spectral threshold level ``t_T``.

    Bisects on ``t`` so that the annulus ``{t < f_T(|x|)}`` inside
    ``A(J_1, J_2)`` has discrete first Dirichlet eigenvalue ``k^2``. The
    estimate is limited by the grid spacing ``h``.

    Returns
    -------
    (t_lo, t_hi)
        Bracket with ``lambda_1 < k^2`` at ``t_lo`` and ``>= k^2`` at ``t_hi``.
    """
    from .balayage import lambda1_estimate
    from .grid import GridSpec, Mask

    _need_k(medium)
    k = medium.k
    J1, J2 = critical_radii(medium, T)
    f = lambda x: f_T(medium, T, x)
    top = 2 * T**medium.alpha / (math.pi * k)
    lo = max(float(f(J1)), float(f(J2)))
    hi = top
    if tol is None:
        tol = 1e-3 * (hi - lo)
    spec = GridSpec.centered(np.zeros(medium.N), J2 + 2 * h, h)
    rr = spec.radius()

    def lam(t):
        inside = (rr > J1) & (rr < J2)
        vals = np.full(rr.shape, -np.inf)
        vals[inside] = f(rr[inside])
        mask = Mask(spec, (vals > t) & inside)
        if not mask.flags.any():
            return math.inf
        return lambda1_estimate(mask)

    for _ in range(60):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if lam(mid) >= k * k:
            hi = mid
        else:
            lo = mid
    return lo, hi
