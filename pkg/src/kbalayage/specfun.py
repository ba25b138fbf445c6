"""Bessel functions of the first and second kind for the orders 0, 1/2, 1, 3/2.

Integer orders use the ascending power series for ``t <= 12`` and the Hankel
asymptotic expansion above it. Half-integer orders use the elementary closed
forms, with a short series for ``J_{3/2}`` at small argument to avoid the
cancellation in ``sin t / t - cos t``.

All functions accept scalars or arrays and return the same shape.
"""

import math

import numpy as np

SUPPORTED_ORDERS = (0.0, 0.5, 1.0, 1.5)

#: switch from power series to asymptotic expansion for integer orders
SERIES_SWITCH = 12.0

_EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 40


class UnsupportedOrderError(ValueError):
    pass


class BesselDomainError(ValueError):
    pass


def _check_order(nu, allow_internal=False):
    nu = float(nu)
    allowed = SUPPORTED_ORDERS + ((-0.5,) if allow_internal else ())
    for a in allowed:
        if abs(nu - a) < 1e-12:
            return a
    raise UnsupportedOrderError(
        f"Bessel order {nu} is not supported; available orders are {SUPPORTED_ORDERS}"
    )


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


# -- integer orders ---------------------------------------------------------


def _j_series(n, t):
    x2 = -0.25 * t * t
    term = np.power(0.5 * t, n) / math.factorial(n)
    total = term.copy()
    for m in range(1, _SERIES_TERMS):
        term = term * x2 / (m * (m + n))
        total = total + term
    return total


def _y_series(n, t):
    # A&S 9.1.11
    half = 0.5 * t
    x2 = -0.25 * t * t
    psi_m = -_EULER_GAMMA
    psi_mn = -_EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))
    term = np.power(half, n) / math.factorial(n)
    acc = (psi_m + psi_mn) * term
    for m in range(1, _SERIES_TERMS):
        term = term * x2 / (m * (m + n))
        psi_m += 1.0 / m
        psi_mn += 1.0 / (m + n)
        acc = acc + (psi_m + psi_mn) * term
    out = (2.0 / math.pi) * np.log(half) * _j_series(n, t) - acc / math.pi
    if n == 1:
        out = out - 2.0 / (math.pi * t)
    return out


def _hankel_pq(nu, t):
    mu = 4.0 * nu * nu
    p = np.ones_like(t)
    q = np.zeros_like(t)
    coef = 1.0
    prev = np.full_like(t, np.inf)
    active = np.ones(t.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        coef *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        term = coef / t**k
        mag = np.abs(term)
        # stop each lane at its smallest term (optimal truncation)
        active &= mag < prev
        prev = np.where(active, mag, prev)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = p + np.where(active, sign * term, 0.0)
        else:
            q = q + np.where(active, sign * term, 0.0)
        if not active.any():
            break
    return p, q


def _jy_asymptotic(nu, t):
    p, q = _hankel_pq(nu, t)
    chi = t - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * t))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _j_int(n, t):
    out = np.empty_like(t)
    small = t <= SERIES_SWITCH
    if small.any():
        out[small] = _j_series(n, t[small])
    if (~small).any():
        out[~small] = _jy_asymptotic(float(n), t[~small])[0]
    return out


def _y_int(n, t):
    out = np.empty_like(t)
    small = t <= SERIES_SWITCH
    if small.any():
        out[small] = _y_series(n, t[small])
    if (~small).any():
        out[~small] = _jy_asymptotic(float(n), t[~small])[1]
    return out


# -- half-integer orders ----------------------------------------------------


def _sph_j1_small(t):
    # sin t / t^2 - cos t / t
    x2 = t * t
    term = t / 3.0
    total = term.copy()
    for m in range(1, 12):
        term = -term * x2 / ((2 * m) * (2 * m + 3))
        total = total + term
    return total


def _j_half(nu, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.sqrt(2.0 / (math.pi * t))
        if nu == 0.5:
            out = amp * np.sin(t)
        elif nu == -0.5:
            out = amp * np.cos(t)
        else:
            sj1 = np.where(t < 1.0, _sph_j1_small(t), np.sin(t) / t**2 - np.cos(t) / t)
            out = np.sqrt(2.0 * t / math.pi) * sj1
    if nu > 0:
        out = np.where(t == 0.0, 0.0, out)
    return out


def _y_half(nu, t):
    amp = np.sqrt(2.0 / (math.pi * t))
    if nu == 0.5:
        return -amp * np.cos(t)
    if nu == -0.5:
        return amp * np.sin(t)
    return -amp * (np.cos(t) / t + np.sin(t))


# -- public API -------------------------------------------------------------


def _bessel_j(nu, t):
    if nu in (0.0, 1.0):
        return _j_int(int(nu), t)
    return _j_half(nu, t)


def _bessel_y(nu, t):
    if nu in (0.0, 1.0):
        return _y_int(int(nu), t)
    return _y_half(nu, t)


def bessel_j(nu, t):
    """Bessel function of the first kind ``J_nu(t)`` for ``t >= 0``."""
    nu = _check_order(nu)
    arr, scalar = _as_array(t)
    if np.any(arr < 0):
        raise BesselDomainError("bessel_j requires t >= 0")
    return _ret(_bessel_j(nu, arr), scalar)


def bessel_y(nu, t):
    """Bessel function of the second kind ``Y_nu(t)`` for ``t > 0``."""
    nu = _check_order(nu)
    arr, scalar = _as_array(t)
    if np.any(arr <= 0):
        raise BesselDomainError("bessel_y requires t > 0 (Y is singular at 0)")
    return _ret(_bessel_y(nu, arr), scalar)


def _lower(nu, t):
    """Return (J_{nu-1}, Y_{nu-1})."""
    lo = nu - 1.0
    if lo == -1.0:
        # J_{-1} = -J_1, Y_{-1} = -Y_1
        return -_bessel_j(1.0, t), -_bessel_y(1.0, t)
    return _bessel_j(lo, t), _bessel_y(lo, t)


def bessel_derivatives(nu, t):
    """Derivatives ``(J_nu'(t), Y_nu'(t))`` from the lowering recurrence.

    Uses ``d/dt (t^nu C_nu) = t^nu C_{nu-1}``, i.e.
    ``C_nu' = C_{nu-1} - (nu / t) C_nu`` for ``C = J, Y``.
    """
    nu = _check_order(nu)
    arr, scalar = _as_array(t)
    if np.any(arr <= 0):
        raise BesselDomainError("bessel_derivatives requires t > 0")
    jl, yl = _lower(nu, arr)
    dj = jl - nu / arr * _bessel_j(nu, arr)
    dy = yl - nu / arr * _bessel_y(nu, arr)
    return _ret(dj, scalar), _ret(dy, scalar)


def _bisect(f, a, b, tol=1e-15, maxiter=200):
    fa = f(a)
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) < tol * max(1.0, abs(m)):
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def bessel_zeros(nu, count):
    """Yield the first ``count`` positive zeros of ``J_nu``.

    Zeros are bracketed by scanning with step 0.1 (consecutive zeros are
    separated by more than 2.5 for the supported orders) and refined by
    bisection to machine precision.
    """
    nu = _check_order(nu)
    f = lambda x: float(_bessel_j(nu, np.asarray(x, dtype=float)))
    found = 0
    a = 0.05
    fa = f(a)
    step = 0.1
    while found < count:
        b = a + step
        fb = f(b)
        if fa == 0.0:
            yield a
            found += 1
        elif (fa > 0) != (fb > 0):
            yield _bisect(f, a, b)
            found += 1
        a, fa = b, fb


def first_positive_zero(nu):
    """First positive zero ``j_{nu,1}`` of ``J_nu``."""
    return next(bessel_zeros(nu, 1))
