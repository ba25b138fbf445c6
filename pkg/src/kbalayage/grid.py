"""Uniform cell-centred grids, grid functions, measures and potentials."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from .radial import (
    Medium,
    ball_self_integral,
    ball_volume,
    c_k,
    potential_ball,
    potential_sphere,
    psi,
    r_k,
    sphere_area,
)

#: value stored in cells where an atom makes the potential infinite
SINGULAR_SENTINEL = 1e30

DEFAULT_MAX_CELLS = 60_000_000


class GridTooLargeError(ValueError):
    pass


def max_cells() -> int:
    env = os.environ.get("HB_MAX_CELLS")
    if env:
        try:
            return int(float(env))
        except ValueError:
            raise ValueError(f"HB_MAX_CELLS must be an integer, got {env!r}") from None
    return DEFAULT_MAX_CELLS


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centred grid.

    Parameters
    ----------
    origin : sequence of float
        Lower corner of the box. Cell ``i`` along an axis has centre
        ``origin + (i + 0.5) h``.
    h : float
        Cell width.
    shape : tuple of int
        Number of cells per axis, each at least 3.
    """

    origin: tuple
    h: float
    shape: tuple

    def __post_init__(self):
        origin = tuple(float(x) for x in np.ravel(self.origin))
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", float(self.h))
        if len(origin) != len(shape) or len(shape) not in (2, 3):
            raise ValueError("origin and shape must both have length 2 or 3")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("grid spacing must be positive")
        if min(shape) < 3:
            raise ValueError("every axis needs at least 3 cells")
        cap = max_cells()
        if self.size > cap:
            raise GridTooLargeError(
                f"grid of shape {shape} has {self.size} cells, above the cap of {cap} (HB_MAX_CELLS)"
            )

    @classmethod
    def centered(cls, center, half_width: float, h: float) -> "GridSpec":
        """Grid with an odd number of cells so that ``center`` is a cell centre."""
        center = np.asarray(center, dtype=float)
        n = 2 * int(math.ceil(half_width / h - 1e-9)) + 1
        n = max(n, 3)
        origin = center - 0.5 * n * h
        return cls(tuple(origin), h, (n,) * center.size)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h**self.ndim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.h * np.asarray(self.shape)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + (np.arange(self.shape[i]) + 0.5) * self.h

    def mesh(self):
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        for i in range(self.ndim):
            shp = [1] * self.ndim
            shp[i] = self.shape[i]
            out.append(self.axis(i).reshape(shp))
        return out

    def radius(self, center=None) -> np.ndarray:
        """Distance of every cell centre from ``center`` (default origin of space)."""
        c = np.zeros(self.ndim) if center is None else np.asarray(center, dtype=float)
        r2 = 0.0
        for x, ci in zip(self.mesh(), c):
            r2 = r2 + (x - ci) ** 2
        return np.sqrt(np.broadcast_to(r2, self.shape))

    def points(self, flags=None) -> np.ndarray:
        """Cell centres as an ``(M, N)`` array, optionally only where ``flags``."""
        if flags is None:
            idx = np.indices(self.shape).reshape(self.ndim, -1).T
        else:
            idx = np.argwhere(np.asarray(flags))
        return self.lower + (idx + 0.5) * self.h

    def index_of(self, point) -> tuple:
        """Index of the cell containing ``point``."""
        p = np.asarray(point, dtype=float)
        idx = np.floor((p - self.lower) / self.h).astype(int)
        return tuple(int(i) for i in idx)

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower + margin) and np.all(p <= self.upper - margin))

    def aligned_offset(self, other: "GridSpec") -> tuple:
        """Integer index offset of ``other`` inside this grid (same spacing)."""
        if other.ndim != self.ndim or abs(other.h - self.h) > 1e-12 * self.h:
            raise ValueError("grids have different dimension or spacing")
        off = (other.lower - self.lower) / self.h
        rounded = np.round(off)
        if np.max(np.abs(off - rounded)) > 1e-6:
            raise ValueError("grids are not aligned")
        return tuple(int(v) for v in rounded)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.origin, self.h / factor, tuple(n * factor for n in self.shape))

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "h": self.h, "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(tuple(d["origin"]), d["h"], tuple(d["shape"]))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=a.dtype, copy=True)
    a.flags.writeable = False
    return a


class ScalarField:
    """Real values on the cells of a grid, with an optional singular-cell mask."""

    def __init__(self, spec: GridSpec, values, singular=None):
        values = np.asarray(values, dtype=float)
        if values.shape != spec.shape:
            values = values.reshape(spec.shape)
        self.spec = spec
        self.values = _frozen(values)
        if singular is None:
            singular = np.zeros(spec.shape, dtype=bool)
        self.singular = _frozen(np.asarray(singular, dtype=bool).reshape(spec.shape))
        bad = ~np.isfinite(self.values) & ~self.singular
        if bad.any():
            raise ValueError("field has non-finite values outside singular cells")

    def __repr__(self):
        return f"ScalarField(shape={self.spec.shape}, h={self.spec.h})"

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            if other.spec != self.spec:
                raise ValueError("fields live on different grids")
            return ScalarField(self.spec, op(self.values, other.values), self.singular | other.singular)
        return ScalarField(self.spec, op(self.values, other), self.singular)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def regular_max(self) -> float:
        v = self.values[~self.singular]
        return float(v.max()) if v.size else 0.0

    def total(self) -> float:
        """Integral of the field, treating values as a density."""
        return float(self.values[~self.singular].sum() * self.spec.cell_volume)


class Mask:
    """Boolean set of cells on a grid."""

    def __init__(self, spec: GridSpec, flags):
        flags = np.asarray(flags, dtype=bool)
        if flags.shape != spec.shape:
            flags = flags.reshape(spec.shape)
        self.spec = spec
        self.flags = _frozen(flags)

    def __repr__(self):
        return f"Mask(cells={self.count}, shape={self.spec.shape})"

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    @property
    def volume(self) -> float:
        return self.count * self.spec.cell_volume

    def empty(self) -> bool:
        return not self.flags.any()

    def __or__(self, other: "Mask") -> "Mask":
        return Mask(self.spec, self.flags | other.flags)

    def __and__(self, other: "Mask") -> "Mask":
        return Mask(self.spec, self.flags & other.flags)

    def __invert__(self) -> "Mask":
        return Mask(self.spec, ~self.flags)

    def dilate(self, cells: int = 1) -> "Mask":
        if cells <= 0:
            return self
        st = ndimage.generate_binary_structure(self.spec.ndim, 1)
        return Mask(self.spec, ndimage.binary_dilation(self.flags, st, iterations=cells))

    def erode(self, cells: int = 1) -> "Mask":
        if cells <= 0:
            return self
        st = ndimage.generate_binary_structure(self.spec.ndim, 1)
        return Mask(self.spec, ndimage.binary_erosion(self.flags, st, iterations=cells, border_value=0))

    def components(self):
        """Label array and component count (face connectivity)."""
        st = ndimage.generate_binary_structure(self.spec.ndim, 1)
        return ndimage.label(self.flags, st)

    def symmetric_difference(self, other: "Mask") -> "Mask":
        return Mask(self.spec, self.flags ^ other.flags)

    def within_layer(self, other: "Mask", cells: int) -> bool:
        """True if the two masks differ only inside a ``cells``-wide layer of each other."""
        return bool(
            np.all(self.flags <= other.dilate(cells).flags) and np.all(other.flags <= self.dilate(cells).flags)
        )

    def touches_border(self, cells: int = 2) -> bool:
        f = self.flags
        for ax in range(f.ndim):
            lo = np.take(f, range(cells), axis=ax)
            hi = np.take(f, range(f.shape[ax] - cells, f.shape[ax]), axis=ax)
            if lo.any() or hi.any():
                return True
        return False

    @classmethod
    def ball(cls, spec: GridSpec, center, radius: float) -> "Mask":
        return cls(spec, spec.radius(center) < radius)

    @classmethod
    def annulus(cls, spec: GridSpec, center, inner: float, outer: float) -> "Mask":
        r = spec.radius(center)
        return cls(spec, (r > inner) & (r < outer))


@dataclass
class Measure:
    """Compactly supported positive measure.

    Parameters
    ----------
    atoms : list of (point, mass)
    balls : list of (center, radius, density)
        Uniform densities on balls; potentials use the closed form.
    shells : list of (center, radius, surface_density)
        Uniform surface densities on spheres.
    density : ScalarField, optional
        Cellwise density (mass per unit volume).
    """

    atoms: list = field(default_factory=list)
    balls: list = field(default_factory=list)
    shells: list = field(default_factory=list)
    density: Optional[ScalarField] = None

    def __post_init__(self):
        self.atoms = [(np.asarray(p, dtype=float), float(m)) for p, m in self.atoms]
        self.balls = [(np.asarray(c, dtype=float), float(r), float(d)) for c, r, d in self.balls]
        self.shells = [(np.asarray(c, dtype=float), float(r), float(s)) for c, r, s in self.shells]
        for _, m in self.atoms:
            if not m >= 0:
                raise ValueError("atom masses must be >= 0")
        for _, r, d in self.balls + self.shells:
            if not (r > 0 and d >= 0):
                raise ValueError("ball and shell radii must be > 0 and densities >= 0")
        if self.density is not None and np.any(self.density.values < 0):
            raise ValueError("density must be >= 0")
        dims = {p.size for p, _ in self.atoms} | {c.size for c, _, _ in self.balls + self.shells}
        if self.density is not None:
            dims.add(self.density.spec.ndim)
        if len(dims) > 1:
            raise ValueError("measure components have mixed dimensions")

    @property
    def ndim(self) -> Optional[int]:
        if self.atoms:
            return self.atoms[0][0].size
        if self.balls:
            return self.balls[0][0].size
        if self.shells:
            return self.shells[0][0].size
        if self.density is not None:
            return self.density.spec.ndim
        return None

    @classmethod
    def atom(cls, point, mass: float) -> "Measure":
        return cls(atoms=[(point, mass)])

    @classmethod
    def uniform_ball(cls, center, radius: float, density: float = 1.0) -> "Measure":
        return cls(balls=[(center, radius, density)])

    @classmethod
    def shell(cls, center, radius: float, surface_density: float) -> "Measure":
        return cls(shells=[(center, radius, surface_density)])

    @classmethod
    def from_density(cls, values: ScalarField) -> "Measure":
        return cls(density=values)

    def is_empty(self) -> bool:
        return not (self.atoms or self.balls or self.shells or self.density is not None)

    def total_mass(self) -> float:
        total = sum(m for _, m in self.atoms)
        for c, r, d in self.balls:
            total += d * float(ball_volume(c.size, r))
        for c, r, s in self.shells:
            total += s * float(sphere_area(c.size, r))
        if self.density is not None:
            total += self.density.total()
        return float(total)

    def scaled(self, t: float) -> "Measure":
        return Measure(
            atoms=[(p, t * m) for p, m in self.atoms],
            balls=[(c, r, t * d) for c, r, d in self.balls],
            shells=[(c, r, t * s) for c, r, s in self.shells],
            density=None if self.density is None else self.density * t,
        )

    def __add__(self, other: "Measure") -> "Measure":
        if self.density is not None and other.density is not None:
            dens = self.density + other.density
        else:
            dens = self.density if self.density is not None else other.density
        return Measure(self.atoms + other.atoms, self.balls + other.balls, self.shells + other.shells, dens)

    def support_box(self):
        """Lower and upper corners of a box containing the support, or None."""
        lo, hi = [], []
        for p, m in self.atoms:
            if m > 0:
                lo.append(p)
                hi.append(p)
        for c, r, d in self.balls + self.shells:
            if d > 0:
                lo.append(c - r)
                hi.append(c + r)
        if self.density is not None:
            nz = np.argwhere(self.density.values > 0)
            if nz.size:
                sp = self.density.spec
                lo.append(sp.lower + nz.min(axis=0) * sp.h)
                hi.append(sp.lower + (nz.max(axis=0) + 1) * sp.h)
        if not lo:
            return None
        return np.min(lo, axis=0), np.max(hi, axis=0)

    def support_ball(self):
        """Centre and radius of a ball containing the support."""
        box = self.support_box()
        if box is None:
            return None, 0.0
        center = 0.5 * (box[0] + box[1])
        rad = 0.0
        for p, m in self.atoms:
            if m > 0:
                rad = max(rad, float(np.linalg.norm(p - center)))
        for c, r, d in self.balls + self.shells:
            if d > 0:
                rad = max(rad, float(np.linalg.norm(c - center)) + r)
        if self.density is not None:
            sp = self.density.spec
            nz = self.density.values > 0
            if nz.any():
                pts = sp.points(nz)
                rad = max(rad, float(np.max(np.linalg.norm(pts - center, axis=1))) + 0.5 * sp.h * math.sqrt(sp.ndim))
        return center, rad


def auto_grid(measure: Measure, medium: Medium, h: float, margin_cells: int = 10) -> GridSpec:
    """Box centred on the support, large enough to contain the swept set.

    For constant density 1 and a measure supported in ``B_eps(c)`` the swept
    set lies within ``B_{R_k + 2 eps}(c)``; the box adds ``margin_cells``
    cells to that radius. For ``k = 0`` the radius ``R_k`` is replaced by the
    radius of the ball whose volume equals the total mass.
    """
    center, eps = measure.support_ball()
    if center is None:
        raise ValueError("cannot size a box for an empty measure")
    if medium.k > 0:
        reach = r_k(medium)
    else:
        reach = (measure.total_mass() / float(ball_volume(medium.N, 1.0))) ** (1 / medium.N)
    return GridSpec.centered(center, reach + 2 * eps + margin_cells * h, h)


# -- rasterisation -----------------------------------------------------------


def _ball_coverage(spec: GridSpec, center, radius: float, supersample: Optional[int] = None) -> np.ndarray:
    """Fraction of each cell covered by the ball."""
    r = spec.radius(center)
    h = spec.h
    half_diag = 0.5 * h * math.sqrt(spec.ndim)
    cov = (r <= radius - half_diag).astype(float)
    edge = np.argwhere((r > radius - half_diag) & (r < radius + half_diag))
    if edge.size:
        s = supersample or (8 if spec.ndim == 2 else 6)
        sub = (np.arange(s) + 0.5) / s - 0.5
        offs = np.stack(np.meshgrid(*([sub] * spec.ndim), indexing="ij"), -1).reshape(-1, spec.ndim) * h
        centers = spec.lower + (edge + 0.5) * h
        c = np.asarray(center, dtype=float)
        chunk = max(1, 2_000_000 // offs.shape[0])
        for i in range(0, len(edge), chunk):
            pts = centers[i : i + chunk, None, :] + offs[None, :, :]
            inside = np.sum((pts - c) ** 2, axis=-1) < radius * radius
            frac = inside.mean(axis=1)
            cov[tuple(edge[i : i + chunk].T)] = frac
    return cov


def _deposit_atom(out: np.ndarray, spec: GridSpec, point, mass: float):
    """Cloud-in-cell deposition of a point mass as a density."""
    g = (np.asarray(point, dtype=float) - spec.lower) / spec.h - 0.5
    base = np.floor(g).astype(int)
    frac = g - base
    vol = spec.cell_volume
    for corner in np.ndindex(*([2] * spec.ndim)):
        idx = base + np.asarray(corner)
        w = np.prod(np.where(np.asarray(corner) == 1, frac, 1 - frac))
        if w == 0.0:
            continue
        if np.any(idx < 0) or np.any(idx >= np.asarray(spec.shape)):
            raise ValueError("atom lies outside the grid")
        out[tuple(idx)] += mass * w / vol


def _deposit_shell(out: np.ndarray, spec: GridSpec, center, radius: float, s: float):
    r = spec.radius(center)
    h = spec.h
    w = np.clip(1.0 - np.abs(r - radius) / h, 0.0, None) / h
    tot = w.sum() * spec.cell_volume
    if tot <= 0:
        raise ValueError("shell is too thin for the grid")
    out += w * (s * float(sphere_area(spec.ndim, radius)) / tot)


def embed(field: ScalarField, spec: GridSpec) -> np.ndarray:
    """Copy an aligned field into an array on ``spec`` (zero elsewhere)."""
    off = spec.aligned_offset(field.spec)
    out = np.zeros(spec.shape)
    src = [slice(None)] * spec.ndim
    dst = [slice(None)] * spec.ndim
    for i in range(spec.ndim):
        a = off[i]
        b = a + field.spec.shape[i]
        lo, hi = max(a, 0), min(b, spec.shape[i])
        if lo >= hi:
            if np.any(field.values > 0):
                raise ValueError("density lies outside the grid")
            return out
        dst[i] = slice(lo, hi)
        src[i] = slice(lo - a, hi - a)
    out[tuple(dst)] = field.values[tuple(src)]
    if abs(out.sum() - field.values.sum()) > 1e-12 * max(1.0, abs(field.values.sum())):
        raise ValueError("density extends beyond the grid")
    return out


def rasterize(measure: Measure, spec: GridSpec) -> ScalarField:
    """Cell densities of a measure: mass per cell divided by the cell volume.

    Atoms use cloud-in-cell weights, balls use cell coverage fractions and
    shells use a radial hat of width ``h`` rescaled to the exact mass.
    """
    out = np.zeros(spec.shape)
    for p, m in measure.atoms:
        _deposit_atom(out, spec, p, m)
    for c, r, d in measure.balls:
        out += d * _ball_coverage(spec, c, r)
    for c, r, s in measure.shells:
        _deposit_shell(out, spec, c, r, s)
    if measure.density is not None:
        out += embed(measure.density, spec)
    return ScalarField(spec, out)


# -- potentials -------------------------------------------------------------


def self_cell_radius(spec: GridSpec) -> float:
    """Radius of the ball with the volume of one cell."""
    return spec.h / float(ball_volume(spec.ndim, 1.0)) ** (1 / spec.ndim)


def _kernel(spec: GridSpec, medium: Medium, extents) -> np.ndarray:
    """``h^N Psi_k`` on a centred block of offsets, exact ball integral at 0."""
    axes = [np.arange(-e, e + 1) * spec.h for e in extents]
    r2 = 0.0
    for i, a in enumerate(axes):
        shp = [1] * spec.ndim
        shp[i] = a.size
        r2 = r2 + a.reshape(shp) ** 2
    r = np.sqrt(np.broadcast_to(r2, tuple(a.size for a in axes))).copy()
    center = tuple(extents)
    r[center] = 1.0
    K = spec.cell_volume * psi(medium, r)
    K[center] = ball_self_integral(medium, self_cell_radius(spec))
    return K


def _density_potential_fft(dens: np.ndarray, spec: GridSpec, medium: Medium) -> np.ndarray:
    nz = np.argwhere(dens != 0)
    if nz.size == 0:
        return np.zeros(spec.shape)
    a = nz.min(axis=0)
    b = nz.max(axis=0) + 1
    src = dens[tuple(slice(i, j) for i, j in zip(a, b))]
    n = np.asarray(spec.shape)
    # offsets i - j for target i in [0, n), source j in [a, b)
    lo = -(b - 1)
    hi = n - 1 - a
    ext = np.maximum(-lo, hi)
    K = _kernel(spec, medium, ext)
    Ks = K[tuple(slice(e + l, e + hh + 1) for e, l, hh in zip(ext, lo, hi))]
    full = fftconvolve(src, Ks, mode="full")
    start = b - 1 - a
    return full[tuple(slice(s, s + m) for s, m in zip(start, n))]


def _density_potential_direct(dens: np.ndarray, spec: GridSpec, medium: Medium, targets: np.ndarray) -> np.ndarray:
    """O(targets x sources) summation, the reference for the FFT path."""
    nz = np.argwhere(dens != 0)
    out = np.zeros(len(targets))
    if nz.size == 0:
        return out
    src_pts = spec.lower + (nz + 0.5) * spec.h
    w = dens[tuple(nz.T)] * spec.cell_volume
    selfval = ball_self_integral(medium, self_cell_radius(spec))
    tiny = 1e-9 * spec.h
    chunk = max(1, 4_000_000 // len(src_pts))
    for i in range(0, len(targets), chunk):
        t = targets[i : i + chunk]
        d = np.sqrt(((t[:, None, :] - src_pts[None, :, :]) ** 2).sum(-1))
        same = d < tiny
        d = np.where(same, 1.0, d)
        vals = psi(medium, d) * spec.cell_volume
        vals = np.where(same, selfval, vals)
        out[i : i + chunk] = (vals * (w / spec.cell_volume)).sum(axis=1)
    return out


def potential(measure: Measure, spec: GridSpec, medium: Medium, method: str = "fft") -> ScalarField:
    """Potential ``U_k^mu`` sampled at cell centres.

    Parameters
    ----------
    measure : Measure
    spec : GridSpec
    medium : Medium
    method : {"fft", "direct"}
        Summation method for the density part. ``"direct"`` is the slow
        reference implementation.

    Returns
    -------
    ScalarField
        Cells containing an atom at their centre hold
        :data:`SINGULAR_SENTINEL` and are flagged singular.
    """
    if measure.ndim not in (None, spec.ndim):
        raise ValueError("measure and grid dimensions differ")
    if spec.ndim != medium.N:
        raise ValueError("grid and medium dimensions differ")
    U = np.zeros(spec.shape)
    singular = np.zeros(spec.shape, dtype=bool)
    tiny = 1e-9 * spec.h
    for p, m in measure.atoms:
        if m == 0:
            continue
        r = spec.radius(p)
        hit = r < tiny
        rr = np.where(hit, 1.0, r)
        U += np.where(hit, 0.0, m * psi(medium, rr))
        singular |= hit
    for c, r, d in measure.balls:
        U += d * potential_ball(medium, r, spec.radius(c))
    for c, r, s in measure.shells:
        U += s * potential_sphere(medium, r, spec.radius(c))
    if measure.density is not None:
        dens = embed(measure.density, spec)
        if method == "fft":
            U += _density_potential_fft(dens, spec, medium)
        elif method == "direct":
            U += _density_potential_direct(dens, spec, medium, spec.points()).reshape(spec.shape)
        else:
            raise ValueError(f"unknown method {method!r}")
    U[singular] = SINGULAR_SENTINEL
    return ScalarField(spec, U, singular)


def potential_at(measure: Measure, points, medium: Medium) -> np.ndarray:
    """Potential at arbitrary points; points on an atom give ``inf``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts))
    for p, m in measure.atoms:
        r = np.linalg.norm(pts - p, axis=1)
        hit = r == 0
        out += np.where(hit, np.inf, m * psi(medium, np.where(hit, 1.0, r)))
    for c, r, d in measure.balls:
        out += d * potential_ball(medium, r, np.linalg.norm(pts - c, axis=1))
    for c, r, s in measure.shells:
        out += s * potential_sphere(medium, r, np.linalg.norm(pts - c, axis=1))
    if measure.density is not None:
        sp = measure.density.spec
        out += _density_potential_direct(np.asarray(measure.density.values), sp, medium, pts)
    return out


def helmholtz_apply(field: ScalarField | np.ndarray, medium: Medium, spec: Optional[GridSpec] = None) -> ScalarField:
    """Apply ``-(Delta_h + k^2)`` with the (2N+1)-point stencil.

    Values outside the box are taken as zero, so results in the outermost
    cell layer reflect that extension and should not be trusted.
    """
    if isinstance(field, ScalarField):
        spec = field.spec
        v = np.asarray(field.values)
        singular = np.asarray(field.singular)
    else:
        v = np.asarray(field, dtype=float)
        singular = np.zeros(v.shape, dtype=bool)
    out = _apply_stencil(v, spec.h, medium.k)
    if singular.any():
        near = ndimage.binary_dilation(singular, ndimage.generate_binary_structure(v.ndim, 1))
        out[near] = SINGULAR_SENTINEL
    else:
        near = None
    return ScalarField(spec, out, near)


def _apply_stencil(v: np.ndarray, h: float, k: float) -> np.ndarray:
    N = v.ndim
    out = (2 * N / h**2 - k * k) * v
    for ax in range(N):
        lo = [slice(None)] * N
        hi = [slice(None)] * N
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        out[tuple(lo)] -= v[tuple(hi)] / h**2
        out[tuple(hi)] -= v[tuple(lo)] / h**2
    return out


# -- mollification and the existence test ----------------------------------


def _ball_stamp(spec: GridSpec, radius: float) -> np.ndarray:
    """Cell masses of the indicator of ``B_radius`` on a centred stencil."""
    n = int(math.ceil(radius / spec.h)) + 1
    sub = GridSpec.centered(np.zeros(spec.ndim), n * spec.h, spec.h)
    stamp = _ball_coverage(sub, np.zeros(spec.ndim), radius)
    # exact volume, so that the stamp reproduces c_k-normalised means
    return stamp * (float(ball_volume(spec.ndim, radius)) / stamp.sum())


def mollify(measure: Measure, delta: float, medium: Medium, spec: GridSpec) -> Measure:
    """Mollified measure ``mu * phi_delta`` as a density on ``spec``.

    ``phi_delta = c_k(delta/3)^{-3} (chi * chi * chi)`` with ``chi`` the
    indicator of ``B_{delta/3}``. The normaliser is ``c_k``, not the volume,
    so the total mass is multiplied by ``(vol(B_{delta/3}) / c_k(delta/3))^3``.
    """
    Rk = r_k(medium)
    if not (0 < delta < 3 * Rk):
        raise ValueError(f"delta must lie in (0, 3 R_k) = (0, {3 * Rk}); got {delta}")
    mu = np.asarray(rasterize(measure, spec).values)
    stamp = _ball_stamp(spec, delta / 3)
    out = mu
    for _ in range(3):
        out = fftconvolve(out, stamp, mode="same")
    norm = float(c_k(medium, delta / 3)) ** 3
    pad = int(math.ceil(delta / spec.h)) + 1
    # drop FFT round-off outside the support of mu * phi_delta
    support = ndimage.distance_transform_edt(mu <= 0) * spec.h <= delta + 2 * spec.h
    out = np.where(support, np.clip(out / norm, 0.0, None), 0.0)
    lost = mu.sum() * stamp.sum() ** 3 / norm - out.sum()
    if abs(lost) > 1e-6 * max(mu.sum(), 1e-300) or Mask(spec, mu > 0).dilate(pad).touches_border(1):
        raise ValueError("mollified measure reaches the grid boundary; enlarge the grid")
    return Measure(density=ScalarField(spec, out))


def sliding_ball_mass(measure: Measure, r: float, spec: GridSpec) -> float:
    """Discrete ``sup_x mu(B_r(x))`` over cell centres."""
    mu = np.asarray(rasterize(measure, spec).values)
    stamp = _ball_stamp(spec, r)
    return float(fftconvolve(mu, stamp, mode="same").max())


def existence_precheck(
    measure: Measure, r: float, medium: Medium, spec: Optional[GridSpec] = None, slack: float = 1.0
) -> bool:
    """Sufficient test for a nonempty admissible class with density 1.

    Returns True when the largest mass found in any ball of radius ``r`` is
    at most ``slack * c_k(r)``. ``slack > 1`` loosens the test to absorb
    rasterisation error.
    """
    Rk = r_k(medium)
    if not (0 < r <= Rk):
        raise ValueError(f"radius must lie in (0, R_k] = (0, {Rk}]")
    if spec is None:
        h = r / 8
        center, eps = measure.support_ball()
        if center is None:
            return True
        spec = GridSpec.centered(center, eps + r + 3 * h, h)
    return sliding_ball_mass(measure, r, spec) <= slack * float(c_k(medium, r)) * (1 + 1e-12)
