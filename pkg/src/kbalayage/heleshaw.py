"""Quasi-static domain growth driven by a point source.

For ``mu_t = m|_Omega + t eta`` the saturated sets ``omega_t`` grow with
``t`` until the admissible class becomes empty at a terminal time ``T``.
Each step is an independent sweep; the growth between two times obeys a
Hele-Shaw type law that replaces the increment ``eps * eta`` by the
harmonic measure of ``omega_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .balayage import (
    BalayageResult,
    SweepConfig,
    feasibility_scan,
    lambda1_estimate,
    sweep,
    sweep_from_potential,
)
from .dirichlet import SpectralInfeasibilityError, harmonic_measure_potential
from .grid import GridSpec, Mask, Measure, ScalarField, helmholtz_apply, rasterize
from .radial import Medium

__all__ = [
    "EvolutionRun",
    "LawReport",
    "evolve",
    "verify_law",
    "source_family",
    "sweep_from_potential",
]


@dataclass
class EvolutionRun:
    """Sweeps of ``mu_t`` along a time grid plus a terminal-time bracket."""

    initial_domain: Measure
    source: Measure
    medium: Medium
    times: list
    results: list
    config: SweepConfig
    T_bracket: tuple = (float("nan"), float("nan"))
    violations: list = field(default_factory=list)

    @property
    def feasible_flags(self) -> list:
        return [r.feasible for r in self.results]

    def series(self) -> list:
        out = []
        for t, r in zip(self.times, self.results):
            lam = r.lambda1_omega
            out.append(
                {
                    "t": float(t),
                    "omega_cells": int(r.omega.count),
                    "lambda1": None if not math.isfinite(lam) else float(lam),
                    "feasible": bool(r.feasible),
                }
            )
        return out


def source_family(initial_domain: Measure, source: Measure):
    """``t -> m|_Omega + t * source``."""
    return lambda t: initial_domain + source.scaled(t)


def _domain_mask(initial_domain: Measure, spec: GridSpec) -> Mask:
    # cells fully covered by the initial domain
    return Mask(spec, np.asarray(rasterize(initial_domain, spec).values) >= 1.0 - 1e-12)


def evolve(
    initial_domain: Measure,
    source: Measure,
    medium: Medium,
    times: Sequence[float],
    config: SweepConfig,
    enclosing: Optional[Mask] = None,
    bracket_resolution: Optional[float] = None,
    t_max: Optional[float] = None,
) -> EvolutionRun:
    """Sweep ``m|_Omega + t * source`` for each ``t`` in ``times``.

    Parameters
    ----------
    initial_domain : Measure
        Lebesgue measure on the initial domain (density 1).
    source : Measure
        The injection ``eta``, e.g. a unit atom.
    medium : Medium
    times : sequence of float
        Increasing, positive.
    config : SweepConfig
        ``config.box`` should be set; otherwise it is sized for the last time.
    enclosing : Mask, optional
        A domain containing the growth whose first eigenvalue must be at
        least ``k^2``; checked before running.
    bracket_resolution : float, optional
        When given, the terminal time is bracketed to this width.
    t_max : float, optional
        Upper search limit for the terminal time if every step is feasible.
    """
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])) or times[0] <= 0:
        raise ValueError("times must be positive and increasing")
    k2 = medium.k**2
    if enclosing is not None:
        lam = lambda1_estimate(enclosing)
        if lam < k2:
            raise SpectralInfeasibilityError(f"enclosing domain has lambda_1 = {lam:.6g} < k^2")
    family = source_family(initial_domain, source)
    if config.box is None:
        from .balayage import resolve_box

        config = replace(config, box=resolve_box(family(times[-1]), 1.0, medium, config))
    spec = config.box
    omega0 = _domain_mask(initial_domain, spec)
    results = []
    violations = []
    warm = None
    prev = None
    seen_infeasible = False
    for t in times:
        res = sweep(family(t), 1.0, medium, config, initial_active=warm)
        results.append(res)
        if res.feasible:
            if seen_infeasible:
                violations.append(("feasible after infeasible", t))
            if not np.all(omega0.erode(1).flags <= res.omega.flags):
                violations.append(("initial domain not contained", t))
            if prev is not None and not np.all(prev.omega.flags <= res.omega.dilate(1).flags):
                violations.append(("omega not monotone", t))
            warm = res.active.flags
            prev = res
        else:
            seen_infeasible = True
    run = EvolutionRun(initial_domain, source, medium, times, results, config, violations=violations)
    if bracket_resolution is not None:
        feas = [t for t, r in zip(times, results) if r.feasible]
        infeas = [t for t, r in zip(times, results) if not r.feasible]
        if not feas:
            raise ValueError("the first time step is already infeasible")
        hi = infeas[0] if infeas else None
        scan = feasibility_scan(
            family, medium, config, feas[-1], hi, resolution=bracket_resolution, t_max=t_max or 1e6
        )
        run.T_bracket = (scan.lower, scan.upper)
    return run


@dataclass
class LawReport:
    """Comparison of the two sides of the growth law at ``(t, eps)``."""

    t: float
    eps: float
    symmetric_difference_cells: int
    within_layer: bool
    layer_cells: int
    V_sup_difference: float
    lhs: BalayageResult
    rhs: BalayageResult

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "eps": self.eps,
            "symmetric_difference_cells": self.symmetric_difference_cells,
            "within_layer": self.within_layer,
            "layer_cells": self.layer_cells,
            "V_sup_difference": self.V_sup_difference,
        }


def verify_law(
    initial_domain: Measure,
    z,
    medium: Medium,
    t: float,
    eps: float,
    config: SweepConfig,
    layer_cells: int = 3,
    base: Optional[BalayageResult] = None,
) -> LawReport:
    """Check the growth law for the point source ``delta_z``.

    The left side sweeps ``mu_{t + eps}`` directly. The right side sweeps
    ``rho|_{omega_t} + eps * nu`` where ``nu`` is the k-harmonic measure of
    ``omega_t`` at ``z``, known only through its potential ``W``: the
    obstacle is ``V_t + eps * W`` and the source density is the swept
    measure of step ``t`` plus ``eps`` times the discrete operator applied
    to ``W`` on the cells bordering ``omega_t``.
    """
    if config.box is None:
        raise ValueError("verify_law needs an explicit box")
    source = Measure.atom(z, 1.0)
    family = source_family(initial_domain, source)
    if base is None:
        base = sweep(family(t), 1.0, medium, config)
    if not base.feasible:
        raise ValueError(f"time t={t} is not feasible")
    lhs = sweep(family(t + eps), 1.0, medium, config, initial_active=base.active.flags)
    if not lhs.feasible:
        raise ValueError(f"time t+eps={t + eps} is not feasible")
    omega_t = base.active
    W = harmonic_measure_potential(omega_t, z, medium)
    nu = np.asarray(helmholtz_apply(W, medium).values)
    ring = omega_t.dilate(1).flags & ~omega_t.flags
    nu = np.where(ring, nu, 0.0)
    src = np.asarray(base.B.density.values) + eps * nu
    spec = config.box
    Vt = np.asarray(base.V.values)
    U_rhs = ScalarField(spec, np.where(base.V.singular, 0.0, Vt) + eps * np.asarray(W.values))
    rhs = sweep_from_potential(U_rhs, 1.0, medium, config, source=ScalarField(spec, src))
    sym = lhs.omega.symmetric_difference(rhs.omega)
    regular = ~(lhs.V.singular | base.V.singular)
    diff = np.abs(np.asarray(lhs.V.values) - np.asarray(rhs.V.values))[regular]
    return LawReport(
        t=t,
        eps=eps,
        symmetric_difference_cells=sym.count,
        within_layer=lhs.omega.within_layer(rhs.omega, layer_cells),
        layer_cells=layer_cells,
        V_sup_difference=float(diff.max()),
        lhs=lhs,
        rhs=rhs,
    )
