import math

import numpy as np
import pytest

from conftest import H, equal_area_radius
from kbalayage import (
    ConfigurationError,
    GridSpec,
    Mask,
    Measure,
    Medium,
    ScalarField,
    SweepConfig,
    c_k,
    feasibility_scan,
    geometry_bound_check,
    lambda1_estimate,
    point_mass_radius,
    r_k,
    structure_check,
    sweep,
    sweep_signed,
)
from kbalayage.grid import mollify, rasterize

TOL = 10 * H


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(inner_tol=0.0)
    with pytest.raises(ValueError):
        SweepConfig(omega_threshold=-1.0)
    with pytest.raises(ValueError):
        SweepConfig(max_outer=0)


def test_point_mass_2d(medium2d):
    c = float(c_k(medium2d, 2.0))
    res = sweep(Measure.atom([0.0, 0.0], c), 1.0, medium2d, SweepConfig(h=H))
    assert res.feasible and res.converged
    exact = Mask.ball(res.spec, [0.0, 0.0], 2.0)
    assert res.omega.symmetric_difference(exact).volume <= 0.05 * exact.volume
    assert np.all(np.asarray(res.u.values) >= 0)
    assert np.all(np.asarray(res.V.values) <= np.asarray(res.U.values))
    rep = structure_check(res)
    assert rep.passes()
    # the atom lies in omega, so nothing of mu is left outside
    assert rep.off_omega == 0.0
    assert res.lambda1_omega >= 0.95 * medium2d.k**2


def test_density_below_target_is_untouched(medium2d):
    mu = Measure.uniform_ball([0.0, 0.0], 0.8, 0.5)
    res = sweep(mu, 1.0, medium2d, SweepConfig(h=H))
    assert res.feasible and res.omega.empty()
    np.testing.assert_array_equal(res.V.values, res.U.values)
    np.testing.assert_allclose(res.B.density.values, rasterize(mu, res.spec).values, atol=1e-12)
    rep = structure_check(res)
    assert rep.excess <= 0 and rep.on_omega == 0 and rep.off_omega <= 1e-12


def test_infeasible_point_mass(medium2d):
    c = 1.05 * float(c_k(medium2d, r_k(medium2d)))
    res = sweep(Measure.atom([0.01, 0.0], c), 1.0, medium2d, SweepConfig(h=H))
    assert not res.feasible
    assert res.status in ("spectral", "divergence", "boundary", "max_iterations")


def test_support_near_border_rejected(medium2d):
    box = GridSpec.centered([0.0, 0.0], 1.0, 0.1)
    with pytest.raises(ConfigurationError):
        sweep(Measure.atom([0.93, 0.0], 1.0), 1.0, medium2d, SweepConfig(box=box))


def test_variable_rho_needs_box(medium2d, box2d):
    rho = ScalarField(box2d, np.ones(box2d.shape))
    with pytest.raises(ConfigurationError):
        sweep(Measure.atom([0.01, 0.0], 1.0), rho, medium2d, SweepConfig(h=H))


def test_classical_limit():
    m = Medium(2, 0.0)
    c = 3.0
    res = sweep(Measure.atom([0.013, -0.004], c), 1.0, m, SweepConfig(h=H))
    assert res.feasible
    assert abs(equal_area_radius(res.omega) - math.sqrt(c / math.pi)) <= 2 * H


# -- properties on non-radial configurations ---------------------------------


def test_structure_residuals(parts, medium2d, config2d):
    res = sweep(parts[0] + parts[1], 1.0, medium2d, config2d)
    assert res.feasible
    rep = structure_check(res)
    assert rep.excess <= 1e-9 and rep.on_omega <= TOL and rep.off_omega <= TOL
    assert rep.omega_outside_Omega == 0


def test_monotone_in_mu(parts, medium2d, config2d):
    mu = parts[0] + parts[1]
    big = sweep(mu, 1.0, medium2d, config2d)
    small = sweep(mu.scaled(0.7), 1.0, medium2d, config2d)
    assert np.all(np.asarray(small.u.values) <= np.asarray(big.u.values) + TOL)
    assert small.omega.within_layer(big.omega, 1) or not (small.omega.flags & ~big.omega.dilate(1).flags).any()


def test_monotone_in_k(parts, config2d):
    mu = parts[0] + parts[1]
    hi = sweep(mu, 1.0, Medium(2, 1.0), config2d)
    lo = sweep(mu, 1.0, Medium(2, 0.6), config2d)
    assert hi.feasible and lo.feasible
    assert np.all(np.asarray(lo.u.values) <= np.asarray(hi.u.values) + TOL)
    assert not (lo.omega.flags & ~hi.omega.dilate(1).flags).any()


def test_scaling(parts, medium2d, config2d):
    mu = parts[0] + parts[1]
    base = sweep(mu, 1.0, medium2d, config2d)
    scaled = sweep(mu.scaled(2.0), 2.0, medium2d, config2d)
    np.testing.assert_allclose(scaled.V.values, 2 * np.asarray(base.V.values), atol=1e-8)
    assert scaled.omega.symmetric_difference(base.omega).count == 0


def test_iterated_sweep(parts, medium2d, config2d):
    m1, m2 = parts
    direct = sweep(m1 + m2, 1.0, medium2d, config2d)
    first = sweep(m1, 1.0, medium2d, config2d)
    again = sweep(first.B + m2, 1.0, medium2d, config2d)
    assert np.max(np.abs(np.asarray(again.V.values) - np.asarray(direct.V.values))) <= TOL
    assert again.omega.within_layer(direct.omega, 1) and direct.omega.within_layer(again.omega, 1)


def test_convex_combination(parts, medium2d, config2d):
    m1, m2 = parts
    mix = sweep(m1 + m2, 1.0, medium2d, config2d)
    a = sweep(m1.scaled(2.0), 1.0, medium2d, config2d)
    b = sweep(m2.scaled(2.0), 1.0, medium2d, config2d)
    assert a.feasible and b.feasible
    assert not (mix.omega.flags & ~(a.omega | b.omega).dilate(1).flags).any()


def test_increasing_limit(parts, medium2d, config2d):
    mu = parts[0] + parts[1]
    full = np.asarray(sweep(mu, 1.0, medium2d, config2d).u.values)
    prev = None
    gaps = []
    for n in range(1, 6):
        un = np.asarray(sweep(mu.scaled(1 - 2.0**-n), 1.0, medium2d, config2d).u.values)
        if prev is not None:
            assert np.all(un >= prev - 1e-9)
        assert np.all(un <= full + 1e-9)
        gaps.append(np.max(full - un))
        prev = un
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] <= TOL


def test_decreasing_density_limit(parts, medium2d, config2d):
    mu = parts[0] + parts[1]
    prevV, prevO = None, None
    for n in range(0, 5):
        res = sweep(mu, 1.0 + 2.0**-n, medium2d, config2d)
        V = np.asarray(res.V.values)
        if prevV is not None:
            assert np.all(V <= prevV + 1e-9)
            assert not (prevO.flags & ~res.omega.flags).any()
        prevV, prevO = V, res.omega
    limit = np.asarray(sweep(mu, 1.0, medium2d, config2d).V.values)
    assert np.max(np.abs(prevV - limit)) <= TOL


def test_components_are_charged(parts, medium2d, config2d):
    mu = parts[0] + parts[1]
    res = sweep(mu, 1.0, medium2d, config2d)
    excess = Mask(res.spec, np.asarray(res.source.values) > 1.0).dilate(1)
    labels, n = res.omega.components()
    assert n >= 1
    for i in range(1, n + 1):
        assert (excess.flags & (labels == i)).any()


def test_weak_continuity(medium2d):
    # for an atom deep inside omega the mollified sweep agrees exactly in the
    # continuum, so what remains is the grid error of the atom itself
    z = [0.012, -0.007]
    mu = Measure.atom(z, 3.0)
    sups = {}
    for h in (0.05, 0.025):
        box = GridSpec.centered([0.0, 0.0], 3.6, h)
        cfg = SweepConfig(box=box, compute_lambda1=False)
        V = np.asarray(sweep(mu, 1.0, medium2d, cfg).V.values)
        far = box.radius(z) > 1.2 + 2 * h
        for delta in ((0.9, 0.6, 0.3) if h == 0.05 else (0.6,)):
            Vd = np.asarray(sweep(mollify(mu, delta, medium2d, box), 1.0, medium2d, cfg).V.values)
            diff = np.abs(Vd - V)
            assert diff.max() <= 10 * h
            assert diff[far].max() <= 1e-3
            sups[(h, delta)] = diff.max()
    assert sups[(0.025, 0.6)] < sups[(0.05, 0.6)] / 2


def test_signed_measure(medium2d, config2d):
    plus = Measure.atom([0.02, 0.01], 4.0)
    res0, W0 = sweep_signed(plus, Measure(), medium2d, config2d)
    ref = sweep(plus, 1.0, medium2d, config2d)
    np.testing.assert_allclose(W0.values, ref.V.values, atol=1e-12)
    minus = Measure.uniform_ball([0.0, 0.0], 0.5, 0.5)
    res, W = sweep_signed(plus, minus, medium2d, config2d)
    assert res.feasible
    np.testing.assert_allclose(res.rho.values, 1.0 + np.asarray(rasterize(minus, config2d.box).values))
    # a heavier target density sweeps onto a smaller set
    assert res.omega.count < res0.omega.count


# -- eigenvalue estimator ---------------------------------------------------


def _square(h):
    spec = GridSpec((0.0, 0.0), h, (int(round(1 / h)), int(round(1 / h))))
    return Mask(spec, np.ones(spec.shape, dtype=bool))


def test_lambda1_unit_square():
    assert lambda1_estimate(_square(0.01)) == pytest.approx(2 * math.pi**2, rel=0.01)


def test_lambda1_disc():
    spec = GridSpec.centered([0.0, 0.0], 1.1, 0.02)
    j0 = 2.404825557695773
    assert lambda1_estimate(Mask.ball(spec, [0, 0], 1.0)) == pytest.approx(j0**2, rel=0.02)
    assert lambda1_estimate(Mask.ball(spec, [0, 0], 1.0), convention="center") == pytest.approx(j0**2, rel=0.02)


def test_lambda1_takes_minimum_over_components():
    spec = GridSpec.centered([0.0, 0.0], 3.6, 0.02)
    union = Mask.ball(spec, [-2.3, 0], 1.0) | Mask.ball(spec, [1.2, 0], 2.0)
    assert union.components()[1] == 2
    assert lambda1_estimate(union) == pytest.approx(2.404825557695773**2 / 4, rel=0.02)


def test_lambda1_empty():
    with pytest.raises(ValueError):
        lambda1_estimate(Mask(GridSpec((0.0, 0.0), 0.1, (5, 5)), np.zeros((5, 5), bool)))


# -- threshold scan and geometry ----------------------------------------------


def test_threshold_scan_2d(medium2d):
    family = lambda t: Measure.atom([0.013, 0.006], t)
    cfg = SweepConfig(h=0.1, compute_lambda1=False, box=GridSpec.centered([0.0, 0.0], 3.6, 0.1))
    scan = feasibility_scan(family, medium2d, cfg, 5.0, 10.0, resolution=0.2)
    thr = float(c_k(medium2d, r_k(medium2d)))
    assert not scan.unbounded and scan.width <= 0.2
    assert scan.lower - 0.2 <= thr <= scan.upper + 0.2
    assert scan.last_feasible is not None and scan.last_feasible.feasible


def test_threshold_scan_classical():
    scan = feasibility_scan(lambda t: Measure.atom([0, 0], t), Medium(2, 0.0), SweepConfig(h=0.1), 1.0)
    assert scan.unbounded


def test_geometry_bound(medium2d, config2d):
    mu = Measure.atom([0.21, 0.1], 2.0) + Measure.atom([-0.15, -0.2], 2.5)
    eps = 0.3
    res = sweep(mu, 1.0, medium2d, config2d)
    rep = geometry_bound_check(res, eps)
    assert rep.holds and rep.inner_radius > 0


def test_geometry_bound_radial(medium2d):
    c = float(c_k(medium2d, 1.5))
    res = sweep(Measure.atom([0.0, 0.0], c), 1.0, medium2d, SweepConfig(h=H))
    rep = geometry_bound_check(res, 0.0)
    assert rep.holds
    assert rep.inner_radius == pytest.approx(point_mass_radius(medium2d, c).outer, abs=2 * H)
