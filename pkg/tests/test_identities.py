from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import box_shape, constant_grid, exact_cross
from vecac.fields import ScalarField, diagnostics, radial_scan
from vecac.grid import Grid2D
from vecac.identities import (IdentityError, IdentityReport, NotASolution, TestField, clearing_out_probe,
                              default_test_fields, discrepancy_relation_check, energy_ratio_identity,
                              estimate_eta1, interface_energy_density, pohozaev_residual, pohozaev_sides,
                              potential_bound_check, refinement_order, reports_to_json,
                              stress_divergence_residual, zeta_monotonicity_report)
from vecac.potential import well_constants
from vecac.profile1d import transition_energy
from vecac.solver import seed


def ramp(gl):
    return Grid2D.from_function(lambda X, Y: 0.3 * X[..., None], nx=81, ny=81, h=0.025, origin=(-1, -1))


def test_report_pass_semantics():
    assert IdentityReport("a", 1.0, 1.0, "").passed
    assert not IdentityReport("a", 1.0 + 1e-12, 1.0, "").passed
    d = json.loads(reports_to_json([IdentityReport("a", 0.5, 1.0, "O(h^2)", details={"x": np.arange(3)})]))
    assert d[0]["pass"] is True and d[0]["details"]["x"] == [0, 1, 2]


def test_pohozaev_exact_cross_refines(dec):
    eps = 0.05
    res = [pohozaev_residual(exact_cross(eps, eps / f), dec, eps, (0.0, 0.0), 0.5).residual for f in (4, 8)]
    assert res[0] <= 3e-2
    assert 3.0 <= res[0] / res[1] <= 5.0


def test_pohozaev_constant(gl, tri):
    g = constant_grid(gl, 0)
    assert pohozaev_sides(g, gl, 0.1, (0.0, 0.0), 0.5) == (0.0, 0.0)
    assert pohozaev_residual(g, gl, 0.1, (0.0, 0.0), 0.5).residual == 0.0
    # the triple wells are rounded cube roots: V there is round-off, not zero
    g = constant_grid(tri, 0)
    lhs, rhs = pohozaev_sides(g, tri, 0.1, (0.0, 0.0), 0.5)
    assert abs(lhs) <= 1e-20 and abs(rhs) <= 1e-20


def test_identities_reject_non_solutions(gl):
    g = ramp(gl)
    with pytest.raises(NotASolution):
        pohozaev_residual(g, gl, 0.1, (0.0, 0.0), 0.5)
    with pytest.raises(NotASolution):
        potential_bound_check(g, gl, 0.1, (0.0, 0.0), 0.5)
    with pytest.raises(NotASolution):
        stress_divergence_residual(g, gl, 0.1)
    with pytest.raises(NotASolution):
        energy_ratio_identity(g, gl, 0.1, (0.0, 0.0), [0.4, 0.5])


def test_potential_bound(planar_solution, gl):
    sol, _ = planar_solution
    rep = potential_bound_check(sol, gl, sol.eps, (0.0, 0.0), 0.4)
    assert rep.passed and rep.details["slack"] > 0
    well = potential_bound_check(sol, gl, sol.eps, (0.0, 0.7), 0.2)
    assert well.passed and well.details["lhs"] <= 1e-10
    c = constant_grid(gl, 0)
    assert potential_bound_check(c, gl, 0.1, (0.0, 0.0), 0.5).residual == 0.0


def test_stress_exact_cross(dec):
    eps = 0.05
    g = exact_cross(eps, eps / 4)
    dil = [t for t in default_test_fields(g) if t.name == "dilation"]
    assert stress_divergence_residual(g, dec, eps, dil).residual <= 1e-2
    assert len(default_test_fields(g)) >= 5


def test_stress_trivial_cases(dec):
    c = constant_grid(dec, 1)
    assert stress_divergence_residual(c, dec, 0.1).residual == 0.0

    class ConstantX(TestField):
        def jacobian(self, X, Y):
            return np.zeros(X.shape + (2, 2))

    g = exact_cross(0.05, 0.0125)
    X = ConstantX("constant", (0.0, 0.0), 0.5, None, None)
    assert stress_divergence_residual(g, dec, 0.05, [X]).residual == 0.0


def test_stress_support_touching_boundary(dec):
    g = exact_cross(0.05, 0.0125)
    tf = default_test_fields(g, center=(0.0, 0.0), radius=1.0)
    with pytest.raises(IdentityError):
        stress_divergence_residual(g, dec, 0.05, tf)


def test_zeta_monotonicity(planar_solution, cross_solution, gl, dec):
    for (sol, _), p in ((planar_solution, gl), (cross_solution, dec)):
        eps = sol.eps
        z = ScalarField.like(sol, diagnostics(sol, p, eps).zeta_eps)
        rep = zeta_monotonicity_report(radial_scan(z, (0.0, 0.0), 4 * eps, 0.45, 32), eps)
        assert rep.tolerance == pytest.approx(0.1 * eps)
        assert rep.passed
    c = ScalarField(values=np.zeros((81, 81)), h=0.025, origin=(-1, -1))
    rep = zeta_monotonicity_report(radial_scan(c, (0.0, 0.0), 0.4, 0.8, 8), 0.1)
    assert rep.residual == 0.0
    with pytest.raises(IdentityError):
        zeta_monotonicity_report(radial_scan(c, (0.0, 0.0), 0.05, 0.8, 8), 0.1)


def test_discrepancy_extruded_profile(gl):
    eps = 0.05
    errs = []
    for f in (4, 8):
        g = seed("planar", box_shape((-1, 1, -1, 1), eps / f), gl, eps, angle=math.pi / 2)
        rep = discrepancy_relation_check(g, gl, eps, (-0.5, 0.5, -0.5, 0.5), math.pi / 2)
        assert rep.details["offdiag_residual"] <= 1e-12
        errs.append(rep.residual)
    assert errs[0] <= 5e-2
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_discrepancy_rejects_junction(cross_solution, dec):
    sol, _ = cross_solution
    with pytest.raises(IdentityError):
        discrepancy_relation_check(sol, dec, sol.eps, (-0.4, 0.4, -0.4, 0.4), 0.0)


def test_clearing_out_branches(planar_solution, gl):
    sol, _ = planar_solution
    eps = sol.eps
    wc = well_constants(gl)
    well = clearing_out_probe(sol, gl, wc, eps, (0.0, 0.75), 0.2, eta=0.1)
    assert well.applicable and well.passed
    assert well.details["sup_distance"] <= 0.5 * wc.mu0
    cross = clearing_out_probe(sol, gl, wc, eps, (0.0, 0.0), 0.5, eta=0.1)
    assert not cross.applicable
    c0 = transition_energy(gl, [-1.0], [1.0])
    dens = interface_energy_density(sol, gl, eps, (0.0, 0.0), 0.5)
    assert dens["energy_over_chord"] == pytest.approx(c0, rel=0.05)
    assert cross.details["energy_over_r"] > 0.1


def test_clearing_out_constant_field(tri):
    g = constant_grid(tri, 2)
    rep = clearing_out_probe(g, tri, well_constants(tri), 0.1, (0.0, 0.0), 0.5, eta=1e-6)
    assert rep.applicable and rep.passed and rep.details["C_nrg"] == 0.0
    with pytest.raises(IdentityError):
        clearing_out_probe(g, tri, well_constants(tri), 0.6, (0.0, 0.0), 0.5, eta=1.0)


def test_eta1_estimate_is_a_measurement(planar_solution, gl):
    sol, _ = planar_solution
    wc = well_constants(gl)
    est = estimate_eta1(sol, gl, wc, sol.eps, (0.0, 0.6), 0.3, [0.1, 0.3, 0.6, 1.0, 1.5])
    assert len(est["samples"]) == 5
    held = [e for _, e, ok in est["samples"] if ok]
    failed = [e for _, e, ok in est["samples"] if not ok]
    assert held and failed
    assert est["eta1_lower"] == max(held) and est["eta1_upper"] == min(failed)


def test_energy_ratio_identity(planar_solution, cross_solution, gl, dec):
    sol, _ = planar_solution
    eps = sol.eps
    radii = np.arange(4 * eps, 0.5 + 1e-12, 4 * sol.h)
    assert energy_ratio_identity(sol, gl, eps, (0.0, 0.0), radii).residual <= 5e-2
    xs, _ = cross_solution
    assert energy_ratio_identity(xs, dec, eps, (0.0, 0.0), radii).residual <= 5e-2
    c = constant_grid(gl, 1)
    assert energy_ratio_identity(c, gl, 0.1, (0.0, 0.0), [0.4, 0.5, 0.6]).residual == 0.0
    with pytest.raises(IdentityError):
        energy_ratio_identity(sol, gl, eps, (0.0, 0.0), [0.1, 0.3])


def test_exact_identities_second_order(dec):
    eps = 0.05
    po, st, er = [], [], []
    for f in (4, 8):
        g = exact_cross(eps, eps / f)
        po.append(pohozaev_residual(g, dec, eps, (0.0, 0.0), 0.5).residual)
        st.append(stress_divergence_residual(g, dec, eps).residual)
        radii = np.arange(4 * eps, 0.5 + 1e-12, 4 * g.h)
        er.append(energy_ratio_identity(g, dec, eps, (0.0, 0.0), radii).residual)
    for a, b in (po, st, er):
        assert 3.0 <= a / b <= 5.0


def test_refinement_order():
    assert refinement_order(4.0, 1.0) == pytest.approx(2.0)
    assert math.isnan(refinement_order(1.0, 0.0))
