from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import box_shape, constant_grid
from vecac.fields import ScalarField, ball_mass, diagnostics
from vecac.identities import interface_energy_density
from vecac.interface import (Arc, InterfaceError, InterfaceGraph, Junction, capped_distance, density_field,
                             extract_interface, junction_angles, junction_balance, level_set_stats,
                             tangent_cone_check, arc_direction)
from vecac.potential import well_constants
from vecac.profile1d import transition_energy
from vecac.solver import SolveConfig, seed, solve


@pytest.fixture(scope="module")
def c0(gl):
    return transition_energy(gl, [-1.0], [1.0])


@pytest.fixture(scope="module")
def wide_planar(gl):
    """Planar layer along x1 in a box that is wide against the probe radius."""
    eps = 0.05
    g = seed("planar", box_shape((-2.0, 2.0, -1.5, 1.5), eps / 4), gl, eps, angle=math.pi / 2)
    sol, _ = solve(g, gl, SolveConfig(eps=eps))
    sol.eps = eps
    return sol


@pytest.fixture(scope="module")
def wide_cross(dec):
    eps = 0.05
    g = seed("cross", box_shape((-2.0, 2.0, -2.0, 2.0), eps / 4), dec, eps)
    sol, _ = solve(g, dec, SolveConfig(eps=eps))
    sol.eps = eps
    return sol


def test_density_constant_field(tri):
    d = diagnostics(constant_grid(tri, 1, n=81, h=0.025), tri, 0.05)
    th = density_field(d, 0.4)
    vals = th.values[np.isfinite(th.values)]
    assert vals.size > 0 and np.max(vals) <= 1e-20
    assert np.isnan(th.values[0, 0])


def test_density_probe_precondition(tri):
    d = diagnostics(constant_grid(tri, 1, n=81, h=0.025), tri, 0.05)
    with pytest.raises(InterfaceError):
        density_field(d, 0.1)


def test_density_on_planar_line(wide_planar, gl, c0):
    sol = wide_planar
    eps = sol.eps
    probe = 8 * eps
    d = diagnostics(sol, gl, eps)
    th = density_field(d, probe)
    j0 = int(round(1.5 / sol.h))
    # the probe disk meets the line in a chord of length 2 probe_r: theta = 2 c0
    assert th.values[j0, sol.nx // 2] == pytest.approx(2 * c0, rel=0.02)
    jfar = j0 + int(round((probe + 10 * eps) / sol.h))
    assert th.values[jfar, sol.nx // 2] <= 1e-3 * c0
    # the convolution agrees with the direct disk integral
    direct = ball_mass(d.field("e_eps"), (0.1, 0.05), probe) / probe
    i, j = int(round((0.1 + 2.0) / sol.h)), int(round((0.05 + 1.5) / sol.h))
    assert th.values[j, i] == pytest.approx(direct, rel=1e-9)


def test_density_on_cross(wide_cross, dec, c0):
    sol = wide_cross
    eps = sol.eps
    probe = 8 * eps
    th = density_field(diagnostics(sol, dec, eps), probe)
    mid = sol.nx // 2
    # two perpendicular chords through the centre
    assert th.values[mid, mid] == pytest.approx(4 * c0, rel=0.03)
    off = mid + int(round(1.0 / sol.h))
    assert th.values[mid, off] == pytest.approx(2 * c0, rel=0.02)


def test_extract_planar(wide_planar, gl, c0):
    sol = wide_planar
    eps = sol.eps
    diag = diagnostics(sol, gl, eps)
    probe = 8 * eps
    graph = extract_interface(density_field(diag, probe), c0, diag, probe)
    assert len(graph.arcs) == 1 and not graph.junctions
    d = arc_direction(graph.arcs[0])
    ang = math.degrees(math.atan2(d[1], d[0])) % 180.0
    assert min(ang, 180.0 - ang) <= 2.0
    a = graph.arcs[0]
    assert a.density > 0
    assert a.density == pytest.approx(c0, rel=0.05)
    # vertices stay within 2h of the thresholded set
    th = density_field(diag, probe)
    sup = np.argwhere(np.nan_to_num(th.values) >= c0)
    sup_xy = np.stack([sol.origin[0] + sol.h * sup[:, 1], sol.origin[1] + sol.h * sup[:, 0]], axis=1)
    for v in a.polyline:
        assert np.min(np.linalg.norm(sup_xy - v, axis=1)) <= 2 * sol.h
    d2 = json.loads(graph.to_json())
    assert len(d2["arcs"]) == 1 and d2["params"]["eps"] == eps


def test_extract_cross(wide_cross, dec, c0):
    sol = wide_cross
    eps = sol.eps
    diag = diagnostics(sol, dec, eps)
    probe = 8 * eps
    graph = extract_interface(density_field(diag, probe), c0, diag, probe)
    assert [j.degree for j in graph.junctions] == [4]
    assert len(graph.arcs) == 4
    j = graph.junctions[0]
    assert np.linalg.norm(j.position) <= 2 * sol.h
    assert np.max(np.abs(junction_angles(j) - 90.0)) <= 3.0
    assert junction_balance(graph)[0] <= 0.05
    # total length times the smallest density is bounded by twice the zeta mass
    zeta_mass = float(np.sum(diag.zeta_eps) * sol.h**2)
    assert graph.total_length * min(a.density for a in graph.arcs) <= 2 * zeta_mass
    g2 = extract_interface(density_field(diag, probe), 1.1 * c0, diag, probe)
    assert abs(g2.total_length - graph.total_length) <= 0.1 * graph.total_length


def test_extract_empty(wide_planar, gl):
    diag = diagnostics(wide_planar, gl, wide_planar.eps)
    graph = extract_interface(density_field(diag, 0.4), 100.0, diag, 0.4)
    assert graph.arcs == [] and graph.junctions == []
    with pytest.raises(InterfaceError):
        extract_interface(density_field(diag, 0.4), 0.0, diag, 0.4)


def _graph(directions, densities, degree2=False):
    arcs = [Arc(pixels=np.zeros((2, 2), int), polyline=np.zeros((2, 2)), length=1.0, density=t)
            for t in densities]
    j = Junction(position=np.zeros(2), arcs=list(range(len(arcs))),
                 directions=[np.asarray(d, float) for d in directions], densities=list(densities))
    return InterfaceGraph(arcs=arcs, junctions=[j], eps=0.1, eta=1.0, probe_r=0.8, h=0.025, origin=(0.0, 0.0))


def test_symmetric_triple_balance():
    dirs = [(math.cos(a), math.sin(a)) for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    g = _graph(dirs, [1.0, 1.0, 1.0])
    assert junction_balance(g)[0] <= 1e-15
    np.testing.assert_allclose(junction_angles(g.junctions[0]), [120.0, 120.0, 120.0])
    skew = _graph(dirs, [1.0, 1.0, 2.0])
    assert junction_balance(skew)[0] == pytest.approx(0.25)


def test_degree_two_node_is_not_a_junction():
    g = _graph([(1.0, 0.0), (-1.0, 0.0)], [1.0, 1.0])
    assert junction_balance(g) == []


def test_tangent_cone_planar(wide_planar, gl, c0):
    sol = wide_planar
    diag = diagnostics(sol, gl, sol.eps)
    probe = 8 * sol.eps
    graph = extract_interface(density_field(diag, probe), c0, diag, probe)
    pts = graph.interface_points()
    x0 = pts[np.argmin(np.linalg.norm(pts, axis=1))]
    radii = [0.2, 0.4, 0.8]
    cr = tangent_cone_check(graph, x0, [math.radians(5.0)], radii)
    for r, a in zip(radii, cr.min_angle):
        assert a <= math.atan(2 * sol.h / (0.5 * r)) + 1e-12
    assert all(ok for _, _, ok in cr.checks)


def test_tangent_cone_cross(dec, c0):
    eps = 0.025
    g = seed("cross", box_shape((-1.5, 1.5, -1.5, 1.5), eps / 4), dec, eps)
    diag = diagnostics(g, dec, eps)
    probe = 8 * eps
    graph = extract_interface(density_field(diag, probe), c0, diag, probe)
    pts = graph.interface_points()
    x0 = pts[np.argmin(np.linalg.norm(pts - np.array([1.0, 0.0]), axis=1))]
    cr = tangent_cone_check(graph, x0, [math.radians(10.0)], [0.1, 0.2, 0.4])
    assert all(ok for _, _, ok in cr.checks)
    with pytest.raises(InterfaceError):
        tangent_cone_check(graph, (0.0, 0.0), [0.1], [0.2])


def test_level_set(gl):
    wc = well_constants(gl)
    c = constant_grid(gl, 1, n=41, h=0.025)
    st = level_set_stats(c, gl, wc, 1, 0.5 * wc.mu0, energy=0.0)
    assert st.total_length == 0.0 and st.component_lengths == []
    eps = 0.05
    g = seed("planar", box_shape((-0.5, 0.5, -0.5, 0.5), eps / 4), gl, eps, angle=math.pi / 2)
    g.eps = eps
    st = level_set_stats(g, gl, wc, 1, 0.5 * wc.mu0)
    assert st.total_length == pytest.approx(1.0, abs=2 * g.h)
    assert st.total_length == pytest.approx(sum(st.component_lengths))
    assert st.within_bound
    with pytest.raises(InterfaceError):
        level_set_stats(g, gl, wc, 1, 0.8 * wc.mu0)


def test_capped_distance_shape():
    mu0 = 0.4
    t = np.linspace(0, 1, 201)
    w = capped_distance(t, mu0)
    assert np.all(np.diff(w) >= -1e-15)
    np.testing.assert_allclose(w[t <= 0.2], t[t <= 0.2])
    np.testing.assert_allclose(w[t >= 0.4], 0.3)
    # C^1 at both joints
    dw = np.gradient(w, t)
    assert abs(dw[np.searchsorted(t, 0.2)] - 1.0) <= 0.05 and abs(dw[np.searchsorted(t, 0.4)]) <= 0.05


def test_interface_energy_density(wide_planar, gl, c0):
    sol = wide_planar
    d = interface_energy_density(sol, gl, sol.eps, (0.0, 0.2), 0.6, offset=0.2)
    assert d["energy_over_chord"] == pytest.approx(c0, rel=0.02)
