from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecac.potential import (Potential, PotentialError, affine, builtin, derive_constants, from_definition,
                             nearest_well, validate_hypotheses, well_constants, well_eigenvalues)

NAMES = ("scalar_gl", "vector_gl_decoupled", "triple_well_equilateral")


def fd_grad(p, y, step=1e-5):
    out = np.empty_like(y)
    for c in range(p.dim_k):
        e = np.zeros(p.dim_k)
        e[c] = step
        out[..., c] = (p.eval(y + e) - p.eval(y - e)) / (2 * step)
    return out


def fd_hess(p, y, step=1e-5):
    out = np.empty(y.shape + (p.dim_k,))
    for c in range(p.dim_k):
        e = np.zeros(p.dim_k)
        e[c] = step
        out[..., :, c] = (p.grad(y + e) - p.grad(y - e)) / (2 * step)
    return out


def quadratic_single_well():
    return Potential(name="single", dim_k=2, eval=lambda y: np.sum(y * y, axis=-1),
                     grad=lambda y: 2 * y,
                     hess=lambda y: np.broadcast_to(2 * np.eye(2), y.shape[:-1] + (2, 2)).copy(),
                     vacuum=((0.0, 0.0),))


def test_scalar_gl_hypotheses():
    p = builtin("scalar_gl")
    rep = validate_hypotheses(p)
    assert rep.h1_ok and rep.h2_ok and rep.h3_ok
    assert sorted(p.wells[:, 0]) == [-1.0, 1.0]
    assert rep.sampled_radius >= 10.0


def test_single_well_rejected():
    with pytest.raises(PotentialError):
        validate_hypotheses(quadratic_single_well())


def test_triple_well_cube_roots():
    p = builtin("triple_well_equilateral")
    rep = validate_hypotheses(p)
    assert rep.h1_ok
    z = p.wells[:, 0] + 1j * p.wells[:, 1]
    np.testing.assert_allclose(z**3, 1.0, atol=1e-12)
    ang = np.sort(np.mod(np.degrees(np.angle(z)), 360.0))
    np.testing.assert_allclose(ang, [0.0, 120.0, 240.0], atol=1e-9)
    # eigenvalues at the wells against a finite-difference Hessian of V itself
    for s in p.wells:
        H = np.empty((2, 2))
        d = 1e-4
        for i in range(2):
            for j in range(2):
                ei, ej = np.eye(2)[i] * d, np.eye(2)[j] * d
                H[i, j] = (p.eval(s + ei + ej) - p.eval(s + ei - ej) - p.eval(s - ei + ej)
                           + p.eval(s - ei - ej)) / (4 * d * d)
        np.testing.assert_allclose(np.linalg.eigvalsh(H), np.linalg.eigvalsh(p.hess(s)), rtol=1e-6)


def test_triple_well_matches_formula():
    p = builtin("triple_well_equilateral")
    rng = np.random.default_rng(1)
    y = rng.uniform(-2, 2, size=(50, 2))
    z = y[:, 0] + 1j * y[:, 1]
    np.testing.assert_allclose(p.eval(y), np.abs(z**3 - 1) ** 2 / 9, rtol=1e-12)


def test_gl_constants():
    wc = derive_constants(builtin("scalar_gl"))
    assert wc.lambda0 == pytest.approx(2.0, abs=1e-12)
    assert wc.lambda_max == pytest.approx(2.0, abs=1e-12)
    assert wc.R0 == pytest.approx(1.0)
    assert 0 < wc.mu0 <= 0.5
    assert wc.beta_inf > 0


def test_decoupled_wells():
    p = builtin("vector_gl_decoupled")
    assert p.q == 4 and p.dim_k == 2
    assert {tuple(w) for w in p.wells} == {(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)}
    y = np.array([0.3, -0.7])
    assert p.eval(y) == pytest.approx(0.25 * ((1 - 0.09) ** 2 + (1 - 0.49) ** 2))


@pytest.mark.parametrize("name", NAMES)
def test_scaling_law(name):
    p = builtin(name)
    q = affine(p, scale=3.0)
    a, b = derive_constants(p), derive_constants(q)
    assert b.lambda0 == pytest.approx(3 * a.lambda0, rel=1e-10)
    assert b.alpha0 == pytest.approx(3 * a.alpha0, rel=1e-10)
    assert b.mu0 == pytest.approx(a.mu0, rel=1e-12)


@pytest.mark.parametrize("name", NAMES)
def test_gradient_and_hessian_consistency(name):
    p = builtin(name)
    wc = well_constants(p)
    rng = np.random.default_rng(7)
    y = rng.uniform(-2 * wc.R0, 2 * wc.R0, size=(1000, p.dim_k))
    g = p.grad(y)
    err = np.linalg.norm(g - fd_grad(p, y), axis=-1) / np.maximum(1.0, np.linalg.norm(g, axis=-1))
    assert err.max() <= 1e-5
    H = p.hess(y)
    errh = np.linalg.norm(H - fd_hess(p, y), axis=(-2, -1)) / np.maximum(1.0, np.linalg.norm(H, axis=(-2, -1)))
    assert errh.max() <= 1e-5


@pytest.mark.parametrize("name", NAMES)
def test_well_constant_invariants(name):
    p = builtin(name)
    wc = well_constants(p)
    eig = well_eigenvalues(p)
    rng = np.random.default_rng(3)
    w = p.wells
    # disjoint balls B(sigma, 2 mu0)
    d = np.linalg.norm(w[:, None] - w[None, :], axis=-1)
    assert d[~np.eye(p.q, dtype=bool)].min() > 4 * wc.mu0
    for i, s in enumerate(w):
        lo, hi = eig[i]
        dirs = rng.normal(size=(400, p.dim_k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        y = s + dirs * (2 * wc.mu0 * rng.uniform(0, 1, size=(400, 1)))
        t2 = np.sum((y - s) ** 2, axis=-1)
        V = p.eval(y)
        assert np.all(0.25 * lo * t2 <= V + 1e-15)
        assert np.all(V <= hi * t2 + 1e-15)
        gd = np.sum(p.grad(y) * (y - s), axis=-1)
        assert np.all(0.5 * lo * t2 <= gd + 1e-15)
        assert np.all(gd <= 2 * hi * t2 + 1e-15)
        ev = np.linalg.eigvalsh(p.hess(y))
        assert ev.min() >= 0.5 * lo - 1e-12 and ev.max() <= 2 * hi + 1e-12
    # V >= alpha0 away from the wells
    y = rng.uniform(-2 * wc.R0, 2 * wc.R0, size=(5000, p.dim_k))
    far = np.min(np.linalg.norm(y[:, None] - w[None], axis=-1), axis=1) >= wc.mu0
    assert np.all(p.eval(y[far]) >= wc.alpha0)
    # quadratic growth beyond 2 R0
    dirs = rng.normal(size=(500, p.dim_k))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    y = dirs * rng.uniform(2 * wc.R0, 10 * wc.R0, size=(500, 1))
    assert np.all(p.eval(y) >= wc.beta_inf * np.sum(y * y, axis=-1))


def test_nearest_well_examples():
    p = builtin("scalar_gl")
    wc = well_constants(p)
    s, b = nearest_well(p, wc, [1.0])
    assert s[0] == 1.0 and b == 0.0
    s, b = nearest_well(p, wc, [0.99])
    assert s[0] == 1.0
    assert b == pytest.approx(np.sqrt(2.0 * (1 - 0.99**2) ** 2 / 4))
    assert nearest_well(p, wc, [0.0]) is None
    assert nearest_well(p, wc, [5.0]) is None


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(NAMES), st.integers(0, 3), st.floats(0, 1), st.floats(-np.pi, np.pi))
def test_nearest_well_bound_holds(name, well, frac, ang):
    p = builtin(name)
    wc = well_constants(p)
    s0 = p.wells[well % p.q]
    d = np.array([np.cos(ang), np.sin(ang)])[: p.dim_k]
    if p.dim_k == 1:
        d = np.array([1.0 if ang >= 0 else -1.0])
    y = s0 + 1.5 * wc.mu0 * frac * d
    out = nearest_well(p, wc, y)
    if out is None:
        assert p.eval(y) >= wc.alpha0
        return
    s, bound = out
    assert np.linalg.norm(y - s) <= wc.mu0 + 1e-12
    assert np.linalg.norm(y - s) <= bound + 1e-12


def test_builtin_unknown():
    with pytest.raises(PotentialError):
        builtin("mexican_hat")


def test_from_definition_components_and_affine():
    p = from_definition({"components": "scalar_gl, scalar_gl"})
    q = builtin("vector_gl_decoupled")
    y = np.random.default_rng(0).uniform(-2, 2, size=(20, 2))
    np.testing.assert_allclose(p.eval(y), q.eval(y), rtol=1e-14)
    r = from_definition({"name": "scalar_gl", "scale": "2", "shift": "0.5"})
    # y -> 2 V(y + 0.5): wells at sigma - 0.5
    assert sorted(r.wells[:, 0]) == pytest.approx([-1.5, 0.5])
    assert r.eval(np.array([-0.5])) == pytest.approx(2 * 0.25)
    with pytest.raises(PotentialError):
        from_definition({"scale": "2"})


def test_rejects_bad_vacuum():
    bad = Potential(name="bad", dim_k=1, eval=lambda y: (1 - y[..., 0] ** 2) ** 2 / 4 + 0.1,
                    grad=lambda y: -y * (1 - y**2), hess=lambda y: (3 * y**2 - 1)[..., None],
                    vacuum=((-1.0,), (1.0,)))
    with pytest.raises(PotentialError):
        validate_hypotheses(bad)
