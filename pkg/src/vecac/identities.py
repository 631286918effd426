"""Residual checks of the exact identities satisfied by solutions, and of their asymptotic companions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import (FieldError, RadialScan, ScalarField, annulus_mass, ball_mass, circle_trace,
                     diagnostics, frame_project, polar_annulus_mass)
from .grid import Grid2D
from .potential import Potential, WellConstants, nearest_well_index, well_constants
from .solver import scaled_residual

# eps^2 * sup |residual| accepted as "a solution" by every check below
CONVERGED_TOL = 1e-2
ZETA_MONOTONE_C = 0.1
DISCREPANCY_TOL = 5e-2
STRESS_TOL = 1e-2
POHOZAEV_TOL = 3e-2
ENERGY_RATIO_TOL = 5e-2
POTENTIAL_BOUND_SLACK = 1e-2
CLEARING_DECAY_MAX = 1.0


class IdentityError(ValueError):
    pass


class NotASolution(IdentityError):
    pass


@dataclass
class IdentityReport:
    name: str
    residual: float
    tolerance: float
    scale_note: str
    applicable: bool = True
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": _clean(self.residual),
            "tolerance": _clean(self.tolerance),
            "scale_note": self.scale_note,
            "pass": self.passed,
            "applicable": self.applicable,
            "details": {k: _clean(v) for k, v in self.details.items()},
        }


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def reports_to_json(reports: Sequence[IdentityReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def require_solution(g: Grid2D, p: Potential, eps: float, tol: float = CONVERGED_TOL) -> float:
    res = scaled_residual(g, p, eps)
    if not res <= tol:
        raise NotASolution(f"field is not a converged solution: eps^2 |residual| = {res:.3e} > {tol:.1e}")
    return res


def _require_disk(g: Grid2D, x0, r: float, pad: float) -> None:
    if not g.contains_disk(x0, r + pad):
        raise IdentityError(f"D({tuple(x0)}, {r}) + {pad} is not inside the grid")


def _sq(a: np.ndarray) -> np.ndarray:
    return np.sum(a * a, axis=-1)


# ---------------------------------------------------------------------------
# Pohozaev and the potential bound


def pohozaev_sides(g: Grid2D, p: Potential, eps: float, x0, r: float) -> tuple[float, float]:
    V = ScalarField.like(g, p.eval(g.values))
    lhs = ball_mass(V, x0, r) / (eps * eps)
    ct = circle_trace(g, x0, r)
    integrand = _sq(ct.u_tau) - _sq(ct.u_r) + 2.0 * p.eval(ct.u) / (eps * eps)
    rhs = 0.25 * r * ct.integrate(integrand, r)
    return lhs, rhs


def pohozaev_residual(g: Grid2D, p: Potential, eps: float, x0, r: float,
                      tolerance: float = POHOZAEV_TOL) -> IdentityReport:
    res = require_solution(g, p, eps)
    _require_disk(g, x0, r, 2 * g.h)
    lhs, rhs = pohozaev_sides(g, p, eps, x0, r)
    rel = abs(lhs - rhs) / max(lhs, rhs, 1e-14)
    return IdentityReport("pohozaev", rel, tolerance, "O(h^2)",
                          details={"lhs": lhs, "rhs": rhs, "x0": list(x0), "r": r, "h": g.h,
                                   "eps": eps, "pde_residual": res})


def potential_bound_check(g: Grid2D, p: Potential, eps: float, x0, r: float) -> IdentityReport:
    res = require_solution(g, p, eps)
    _require_disk(g, x0, r, 2 * g.h)
    V = ScalarField.like(g, p.eval(g.values))
    lhs = ball_mass(V, x0, r) / eps
    ct = circle_trace(g, x0, r)
    e = 0.5 * eps * (_sq(ct.u_tau) + _sq(ct.u_r)) + p.eval(ct.u) / eps
    rhs = 0.5 * r * ct.integrate(e, r)
    excess = max(lhs - rhs, 0.0) / max(rhs, 1e-14)
    return IdentityReport("potential_bound", excess, POTENTIAL_BOUND_SLACK, "inequality",
                          details={"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "x0": list(x0),
                                   "r": r, "pde_residual": res})


# ---------------------------------------------------------------------------
# stress tensor


@dataclass
class TestField:
    """X = phi * P with phi a smooth bump supported in D(center, radius)."""

    __test__ = False    # not a pytest class

    name: str
    center: tuple[float, float]
    radius: float
    poly: Callable[[np.ndarray, np.ndarray], tuple]      # (P1, P2)
    poly_jac: Callable[[np.ndarray, np.ndarray], tuple]  # (dP1/dx, dP1/dy, dP2/dx, dP2/dy)

    def jacobian(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """dX_i/dx_j as an array (..., 2, 2)."""
        cx, cy = self.center
        sx, sy = (X - cx) / self.radius, (Y - cy) / self.radius
        s2 = sx * sx + sy * sy
        inside = s2 < 1.0
        q = np.where(inside, 1.0 - s2, 1.0)
        phi = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
        # phi = exp(1 - 1/q), q = 1 - s^2, so grad phi = -2 phi s / (radius q^2)
        fac = np.where(inside, -2.0 * phi / (q * q * self.radius), 0.0)
        dphix, dphiy = fac * sx, fac * sy
        P1, P2 = self.poly(X - cx, Y - cy)
        a, b, c, d = self.poly_jac(X - cx, Y - cy)
        J = np.empty(X.shape + (2, 2))
        J[..., 0, 0] = dphix * P1 + phi * a
        J[..., 0, 1] = dphiy * P1 + phi * b
        J[..., 1, 0] = dphix * P2 + phi * c
        J[..., 1, 1] = dphiy * P2 + phi * d
        return J


def _zeros(x, y):
    return np.zeros_like(x)


def _ones(x, y):
    return np.ones_like(x)


def default_test_fields(g: Grid2D, center=None, radius=None) -> list[TestField]:
    """Dilation, two translations, rotation, shear and a quadratic field on one bump."""
    xmin, xmax, ymin, ymax = g.extent
    if center is None:
        center = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
    if radius is None:
        side = min(xmax - xmin, ymax - ymin)
        radius = min(0.45 * side, 0.5 * side - 2 * g.h)
    Z = _zeros
    O = _ones
    return [
        TestField("dilation", center, radius, lambda x, y: (x, y), lambda x, y: (O(x, y), Z(x, y), Z(x, y), O(x, y))),
        TestField("translation_x1", center, radius, lambda x, y: (O(x, y), Z(x, y)), lambda x, y: (Z(x, y),) * 4),
        TestField("translation_x2", center, radius, lambda x, y: (Z(x, y), O(x, y)), lambda x, y: (Z(x, y),) * 4),
        TestField("rotation", center, radius, lambda x, y: (-y, x), lambda x, y: (Z(x, y), -O(x, y), O(x, y), Z(x, y))),
        TestField("shear", center, radius, lambda x, y: (y, x), lambda x, y: (Z(x, y), O(x, y), O(x, y), Z(x, y))),
        TestField("quadratic", center, radius, lambda x, y: (x * x, x * y), lambda x, y: (2 * x, Z(x, y), y, x)),
    ]


def stress_divergence_residual(g: Grid2D, p: Potential, eps: float,
                               testfields: Sequence[TestField] | None = None,
                               tolerance: float = STRESS_TOL) -> IdentityReport:
    res = require_solution(g, p, eps)
    if testfields is None:
        testfields = default_test_fields(g)
    if len(testfields) == 0:
        raise IdentityError("need at least one test field")
    diag = diagnostics(g, p, eps)
    A = diag.stress
    X, Y = g.mesh()
    xmin, xmax, ymin, ymax = g.extent
    per = {}
    worst = 0.0
    for tf in testfields:
        cx, cy = tf.center
        if (cx - tf.radius <= xmin + g.h or cx + tf.radius >= xmax - g.h
                or cy - tf.radius <= ymin + g.h or cy + tf.radius >= ymax - g.h):
            raise IdentityError(f"support of test field {tf.name} touches the boundary")
        J = tf.jacobian(X, Y)
        integ = float(np.sum(np.einsum("...ij,...ij->...", A, J)) * g.h * g.h)
        norm = float(np.sum(np.linalg.norm(A, axis=(-2, -1)) * np.linalg.norm(J, axis=(-2, -1)))
                     * g.h * g.h)
        val = abs(integ) / norm if norm > 0 else 0.0
        per[tf.name] = val
        worst = max(worst, val)
    return IdentityReport("stress_divergence", worst, tolerance, "O(h^2)",
                          details={"per_field": per, "pde_residual": res})


# ---------------------------------------------------------------------------
# zeta monotonicity


def zeta_monotonicity_report(scan: RadialScan, eps: float, C: float = ZETA_MONOTONE_C,
                             r_safe: float | None = None) -> IdentityReport:
    r = np.asarray(scan.r)
    if r.min() < 4 * eps * (1 - 1e-12):
        raise IdentityError(f"scan radius {r.min()} below 4 eps = {4 * eps}")
    if r_safe is not None and r.max() > r_safe:
        raise IdentityError(f"scan radius {r.max()} beyond the safe radius {r_safe}")
    f = scan.mass_over_r
    # largest f(r0) - f(r1) over r0 < r1: running maximum from the left minus the current value
    run = np.maximum.accumulate(f)
    delta = float(max(np.max(run - f), 0.0))
    return IdentityReport("zeta_monotonicity", delta, C * eps, "O(eps)",
                          details={"C": C, "eps": eps, "delta_over_eps": delta / eps,
                                   "r_min": float(r.min()), "r_max": float(r.max())})


# ---------------------------------------------------------------------------
# discrepancy relation on a strip


def strip_mask(g: Grid2D, strip) -> np.ndarray:
    x0, x1, y0, y1 = strip
    X, Y = g.mesh()
    m = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
    if not m.any():
        raise IdentityError("strip contains no nodes")
    return m


def discrepancy_relation_check(g: Grid2D, p: Potential, eps: float, strip, normal_angle: float,
                               tolerance: float = DISCREPANCY_TOL) -> IdentityReport:
    """Integrated 2 zeta - (mu_perp_perp - mu_par_par) and mu_perp_par over an axis-aligned strip.

    ``strip`` is (xmin, xmax, ymin, ymax); ``normal_angle`` is the direction of
    the interface normal.
    """
    res = require_solution(g, p, eps)
    m = strip_mask(g, strip)
    wc = well_constants(p)
    idx, dist = nearest_well_index(p, g.values[m])
    present = set(np.unique(idx[dist < wc.mu0]).tolist())
    if len(present) >= 3:
        raise IdentityError(f"strip touches {len(present)} wells: it contains a junction")
    diag = diagnostics(g, p, eps)
    gamma = normal_angle - 0.5 * np.pi
    par, perp, cross = frame_project(diag, gamma)
    dA = g.h * g.h
    E = float(np.sum(diag.e_eps[m]) * dA)
    r1 = abs(float(np.sum((2 * diag.zeta_eps - (perp - par))[m]) * dA))
    r2 = abs(float(np.sum(cross[m]) * dA))
    scale = max(E, 1e-300)
    return IdentityReport("discrepancy_relation", max(r1, r2) / scale, tolerance, "-> 0 as eps -> 0",
                          details={"trace_residual": r1 / scale, "offdiag_residual": r2 / scale,
                                   "strip_energy": E, "strip": list(strip), "pde_residual": res})


# ---------------------------------------------------------------------------
# clearing-out


def _sup_distance_to_wells(g: Grid2D, p: Potential, x0, r: float):
    X, Y = g.mesh()
    m = (X - x0[0]) ** 2 + (Y - x0[1]) ** 2 <= r * r
    if not m.any():
        return None, 0.0
    u = g.values[m]
    d = np.linalg.norm(u[:, None, :] - p.wells[None, :, :], axis=-1)   # (n, q)
    sup_per_well = d.max(axis=0)
    i = int(np.argmin(sup_per_well))
    return i, float(sup_per_well[i])


def _roundoff_energy(p: Potential, wc: WellConstants, eps: float, h: float, r: float) -> float:
    """Energy on D(x0, r) of a field that differs from a well only by rounding errors."""
    delta = 4.0 * np.finfo(float).eps * max(1.0, float(np.abs(p.wells).max()))
    density = delta * delta * (wc.lambda_max / eps + 8.0 * eps / (h * h))
    return 100.0 * math.pi * r * r * density


def clearing_out_probe(g: Grid2D, p: Potential, wc: WellConstants, eps: float, x0, r: float,
                       eta: float, decay_max: float = CLEARING_DECAY_MAX) -> IdentityReport:
    if eps > r:
        raise IdentityError("clearing-out probe needs eps <= r")
    _require_disk(g, x0, r, 0.0)
    if not g.contains_disk(x0, r + g.h):
        raise IdentityError("disk plus one cell leaves the grid")
    diag = diagnostics(g, p, eps)
    e = ScalarField.like(g, diag.e_eps)
    E_r = ball_mass(e, x0, r)
    E_58 = ball_mass(e, x0, 5 * r / 8)
    ratio = E_r / r
    details = {"x0": list(x0), "r": r, "eta": eta, "energy": E_r, "energy_over_r": ratio}
    if ratio > eta:
        details["note"] = "not applicable: E/r above eta"
        return IdentityReport("clearing_out", ratio / eta, 1.0, "hypothesis", applicable=False,
                              details=details)
    well, sup = _sup_distance_to_wells(g, p, x0, 0.75 * r)
    floor = _roundoff_energy(p, wc, eps, g.h, r)
    if E_r > floor:
        c_nrg = E_58 / ((eps / r) * E_r)
    else:
        # energies at the level produced by rounding u itself carry no decay information
        c_nrg = 0.0
        details["note"] = "energy at round-off level"
    details["roundoff_floor"] = floor
    details.update({"well": well, "sup_distance": sup, "mu0_half": 0.5 * wc.mu0,
                    "energy_5r8": E_58, "C_nrg": c_nrg, "C_max": decay_max})
    resid = max(sup / (0.5 * wc.mu0), c_nrg / decay_max)
    return IdentityReport("clearing_out", resid, 1.0, "confinement and O(eps/r) decay",
                          applicable=True, details=details)


def interface_energy_density(g: Grid2D, p: Potential, eps: float, x0, r: float,
                             offset: float = 0.0) -> dict:
    """E(D(x0, r)) per unit radius and per unit chord for a disk whose centre sits
    ``offset`` away from a straight interface."""
    if abs(offset) >= r:
        raise IdentityError("disk does not cross the interface")
    diag = diagnostics(g, p, eps)
    E = ball_mass(ScalarField.like(g, diag.e_eps), x0, r)
    chord = 2.0 * math.sqrt(r * r - offset * offset)
    return {"energy": E, "energy_over_r": E / r, "energy_over_chord": E / chord}


def estimate_eta1(g: Grid2D, p: Potential, wc: WellConstants, eps: float, x0, r: float,
                  amplitudes: Sequence[float], target: int | None = None) -> dict:
    """Empirical clearing-out threshold on a disk by bump perturbations toward another well.

    Each perturbation adds a bump of height ``a * mu0`` in the direction of
    sigma_target - sigma, supported in D(x0, r/2). Returns the smallest E/r at
    which confinement on D(x0, 3r/4) fails, and the largest E/r at which it
    still holds.
    """
    well, _ = _sup_distance_to_wells(g, p, x0, 0.75 * r)
    base = p.wells[well]
    others = [j for j in range(p.q) if j != well]
    tgt = p.wells[others[0] if target is None else target]
    unit = (tgt - base) / np.linalg.norm(tgt - base)
    X, Y = g.mesh()
    s2 = ((X - x0[0]) ** 2 + (Y - x0[1]) ** 2) / (0.25 * r * r)
    bump = np.where(s2 < 1, np.exp(1 - 1 / np.where(s2 < 1, 1 - s2, 1.0)), 0.0)
    rows = []
    for a in amplitudes:
        vals = g.values + a * wc.mu0 * bump[..., None] * unit[None, None, :]
        gg = g.with_values(vals)
        diag = diagnostics(gg, p, eps)
        E = ball_mass(ScalarField.like(gg, diag.e_eps), x0, r)
        _, sup = _sup_distance_to_wells(gg, p, x0, 0.75 * r)
        rows.append((float(a), E / r, bool(sup <= 0.5 * wc.mu0)))
    held = [e for _, e, ok in rows if ok]
    failed = [e for _, e, ok in rows if not ok]
    return {"samples": rows,
            "eta1_lower": max(held) if held else None,
            "eta1_upper": min(failed) if failed else None}


# ---------------------------------------------------------------------------
# energy-ratio identity


def energy_ratio_identity(g: Grid2D, p: Potential, eps: float, x0, r_grid: Sequence[float],
                          tolerance: float = ENERGY_RATIO_TOL, r_safe: float | None = None) -> IdentityReport:
    """d/dr (E(D_r)/r) against r^-2 int_D xi + (eps/r) oint |u_r|^2 at midpoints."""
    res = require_solution(g, p, eps)
    r = np.asarray(r_grid, float)
    if r.size < 2 or np.any(np.diff(r) <= 0):
        raise IdentityError("r_grid must be increasing with at least two radii")
    if r.min() < 4 * eps * (1 - 1e-12):
        raise IdentityError(f"radius {r.min()} below 4 eps")
    if r_safe is not None and r.max() > r_safe:
        raise IdentityError("radius beyond the safe radius")
    _require_disk(g, x0, float(r.max()), 2 * g.h)
    diag = diagnostics(g, p, eps)
    e = ScalarField.like(g, diag.e_eps)
    xi = ScalarField.like(g, diag.xi_eps)
    # masses at successive radii differ by polar annulus integrals, which are smooth in r
    mass = ball_mass(e, x0, float(r[0])) + np.concatenate(
        [[0.0], np.cumsum([polar_annulus_mass(e, x0, a, b) for a, b in zip(r[:-1], r[1:])])])
    ratio = mass / r
    lhs = np.diff(ratio) / np.diff(r)
    rm = 0.5 * (r[1:] + r[:-1])
    rhs = np.empty_like(rm)
    scale = np.empty_like(rm)
    for i, ri in enumerate(rm):
        ct = circle_trace(g, x0, ri)
        rhs[i] = ball_mass(xi, x0, ri) / ri**2 + (eps / ri) * ct.integrate(_sq(ct.u_r), ri)
        scale[i] = ball_mass(e, x0, ri) / ri**2
    denom = max(float(np.max(scale)), 1e-300)
    resid = float(np.max(np.abs(lhs - rhs))) / denom if np.max(scale) > 0 else 0.0
    return IdentityReport("energy_ratio", resid, tolerance, "O(h^2) + O(dr^2)",
                          details={"r_mid": rm, "lhs": lhs, "rhs": rhs, "pde_residual": res})


def refinement_order(res_coarse: float, res_fine: float, factor: float = 2.0) -> float:
    if res_fine <= 0 or res_coarse <= 0:
        return float("nan")
    return math.log(res_coarse / res_fine) / math.log(factor)


__all__ = [
    "IdentityReport", "IdentityError", "NotASolution", "TestField", "CONVERGED_TOL",
    "pohozaev_residual", "pohozaev_sides", "potential_bound_check", "stress_divergence_residual",
    "default_test_fields", "zeta_monotonicity_report", "discrepancy_relation_check",
    "clearing_out_probe", "interface_energy_density", "estimate_eta1", "energy_ratio_identity",
    "refinement_order", "reports_to_json", "require_solution", "annulus_mass", "FieldError",
]
