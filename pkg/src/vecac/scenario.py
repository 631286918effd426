"""Scenario files: parsing, per-eps member runs and the sweep-level trend checks."""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import identities as idt
from .fields import ScalarField, diagnostics, radial_scan
from .grid import Grid2D, write_vac1
from .interface import (InterfaceError, arc_direction, density_field, extract_interface,
                        junction_angles, junction_balance, level_set_stats, tangent_cone_check)
from .potential import Potential, PotentialError, from_definition, well_constants
from .profile1d import transition_energy
from .solver import SolveConfig, check_resolution, seed, solve

log = logging.getLogger(__name__)

KNOWN_CHECKS = ("pohozaev", "potential_bound", "stress", "zeta_monotonicity", "discrepancy",
                "energy_ratio", "clearing_out", "interface", "level_set")


class ScenarioError(ValueError):
    pass


def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ScenarioError(f"cannot parse {what}: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ScenarioError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"not a boolean: {text!r}")


def _points(text: str, what: str) -> list[tuple[float, float, float]]:
    """'x, y, r; x, y, r' -> list of disks."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            out.append(tuple(_floats(chunk, 3, what)))
    return out


@dataclass
class Scenario:
    name: str
    potential: Potential
    seed_kind: str
    seed_params: dict
    box: tuple[float, float, float, float]
    eps_list: list[float]
    eps_over_h: float | None
    nx: int | None
    ny: int | None
    periodic: tuple[bool, bool]
    solver: dict
    field_mode: str                  # "solve" or "seed"
    checks: list[str]
    params: dict = field(default_factory=dict)   # section -> dict of raw strings
    source: str = ""

    def grid_shape(self, eps: float) -> dict:
        x0, x1, y0, y1 = self.box
        if self.eps_over_h is not None:
            h = eps / self.eps_over_h
            nx = int(round((x1 - x0) / h)) + 1
            ny = int(round((y1 - y0) / h)) + 1
            if abs((nx - 1) * h - (x1 - x0)) > 1e-9 * (x1 - x0) or abs((ny - 1) * h - (y1 - y0)) > 1e-9 * (y1 - y0):
                raise ScenarioError(f"box is not a whole number of cells at h = {h}")
        else:
            nx, ny = self.nx, self.ny
            h = (x1 - x0) / (nx - 1)
            if abs((y1 - y0) / (ny - 1) - h) > 1e-12 * h:
                raise ScenarioError("nx, ny do not give square cells on this box")
        return {"nx": nx, "ny": ny, "h": h, "origin": (x0, y0), "periodic": self.periodic}

    def section(self, name: str) -> dict:
        return self.params.get(name, {})


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(text, source=str(path))


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    for req in ("scenario", "potential", "grid", "sweep", "seed"):
        if not cp.has_section(req):
            raise ScenarioError(f"missing section [{req}]")
    sc = cp["scenario"]
    try:
        pot = from_definition(dict(cp["potential"]))
    except (PotentialError, KeyError) as exc:
        raise ScenarioError(f"bad potential: {exc}") from exc
    g = cp["grid"]
    if "box" not in g:
        raise ScenarioError("[grid] needs box = xmin, xmax, ymin, ymax")
    box = tuple(_floats(g["box"], 4, "box"))
    if not (box[1] > box[0] and box[3] > box[2]):
        raise ScenarioError("box must have xmax > xmin and ymax > ymin")
    eps_over_h = float(g["eps_over_h"]) if "eps_over_h" in g else None
    nx = int(g["nx"]) if "nx" in g else None
    ny = int(g["ny"]) if "ny" in g else None
    if eps_over_h is None and (nx is None or ny is None):
        raise ScenarioError("[grid] needs eps_over_h or both nx and ny")
    bc = g.get("bc", "dirichlet").strip().lower()
    if bc == "dirichlet":
        periodic = (False, False)
    elif bc == "periodic":
        flags = [_bool(t) for t in g.get("periodic", "true, false").split(",")]
        if len(flags) != 2:
            raise ScenarioError("periodic needs two flags")
        periodic = (flags[0], flags[1])
    else:
        raise ScenarioError(f"unknown bc {bc!r}")
    eps_list = _floats(cp["sweep"].get("eps", ""), None, "eps list")
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ScenarioError("eps list must be non-empty and positive")
    sd = cp["seed"]
    kind = sd.get("kind", "").strip()
    if kind not in ("planar", "cross", "triple_junction", "random", "constant"):
        raise ScenarioError(f"unknown seed kind {kind!r}")
    sp = {}
    if "angle_deg" in sd:
        sp["angle"] = math.radians(float(sd["angle_deg"]))
    if "rotation_deg" in sd:
        sp["rotation"] = math.radians(float(sd["rotation_deg"]))
    if "center" in sd:
        sp["center"] = tuple(_floats(sd["center"], 2, "center"))
    if "amplitude" in sd:
        sp["amplitude"] = float(sd["amplitude"])
    if "well" in sd:
        sp["well"] = int(sd["well"])
    if kind == "random":
        sp["rng_seed"] = int(sd.get("rng_seed", os.environ.get("VECAC_SEED", "0")))
    solver = dict(cp["solver"]) if cp.has_section("solver") else {}
    mode = solver.pop("field", "solve").strip()
    if mode not in ("solve", "seed"):
        raise ScenarioError("[solver] field must be 'solve' or 'seed'")
    for key in solver:
        if key not in ("tol", "max_iters", "dt_safety", "newton_switch_tol", "semi_implicit"):
            raise ScenarioError(f"unknown solver key {key!r}")
    checks = []
    if cp.has_section("checks"):
        checks = [c.strip() for c in cp["checks"].get("enabled", "").split(",") if c.strip()]
    bad = [c for c in checks if c not in KNOWN_CHECKS]
    if bad:
        raise ScenarioError(f"unknown checks {bad}")
    params = {s: dict(cp[s]) for s in cp.sections()}
    return Scenario(name=sc.get("name", "scenario"), potential=pot, seed_kind=kind, seed_params=sp,
                    box=box, eps_list=eps_list, eps_over_h=eps_over_h, nx=nx, ny=ny,
                    periodic=periodic, solver=solver, field_mode=mode, checks=checks,
                    params=params, source=source)


def solve_config(sc: Scenario, eps: float) -> SolveConfig:
    kw = {}
    for key, conv in (("tol", float), ("max_iters", int), ("dt_safety", float),
                      ("newton_switch_tol", float), ("semi_implicit", _bool)):
        if key in sc.solver:
            kw[key] = conv(sc.solver[key])
    return SolveConfig(eps=eps, **kw)


def validate_resolution(sc: Scenario, allow_underresolved: bool) -> None:
    for eps in sc.eps_list:
        h = sc.grid_shape(eps)["h"]
        if eps < 2 * h and not allow_underresolved:
            raise ScenarioError(f"eps={eps} < 2h={2 * h}; pass --allow-underresolved to run anyway")


def member_field(sc: Scenario, eps: float, h_factor: float = 1.0) -> Grid2D:
    """Seed, and unless the scenario asks for the seed itself, solve."""
    shape = sc.grid_shape(eps)
    if h_factor != 1.0:
        x0, x1, y0, y1 = sc.box
        h = shape["h"] / h_factor
        shape = {**shape, "h": h, "nx": int(round((x1 - x0) / h)) + 1, "ny": int(round((y1 - y0) / h)) + 1}
    check_resolution(shape["h"], eps, allow=True)
    g = seed(sc.seed_kind, shape, sc.potential, eps, **sc.seed_params)
    if sc.field_mode == "seed":
        return g
    sol, _ = solve(g, sc.potential, solve_config(sc, eps))
    return sol


# ---------------------------------------------------------------------------
# checks on one member


def _center(sc: Scenario) -> tuple[float, float]:
    x0, x1, y0, y1 = sc.box
    return (0.5 * (x0 + x1), 0.5 * (y0 + y1))


def _xy(sec: dict, key: str, default):
    return tuple(_floats(sec[key], 2, key)) if key in sec else default


def _dist_to_boundary(sc: Scenario, x) -> float:
    x0, x1, y0, y1 = sc.box
    return min(x[0] - x0, x1 - x[0], x[1] - y0, y1 - x[1])


def _transition_c0(p: Potential) -> float:
    """Smallest straight-segment transition energy over nearest-neighbour well pairs."""
    w = p.wells
    d = np.linalg.norm(w[:, None] - w[None], axis=-1)
    dmin = d[d > 0].min()
    vals = []
    for i in range(p.q):
        for j in range(i + 1, p.q):
            if d[i, j] <= dmin * (1 + 1e-9):
                vals.append(transition_energy(p, w[i], w[j], crosscheck_eps=None))
    return float(min(vals))


def _not_applicable(name: str, why: str) -> idt.IdentityReport:
    return idt.IdentityReport(name, 0.0, 0.0, "precondition", applicable=False, details={"note": why})


def run_checks(sc: Scenario, g: Grid2D, eps: float, outdir: Path | None = None) -> tuple[list, dict]:
    """All enabled checks on one field; returns (reports, measurements)."""
    p = sc.potential
    wc = well_constants(p)
    reports: list[idt.IdentityReport] = []
    meas: dict = {"eps": eps, "h": g.h, "nx": g.nx, "ny": g.ny}
    ctr = _center(sc)
    diag = diagnostics(g, p, eps)
    if outdir is not None:
        write_vac1(outdir / "field.vac1", g.values, g.h, eps)
        diag.to_vac1(outdir / "diagnostics.vac1")

    if "pohozaev" in sc.checks:
        s = sc.section("pohozaev")
        x0 = _xy(s, "x0", ctr)
        r = float(s.get("r", 0.25 * min(sc.box[1] - sc.box[0], sc.box[3] - sc.box[2])))
        reports.append(idt.pohozaev_residual(g, p, eps, x0, r))
    if "potential_bound" in sc.checks:
        s = sc.section("potential_bound")
        for x, y, r in _points(s.get("disks", f"{ctr[0]}, {ctr[1]}, 0.25"), "disks"):
            reports.append(idt.potential_bound_check(g, p, eps, (x, y), r))
    if "stress" in sc.checks:
        reports.append(idt.stress_divergence_residual(g, p, eps))
    if "zeta_monotonicity" in sc.checks or "energy_ratio" in sc.checks:
        s = sc.section("scan")
        x0 = _xy(s, "x0", ctr)
        r_max = float(s.get("r_max", 0.5 * _dist_to_boundary(sc, x0)))
        n_r = int(s.get("n_r", 32))
        zeta = ScalarField.like(g, diag.zeta_eps)
        if "zeta_monotonicity" in sc.checks:
            scan = radial_scan(zeta, x0, 4 * eps, r_max, n_r)
            rep = idt.zeta_monotonicity_report(scan, eps, r_safe=0.5 * _dist_to_boundary(sc, x0) * (1 + 1e-12))
            reports.append(rep)
            meas["zeta_delta"] = rep.residual
            if outdir is not None:
                scan.to_csv(outdir / "scan_zeta.csv")
                radial_scan(ScalarField.like(g, diag.e_eps), x0, 4 * eps, r_max, n_r).to_csv(
                    outdir / "scan_energy.csv")
        if "energy_ratio" in sc.checks:
            dr = 4 * g.h
            radii = np.arange(4 * eps, r_max + 1e-12, dr)
            reports.append(idt.energy_ratio_identity(g, p, eps, x0, radii))
    if "discrepancy" in sc.checks:
        s = sc.section("discrepancy")
        strip = tuple(_floats(s["strip"], 4, "strip")) if "strip" in s else None
        if strip is None:
            raise ScenarioError("[discrepancy] needs strip = xmin, xmax, ymin, ymax")
        angle = math.radians(float(s.get("normal_deg", math.degrees(sc.seed_params.get("angle", math.pi / 2)))))
        try:
            rep = idt.discrepancy_relation_check(g, p, eps, strip, angle)
            meas["discrepancy"] = rep.residual
        except idt.IdentityError as exc:
            rep = _not_applicable("discrepancy_relation", str(exc))
        reports.append(rep)
    if "clearing_out" in sc.checks:
        s = sc.section("clearing_out")
        eta = float(s.get("eta", 0.1))
        for x, y, r in _points(s.get("well_disks", ""), "well_disks"):
            reports.append(idt.clearing_out_probe(g, p, wc, eps, (x, y), r, eta))
        crossing = []
        for x, y, r in _points(s.get("interface_disks", ""), "interface_disks"):
            rep = idt.clearing_out_probe(g, p, wc, eps, (x, y), r, eta)
            reports.append(rep)
            # distance of the disk centre from the seeded straight interface
            ang = sc.seed_params.get("angle", math.pi / 2)
            cx, cy = sc.seed_params.get("center", (0.0, 0.0))
            off = abs((x - cx) * math.cos(ang) + (y - cy) * math.sin(ang))
            crossing.append(idt.interface_energy_density(g, p, eps, (x, y), r, offset=off))
        meas["interface_disks"] = crossing
        if "eta1_disk" in s:
            x, y, r = _floats(s["eta1_disk"], 3, "eta1_disk")
            amps = _floats(s.get("eta1_amplitudes", "0.1, 0.2, 0.3, 0.4, 0.45, 0.55, 0.6, 0.8, 1.0, 1.5"))
            est = idt.estimate_eta1(g, p, wc, eps, (x, y), r, amps)
            meas["eta1"] = {"disk": [x, y, r], **est}
    if "interface" in sc.checks:
        reports.extend(_interface_checks(sc, g, diag, eps, meas, outdir))
    if "level_set" in sc.checks:
        s = sc.section("level_set")
        well = int(s.get("well", 0))
        level = float(s.get("level_over_mu0", 0.5)) * wc.mu0
        st = level_set_stats(g, p, wc, well, level, energy=float(np.sum(diag.e_eps) * g.h * g.h))
        meas["level_set"] = st.to_dict()
        reports.append(idt.IdentityReport("level_set_bound", st.total_length / st.bound, 1.0, "coarea bound",
                                          details=st.to_dict()))
    return reports, meas


def _interface_checks(sc: Scenario, g: Grid2D, diag, eps: float, meas: dict, outdir) -> list:
    s = sc.section("interface")
    probe = float(s.get("probe_over_eps", 8.0)) * eps
    c0 = _transition_c0(sc.potential)
    eta = float(s.get("eta_over_c0", 1.0)) * c0
    theta = density_field(diag, probe)
    graph = extract_interface(theta, eta, diag, probe)
    graph2 = extract_interface(theta, 1.1 * eta, diag, probe)
    if outdir is not None:
        (outdir / "interface.json").write_text(graph.to_json() + "\n")
    out = []
    L1, L2 = graph.total_length, graph2.total_length
    out.append(idt.IdentityReport("interface_stability", abs(L2 - L1) / max(L1, 1e-300), 0.1,
                                  "threshold eta vs 1.1 eta", details={"length": L1, "length_1p1": L2}))
    zeta_mass = float(np.sum(diag.zeta_eps) * g.h * g.h)
    dens = [a.density for a in graph.arcs]
    if dens:
        lhs = L1 * min(dens)
        out.append(idt.IdentityReport("length_mass_bound", lhs / (2 * zeta_mass), 1.0, "length x density <= 2 zeta mass",
                                      details={"lhs": lhs, "rhs": 2 * zeta_mass}))
    summary = {"arcs": len(graph.arcs), "junction_degrees": [j.degree for j in graph.junctions],
               "arc_densities": dens, "c0": c0}
    if "expect_arcs" in s:
        n = int(s["expect_arcs"])
        out.append(idt.IdentityReport("arc_count", float(abs(len(graph.arcs) - n)), 0.0, "exact",
                                      details={"found": len(graph.arcs), "expected": n}))
    if "expect_orientation_deg" in s and graph.arcs:
        want = float(s["expect_orientation_deg"])
        errs = []
        for a in graph.arcs:
            d = arc_direction(a)
            ang = math.degrees(math.atan2(d[1], d[0])) % 180.0
            errs.append(min(abs(ang - want % 180.0), 180.0 - abs(ang - want % 180.0)))
        out.append(idt.IdentityReport("arc_orientation", max(errs), float(s.get("orientation_tol_deg", 2.0)),
                                      "degrees", details={"errors_deg": errs}))
    if "expect_degree" in s:
        deg = int(s["expect_degree"])
        degs = [j.degree for j in graph.junctions]
        out.append(idt.IdentityReport("junction_degree", 0.0 if degs == [deg] else 1.0, 0.0, "exact",
                                      details={"found": degs, "expected": [deg]}))
        if degs == [deg]:
            j = graph.junctions[0]
            gaps = junction_angles(j)
            want = 360.0 / deg
            out.append(idt.IdentityReport("junction_angles", float(np.max(np.abs(gaps - want))),
                                          float(s.get("angle_tol_deg", 3.0)), "degrees",
                                          details={"angles_deg": gaps, "position": j.position}))
            bal = junction_balance(graph)[0]
            out.append(idt.IdentityReport("junction_balance", bal, float(s.get("balance_tol", 0.05)),
                                          "-> 0", details={"densities": j.densities}))
            th = np.asarray(j.densities)
            summary["density_spread"] = float((th.max() - th.min()) / th.mean())
            if "density_tol" in s:
                out.append(idt.IdentityReport("junction_equal_densities", summary["density_spread"],
                                              float(s["density_tol"]), "relative spread"))
    if "cone_x0" in s:
        x0 = _floats(s["cone_x0"], 2, "cone_x0")
        radii = [k * probe for k in _floats(s.get("cone_radii_over_probe", "0.5, 1, 2"))]
        theta_max = math.radians(float(s.get("cone_theta_deg", 10.0)))
        try:
            pts = graph.interface_points()
            if len(pts) == 0:
                raise InterfaceError("no interface")
            x0 = pts[np.argmin(np.linalg.norm(pts - np.asarray(x0), axis=1))]
            cr = tangent_cone_check(graph, x0, [theta_max], radii)
            out.append(idt.IdentityReport("tangent_cone", max(cr.min_angle) / theta_max, 1.0,
                                          "cone half-angle / theta", details=cr.to_dict()))
        except InterfaceError as exc:
            out.append(_not_applicable("tangent_cone", str(exc)))
    meas["interface"] = summary
    return out


# ---------------------------------------------------------------------------
# sweep


@dataclass
class MemberResult:
    eps: float
    reports: list
    measurements: dict
    error: str | None = None


def run_member(sc: Scenario, eps: float, outdir: Path | None) -> MemberResult:
    mdir = None
    if outdir is not None:
        mdir = outdir / f"eps_{eps:g}"
        mdir.mkdir(parents=True, exist_ok=True)
    g = member_field(sc, eps)
    reports, meas = run_checks(sc, g, eps, mdir)
    if mdir is not None:
        (mdir / "identities.json").write_text(idt.reports_to_json(reports) + "\n")
        (mdir / "measurements.json").write_text(json.dumps(idt._clean(meas), indent=2) + "\n")
    return MemberResult(eps=eps, reports=reports, measurements=meas)


TREND_MIN_DROP = 1e-9


def _trend_report(name: str, eps_vals, vals) -> idt.IdentityReport:
    """Values ordered by decreasing eps must strictly decrease.

    The residual is the largest ratio v[i+1] / v[i]; the check passes when
    every step shrinks by more than TREND_MIN_DROP relative, which is far above
    the round-off of a disk or strip integral.
    """
    order = np.argsort(-np.asarray(eps_vals))
    v = np.asarray(vals, float)[order]
    ratios = [float(b / a) if a > 0 else (0.0 if b == 0 else float("inf")) for a, b in zip(v[:-1], v[1:])]
    worst = max(ratios) if ratios else 0.0
    all_zero = bool(np.all(v == 0))
    return idt.IdentityReport(name, 0.0 if all_zero else worst, 1.0 - TREND_MIN_DROP, "decreasing as eps decreases",
                              details={"eps": np.asarray(eps_vals)[order], "values": v, "ratios": ratios})


def sweep_reports(sc: Scenario, members: list[MemberResult]) -> list:
    out = []
    eps = [m.eps for m in members]
    if len(members) < 2:
        return out
    if all("zeta_delta" in m.measurements for m in members):
        out.append(_trend_report("zeta_monotonicity_trend", eps, [m.measurements["zeta_delta"] for m in members]))
    if all("discrepancy" in m.measurements for m in members):
        out.append(_trend_report("discrepancy_trend", eps, [m.measurements["discrepancy"] for m in members]))
    if all(m.measurements.get("interface_disks") for m in members):
        c0 = _transition_c0(sc.potential)
        dev = [max(abs(d["energy_over_chord"] - c0) / c0 for d in m.measurements["interface_disks"])
               for m in members]
        out.append(_trend_report("interface_energy_trend", eps, dev))
        tol = float(sc.section("clearing_out").get("c0_rtol", 0.05))
        out.append(idt.IdentityReport("interface_energy_near_c0", max(dev), tol, "E/chord vs c0",
                                      details={"c0": c0, "deviation": dev}))
    return out


def run_scenario(sc: Scenario, outdir, threads: int = 1) -> tuple[list[MemberResult], list]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            members = list(ex.map(lambda e: run_member(sc, e, outdir), sc.eps_list))
    else:
        members = [run_member(sc, e, outdir) for e in sc.eps_list]
    trends = sweep_reports(sc, members)
    summary = {
        "scenario": sc.name,
        "members": [{"eps": m.eps, "pass": all(r.passed for r in m.reports if r.applicable),
                     "failed": [r.name for r in m.reports if r.applicable and not r.passed]}
                    for m in members],
        "trends": [r.to_dict() for r in trends],
    }
    (outdir / "summary.json").write_text(json.dumps(idt._clean(summary), indent=2) + "\n")
    return members, trends


def all_passed(members: list[MemberResult], trends: list) -> bool:
    reps = [r for m in members for r in m.reports] + list(trends)
    return all(r.passed for r in reps if r.applicable)


# ---------------------------------------------------------------------------
# refinement study


EXACT_CHECKS = ("pohozaev", "stress", "energy_ratio")


def convergence_study(sc: Scenario, levels: int, outdir=None, eps: float | None = None) -> list[dict]:
    """Exact-identity residuals on successively halved h; observed orders between levels."""
    if levels < 2:
        raise ScenarioError("a convergence study needs at least 2 levels")
    eps = sc.eps_list[0] if eps is None else eps
    s = sc.section("converge")
    box = tuple(_floats(s["box"], 4, "box")) if "box" in s else sc.box
    sub = Scenario(**{**sc.__dict__, "box": box,
                      "field_mode": s.get("field", sc.field_mode).strip(),
                      "checks": [c for c in sc.checks if c in EXACT_CHECKS]})
    if not sub.checks:
        raise ScenarioError("scenario enables none of the exact identities " + ", ".join(EXACT_CHECKS))
    rows = []
    prev = {}
    for lvl in range(levels):
        g = member_field(sub, eps, h_factor=2.0**lvl)
        reps, _ = run_checks(sub, g, eps, None)
        for r in reps:
            if r.name not in ("pohozaev", "stress_divergence", "energy_ratio"):
                continue
            order = idt.refinement_order(prev[r.name], r.residual) if r.name in prev else float("nan")
            rows.append({"check": r.name, "level": lvl, "h": g.h, "residual": r.residual,
                         "observed_order": order})
            prev[r.name] = r.residual
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with (outdir / "convergence.csv").open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["check", "level", "h", "residual", "observed_order"])
            for row in rows:
                wr.writerow([row["check"], row["level"], repr(row["h"]), repr(row["residual"]),
                             repr(row["observed_order"])])
    return rows
