"""Discrete concentration set: density field, skeleton graph, junction balance and level sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.signal import fftconvolve
from skimage.measure import approximate_polygon, find_contours
from skimage.morphology import skeletonize

from .fields import DiagnosticSet, ScalarField, disk_kernel
from .grid import Grid2D, discrete_energy
from .potential import Potential, WellConstants

DEFAULT_PROBE_FACTOR = 8.0

_NEIGH = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class InterfaceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# density


def density_field(diag: DiagnosticSet, probe_r: float | None = None,
                  density: str = "e_eps") -> ScalarField:
    """theta(x) = mass of the density over D(x, probe_r), divided by probe_r.

    Nodes whose probe disk (plus one cell) leaves the grid are NaN.
    """
    if probe_r is None:
        probe_r = DEFAULT_PROBE_FACTOR * diag.eps
    if probe_r < 4 * diag.eps * (1 - 1e-12):
        raise InterfaceError(f"probe_r={probe_r} below 4 eps")
    f = diag.field(density)
    K = disk_kernel(diag.h, probe_r)
    mass = fftconvolve(f.values, K, mode="same") * diag.h * diag.h
    theta = mass / probe_r
    m = int(math.ceil((probe_r + diag.h) / diag.h - 1e-9))
    ny, nx = theta.shape
    valid = np.zeros_like(theta, dtype=bool)
    if 2 * m < ny and 2 * m < nx:
        valid[m:ny - m, m:nx - m] = True
    theta = np.where(valid, theta, np.nan)
    # fft round-off can leave tiny negative masses of non-negative densities
    theta = np.where(np.isnan(theta) | (theta > 0), theta, 0.0)
    return ScalarField(values=theta, h=diag.h, origin=diag.origin)


# ---------------------------------------------------------------------------
# graph types


@dataclass
class Arc:
    pixels: np.ndarray            # (n, 2) integer (row, col) skeleton pixels in order
    polyline: np.ndarray          # (m, 2) simplified vertices in physical (x1, x2)
    length: float
    density: float = 0.0
    ends: tuple = (None, None)    # junction index at each end, or None

    def to_dict(self) -> dict:
        return {"vertices": [[float(a), float(b)] for a, b in self.polyline],
                "length": float(self.length), "density": float(self.density),
                "ends": [e if e is None else int(e) for e in self.ends]}


@dataclass
class Junction:
    position: np.ndarray
    arcs: list[int]
    directions: list[np.ndarray] = field(default_factory=list)
    densities: list[float] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(self.arcs)

    def to_dict(self, balance: float | None = None) -> dict:
        return {"position": [float(v) for v in self.position], "arcs": [int(a) for a in self.arcs],
                "directions": [[float(d[0]), float(d[1])] for d in self.directions],
                "densities": [float(t) for t in self.densities],
                "balance_residual": None if balance is None else float(balance)}


@dataclass
class InterfaceGraph:
    arcs: list[Arc]
    junctions: list[Junction]
    eps: float
    eta: float
    probe_r: float
    h: float
    origin: tuple[float, float]

    @property
    def total_length(self) -> float:
        return float(sum(a.length for a in self.arcs))

    def interface_points(self) -> np.ndarray:
        if not self.arcs:
            return np.zeros((0, 2))
        px = np.concatenate([a.pixels for a in self.arcs])
        return _to_xy(px, self.h, self.origin)

    def to_dict(self) -> dict:
        bal = junction_balance(self) if self.junctions else []
        return {"params": {"eps": self.eps, "eta": self.eta, "probe_r": self.probe_r},
                "arcs": [a.to_dict() for a in self.arcs],
                "junctions": [j.to_dict(b) for j, b in zip(self.junctions, bal or [None] * len(self.junctions))]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _to_xy(pixels: np.ndarray, h: float, origin) -> np.ndarray:
    pixels = np.asarray(pixels, float).reshape(-1, 2)
    return np.stack([origin[0] + h * pixels[:, 1], origin[1] + h * pixels[:, 0]], axis=-1)


# ---------------------------------------------------------------------------
# skeleton tracing


def _neighbours(sk: np.ndarray, p):
    r, c = p
    ny, nx = sk.shape
    out = []
    for dr, dc in _NEIGH:
        rr, cc = r + dr, c + dc
        if 0 <= rr < ny and 0 <= cc < nx and sk[rr, cc]:
            out.append((rr, cc))
    return out


def _label_nodes(sk: np.ndarray):
    """Node pixels (degree != 2) grouped into 8-connected clusters."""
    pts = list(zip(*np.nonzero(sk)))
    deg = {p: len(_neighbours(sk, p)) for p in pts}
    node_px = {p for p, d in deg.items() if d != 2}
    cluster = {}
    clusters = []
    for p in sorted(node_px):
        if p in cluster:
            continue
        cid = len(clusters)
        stack = [p]
        members = []
        cluster[p] = cid
        while stack:
            q = stack.pop()
            members.append(q)
            for n in _neighbours(sk, q):
                if n in node_px and n not in cluster:
                    cluster[n] = cid
                    stack.append(n)
        clusters.append(sorted(members))
    return deg, cluster, clusters


def _trace(sk: np.ndarray):
    """Split a skeleton into pixel paths between node clusters.

    Returns (paths, clusters) where each path is (pixel list, start cluster,
    end cluster); cluster ids are None for closed loops without nodes.
    """
    deg, cluster, clusters = _label_nodes(sk)
    visited_edges = set()
    paths = []
    for cid, members in enumerate(clusters):
        for start in members:
            for nb in _neighbours(sk, start):
                if nb in cluster:
                    continue        # node-to-node adjacency inside a cluster
                key = (start, nb)
                if key in visited_edges:
                    continue
                path = [start, nb]
                prev, cur = start, nb
                while cur not in cluster:
                    nxt = [n for n in _neighbours(sk, cur) if n != prev and n not in path[-3:-1]]
                    if not nxt:
                        break
                    prev, cur = cur, nxt[0]
                    path.append(cur)
                visited_edges.add((path[0], path[1]))
                visited_edges.add((path[-1], path[-2]))
                end = cluster.get(path[-1])
                paths.append((path, cid, end))
    # closed loops made only of degree-2 pixels
    seen = {p for path, _, _ in paths for p in path} | set(cluster)
    for p in sorted(deg):
        if p in seen:
            continue
        path = [p]
        prev, cur = None, p
        while True:
            nxt = [n for n in _neighbours(sk, cur) if n != prev and n not in path[-2:]]
            if not nxt or nxt[0] == p:
                break
            prev, cur = cur, nxt[0]
            if cur in path:
                break
            path.append(cur)
        seen.update(path)
        path.append(p)
        paths.append((path, None, None))
    return paths, clusters, deg


def _path_length(pix) -> float:
    d = np.diff(np.asarray(pix, float), axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _build(sk: np.ndarray, h: float, origin, min_spur: float, merge_r: float):
    paths, clusters, deg = _trace(sk)
    # cluster type: junction if at least three paths leave it
    incid = [0] * len(clusters)
    for _, a, b in paths:
        if a is not None:
            incid[a] += 1
        if b is not None:
            incid[b] += 1
    # merge nearby junction clusters (one physical junction split by thinning)
    parent = list(range(len(clusters)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    junc_ids = [i for i, n in enumerate(incid) if n >= 3]
    for path, a, b in paths:
        if a is not None and b is not None and a != b and a in junc_ids and b in junc_ids:
            if _path_length(path) * h <= merge_r:
                parent[find(a)] = find(b)
    # drop short spurs ending at a free end, and paths internal to merged junctions
    kept = []
    for path, a, b in paths:
        L = _path_length(path) * h
        ra = find(a) if a is not None else None
        rb = find(b) if b is not None else None
        if ra is not None and ra == rb and incid[a] >= 3 and L <= merge_r:
            continue
        a_free = a is not None and incid[a] < 3
        b_free = b is not None and incid[b] < 3
        if L < min_spur and ((a_free and b is not None and incid[b] >= 3)
                             or (b_free and a is not None and incid[a] >= 3)):
            continue
        kept.append((path, ra, rb))
    # recount degrees after pruning; a degree-2 node joins its two paths
    changed = True
    while changed:
        changed = False
        count = {}
        for _, a, b in kept:
            for c in (a, b):
                if c is not None:
                    count[c] = count.get(c, 0) + 1
        for node, n in sorted(count.items()):
            if n == 2 and incid[node] >= 3:
                idx = [i for i, (_, a, b) in enumerate(kept) if node in (a, b)]
                if len(idx) != 2 or idx[0] == idx[1]:
                    continue
                (p1, a1, b1), (p2, a2, b2) = kept[idx[0]], kept[idx[1]]
                if a1 == b1 or a2 == b2:
                    continue
                p1 = p1 if b1 == node else p1[::-1]
                s1 = a1 if b1 == node else b1
                p2 = p2 if a2 == node else p2[::-1]
                e2 = b2 if a2 == node else a2
                merged = (p1 + p2[1:], s1, e2)
                kept = [k for i, k in enumerate(kept) if i not in idx] + [merged]
                incid[node] = 2
                changed = True
                break
    # junction nodes are roots with >= 3 path ends
    count = {}
    for _, a, b in kept:
        for c in (a, b):
            if c is not None:
                count[c] = count.get(c, 0) + 1
    roots = sorted(c for c, n in count.items() if n >= 3)
    jindex = {c: i for i, c in enumerate(roots)}
    pos = {}
    for c in roots:
        members = [i for i in range(len(clusters)) if find(i) == c]
        pts = np.concatenate([np.asarray(clusters[i], float) for i in members])
        pos[c] = pts.mean(axis=0)
    arcs = []
    for path, a, b in kept:
        px = np.asarray(path, dtype=np.int64)
        xy = _to_xy(px, h, origin)
        poly = approximate_polygon(xy, tolerance=h) if len(xy) > 2 else xy
        ends = (jindex.get(a), jindex.get(b))
        arcs.append(Arc(pixels=px, polyline=poly, length=_polyline_length(poly), ends=ends))
    junctions = []
    for c in roots:
        jid = jindex[c]
        inc = [i for i, a in enumerate(arcs) for e in a.ends if e == jid]
        junctions.append(Junction(position=_to_xy(pos[c], h, origin)[0], arcs=inc))
    return arcs, junctions


def _polyline_length(poly: np.ndarray) -> float:
    if len(poly) < 2:
        return 0.0
    d = np.diff(poly, axis=0)
    return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


def _branch_direction(arc: Arc, centre: np.ndarray, h: float, origin, r1: float, r2: float,
                      at_start: bool) -> np.ndarray:
    """Unit direction of an arc leaving a junction, by a line fit on r1 <= |x - centre| <= r2."""
    xy = _to_xy(arc.pixels, h, origin)
    if not at_start:
        xy = xy[::-1]
    d = np.linalg.norm(xy - centre, axis=1)
    sel = xy[(d >= r1) & (d <= r2)]
    if len(sel) < 3:
        sel = xy[d >= min(r1, 0.5 * d.max())]
    if len(sel) < 2:
        sel = xy
    m = sel.mean(axis=0)
    _, _, vt = np.linalg.svd(sel - m, full_matrices=False)
    e = vt[0]
    if np.dot(m - centre, e) < 0:
        e = -e
    return e / np.linalg.norm(e)


def _arc_densities(graph: InterfaceGraph, zeta: ScalarField, sk_shape) -> None:
    """theta = 2 * zeta-mass of the tube around each arc / arc length away from junctions and ends."""
    h, pr = graph.h, graph.probe_r
    owner = -np.ones(sk_shape, dtype=np.int64)
    for i, a in enumerate(graph.arcs):
        owner[a.pixels[:, 0], a.pixels[:, 1]] = i
    if not graph.arcs:
        return
    dist, (ir, ic) = distance_transform_edt(owner < 0, return_indices=True)
    dist = dist * h
    near_arc = owner[ir, ic]
    excl = 2.0 * pr
    for i, a in enumerate(graph.arcs):
        xy = _to_xy(a.pixels, h, graph.origin)
        keep = np.ones(len(xy), dtype=bool)
        stops = [graph.junctions[e].position for e in a.ends if e is not None]
        stops += [xy[0], xy[-1]]
        for s in stops:
            keep &= np.linalg.norm(xy - s, axis=1) > excl
        if keep.sum() < 2:
            keep[:] = True
        core = np.zeros(len(xy), dtype=bool)
        core[keep] = True
        pix_ok = np.zeros(sk_shape, dtype=bool)
        pix_ok[a.pixels[core, 0], a.pixels[core, 1]] = True
        cells = (near_arc == i) & (dist <= pr) & pix_ok[ir, ic]
        mass = float(np.nansum(zeta.values[cells])) * h * h
        # arc length of the retained core, measured on the simplified polyline
        runs = _runs(core)
        length = 0.0
        for s, e in runs:
            seg = xy[s:e]
            if len(seg) >= 2:
                length += _polyline_length(approximate_polygon(seg, tolerance=h))
        a.density = 2.0 * mass / length if length > 0 else 0.0


def _runs(mask: np.ndarray):
    out = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def extract_interface(theta: ScalarField, eta: float, diag: DiagnosticSet,
                      probe_r: float | None = None) -> InterfaceGraph:
    """Threshold, thin to a one-cell skeleton, trace arcs and junctions, estimate densities."""
    if not eta > 0:
        raise InterfaceError("eta must be positive")
    if probe_r is None:
        probe_r = DEFAULT_PROBE_FACTOR * diag.eps
    h = theta.h
    sup = np.nan_to_num(theta.values, nan=0.0) >= eta
    graph = InterfaceGraph(arcs=[], junctions=[], eps=diag.eps, eta=eta, probe_r=probe_r,
                           h=h, origin=theta.origin)
    if not sup.any():
        return graph
    sk = skeletonize(sup)
    arcs, junctions = _build(sk, h, theta.origin, min_spur=2.0 * probe_r, merge_r=probe_r)
    graph.arcs, graph.junctions = arcs, junctions
    _arc_densities(graph, diag.field("zeta_eps"), sk.shape)
    for jid, j in enumerate(junctions):
        j.directions = []
        j.densities = []
        for ai in j.arcs:
            a = arcs[ai]
            at_start = a.ends[0] == jid
            j.directions.append(_branch_direction(a, j.position, h, theta.origin,
                                                  probe_r, 3.0 * probe_r, at_start))
            j.densities.append(a.density)
    return graph


def junction_balance(graph: InterfaceGraph) -> list[float]:
    """|sum theta_i e_i| / sum theta_i for every junction of degree >= 3."""
    out = []
    for j in graph.junctions:
        if j.degree < 3:
            continue
        th = np.asarray(j.densities, float)
        E = np.asarray(j.directions, float)
        s = float(th.sum())
        out.append(float(np.linalg.norm((th[:, None] * E).sum(axis=0)) / s) if s > 0 else float("nan"))
    return out


def junction_angles(j: Junction) -> np.ndarray:
    """Angles in degrees between consecutive incident directions, sorted counter-clockwise."""
    ang = np.sort(np.mod([math.atan2(d[1], d[0]) for d in j.directions], 2 * np.pi))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    return np.degrees(gaps)


def arc_direction(arc: Arc) -> np.ndarray:
    xy = arc.polyline
    m = xy.mean(axis=0)
    _, _, vt = np.linalg.svd(xy - m, full_matrices=False)
    return vt[0]


# ---------------------------------------------------------------------------
# tangent cone


@dataclass
class ConeReport:
    x0: tuple[float, float]
    tangent: np.ndarray
    radii: list[float]
    min_angle: list[float]            # smallest admissible half-aperture per radius (radians)
    checks: list[tuple[float, float, bool]]   # (theta, r, inside)

    def to_dict(self) -> dict:
        return {"x0": list(self.x0), "tangent": [float(v) for v in self.tangent],
                "radii": [float(r) for r in self.radii],
                "min_angle_deg": [math.degrees(a) for a in self.min_angle],
                "checks": [{"theta": float(t), "r": float(r), "pass": bool(ok)} for t, r, ok in self.checks]}


def tangent_cone_check(graph: InterfaceGraph, x0, thetas, radii) -> ConeReport:
    """Cone containment of interface cells in the annuli r/2 <= |x - x0| <= r.

    Cells closer than r/2 are left out: at the apex the pixel offsets of a
    digital line are comparable to the distance itself.
    """
    x0 = np.asarray(x0, float)
    for j in graph.junctions:
        if np.linalg.norm(j.position - x0) < 4 * graph.probe_r:
            raise InterfaceError("x0 is within 4 probe radii of a junction")
    pts = graph.interface_points()
    if len(pts) == 0:
        raise InterfaceError("graph has no interface cells")
    d = np.linalg.norm(pts - x0, axis=1)
    if d.min() > 2 * graph.h:
        raise InterfaceError("x0 is not on the interface")
    rmax = max(radii)
    local = pts[d <= rmax]
    m = local.mean(axis=0)
    _, _, vt = np.linalg.svd(local - m, full_matrices=False)
    tangent = vt[0]
    min_angle = []
    for r in radii:
        sel = pts[(d <= r) & (d >= 0.5 * r)]
        if len(sel) == 0:
            min_angle.append(0.0)
            continue
        v = sel - x0
        c = np.abs(v @ tangent) / np.linalg.norm(v, axis=1)
        min_angle.append(float(np.max(np.arccos(np.clip(c, 0.0, 1.0)))))
    checks = []
    for r, a in zip(radii, min_angle):
        for t in thetas:
            checks.append((float(t), float(r), bool(a <= t)))
    return ConeReport(x0=(float(x0[0]), float(x0[1])), tangent=tangent, radii=list(radii),
                      min_angle=min_angle, checks=checks)


# ---------------------------------------------------------------------------
# level sets of the capped well distance


def capped_distance(t: np.ndarray, mu0: float) -> np.ndarray:
    """C^1 cap of the well distance: t below mu0/2, constant 3 mu0/4 beyond mu0."""
    t = np.asarray(t, float)
    a = 0.5 * mu0
    mid = t - (t - a) ** 2 / mu0
    return np.where(t <= a, t, np.where(t <= mu0, mid, 0.75 * mu0))


def modica_w(g: Grid2D, p: Potential, wc: WellConstants, well_index: int) -> np.ndarray:
    d = np.linalg.norm(g.values - p.wells[well_index], axis=-1)
    return capped_distance(d, wc.mu0)


@dataclass
class LevelSetStats:
    level: float
    total_length: float
    component_lengths: list[float]
    bound: float
    within_bound: bool

    def to_dict(self) -> dict:
        return {"level": self.level, "total_length": self.total_length,
                "component_lengths": list(self.component_lengths), "bound": self.bound,
                "within_bound": self.within_bound}


def level_set_stats(g: Grid2D, p: Potential, wc: WellConstants, well_index: int, level: float,
                    energy: float | None = None) -> LevelSetStats:
    """Marching-squares length of {|u - sigma_i| = level} and the coarea bound 8E/(sqrt(lambda0) A^2)."""
    if not 0 < level < 0.75 * wc.mu0:
        raise InterfaceError(f"level must lie in (0, 3 mu0/4) = (0, {0.75 * wc.mu0})")
    if not 0 <= well_index < p.q:
        raise InterfaceError("well index out of range")
    d = np.linalg.norm(g.values - p.wells[well_index], axis=-1)
    comps = []
    for c in find_contours(d, level):
        seg = np.diff(c, axis=0)
        comps.append(float(np.sum(np.hypot(seg[:, 0], seg[:, 1])) * g.h))
    if energy is None:
        if not g.eps > 0:
            raise InterfaceError("grid carries no eps; pass the energy explicitly")
        energy = discrete_energy(g, p.eval, g.eps)
    bound = 8.0 * energy / (math.sqrt(wc.lambda0) * level * level)
    total = float(sum(comps))
    return LevelSetStats(level=float(level), total_length=total, component_lengths=comps,
                         bound=float(bound), within_bound=bool(total <= bound))
