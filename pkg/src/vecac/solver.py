"""Discrete stationary solutions of -Lap u + eps^-2 grad V(u) = 0 on rectangles."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid2D, discrete_energy, laplacian
from .potential import Potential, well_eigenvalues
from .profile1d import default_span, profile_for

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SolverDivergence(SolverError):
    pass


class UnderResolvedWarning(UserWarning):
    pass


@dataclass
class SolveConfig:
    eps: float
    tol: float = 1e-10            # target for eps^2 * sup |residual|
    max_iters: int = 20_000
    dt_safety: float = 0.9
    newton_switch_tol: float = 1e-2
    semi_implicit: bool = False
    max_newton: int = 30
    krylov_rtol: float = 1e-2

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.dt_safety > 0:
            raise ValueError("dt_safety must be positive")


@dataclass
class SolveReport:
    method: str
    iterations: int
    converged: bool
    residuals: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    krylov_iterations: list[int] = field(default_factory=list)
    fallbacks: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")

    @property
    def ratios(self) -> list[float]:
        r = self.residuals
        return [r[i + 1] / r[i] for i in range(len(r) - 1) if r[i] > 0]


def check_resolution(h: float, eps: float, allow: bool = True) -> None:
    if eps < 2.0 * h:
        msg = f"eps={eps} < 2h={2 * h}: transition layer under-resolved"
        if not allow:
            raise SolverError(msg)
        warnings.warn(msg, UnderResolvedWarning, stacklevel=2)


def residual_field(g: Grid2D, p: Potential, eps: float, u: np.ndarray | None = None) -> np.ndarray:
    """-Lap u + eps^-2 grad V(u) per node (zero on Dirichlet nodes)."""
    u = g.values if u is None else u
    r = -laplacian(g, u) + p.grad(u) / (eps * eps)
    r[~g.interior_mask()] = 0.0
    return r


def residual(g: Grid2D, p: Potential, eps: float) -> np.ndarray:
    """Pointwise residual magnitude, shape (ny, nx)."""
    return np.linalg.norm(residual_field(g, p, eps), axis=-1)


def scaled_residual(g: Grid2D, p: Potential, eps: float, u: np.ndarray | None = None) -> float:
    """eps^2 * sup over interior nodes of |residual|."""
    r = residual_field(g, p, eps, u)
    return float(eps * eps * np.max(np.abs(r)))


def energy(g: Grid2D, p: Potential, eps: float) -> float:
    return discrete_energy(g, p.eval, eps)


def _max_curvature(p: Potential) -> float:
    return float(well_eigenvalues(p)[:, 1].max())


def stable_dt(g: Grid2D, p: Potential, cfg: SolveConfig) -> float:
    return cfg.dt_safety * min(g.h * g.h / 4.0, cfg.eps**2 / (2.0 * _max_curvature(p)))


def _laplacian_matrix(g: Grid2D) -> tuple[sp.csr_matrix, np.ndarray]:
    """Five-point Laplacian restricted to interior unknowns (Dirichlet nodes eliminated)."""
    mask = g.interior_mask()
    idx = -np.ones(mask.shape, dtype=np.int64)
    idx[mask] = np.arange(int(mask.sum()))
    ny, nx = mask.shape
    rows, cols, vals = [], [], []
    jj, ii = np.nonzero(mask)
    me = idx[jj, ii]
    rows.append(me); cols.append(me); vals.append(np.full(me.size, -4.0))
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nj, ni = jj + dj, ii + di
        if g.periodic[0]:
            ni = ni % nx
        if g.periodic[1]:
            nj = nj % ny
        ok = (ni >= 0) & (ni < nx) & (nj >= 0) & (nj < ny)
        nb = np.full(me.size, -1, dtype=np.int64)
        nb[ok] = idx[nj[ok], ni[ok]]
        keep = nb >= 0
        rows.append(me[keep]); cols.append(nb[keep]); vals.append(np.ones(int(keep.sum())))
    n = int(mask.sum())
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)) / (g.h * g.h)
    return L, mask


def gradient_flow(g: Grid2D, p: Potential, cfg: SolveConfig,
                  max_iters: int | None = None) -> tuple[Grid2D, SolveReport]:
    """Relax u_t = Lap u - eps^-2 grad V(u) until eps^2 |residual| <= cfg.tol."""
    eps = cfg.eps
    out = g.copy()
    u = out.values
    mask = out.interior_mask()
    dt = stable_dt(g, p, cfg)
    iters = cfg.max_iters if max_iters is None else max_iters
    rep = SolveReport(method="gradient_flow", iterations=0, converged=False)
    E = energy(out, p, eps)
    rep.energies.append(E)
    solve_implicit = None
    if cfg.semi_implicit:
        L, _ = _laplacian_matrix(out)
        A = (sp.identity(L.shape[0], format="csc") - dt * L).tocsc()
        solve_implicit = spla.factorized(A)
        Lfull = laplacian
    increases = 0
    for n in range(iters + 1):
        R = residual_field(out, p, eps, u)
        res = float(eps * eps * np.max(np.abs(R)))
        rep.residuals.append(res)
        if not np.isfinite(res):
            raise SolverDivergence(f"gradient flow produced non-finite values at step {n}")
        if res <= cfg.tol:
            rep.converged = True
            break
        if n == iters:
            break
        if solve_implicit is None:
            u[mask] -= dt * R[mask]
        else:
            # (I - dt Lap) u_new = u - dt eps^-2 grad V(u), boundary values enter the rhs
            lap_bc = Lfull(out, _boundary_only(out, u))
            rhs = u - dt * p.grad(u) / (eps * eps) + dt * lap_bc
            for c in range(out.k):
                u[..., c][mask] = solve_implicit(rhs[..., c][mask])
        E_new = energy(out, p, eps)
        rep.energies.append(E_new)
        if E_new > E + 1e-12 * max(1.0, abs(E)):
            increases += 1
            if increases >= 10 or not np.isfinite(E_new):
                raise SolverDivergence(
                    f"energy increased for {increases} consecutive steps (dt={dt:.3e}); "
                    "reduce dt_safety")
        else:
            increases = 0
        E = E_new
        rep.iterations = n + 1
    return out, rep


def _boundary_only(g: Grid2D, u: np.ndarray) -> np.ndarray:
    b = np.where(g.interior_mask()[..., None], 0.0, u)
    return b


class _Jacobian(spla.LinearOperator):
    """eps^2 (-Lap) + Hess V(u) acting on interior unknowns."""

    def __init__(self, g: Grid2D, H: np.ndarray, eps: float):
        self.g = g
        self.mask = g.interior_mask()
        self.hmat = H[self.mask]                    # (n, k, k)
        self.k = g.k
        self.eps2 = eps * eps
        self.n = int(self.mask.sum())
        super().__init__(dtype=float, shape=(self.n * self.k, self.n * self.k))

    def _matvec(self, v):
        v = np.asarray(v).reshape(self.n, self.k)
        full = np.zeros(self.g.values.shape)
        full[self.mask] = v
        out = -self.eps2 * laplacian(self.g, full)[self.mask] + np.einsum("nij,nj->ni", self.hmat, v)
        return out.ravel()

    def _rmatvec(self, v):
        return self._matvec(v)


def _assemble_jacobian(g: Grid2D, H: np.ndarray, eps: float, L: sp.csr_matrix) -> sp.csc_matrix:
    """Sparse eps^2 (-Lap) + Hess V on interior unknowns ordered node-major, component-fastest."""
    mask = g.interior_mask()
    k = g.k
    n = L.shape[0]
    Hm = H[mask]                                   # (n, k, k)
    rows = (np.arange(n)[:, None, None] * k + np.arange(k)[None, :, None]).repeat(k, axis=2)
    cols = (np.arange(n)[:, None, None] * k + np.arange(k)[None, None, :]).repeat(k, axis=1)
    B = sp.csr_matrix((Hm.ravel(), (rows.ravel(), cols.ravel())), shape=(n * k, n * k))
    return (sp.kron(-(eps * eps) * L, sp.identity(k)) + B).tocsc()


class _FrozenJacobianInverse(spla.LinearOperator):
    """LU of the Jacobian at one iterate, reused as a preconditioner for later steps."""

    def __init__(self, J: sp.csc_matrix):
        self.lu = spla.splu(J)
        super().__init__(dtype=float, shape=J.shape)

    def _matvec(self, v):
        return self.lu.solve(np.asarray(v, float).ravel())


def _krylov(J, b, rtol: float, callback, M=None) -> np.ndarray:
    """GMRES until the true relative residual |J x - b| / |b| is below ``rtol``."""
    nb = float(np.linalg.norm(b))
    inner = rtol
    x = np.zeros_like(b)
    for _ in range(6):
        x, _info = spla.gmres(J, b, x0=x, M=M, rtol=inner, restart=60, maxiter=40,
                              callback=callback, callback_type="pr_norm")
        if np.linalg.norm(J @ x - b) <= rtol * nb:
            break
        inner *= 0.1
    return x


REFACTOR_ITERS = 25


def newton_solve(g: Grid2D, p: Potential, cfg: SolveConfig) -> tuple[Grid2D, SolveReport]:
    """Damped inexact Newton.

    The linearised operator is applied matrix-free inside GMRES. GMRES is
    preconditioned by a sparse LU of the Jacobian frozen at an earlier iterate;
    it is refactored when the inner iteration count grows.
    """
    eps = cfg.eps
    out = g.copy()
    mask = out.interior_mask()
    res0 = scaled_residual(out, p, eps)
    rep = SolveReport(method="newton", iterations=0, converged=False, residuals=[res0])
    if res0 > cfg.newton_switch_tol:
        raise SolverError(f"initial residual {res0:.3e} above newton_switch_tol "
                          f"{cfg.newton_switch_tol:.1e}; run gradient_flow first")
    if res0 <= cfg.tol:
        rep.converged = True
        return out, rep
    L, _ = _laplacian_matrix(out)
    precond = None
    for it in range(cfg.max_newton):
        u = out.values
        R = eps * eps * residual_field(out, p, eps, u)
        H = p.hess(u)
        J = _Jacobian(out, H, eps)
        if precond is None or (rep.krylov_iterations and rep.krylov_iterations[-1] > REFACTOR_ITERS):
            precond = _FrozenJacobianInverse(_assemble_jacobian(out, H, eps, L))
        b = -R[mask].ravel()
        counter = [0]

        def cb(_):
            counter[0] += 1

        delta = _krylov(J, b, cfg.krylov_rtol, cb, precond)
        rep.krylov_iterations.append(counter[0])
        current = rep.residuals[-1]
        step = np.zeros_like(u)
        step[mask] = delta.reshape(-1, out.k)
        accepted = False
        alpha = 1.0
        for _ in range(12):
            trial = u + alpha * step
            r_new = scaled_residual(out, p, eps, trial)
            if np.isfinite(r_new) and r_new < current:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # stalled: indefinite/poor linearisation, relax with a few flow steps
            rep.fallbacks += 1
            if rep.fallbacks > 5:
                break
            out, fr = gradient_flow(out, p, cfg, max_iters=500)
            rep.residuals.append(fr.final_residual)
            continue
        out.values[...] = trial
        rep.residuals.append(r_new)
        rep.iterations = it + 1
        log.debug("newton %d: residual %.3e (alpha=%g, krylov=%d)", it, r_new, alpha, counter[0])
        if r_new <= cfg.tol:
            rep.converged = True
            break
    return out, rep


def solve(g: Grid2D, p: Potential, cfg: SolveConfig) -> tuple[Grid2D, list[SolveReport]]:
    """Gradient flow down to the Newton switch level, then Newton to cfg.tol."""
    reports = []
    cur = g
    if scaled_residual(cur, p, cfg.eps) > cfg.newton_switch_tol:
        flow_cfg = SolveConfig(**{**cfg.__dict__, "tol": min(cfg.newton_switch_tol / 2, max(cfg.tol, 1e-3))})
        cur, rep = gradient_flow(cur, p, flow_cfg)
        reports.append(rep)
        if not rep.converged:
            raise SolverError(f"gradient flow did not reach the Newton switch level "
                              f"({rep.final_residual:.3e}) in {rep.iterations} steps")
    cur, rep = newton_solve(cur, p, cfg)
    reports.append(rep)
    if not rep.converged:
        raise SolverError(f"Newton stalled at residual {rep.final_residual:.3e}")
    return cur, reports


# ---------------------------------------------------------------------------
# seeds


def _extrude(p: Potential, eps: float, dist: np.ndarray, sigma_minus, sigma_plus) -> np.ndarray:
    """1D profile evaluated at signed distances ``dist`` (ny, nx) -> (ny, nx, k)."""
    if p.exact_profile is not None:
        base = p.exact_profile(dist, eps)
        a = np.asarray(sigma_minus, float)
        b = np.asarray(sigma_plus, float)
        lo, hi = float(p.wells.min()), float(p.wells.max())
        t = (base - lo) / (hi - lo) if b[0] > a[0] else (hi - base) / (hi - lo)
        return a + t[..., None] * (b - a)
    span = max(default_span(p, eps), float(np.abs(dist).max()) + eps)
    prof = profile_for(p, eps, sigma_minus, sigma_plus, span=span, n=8193)
    return prof(dist)


def seed(kind: str, g_shape: dict, p: Potential, eps: float, **params) -> Grid2D:
    """Initial / boundary field of a given kind on the grid described by ``g_shape``.

    ``g_shape`` holds ``nx``, ``ny``, ``h`` and optionally ``origin`` and
    ``periodic``. Kinds: ``planar`` (``angle`` of the normal, ``center``,
    ``sigma_minus``/``sigma_plus``), ``cross`` (``center``), ``triple_junction``
    (``center``, ``rotation``), ``random`` (``amplitude``, ``rng_seed``) and
    ``constant`` (``sigma`` or ``well``).
    """
    nx, ny, h = int(g_shape["nx"]), int(g_shape["ny"]), float(g_shape["h"])
    origin = tuple(g_shape.get("origin", (0.0, 0.0)))
    periodic = tuple(g_shape.get("periodic", (False, False)))
    x = origin[0] + h * np.arange(nx)
    y = origin[1] + h * np.arange(ny)
    X, Y = np.meshgrid(x, y)
    cx, cy = params.get("center", (0.0, 0.0))
    wells = p.wells

    if kind == "constant":
        if "sigma" in params:
            s = np.asarray(params["sigma"], float).reshape(p.dim_k)
        else:
            s = wells[int(params.get("well", 0))]
        vals = np.broadcast_to(s, (ny, nx, p.dim_k)).copy()
    elif kind == "planar":
        ang = float(params.get("angle", np.pi / 2))
        n = np.array([np.cos(ang), np.sin(ang)])
        a = params.get("sigma_minus", wells[0])
        b = params.get("sigma_plus", wells[-1] if p.dim_k == 1 else wells[1])
        dist = (X - cx) * n[0] + (Y - cy) * n[1]
        vals = _extrude(p, eps, dist, a, b)
    elif kind == "cross":
        if p.components is None or p.dim_k != 2:
            raise ValueError("cross seed needs a decoupled potential on R^2")
        cols = []
        for c, (comp, d) in enumerate(zip(p.components, (X - cx, Y - cy))):
            cw = comp.wells[:, 0]
            col = _extrude(comp, eps, d, [cw.min()], [cw.max()])
            cols.append(col[..., 0])
        vals = np.stack(cols, axis=-1)
    elif kind == "triple_junction":
        if p.q < 3:
            raise ValueError(f"triple_junction seed needs q >= 3 wells, {p.name} has {p.q}")
        rot = float(params.get("rotation", 0.0))
        # sector j is the set where x . n_j is largest; softmax blends across a width ~ eps
        dirs = rot + 2.0 * np.pi * np.arange(3) / 3.0
        kappa = 2.0 / (np.sqrt(6.0) * eps)
        s = np.stack([(X - cx) * np.cos(d) + (Y - cy) * np.sin(d) for d in dirs], axis=-1)
        s = kappa * s
        s -= s.max(axis=-1, keepdims=True)
        m = np.exp(s)
        m /= m.sum(axis=-1, keepdims=True)
        sel = wells[:3]
        if p.dim_k == 2:
            ang = np.arctan2(sel[:, 1], sel[:, 0])
            order = [int(np.argmin(np.abs(np.angle(np.exp(1j * (ang - d)))))) for d in dirs]
        else:
            order = [0, 1, 2]
        vals = np.einsum("...j,jk->...k", m, sel[order])
    elif kind == "random":
        rng = np.random.default_rng(int(params.get("rng_seed", 0)))
        amp = float(params.get("amplitude", 1.0))
        lo = wells.min(axis=0) - amp
        hi = wells.max(axis=0) + amp
        vals = rng.uniform(lo, hi, size=(ny, nx, p.dim_k))
    else:
        raise ValueError(f"unknown seed kind {kind!r}")
    return Grid2D(values=vals, h=h, origin=origin, periodic=periodic, eps=eps)
