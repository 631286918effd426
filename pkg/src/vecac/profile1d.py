"""One-dimensional heteroclinic profiles via the first-order relation eps|w'| = sqrt(2 V(w)).

Profiles are computed along the straight segment joining the two end wells,
which is exact for scalar potentials and for a single component of a
decoupled potential.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .potential import Potential, PotentialError, well_constants, well_eigenvalues

RK_TOL = 1e-13


class ProfileError(ValueError):
    pass


@dataclass
class Profile1D:
    eps: float
    s: np.ndarray                # (n,)
    w: np.ndarray                # (n, k)
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    ode_residual: float = 0.0

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    def __call__(self, s) -> np.ndarray:
        """Linear interpolation of the profile at ``s`` (clamped at the ends)."""
        s = np.asarray(s, dtype=float)
        cols = [np.interp(s, self.s, self.w[:, c]) for c in range(self.w.shape[1])]
        return np.stack(cols, axis=-1)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s"] + [f"w{c}" for c in range(self.w.shape[1])])
            for sj, wj in zip(self.s, self.w):
                wr.writerow([repr(float(sj))] + [repr(float(x)) for x in wj])


def _segment(p: Potential, sigma_minus, sigma_plus):
    a = np.asarray(sigma_minus, float).reshape(p.dim_k)
    b = np.asarray(sigma_plus, float).reshape(p.dim_k)
    if np.linalg.norm(b - a) < 1e-12:
        raise ProfileError("sigma_minus == sigma_plus: not a heteroclinic connection")
    wells = p.wells
    for s in (a, b):
        if np.min(np.linalg.norm(wells - s, axis=1)) > 1e-9:
            raise ProfileError(f"{s} is not a well of {p.name}")
    return a, b


def _check_adjacent(p: Potential, a: np.ndarray, b: np.ndarray, margin: float) -> None:
    d = b - a
    L = float(np.linalg.norm(d))
    t = np.linspace(0.0, 1.0, 4001)
    g = p.eval(a + t[:, None] * d)
    inner = (t * L > margin) & ((1.0 - t) * L > margin)
    if np.min(g[inner]) <= 1e-14:
        raise ProfileError("sqrt(V) vanishes between the end wells (wells not adjacent)")


def _rk4_step(f, t, ds):
    k1 = f(t)
    k2 = f(t + 0.5 * ds * k1)
    k3 = f(t + 0.5 * ds * k2)
    k4 = f(t + ds * k3)
    return t + ds * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def _rk4_adaptive(f, t0: float, ds: float, depth: int = 0) -> float:
    """Advance t' = f(t) over ``ds`` with step-doubling error control."""
    full = _rk4_step(f, t0, ds)
    mid = _rk4_step(f, t0, 0.5 * ds)
    half = _rk4_step(f, mid, 0.5 * ds)
    if abs(half - full) <= RK_TOL or depth >= 20:
        return half + (half - full) / 15.0
    mid = _rk4_adaptive(f, t0, 0.5 * ds, depth + 1)
    return _rk4_adaptive(f, mid, 0.5 * ds, depth + 1)


def _fd_derivative(y: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central differences; NaN at the three outer nodes on each side."""
    c = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    out = np.full_like(y, np.nan)
    n = y.shape[0]
    acc = 0.0
    for j, cj in enumerate(c):
        if cj:
            acc = acc + cj * y[j:n - 6 + j]
    out[3:n - 3] = acc / h
    return out


def solve_profile_firstorder(p: Potential, eps: float, sigma_minus, sigma_plus,
                             span: float, n: int = 4096) -> Profile1D:
    """Integrate eps dw/ds = sqrt(2 V(w)) outward from the midpoint between the wells.

    The samples are uniform on [-span, span]. The midpoint of the two wells
    sits at s = 0.
    """
    if n < 256:
        raise ValueError("n must be at least 256")
    if eps <= 0 or span <= 0:
        raise ValueError("eps and span must be positive")
    a, b = _segment(p, sigma_minus, sigma_plus)
    wc = well_constants(p)
    d = b - a
    L = float(np.linalg.norm(d))
    _check_adjacent(p, a, b, wc.mu0 / 10.0)

    def g(t):
        return float(p.eval(a + t * d))

    # along the segment: eps * L * t' = sqrt(2 V)
    scale = 1.0 / (eps * L)

    def f(t):
        v = g(t)
        return scale * math.sqrt(2.0 * v) if v > 0.0 else 0.0

    s = np.linspace(-span, span, n)
    t = np.empty(n)
    right = np.searchsorted(s, 0.0)
    t_cur, s_cur = 0.5, 0.0
    for j in range(right, n):
        t_cur = _rk4_adaptive(f, t_cur, s[j] - s_cur)
        s_cur = s[j]
        t[j] = t_cur
    t_cur, s_cur = 0.5, 0.0
    for j in range(right - 1, -1, -1):
        t_cur = _rk4_adaptive(f, t_cur, s[j] - s_cur)
        s_cur = s[j]
        t[j] = t_cur
    w = a[None, :] + t[:, None] * d[None, :]

    tail = wc.mu0 / 10.0
    if np.linalg.norm(w[0] - a) > tail or np.linalg.norm(w[-1] - b) > tail:
        raise ProfileError(f"span {span} too short: ends are not within mu0/10 of the wells")

    tt = _fd_derivative(t, s[1] - s[0])
    root_v = np.sqrt(2.0 * np.maximum(p.eval(w), 0.0))
    res = np.abs(eps * L * tt - root_v)
    return Profile1D(eps=eps, s=s, w=w, sigma_minus=a, sigma_plus=b,
                     ode_residual=float(np.nanmax(res)))


def profile_for(p: Potential, eps: float, sigma_minus, sigma_plus, span: float,
                n: int = 4096) -> Profile1D:
    """Closed-form profile when the potential supplies one, else the integrated one."""
    if p.exact_profile is not None:
        a, b = _segment(p, sigma_minus, sigma_plus)
        s = np.linspace(-span, span, n)
        base = p.exact_profile(s, eps)
        lo, hi = float(p.wells.min()), float(p.wells.max())
        # exact profile runs lo -> hi; map onto the requested orientation
        t = (base - lo) / (hi - lo) if b[0] > a[0] else (hi - base) / (hi - lo)
        w = a[None, :] + t[:, None] * (b - a)[None, :]
        return Profile1D(eps=eps, s=s, w=w, sigma_minus=a, sigma_plus=b)
    return solve_profile_firstorder(p, eps, sigma_minus, sigma_plus, span, n)


def _central(y: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(y, h, axis=0, edge_order=2)


def _derivative(y: np.ndarray, h: float, order: int) -> np.ndarray:
    d = _central(y, h)
    if order == 6:
        hi = _fd_derivative(y, h)
        d[3:-3] = hi[3:-3]
    elif order != 2:
        raise ValueError("order must be 2 or 6")
    return d


def discrepancy(prof: Profile1D, p: Potential, order: int = 6) -> np.ndarray:
    """xi = V(w)/eps - eps |w'|^2 / 2 along the profile."""
    dw = _derivative(prof.w, prof.h, order)
    return p.eval(prof.w) / prof.eps - 0.5 * prof.eps * np.sum(dw * dw, axis=-1)


def conservation_residual(prof: Profile1D, p: Potential) -> float:
    """Max |d/ds (V/eps - eps|w'|^2/2)| over interior nodes, second-order differences."""
    xi = discrepancy(prof, p, order=2)
    dxi = _central(xi, prof.h)
    return float(np.max(np.abs(dxi[2:-2])))


def direct_energy(prof: Profile1D, p: Potential) -> float:
    """Trapezoid quadrature of e_eps(w) = eps|w'|^2/2 + V(w)/eps along the profile."""
    dw = _central(prof.w, prof.h)
    e = 0.5 * prof.eps * np.sum(dw * dw, axis=-1) + p.eval(prof.w) / prof.eps
    return float(np.trapezoid(e, prof.s))


def transition_energy(p: Potential, sigma_minus, sigma_plus, n: int = 64,
                      crosscheck_eps: float | None = 1.0, rtol: float = 1e-4) -> float:
    """c0 = integral of sqrt(2 V) along the segment between two adjacent wells.

    With ``crosscheck_eps`` set, a profile is solved at that eps and its direct
    energy quadrature must agree with c0 to ``rtol``.
    """
    a, b = _segment(p, sigma_minus, sigma_plus)
    d = b - a
    L = float(np.linalg.norm(d))
    x, wts = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    c0 = 0.5 * L * float(np.sum(wts * np.sqrt(2.0 * np.maximum(p.eval(a + t[:, None] * d), 0.0))))
    if crosscheck_eps is not None:
        prof = solve_profile_firstorder(p, crosscheck_eps, a, b, span=_default_span(p, crosscheck_eps),
                                        n=4096)
        direct = direct_energy(prof, p)
        if abs(direct - c0) > rtol * c0:
            raise ProfileError(f"transition energy cross-check failed: {direct} vs {c0}")
    return c0


def _default_span(p: Potential, eps: float) -> float:
    lam = float(well_eigenvalues(p)[:, 0].min())
    # layer tails decay like exp(-sqrt(lam) |s| / eps); 30 e-folds
    return 30.0 * eps / math.sqrt(lam)


def default_span(p: Potential, eps: float) -> float:
    return _default_span(p, eps)


__all__ = [
    "Profile1D", "ProfileError", "PotentialError", "solve_profile_firstorder", "profile_for",
    "conservation_residual", "discrepancy", "direct_energy", "transition_energy", "default_span",
]
