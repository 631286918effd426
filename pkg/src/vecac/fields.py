"""Diagnostic densities and tensors of a discrete field, and their disk integrals."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid2D, gradient, write_vac1
from .potential import Potential

SUBSAMPLE = 4
CIRCLE_NODES = 720


class FieldError(ValueError):
    pass


@dataclass
class ScalarField:
    """Node values on a uniform grid; each node owns the square cell of side h around it."""

    values: np.ndarray      # (ny, nx)
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def like(cls, g: Grid2D, values: np.ndarray) -> "ScalarField":
        return cls(values=np.asarray(values, float), h=g.h, origin=g.origin)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ny, nx = self.values.shape
        return (self.origin[0], self.origin[0] + (nx - 1) * self.h,
                self.origin[1], self.origin[1] + (ny - 1) * self.h)


@dataclass
class DiagnosticSet:
    eps: float
    h: float
    origin: tuple[float, float]
    e_eps: np.ndarray        # (ny, nx)
    zeta_eps: np.ndarray
    xi_eps: np.ndarray
    mu: np.ndarray           # (ny, nx, 2, 2): eps u_i . u_j
    hopf: np.ndarray         # complex (ny, nx)
    stress: np.ndarray       # (ny, nx, 2, 2)

    NAMES = ("e_eps", "zeta_eps", "xi_eps", "mu_11", "mu_12", "mu_22", "hopf_re", "hopf_im")

    def field(self, name: str) -> ScalarField:
        table = {
            "e_eps": self.e_eps, "zeta_eps": self.zeta_eps, "xi_eps": self.xi_eps,
            "mu_11": self.mu[..., 0, 0], "mu_12": self.mu[..., 0, 1], "mu_22": self.mu[..., 1, 1],
            "hopf_re": self.hopf.real, "hopf_im": self.hopf.imag,
        }
        if name not in table:
            raise KeyError(f"unknown diagnostic {name!r}; choose from {self.NAMES}")
        return ScalarField(values=table[name], h=self.h, origin=self.origin)

    def stack(self) -> np.ndarray:
        return np.stack([self.field(n).values for n in self.NAMES], axis=-1)

    def to_vac1(self, path) -> None:
        """Dump the diagnostics as a k=8 VAC1 file in the order of ``NAMES``."""
        write_vac1(path, self.stack(), self.h, self.eps)


def diagnostics(g: Grid2D, p: Potential, eps: float) -> DiagnosticSet:
    u = g.values
    d1, d2 = gradient(g, u)
    m11 = eps * np.sum(d1 * d1, axis=-1)
    m22 = eps * np.sum(d2 * d2, axis=-1)
    m12 = eps * np.sum(d1 * d2, axis=-1)
    mu = np.empty(u.shape[:2] + (2, 2))
    mu[..., 0, 0] = m11
    mu[..., 1, 1] = m22
    mu[..., 0, 1] = mu[..., 1, 0] = m12
    half_trace = 0.5 * (m11 + m22)
    zeta = np.asarray(p.eval(u), float) / eps
    e = half_trace + zeta
    xi = zeta - half_trace
    hopf = (m11 - m22) - 2j * m12
    stress = -mu.copy()
    stress[..., 0, 0] += e
    stress[..., 1, 1] += e
    return DiagnosticSet(eps=eps, h=g.h, origin=g.origin, e_eps=e, zeta_eps=zeta, xi_eps=xi,
                         mu=mu, hopf=hopf, stress=stress)


# ---------------------------------------------------------------------------
# disk and annulus integration


def bilinear(arr: np.ndarray, h: float, origin, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of node values ``arr`` (ny, nx, ...) at points (..., 2).

    Written as nested a + t (b - a) so that constant data is reproduced exactly.
    Points outside the grid are clamped to the boundary.
    """
    ny, nx = arr.shape[:2]
    fi = np.clip((pts[..., 0] - origin[0]) / h, 0.0, nx - 1.0)
    fj = np.clip((pts[..., 1] - origin[1]) / h, 0.0, ny - 1.0)
    i0 = np.minimum(np.floor(fi).astype(int), nx - 2)
    j0 = np.minimum(np.floor(fj).astype(int), ny - 2)
    tx = fi - i0
    ty = fj - j0
    extra = (None,) * (arr.ndim - 2)
    tx, ty = tx[(...,) + extra], ty[(...,) + extra]
    a, b = arr[j0, i0], arr[j0, i0 + 1]
    c, d = arr[j0 + 1, i0], arr[j0 + 1, i0 + 1]
    lo = a + tx * (b - a)
    hi = c + tx * (d - c)
    return lo + ty * (hi - lo)


def _offsets(h: float) -> np.ndarray:
    return (np.arange(SUBSAMPLE) + 0.5) / SUBSAMPLE * h - 0.5 * h


def _check_disk(f: ScalarField, x0, r: float) -> None:
    xmin, xmax, ymin, ymax = f.extent
    rr = r + f.h
    if x0[0] - rr < xmin or x0[0] + rr > xmax or x0[1] - rr < ymin or x0[1] + rr > ymax:
        raise FieldError(f"disk D({tuple(x0)}, {r}) + h exceeds the grid")


def _window(f: ScalarField, x0, r: float):
    ny, nx = f.values.shape
    i0 = max(int(np.floor((x0[0] - r - f.origin[0]) / f.h)) - 1, 0)
    i1 = min(int(np.ceil((x0[0] + r - f.origin[0]) / f.h)) + 2, nx)
    j0 = max(int(np.floor((x0[1] - r - f.origin[1]) / f.h)) - 1, 0)
    j1 = min(int(np.ceil((x0[1] + r - f.origin[1]) / f.h)) + 2, ny)
    return slice(j0, j1), slice(i0, i1)


def _subsample_d2(f: ScalarField, x0, sl) -> np.ndarray:
    """Squared distances to x0 of the SUBSAMPLE^2 points of every cell in the window."""
    sj, si = sl
    x = f.origin[0] + f.h * np.arange(si.start, si.stop) - x0[0]
    y = f.origin[1] + f.h * np.arange(sj.start, sj.stop) - x0[1]
    o = _offsets(f.h)
    xs = x[:, None] + o[None, :]            # (nx_w, s)
    ys = y[:, None] + o[None, :]
    return ys[:, None, :, None] ** 2 + xs[None, :, None, :] ** 2   # (ny_w, nx_w, s, s)


def disk_weights(f: ScalarField, x0, r: float):
    """Cell-overlap fractions with D(x0, r) by 4x4 subsampling, on a bounding window."""
    sl = _window(f, x0, r)
    d2 = _subsample_d2(f, x0, sl)
    w = np.mean(d2 <= r * r, axis=(2, 3))
    return sl, w


def ball_mass(f: ScalarField, x0, r: float) -> float:
    """Integral of the field over D(x0, r)."""
    _check_disk(f, x0, r)
    if r <= 0:
        return 0.0
    sl, w = disk_weights(f, x0, r)
    return float(np.sum(f.values[sl] * w) * f.h * f.h)


def annulus_mass(f: ScalarField, x0, r: float, R: float) -> float:
    """Integral of the field over D(x0, R) minus D(x0, r), with the same subsample rule."""
    if not 0 <= r <= R:
        raise FieldError("need 0 <= r <= R")
    _check_disk(f, x0, R)
    sl = _window(f, x0, R)
    d2 = _subsample_d2(f, x0, sl)
    w = np.mean((d2 <= R * R) & (d2 > r * r), axis=(2, 3))
    return float(np.sum(f.values[sl] * w) * f.h * f.h)


def disk_kernel(h: float, r: float) -> np.ndarray:
    """Overlap weights of D(0, r) with the cells of a node-centred stencil, odd-sized."""
    m = int(np.ceil(r / h)) + 1
    f = ScalarField(values=np.zeros((2 * m + 1, 2 * m + 1)), h=h, origin=(-m * h, -m * h))
    sl = (slice(0, 2 * m + 1), slice(0, 2 * m + 1))
    d2 = _subsample_d2(f, (0.0, 0.0), sl)
    return np.mean(d2 <= r * r, axis=(2, 3))


def _bilinear(f: ScalarField, pts: np.ndarray) -> np.ndarray:
    return bilinear(f.values, f.h, f.origin, pts)


def polar_annulus_mass(f: ScalarField, x0, r: float, R: float, n_theta: int = CIRCLE_NODES) -> float:
    """Integral over D(x0, R) minus D(x0, r) of the bilinear interpolant, by polar quadrature.

    Gauss-Legendre in the radius (two nodes per cell width) and the periodic trapezoid rule
    in the angle. Unlike the cell-overlap rule this is smooth in r and R, so differences of
    masses at nearby radii keep the O(h^2) accuracy of the interpolant.
    """
    if not 0 <= r <= R:
        raise FieldError("need 0 <= r <= R")
    _check_disk(f, x0, R)
    if R == r:
        return 0.0
    m = max(4, 2 * int(np.ceil((R - r) / f.h)))
    t, w = np.polynomial.legendre.leggauss(m)
    rho = 0.5 * (R - r) * t + 0.5 * (R + r)
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    pts = np.empty((m, n_theta, 2))
    pts[..., 0] = x0[0] + rho[:, None] * np.cos(th)[None, :]
    pts[..., 1] = x0[1] + rho[:, None] * np.sin(th)[None, :]
    ring = _bilinear(f, pts).sum(axis=1) * (2.0 * np.pi / n_theta)
    return float(0.5 * (R - r) * np.sum(w * rho * ring))


@dataclass
class RadialScan:
    x0: tuple[float, float]
    r: np.ndarray
    mass: np.ndarray

    @property
    def mass_over_r(self) -> np.ndarray:
        return self.mass / self.r

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "mass_over_r"])
            for ri, vi in zip(self.r, self.mass_over_r):
                wr.writerow([repr(float(ri)), repr(float(vi))])


def radial_scan(f: ScalarField, x0, r_min: float, r_max: float, n_r: int) -> RadialScan:
    """mass(D(x0, r))/r on n_r geometrically spaced radii."""
    if r_min < 2 * f.h:
        raise FieldError(f"r_min={r_min} below 2h={2 * f.h}")
    if not r_max > r_min or n_r < 2:
        raise FieldError("need r_max > r_min and n_r >= 2")
    _check_disk(f, x0, r_max)
    r = np.geomspace(r_min, r_max, n_r)
    mass = np.array([ball_mass(f, x0, ri) for ri in r])
    return RadialScan(x0=(float(x0[0]), float(x0[1])), r=r, mass=mass)


def frame_project(diag: DiagnosticSet, gamma: float):
    """(mu_par_par, mu_perp_perp, mu_perp_par) in the frame e1=(cos g, sin g), e2=(-sin g, cos g).

    e1 is the parallel (tangent) direction and e2 the perpendicular one.
    """
    c, s = np.cos(gamma), np.sin(gamma)
    m11, m12, m22 = diag.mu[..., 0, 0], diag.mu[..., 0, 1], diag.mu[..., 1, 1]
    par = c * c * m11 + 2 * c * s * m12 + s * s * m22
    perp = s * s * m11 - 2 * c * s * m12 + c * c * m22
    cross = -c * s * m11 + (c * c - s * s) * m12 + c * s * m22
    return par, perp, cross


# ---------------------------------------------------------------------------
# circle traces


@dataclass
class CircleTrace:
    theta: np.ndarray
    points: np.ndarray        # (n, 2)
    u: np.ndarray             # (n, k)
    u_r: np.ndarray           # (n, k)
    u_tau: np.ndarray         # (n, k)

    def integrate(self, values: np.ndarray, r: float) -> float:
        """Periodic trapezoid rule for the line integral over the circle of radius r."""
        return float(np.sum(values) * (2.0 * np.pi / values.shape[0]) * r)


def _interp(g: Grid2D, arr: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return bilinear(arr, g.h, g.origin, pts)


def circle_trace(g: Grid2D, x0, r: float, n: int = CIRCLE_NODES) -> CircleTrace:
    """Bilinear samples of u and of its central-difference gradient on the circle."""
    xmin, xmax, ymin, ymax = g.extent
    if x0[0] - r < xmin or x0[0] + r > xmax or x0[1] - r < ymin or x0[1] + r > ymax:
        raise FieldError("circle leaves the grid")
    th = 2.0 * np.pi * np.arange(n) / n
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    pts = np.asarray(x0, float)[None, :] + r * er
    d1, d2 = gradient(g)
    u = _interp(g, g.values, pts)
    g1 = _interp(g, d1, pts)
    g2 = _interp(g, d2, pts)
    ur = er[:, 0:1] * g1 + er[:, 1:2] * g2
    ut = -er[:, 1:2] * g1 + er[:, 0:1] * g2
    return CircleTrace(theta=th, points=pts, u=u, u_r=ur, u_tau=ut)
