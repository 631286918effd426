"""Uniform node-centred grids, finite-difference stencils and the VAC1 dump format."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

MIN_NODES = 8


class GridError(ValueError):
    pass


@dataclass
class Grid2D:
    """Samples of u: Omega -> R^k at nodes x_i = origin + (i h, j h).

    ``values`` has shape ``(ny, nx, k)``: rows run along x2, columns along x1.
    Along a non-periodic axis the outermost nodes carry Dirichlet data and are
    never modified by the solvers.
    """

    values: np.ndarray
    h: float
    origin: tuple[float, float] = (0.0, 0.0)
    periodic: tuple[bool, bool] = (False, False)   # (x1, x2)
    eps: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[..., None]
        if v.ndim != 3:
            raise GridError("values must have shape (ny, nx, k)")
        self.values = v
        if not self.h > 0:
            raise GridError("h must be positive")
        if v.shape[0] < MIN_NODES or v.shape[1] < MIN_NODES:
            raise GridError(f"grid needs at least {MIN_NODES} nodes per axis")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.periodic = (bool(self.periodic[0]), bool(self.periodic[1]))

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the node set."""
        return (self.origin[0], self.origin[0] + (self.nx - 1) * self.h,
                self.origin[1], self.origin[1] + (self.ny - 1) * self.h)

    def interior_mask(self) -> np.ndarray:
        m = np.ones((self.ny, self.nx), dtype=bool)
        if not self.periodic[0]:
            m[:, 0] = m[:, -1] = False
        if not self.periodic[1]:
            m[0, :] = m[-1, :] = False
        return m

    def copy(self) -> "Grid2D":
        return replace(self, values=self.values.copy(), meta=dict(self.meta))

    def with_values(self, values: np.ndarray) -> "Grid2D":
        return replace(self, values=np.asarray(values, float), meta=dict(self.meta))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], nx: int, ny: int,
                      h: float, origin=(0.0, 0.0), periodic=(False, False), eps: float = 0.0):
        """Sample ``fn(X, Y) -> (ny, nx, k)`` on the nodes; boundary nodes become Dirichlet data."""
        x = origin[0] + h * np.arange(nx)
        y = origin[1] + h * np.arange(ny)
        X, Y = np.meshgrid(x, y)
        return cls(values=np.asarray(fn(X, Y), float), h=h, origin=origin,
                   periodic=periodic, eps=eps)

    def contains_disk(self, x0, r: float) -> bool:
        xmin, xmax, ymin, ymax = self.extent
        return (x0[0] - r >= xmin and x0[0] + r <= xmax
                and x0[1] - r >= ymin and x0[1] + r <= ymax)


def laplacian(g: Grid2D, u: np.ndarray | None = None) -> np.ndarray:
    """Five-point Laplacian at interior nodes; zero on Dirichlet nodes."""
    u = g.values if u is None else u
    out = np.zeros_like(u)
    px, py = g.periodic
    inv = 1.0 / (g.h * g.h)
    if px:
        lx = np.roll(u, 1, axis=1) + np.roll(u, -1, axis=1) - 2.0 * u
    else:
        lx = np.zeros_like(u)
        lx[:, 1:-1] = u[:, 2:] + u[:, :-2] - 2.0 * u[:, 1:-1]
    if py:
        ly = np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0) - 2.0 * u
    else:
        ly = np.zeros_like(u)
        ly[1:-1] = u[2:] + u[:-2] - 2.0 * u[1:-1]
    out[...] = (lx + ly) * inv
    out[~g.interior_mask()] = 0.0
    return out


def gradient(g: Grid2D, u: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(d/dx1, d/dx2): central differences inside, second-order one-sided at edges."""
    u = g.values if u is None else u
    px, py = g.periodic
    if px:
        d1 = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2.0 * g.h)
    else:
        d1 = np.gradient(u, g.h, axis=1, edge_order=2)
    if py:
        d2 = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2.0 * g.h)
    else:
        d2 = np.gradient(u, g.h, axis=0, edge_order=2)
    return d1, d2


def discrete_energy(g: Grid2D, V: Callable, eps: float, u: np.ndarray | None = None) -> float:
    """Edge-based discrete energy whose gradient is the five-point scheme."""
    u = g.values if u is None else u
    px, py = g.periodic
    if px:
        dx = np.roll(u, -1, axis=1) - u
    else:
        dx = u[:, 1:] - u[:, :-1]
    if py:
        dy = np.roll(u, -1, axis=0) - u
    else:
        dy = u[1:] - u[:-1]
    grad2 = float(np.sum(dx * dx) + np.sum(dy * dy))
    return 0.5 * eps * grad2 + g.h * g.h * float(np.sum(V(u))) / eps


# ---------------------------------------------------------------------------
# VAC1: "VAC1 nx ny k h eps\n" then little-endian float64, row-major, component fastest


def write_vac1(path, values: np.ndarray, h: float, eps: float) -> None:
    values = np.asarray(values, dtype="<f8")
    if values.ndim == 2:
        values = values[..., None]
    ny, nx, k = values.shape
    header = f"VAC1 {nx} {ny} {k} {h!r} {eps!r}\n".encode("ascii")
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values).tobytes())


def read_vac1(path, origin=(0.0, 0.0), periodic=(False, False)) -> Grid2D:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise GridError("VAC1: missing header line")
    parts = data[:nl].decode("ascii").split()
    if len(parts) != 6 or parts[0] != "VAC1":
        raise GridError(f"VAC1: malformed header {data[:nl]!r}")
    nx, ny, k = (int(t) for t in parts[1:4])
    h, eps = float(parts[4]), float(parts[5])
    body = np.frombuffer(data[nl + 1:], dtype="<f8")
    if body.size != nx * ny * k:
        raise GridError(f"VAC1: expected {nx * ny * k} values, found {body.size}")
    return Grid2D(values=body.reshape(ny, nx, k).astype(float), h=h, origin=origin,
                  periodic=periodic, eps=eps)
