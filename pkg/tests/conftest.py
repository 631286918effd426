from __future__ import annotations

import math

import numpy as np
import pytest

from vecac.grid import Grid2D
from vecac.potential import builtin
from vecac.solver import SolveConfig, seed, solve


@pytest.fixture(scope="session")
def gl():
    return builtin("scalar_gl")


@pytest.fixture(scope="session")
def dec():
    return builtin("vector_gl_decoupled")


@pytest.fixture(scope="session")
def tri():
    return builtin("triple_well_equilateral")


def box_shape(box, h):
    x0, x1, y0, y1 = box
    return {"nx": int(round((x1 - x0) / h)) + 1, "ny": int(round((y1 - y0) / h)) + 1,
            "h": h, "origin": (x0, y0)}


def exact_cross(eps: float, h: float, half: float = 1.0) -> Grid2D:
    """(tanh(x1/(sqrt2 eps)), tanh(x2/(sqrt2 eps))) sampled on [-half, half]^2."""
    n = int(round(2 * half / h)) + 1
    x = -half + h * np.arange(n)
    X, Y = np.meshgrid(x, x)
    k = 1.0 / (math.sqrt(2.0) * eps)
    vals = np.stack([np.tanh(k * X), np.tanh(k * Y)], axis=-1)
    return Grid2D(values=vals, h=h, origin=(-half, -half), eps=eps)


def constant_grid(p, well: int = 0, n: int = 41, h: float = 0.05, eps: float = 0.1) -> Grid2D:
    vals = np.broadcast_to(p.wells[well], (n, n, p.dim_k)).copy()
    return Grid2D(values=vals, h=h, origin=(-(n - 1) * h / 2, -(n - 1) * h / 2), eps=eps)


@pytest.fixture(scope="session")
def planar_solution(gl):
    """Converged planar interface along x1 (normal along x2), eps = 0.05, h = eps/4."""
    eps = 0.05
    g = seed("planar", box_shape((-1.0, 1.0, -1.0, 1.0), eps / 4), gl, eps, angle=math.pi / 2)
    sol, reps = solve(g, gl, SolveConfig(eps=eps))
    sol.eps = eps
    return sol, reps


@pytest.fixture(scope="session")
def cross_solution(dec):
    eps = 0.05
    g = seed("cross", box_shape((-1.0, 1.0, -1.0, 1.0), eps / 4), dec, eps)
    sol, reps = solve(g, dec, SolveConfig(eps=eps))
    sol.eps = eps
    return sol, reps
