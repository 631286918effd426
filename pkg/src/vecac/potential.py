"""Multi-well potentials, hypothesis checks and structural well constants.

All callables are vectorised over leading axes: ``eval`` maps an array of
shape ``(..., k)`` to ``(...)``, ``grad`` to ``(..., k)`` and ``hess`` to
``(..., k, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, partial
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

Array = np.ndarray

WELL_ZERO_TOL = 1e-12
WELL_DISTINCT_TOL = 1e-9
MAX_BISECTIONS = 60


class PotentialError(ValueError):
    """Raised when a potential violates the multi-well hypotheses."""


@dataclass(frozen=True)
class Potential:
    name: str
    dim_k: int
    eval: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array]
    vacuum: tuple[tuple[float, ...], ...]
    # scalar pieces of a direct sum, in coordinate order; None if coupled
    components: tuple["Potential", ...] | None = None
    # closed-form 1D profile s -> w(s) at eps, for scalar potentials that have one
    exact_profile: Callable[[Array, float], Array] | None = field(default=None, compare=False)

    @property
    def wells(self) -> Array:
        return np.asarray(self.vacuum, dtype=float).reshape(len(self.vacuum), self.dim_k)

    @property
    def q(self) -> int:
        return len(self.vacuum)

    def __call__(self, y: Array) -> Array:
        return self.eval(y)


@dataclass(frozen=True)
class WellConstants:
    mu0: float
    alpha0: float
    lambda0: float
    lambda_max: float
    R0: float
    beta_inf: float
    alpha_inf: float
    R_inf: float


@dataclass(frozen=True)
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    eigen_ranges: tuple[tuple[float, float], ...]
    margins: dict
    sampled_radius: float


# ---------------------------------------------------------------------------
# builtins


def _gl_eval(y):
    u = y[..., 0]
    return 0.25 * (1.0 - u * u) ** 2


def _gl_grad(y):
    u = y[..., 0]
    return (u * u * u - u)[..., None]


def _gl_hess(y):
    u = y[..., 0]
    return (3.0 * u * u - 1.0)[..., None, None]


def _gl_profile(s, eps):
    return np.tanh(np.asarray(s) / (np.sqrt(2.0) * eps))


def _tri_eval(y):
    z = y[..., 0] + 1j * y[..., 1]
    f = z**3 - 1.0
    return (f.real**2 + f.imag**2) / 9.0


def _tri_grad(y):
    # d|f|^2 as a complex number is 2 f conj(f'), f' = 3 z^2
    z = y[..., 0] + 1j * y[..., 1]
    g = (2.0 / 3.0) * (z**3 - 1.0) * np.conj(z * z)
    return np.stack([g.real, g.imag], axis=-1)


def _tri_hess(y):
    z = y[..., 0] + 1j * y[..., 1]
    f = z**3 - 1.0
    fp = 3.0 * z * z
    fpp = 6.0 * z
    a = 2.0 * (fp.real**2 + fp.imag**2)
    b = 2.0 * (np.conj(f) * fpp)
    h11 = (a + b.real) / 9.0
    h22 = (a - b.real) / 9.0
    h12 = -b.imag / 9.0
    return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)


def scalar_gl() -> Potential:
    return Potential(
        name="scalar_gl",
        dim_k=1,
        eval=_gl_eval,
        grad=_gl_grad,
        hess=_gl_hess,
        vacuum=((-1.0,), (1.0,)),
        exact_profile=_gl_profile,
    )


def triple_well_equilateral() -> Potential:
    angles = 2.0 * np.pi * np.arange(3) / 3.0
    vacuum = tuple((float(np.cos(a)), float(np.sin(a))) for a in angles)
    return Potential(
        name="triple_well_equilateral",
        dim_k=2,
        eval=_tri_eval,
        grad=_tri_grad,
        hess=_tri_hess,
        vacuum=vacuum,
    )


def _sum_eval(parts, slices, y):
    return sum(p.eval(y[..., s]) for p, s in zip(parts, slices))


def _sum_grad(parts, slices, y):
    return np.concatenate([p.grad(y[..., s]) for p, s in zip(parts, slices)], axis=-1)


def _sum_hess(parts, slices, k, y):
    out = np.zeros(y.shape + (k,))
    for p, s in zip(parts, slices):
        out[..., s, s] = p.hess(y[..., s])
    return out


def direct_sum(parts: Sequence[Potential], name: str | None = None) -> Potential:
    """Decoupled potential V(y) = sum_c V_c(y_c) over coordinate blocks."""
    parts = tuple(parts)
    if not parts:
        raise PotentialError("direct_sum needs at least one component")
    slices, start = [], 0
    for p in parts:
        slices.append(slice(start, start + p.dim_k))
        start += p.dim_k
    k = start
    vacuum = tuple(tuple(np.concatenate([np.asarray(w, float) for w in combo]).tolist())
                   for combo in product(*[p.vacuum for p in parts]))
    flat: list[Potential] = []
    for p in parts:
        flat.extend(p.components if p.components is not None else (p,))
    return Potential(
        name=name or "+".join(p.name for p in parts),
        dim_k=k,
        eval=partial(_sum_eval, parts, tuple(slices)),
        grad=partial(_sum_grad, parts, tuple(slices)),
        hess=partial(_sum_hess, parts, tuple(slices), k),
        vacuum=vacuum,
        components=tuple(flat) if all(c.dim_k == 1 for c in flat) else None,
    )


def vector_gl_decoupled() -> Potential:
    return direct_sum([scalar_gl(), scalar_gl()], name="vector_gl_decoupled")


def _aff_eval(p, c, A, b, y):
    return c * p.eval(y @ A.T + b)


def _aff_grad(p, c, A, b, y):
    return c * (p.grad(y @ A.T + b) @ A)


def _aff_hess(p, c, A, b, y):
    H = p.hess(y @ A.T + b)
    return c * np.einsum("ai,...ab,bj->...ij", A, H, A)


def affine(p: Potential, scale: float = 1.0, matrix: Array | None = None,
           shift: Array | None = None, name: str | None = None) -> Potential:
    """Return y -> scale * V(matrix @ y + shift)."""
    if scale <= 0:
        raise PotentialError("scale must be positive")
    k = p.dim_k
    A = np.eye(k) if matrix is None else np.asarray(matrix, float).reshape(k, k)
    b = np.zeros(k) if shift is None else np.asarray(shift, float).reshape(k)
    if abs(np.linalg.det(A)) < 1e-12:
        raise PotentialError("affine change of variable must be invertible")
    Ainv = np.linalg.inv(A)
    vacuum = tuple(tuple((Ainv @ (np.asarray(s) - b)).tolist()) for s in p.vacuum)
    exact = None
    if p.exact_profile is not None and k == 1 and b[0] == 0.0 and A[0, 0] == 1.0:
        # only the pure rescale of V keeps a closed form: w(s; eps/sqrt(c))
        exact = partial(_scaled_profile, p.exact_profile, scale)
    return Potential(
        name=name or f"affine({p.name})",
        dim_k=k,
        eval=partial(_aff_eval, p, scale, A, b),
        grad=partial(_aff_grad, p, scale, A, b),
        hess=partial(_aff_hess, p, scale, A, b),
        vacuum=vacuum,
        components=None,
        exact_profile=exact,
    )


def _scaled_profile(base, c, s, eps):
    return base(s, eps / np.sqrt(c))


BUILTINS: dict[str, Callable[[], Potential]] = {
    "scalar_gl": scalar_gl,
    "vector_gl_decoupled": vector_gl_decoupled,
    "triple_well_equilateral": triple_well_equilateral,
}


def builtin(name: str) -> Potential:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise PotentialError(f"unknown builtin potential {name!r}; "
                             f"choose from {sorted(BUILTINS)}") from None


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").replace(";", " ").split()]


def from_definition(spec: Mapping[str, str]) -> Potential:
    """Build a potential from a flat key/value mapping.

    Recognised keys: ``name`` (a builtin) or ``components`` (comma separated
    builtins combined as a direct sum), then optional ``scale``, ``matrix``
    (row-major, ``;`` between rows) and ``shift``.
    """
    if "components" in spec:
        names = [n.strip() for n in spec["components"].split(",") if n.strip()]
        p = direct_sum([builtin(n) for n in names])
    elif "name" in spec:
        p = builtin(spec["name"].strip())
    else:
        raise PotentialError("potential definition needs 'name' or 'components'")
    keys = {"scale", "matrix", "shift"} & set(spec)
    if keys:
        scale = float(spec.get("scale", 1.0))
        matrix = np.array(_floats(spec["matrix"])) if "matrix" in spec else None
        shift = np.array(_floats(spec["shift"])) if "shift" in spec else None
        if matrix is not None and matrix.size != p.dim_k**2:
            raise PotentialError(f"matrix needs {p.dim_k**2} entries")
        if shift is not None and shift.size != p.dim_k:
            raise PotentialError(f"shift needs {p.dim_k} entries")
        p = affine(p, scale, matrix, shift, name=spec.get("label"))
    return p


# ---------------------------------------------------------------------------
# sampling helpers


def _directions(k: int, n: int) -> Array:
    """Deterministic unit vectors in R^k."""
    if k == 1:
        return np.array([[-1.0], [1.0]])
    if k == 2:
        t = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    rng = np.random.default_rng(12345)
    d = rng.standard_normal((n, k))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _ball_samples(center: Array, radius: float, n_rad: int, n_dir: int) -> Array:
    k = center.size
    radii = radius * np.linspace(0.0, 1.0, n_rad)[1:]
    dirs = _directions(k, n_dir)
    pts = center + radii[:, None, None] * dirs[None, :, :]
    return np.concatenate([center[None], pts.reshape(-1, k)])


def _shell_samples(k: int, radius: float, n_dir: int) -> Array:
    return radius * _directions(k, n_dir)


def _box_samples(k: int, half: float, budget: int) -> Array:
    m = max(int(round(budget ** (1.0 / k))), 3)
    axis = np.linspace(-half, half, m)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def well_eigenvalues(p: Potential) -> Array:
    """Array of shape (q, 2) holding (smallest, largest) Hessian eigenvalue per well."""
    ev = np.linalg.eigvalsh(p.hess(p.wells))
    return np.stack([ev[:, 0], ev[:, -1]], axis=-1)


def _check_wells(p: Potential) -> None:
    w = p.wells
    if p.q < 2:
        raise PotentialError(f"{p.name}: vacuum has q={p.q} < 2 wells")
    vals = p.eval(w)
    if np.any(np.abs(vals) > WELL_ZERO_TOL):
        raise PotentialError(f"{p.name}: V does not vanish at the wells ({vals})")
    diff = np.linalg.norm(w[:, None] - w[None, :], axis=-1)
    diff[np.diag_indices(p.q)] = np.inf
    if diff.min() <= WELL_DISTINCT_TOL:
        raise PotentialError(f"{p.name}: two wells coincide")
    if np.any(well_eigenvalues(p)[:, 0] <= 0.0):
        raise PotentialError(f"{p.name}: Hessian not positive definite at a well")


def min_well_distance(p: Potential) -> float:
    w = p.wells
    diff = np.linalg.norm(w[:, None] - w[None, :], axis=-1)
    diff[np.diag_indices(p.q)] = np.inf
    return float(diff.min())


def _growth_scan(p: Potential, n_dir: int):
    """Sample y.gradV/|y|^2 and V on spheres up to 10 max(R0, 1)."""
    R0 = float(np.linalg.norm(p.wells, axis=1).max())
    base = max(R0, 1.0)
    radii = np.geomspace(1.05 * base, 10.0 * base, 24)
    qmin, vmin = [], []
    for rho in radii:
        y = _shell_samples(p.dim_k, rho, n_dir)
        qmin.append(float(np.min(np.sum(y * p.grad(y), axis=-1)) / rho**2))
        vmin.append(float(np.min(p.eval(y))))
    return radii, np.array(qmin), np.array(vmin)


def validate_hypotheses(p: Potential, sample_budget: int = 10_000) -> HypothesisReport:
    """Check (H1)-(H3) by sampling; raise PotentialError on hard violations."""
    if sample_budget < 1000:
        raise ValueError("sample_budget must be at least 1000")
    _check_wells(p)
    w = p.wells
    eig = well_eigenvalues(p)
    R0 = float(np.linalg.norm(w, axis=1).max())
    dmin = min_well_distance(p)

    # H1: V >= 0 and no further zeros away from the listed wells
    y = _box_samples(p.dim_k, 2.0 * max(R0, 1.0), sample_budget)
    v = p.eval(y)
    dist = np.linalg.norm(y[:, None, :] - w[None], axis=-1).min(axis=1)
    far = dist > dmin / 8.0
    min_far = float(v[far].min()) if np.any(far) else float("inf")
    h1 = bool(v.min() >= -WELL_ZERO_TOL and min_far > 0.0)

    # H3: positive radial growth and V -> infinity on the sampled shells
    n_dir = max(16, sample_budget // 100) if p.dim_k > 1 else 2
    radii, qmin, vmin = _growth_scan(p, n_dir)
    pos = qmin > 0
    h3, alpha_inf, r_inf = False, 0.0, float("inf")
    if pos[-1]:
        j = len(pos) - 1
        while j > 0 and pos[j - 1]:
            j -= 1
        alpha_inf = float(qmin[j:].min())
        r_inf = float(radii[j])
        h3 = bool(vmin[-1] > vmin[j] and np.all(np.diff(vmin[j:]) >= -1e-12))
    return HypothesisReport(
        h1_ok=h1,
        h2_ok=True,
        h3_ok=h3,
        eigen_ranges=tuple((float(a), float(b)) for a, b in eig),
        margins={"min_V_away_from_wells": min_far, "min_V_sampled": float(v.min()),
                 "alpha_inf": alpha_inf, "R_inf": r_inf,
                 "min_eigenvalue": float(eig[:, 0].min())},
        sampled_radius=float(radii[-1]),
    )


def _admissible(p: Potential, mu: float, lam0: float, eig: Array, n_rad: int,
                n_dir: int, far_pts: Array) -> bool:
    w = p.wells
    alpha0 = 0.25 * lam0 * mu * mu
    for i, s in enumerate(w):
        pts = _ball_samples(s, 2.0 * mu, n_rad, n_dir)
        ev = np.linalg.eigvalsh(p.hess(pts))
        if ev[:, 0].min() < 0.5 * eig[i, 0] or ev[:, -1].max() > 2.0 * eig[i, 1]:
            return False
        outside = np.linalg.norm(pts - s, axis=1) >= mu
        if np.any(outside) and p.eval(pts[outside]).min() < alpha0:
            return False
    dist = np.linalg.norm(far_pts[:, None, :] - w[None], axis=-1).min(axis=1)
    mask = dist >= mu
    return not (np.any(mask) and p.eval(far_pts[mask]).min() < alpha0)


def derive_constants(p: Potential, sample_budget: int = 20_000) -> WellConstants:
    """Structural constants mu0, alpha0, lambda0, ... by bisection and sampling."""
    _check_wells(p)
    w = p.wells
    eig = well_eigenvalues(p)
    lam0 = float(eig[:, 0].min())
    lam_max = float(eig[:, 1].max())
    R0 = float(np.linalg.norm(w, axis=1).max())
    k = p.dim_k
    n_rad = 41
    n_dir = 2 if k == 1 else 64
    far_pts = _box_samples(k, 2.0 * R0 + 1.0, sample_budget)

    def ok(mu):
        return _admissible(p, mu, lam0, eig, n_rad, n_dir, far_pts)

    hi = min_well_distance(p) / 4.0
    if ok(hi):
        mu0 = hi
    else:
        lo = 0.0
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        if lo == 0.0:
            raise PotentialError(f"{p.name}: no admissible mu0 after {MAX_BISECTIONS} bisections")
        mu0 = lo

    # beta_inf: V >= beta |y|^2 on |y| >= 2 R0 (sampled out to 10 max(R0, 1))
    ndir = 2 if k == 1 else 256
    shells = np.geomspace(2.0 * R0, 10.0 * max(R0, 1.0) * 2.0, 32)
    beta = min(float(p.eval(_shell_samples(k, r, ndir)).min()) / r**2 for r in shells)
    radii, qmin, _ = _growth_scan(p, ndir)
    alpha_inf, r_inf = 0.0, float("inf")
    if qmin[-1] > 0:
        j = len(qmin) - 1
        while j > 0 and qmin[j - 1] > 0:
            j -= 1
        alpha_inf, r_inf = float(qmin[j:].min()), float(radii[j])
    return WellConstants(
        mu0=float(mu0),
        alpha0=0.25 * lam0 * mu0 * mu0,
        lambda0=lam0,
        lambda_max=lam_max,
        R0=R0,
        beta_inf=float(beta),
        alpha_inf=alpha_inf,
        R_inf=r_inf,
    )


@lru_cache(maxsize=64)
def well_constants(p: Potential) -> WellConstants:
    """Cached :func:`derive_constants` with default sampling."""
    return derive_constants(p)


def nearest_well(p: Potential, wc: WellConstants, y) -> tuple[Array, float] | None:
    """Well within mu0 of ``y`` and the bound sqrt(4 V(y) / lambda0), or None."""
    y = np.asarray(y, dtype=float).reshape(p.dim_k)
    v = float(p.eval(y))
    if v >= wc.alpha0:
        return None
    w = p.wells
    i = int(np.argmin(np.linalg.norm(w - y, axis=1)))
    return w[i].copy(), float(np.sqrt(4.0 * v / wc.lambda0))


def nearest_well_index(p: Potential, u: Array) -> tuple[Array, Array]:
    """Per-point index of the closest well and the distance to it."""
    d = np.linalg.norm(u[..., None, :] - p.wells, axis=-1)
    idx = np.argmin(d, axis=-1)
    return idx, np.take_along_axis(d, idx[..., None], axis=-1)[..., 0]
