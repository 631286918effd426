"""Numerical laboratory for the planar vectorial Allen-Cahn system -Lap u + eps^-2 grad V(u) = 0."""

from .potential import Potential, WellConstants, builtin, derive_constants, validate_hypotheses, well_constants
from .grid import Grid2D, read_vac1, write_vac1
from .solver import SolveConfig, gradient_flow, newton_solve, residual, seed, solve
from .fields import ball_mass, diagnostics, frame_project, radial_scan

__version__ = "0.1.0"

__all__ = [
    "Potential", "WellConstants", "builtin", "derive_constants", "validate_hypotheses",
    "well_constants", "Grid2D", "read_vac1", "write_vac1", "SolveConfig", "gradient_flow",
    "newton_solve", "residual", "seed", "solve", "ball_mass", "diagnostics", "frame_project",
    "radial_scan",
]
