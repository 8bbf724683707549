"""First eigenvalue of the 1-Laplacian on planar domains.

The eigenvalue is approached through penalized, (1+eps)-regularized total
variation problems solved on a uniform grid, certified through the dual
flux of the limiting optimality system, and compared with the Cheeger
constant computed geometrically for convex domains.
"""

from .certificate import Certificate, build_certificate, rayleigh_quotient
from .cheeger import CheegerResult, ConvexPolygon, cheeger_constant, cheeger_constant_disk
from .eigenset import LevelSetSweep, ratio_sweep, superlevel_mask
from .energy import PenaltyParams, energy, energy_gradient, sigma_field
from .grid import (
    Disk,
    GridDomain,
    Rectangle,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    integrate,
    rasterize,
    total_variation,
)
from .solver import (
    ContinuationSchedule,
    SolveReport,
    SolverError,
    Stage,
    continuation_solve,
    default_schedule,
    minimize_stage,
    multiplier_estimate,
    schedule_for,
)

__all__ = [
    "Certificate",
    "build_certificate",
    "rayleigh_quotient",
    "CheegerResult",
    "ConvexPolygon",
    "cheeger_constant",
    "cheeger_constant_disk",
    "LevelSetSweep",
    "ratio_sweep",
    "superlevel_mask",
    "energy",
    "PenaltyParams",
    "energy_gradient",
    "sigma_field",
    "Disk",
    "GridDomain",
    "Rectangle",
    "ScalarField",
    "VectorField",
    "divergence",
    "gradient",
    "integrate",
    "rasterize",
    "total_variation",
    "ContinuationSchedule",
    "SolveReport",
    "SolverError",
    "Stage",
    "continuation_solve",
    "default_schedule",
    "minimize_stage",
    "multiplier_estimate",
    "schedule_for",
]

__version__ = "0.1.0"
