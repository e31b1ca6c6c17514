"""Winding numbers of nonintersecting Brownian bridges on the circle with drift.

Exact finite-n winding distributions and correlation kernels built from
discrete orthogonal polynomials with a complex Gaussian weight, together with
closed-form large-n predictions and a lattice-path Monte Carlo sampler.
"""

from .errors import (
    BandPoint,
    Breakdown,
    NearBandEdge,
    NearPole,
    NonConvergence,
    NotInWindow,
    OutOfBand,
    OutOfRegime,
    OutsideDisk,
    RegionAmbiguous,
    RejectionBudgetExceeded,
    WindingLabError,
)
from .model import (
    LatticeWindow,
    ModelParams,
    lattice_points,
    single_offset_distribution,
    transition_density,
    weight,
)

__version__ = "0.1.0"

__all__ = [
    "BandPoint",
    "Breakdown",
    "LatticeWindow",
    "ModelParams",
    "NearBandEdge",
    "NearPole",
    "NonConvergence",
    "NotInWindow",
    "OutOfBand",
    "OutOfRegime",
    "OutsideDisk",
    "RegionAmbiguous",
    "RejectionBudgetExceeded",
    "WindingLabError",
    "lattice_points",
    "single_offset_distribution",
    "transition_density",
    "weight",
]
