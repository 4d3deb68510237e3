"""Coupled ground-building resonance solver.

A boundary-integral solver for the anti-plane elastic half-space coupled to
rows of resonating surface structures, with finite and periodic city layouts,
quasi-periodic Green's functions via Ewald summation, and a CLI that exports
resonance tables as CSV (optionally with rendered figures).
"""

from cityres.bie import (
    DensitySolution,
    FoundationGrid,
    NearResonanceError,
    NystromSystem,
    assemble,
    evaluate_field,
    foundation_force,
    solve_density,
)
from cityres.citymodel import (
    BuildingResonanceError,
    BuildingSpec,
    CityConfig,
    DimensionalBuilding,
    HalfSpaceSpec,
    STANDARD_PARAMETERS,
    nondimensionalize,
    redimensionalize,
    replicate,
    top_displacement,
)
from cityres.greens import (
    EwaldConfig,
    PeriodicCell,
    SingularPointError,
    TruncationError,
    WoodAnomalyError,
    btilde,
    gamma_m,
    gper_ewald,
    lattice_sum_origin,
)
from cityres.resonance import (
    ConvergenceError,
    ConvergenceStudy,
    ResonanceResult,
    TMatrix,
    convergence_study,
    find_hetero_finite,
    find_hetero_periodic,
    find_identical_finite,
    find_identical_periodic,
    jacobi_eigen,
    t_matrix,
    verify_residual,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # city description
    "BuildingSpec",
    "CityConfig",
    "DimensionalBuilding",
    "HalfSpaceSpec",
    "STANDARD_PARAMETERS",
    "nondimensionalize",
    "redimensionalize",
    "replicate",
    "top_displacement",
    # boundary-integral layer
    "FoundationGrid",
    "NystromSystem",
    "DensitySolution",
    "assemble",
    "solve_density",
    "evaluate_field",
    "foundation_force",
    # lattice Green's function
    "PeriodicCell",
    "EwaldConfig",
    "gper_ewald",
    "btilde",
    "gamma_m",
    "lattice_sum_origin",
    # resonance search
    "TMatrix",
    "ResonanceResult",
    "ConvergenceStudy",
    "t_matrix",
    "jacobi_eigen",
    "find_identical_finite",
    "find_identical_periodic",
    "find_hetero_finite",
    "find_hetero_periodic",
    "convergence_study",
    "verify_residual",
    # error types
    "BuildingResonanceError",
    "NearResonanceError",
    "WoodAnomalyError",
    "SingularPointError",
    "TruncationError",
    "ConvergenceError",
]
