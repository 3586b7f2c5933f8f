"""plaplab: a numerical laboratory for p-Laplacian obstacle problems.

Structured-grid P1 finite elements, a projected nonlinear Gauss-Seidel
solver for the elliptic obstacle problem, an implicit marcher for its
parabolic counterpart, free-boundary measurement instruments (growth
exponents, non-degeneracy, porosity, blow-up rescaling), a catalog of
closed-form and manufactured solutions with residual scans and
constant audits, and a config-driven experiment runner.
"""

from .elliptic import (
    EllipticProblem,
    EllipticSolution,
    KktReport,
    SolverConfig,
    solve_obstacle,
    verify_kkt,
)
from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    InfeasibleError,
    MeasurementError,
    NumericalError,
    ParseError,
    PreconditionError,
)
from .freeboundary import (
    GrowthFit,
    NondegReport,
    PorosityReport,
    blowup_rescale,
    contact_set,
    free_boundary,
    measure_growth,
    measure_parabolic_growth,
    nondegeneracy_profile,
    porosity_profile,
)
from .mesh import Domain, Grid, NodeSet, ScalarField, build_grid, refine
from .oracles import catalog, constant_audit, exponent_catalog, residual_scan
from .parabolic import (
    LipschitzReport,
    ParabolicProblem,
    TimeGrid,
    solve_parabolic,
    time_lipschitz_constant,
)
from .profiles import preset
from .runner import run_experiment

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Domain",
    "Grid",
    "NodeSet",
    "ScalarField",
    "build_grid",
    "refine",
    "EllipticProblem",
    "EllipticSolution",
    "SolverConfig",
    "KktReport",
    "solve_obstacle",
    "verify_kkt",
    "ParabolicProblem",
    "TimeGrid",
    "LipschitzReport",
    "solve_parabolic",
    "time_lipschitz_constant",
    "GrowthFit",
    "NondegReport",
    "PorosityReport",
    "contact_set",
    "free_boundary",
    "measure_growth",
    "measure_parabolic_growth",
    "nondegeneracy_profile",
    "porosity_profile",
    "blowup_rescale",
    "catalog",
    "residual_scan",
    "constant_audit",
    "exponent_catalog",
    "preset",
    "run_experiment",
    "ConfigurationError",
    "DomainError",
    "EvaluationError",
    "InfeasibleError",
    "MeasurementError",
    "NumericalError",
    "ParseError",
    "PreconditionError",
]
