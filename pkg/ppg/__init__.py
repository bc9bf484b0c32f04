"""Proximal-proximal gradient solvers for min_z h(z) + P(Mz - b)."""

__version__ = "1.0.0"

from ppg.errors import (  # noqa: E402
    ConfigurationError,
    DimensionError,
    DomainError,
    NumericalError,
    PPGError,
    PreconditionError,
    UnsupportedStructureError,
)
from ppg.solvers import (  # noqa: E402
    CompositeProblem,
    PPGConfig,
    SolveTrace,
    condat_solve,
    mfbs_solve,
    ppg_solve,
    proximal_ama_solve,
    proximal_gradient_solve,
)

__all__ = [
    "__version__",
    "CompositeProblem",
    "ConfigurationError",
    "DimensionError",
    "DomainError",
    "NumericalError",
    "PPGConfig",
    "PPGError",
    "PreconditionError",
    "SolveTrace",
    "UnsupportedStructureError",
    "condat_solve",
    "mfbs_solve",
    "ppg_solve",
    "proximal_ama_solve",
    "proximal_gradient_solve",
]
