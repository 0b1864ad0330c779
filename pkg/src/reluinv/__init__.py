"""Constrained inversion of trained ReLU networks.

Core pieces: the network model and its activation-pattern algebra, a dense
two-phase simplex, polyhedral region tools, outer-approximation subproblems,
the guided solver with local-optimality certification, a projected-gradient
baseline, instance generators with brute-force oracles, a big-M MILP export,
and a benchmark harness. A FastAPI service and a thin CLI wrap the package.
"""

from .errors import (
    BoundaryCapError,
    InfeasibleRegionError,
    InvalidInputError,
    NoDiscrepancyError,
    NumericalFailureError,
    ReluInvError,
    UndefinedMetricError,
)
from .model import (
    ActivationPattern,
    BoundarySet,
    EvalTrace,
    Layer,
    LossSpec,
    NetworkSpec,
    forward,
    gradient_in_pattern,
    load_network,
    loss_and_gradient,
    masked_affine,
    pattern_of,
    save_network,
)
from .ogo import OgoConfig
from .pgd import PgdConfig, project
from .result import RunResult, RunStatus
from .subproblems import CutPool, CutRecord, FeasibleSet

__version__ = "0.1.0"

__all__ = [
    "ActivationPattern",
    "BoundaryCapError",
    "BoundarySet",
    "CutPool",
    "CutRecord",
    "EvalTrace",
    "FeasibleSet",
    "InfeasibleRegionError",
    "InvalidInputError",
    "Layer",
    "LossSpec",
    "NetworkSpec",
    "NoDiscrepancyError",
    "NumericalFailureError",
    "OgoConfig",
    "PgdConfig",
    "ReluInvError",
    "RunResult",
    "RunStatus",
    "UndefinedMetricError",
    "forward",
    "gradient_in_pattern",
    "load_network",
    "loss_and_gradient",
    "masked_affine",
    "pattern_of",
    "project",
    "save_network",
    "__version__",
]
