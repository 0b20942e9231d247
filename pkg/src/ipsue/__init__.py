"""Greedy parametric model-order reduction with an RBF-surrogate error estimator."""

__version__ = "0.1.0"

from .benchmarks import LadderSpec, SecondOrderSpec, ThermalSpec, gen_rlc_ladder, gen_second_order, gen_thermal
from .estimator import ErrorEstimate, ReductionState, estimate, estimate_many, infsup_bound
from .greedy import GreedyConfig, GreedyTrace, greedy_fixed, ipsue, validate
from .linalg import SingularMatrixError, factor_solve, orth_extend
from .moments import MomentConfig, mmm
from .rbf import KernelSpec, RbfSurrogate
from .system import AffineParametricSystem, ParameterPoint, ReducedModel, project, rom_transfer, transfer_function

__all__ = [
    "AffineParametricSystem",
    "ParameterPoint",
    "ReducedModel",
    "project",
    "rom_transfer",
    "transfer_function",
    "ReductionState",
    "ErrorEstimate",
    "estimate",
    "estimate_many",
    "infsup_bound",
    "GreedyConfig",
    "GreedyTrace",
    "greedy_fixed",
    "ipsue",
    "validate",
    "KernelSpec",
    "RbfSurrogate",
    "MomentConfig",
    "mmm",
    "SingularMatrixError",
    "factor_solve",
    "orth_extend",
    "LadderSpec",
    "ThermalSpec",
    "SecondOrderSpec",
    "gen_rlc_ladder",
    "gen_thermal",
    "gen_second_order",
]
