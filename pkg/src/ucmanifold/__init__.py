"""Unit commitment under manifold uncertainty.

Wind (probabilistic), interval and fuzzy loads are encoded as Dempster-Shafer
structures, propagated through a quadratic-form loss model, and the resulting
P-box-valued cost is minimized with a grey wolf optimizer.
"""

from .ds import (
    DSStructure, PBox, UncertainInputSpec, WindFarmCDF, combine_independent, condense,
    convolve_dependent, encode, quantile_dominates, satisfaction_bounds, to_pbox,
)
from .eaa import NoiseVector, QuadraticForm, qf_add, qf_from_input, qf_mul, qf_scale, qf_sub, qf_to_ds
from .errors import (
    CaseParseError, InfeasibleCaseError, InvalidInputError, PreconditionError, SingularNetworkError,
    UCError, UnsupportedOperationError,
)
from .gwo import OptimizerConfig, minimize, solve
from .model import Schedule, ScenarioConfig, UCProblem, UnitSpec
from .network import NetworkCase, build_loss_model, build_ptdf, eval_loss, read_case

__version__ = "0.1.0"

__all__ = [
    "DSStructure", "PBox", "UncertainInputSpec", "WindFarmCDF", "combine_independent", "condense",
    "convolve_dependent", "encode", "quantile_dominates", "satisfaction_bounds", "to_pbox",
    "NoiseVector", "QuadraticForm", "qf_add", "qf_from_input", "qf_mul", "qf_scale", "qf_sub", "qf_to_ds",
    "CaseParseError", "InfeasibleCaseError", "InvalidInputError", "PreconditionError",
    "SingularNetworkError", "UCError", "UnsupportedOperationError",
    "OptimizerConfig", "minimize", "solve", "Schedule", "ScenarioConfig", "UCProblem", "UnitSpec",
    "NetworkCase", "build_loss_model", "build_ptdf", "eval_loss", "read_case",
]
