"""Simulator and verification harness for pairwise particle systems on
randomly shuffled sparse regular networks, with the matching fluid-limit
ODE and the concentration diagnostics that connect the two."""

__version__ = "0.1.0"

from .model import ModelSpec, derive_increment_tensor, make_model, sis_model, validate_model, voter_model
from .network import RegularBipartiteGraph, decompose_matchings, generate_regular_bipartite, shuffle_states
from .microsim import MacroTrajectory, SimResult, couple_to_counts, sample_auxiliary, simulate, simulate_optimized
from .fluid import FluidPath, integrate, logistic_oracle, vector_field

__all__ = [
    "__version__",
    "ModelSpec", "derive_increment_tensor", "make_model", "sis_model",
    "validate_model", "voter_model",
    "RegularBipartiteGraph", "decompose_matchings",
    "generate_regular_bipartite", "shuffle_states",
    "MacroTrajectory", "SimResult", "couple_to_counts", "sample_auxiliary",
    "simulate", "simulate_optimized",
    "FluidPath", "integrate", "logistic_oracle", "vector_field",
]
