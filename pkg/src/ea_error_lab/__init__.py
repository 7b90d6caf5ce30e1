"""Approximation-error analysis of (1+1) evolutionary algorithms as absorbing Markov chains."""

from .builders import (
    MONO_FUNCTIONS,
    ProblemSpec,
    build_model,
    build_mono_bwse,
    build_mono_obse,
    build_needle_bwne,
    build_needle_bwse,
    build_onemax_bwse,
    build_onemax_obse,
)
from .model import (
    LevelDecomposition,
    TransitionModel,
    distribution_step,
    exact_trajectory,
    initial_distribution,
    load_model,
    save_model,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "MONO_FUNCTIONS",
    "ProblemSpec",
    "build_model",
    "build_mono_bwse",
    "build_mono_obse",
    "build_needle_bwne",
    "build_needle_bwse",
    "build_onemax_bwse",
    "build_onemax_obse",
    "LevelDecomposition",
    "TransitionModel",
    "distribution_step",
    "exact_trajectory",
    "initial_distribution",
    "load_model",
    "save_model",
    "validate_model",
]
