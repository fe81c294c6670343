"""Maximum-likelihood MILS phase unwrapping for 3D interferometric ISAR."""

from milsunwrap.model import (
    SPEED_OF_LIGHT,
    ConfigurationError,
    InterferometricChannel,
    NoiseModel,
    ScattererCoords,
    SystemConfig,
    build_covariance,
    build_design_matrices,
    case_study_config,
    coherence_and_variance,
    fisher_covariance,
    fisher_rmse,
    load_config,
    save_config,
    snr_db_to_linear,
    unambiguous_height,
    wrap_phase,
)
from milsunwrap.solver import (
    CandidateEvaluation,
    CandidateSet,
    MilsProblem,
    MilsSolution,
    MilsSolver,
    NoAdmissibleSolution,
    conditional_real_estimate,
    integer_bounds,
    make_problem,
    solve,
)
from milsunwrap.quality import ApDecision, accept, ambiguity_posterior, candidate_posteriors

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "ApDecision",
    "CandidateEvaluation",
    "CandidateSet",
    "ConfigurationError",
    "InterferometricChannel",
    "MilsProblem",
    "MilsSolution",
    "MilsSolver",
    "NoAdmissibleSolution",
    "NoiseModel",
    "ScattererCoords",
    "SystemConfig",
    "accept",
    "ambiguity_posterior",
    "build_covariance",
    "build_design_matrices",
    "candidate_posteriors",
    "case_study_config",
    "coherence_and_variance",
    "conditional_real_estimate",
    "fisher_covariance",
    "fisher_rmse",
    "integer_bounds",
    "load_config",
    "make_problem",
    "save_config",
    "snr_db_to_linear",
    "solve",
    "unambiguous_height",
    "wrap_phase",
]
