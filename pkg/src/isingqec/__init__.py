"""Surface-code decoding as Ising-type optimisation."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .annealer import AnnealerConfig, AnnealResult, minimize
from .decoder import DecodeOutcome, decode
from .hamiltonian import (
    build_hobo,
    compute_y_couplings,
    derive_conversion_coefficients,
    evaluate,
    hobo_to_qubo,
    interpret_solution,
)
from .harness import ExperimentConfig, TrialRecord, fit_scaling, fit_threshold, run_experiment, run_trial
from .lattice import CodeLayout, build_layout, logical_failure, stabilizer_syndrome
from .mwpm import build_matching_instance, correction_from_matching, solve_matching
from .noise import NoiseSpec, extract_syndrome, sample

__all__ = [
    "BACKEND", "AnnealerConfig", "AnnealResult", "minimize", "DecodeOutcome", "decode",
    "build_hobo", "compute_y_couplings", "derive_conversion_coefficients", "evaluate",
    "hobo_to_qubo", "interpret_solution", "ExperimentConfig", "TrialRecord", "fit_scaling",
    "fit_threshold", "run_experiment", "run_trial", "CodeLayout", "build_layout",
    "logical_failure", "stabilizer_syndrome", "build_matching_instance",
    "correction_from_matching", "solve_matching", "NoiseSpec", "extract_syndrome", "sample",
]
