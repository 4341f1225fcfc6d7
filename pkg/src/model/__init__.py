"""
Linear TTSA problems, noise oracles and assumption validators
"""
from .markov import mixing_time, spectral_gap, stationary_distribution, tv_coefficient
from .noise import NoiseSample, noise_sample, psi, reconstruct_update
from .oracles import (
    MarkovOracle,
    MixtureOracle,
    NoiseOracle,
    Observation,
    ObservationTable,
    PerturbationOracle,
    build_oracle,
    sample_observation,
)
from .problem import Solution, TtsaProblem, solve_exact
from .validation import AssumptionCheck, ValidationReport, validate_assumptions

__all__ = [
    'AssumptionCheck',
    'MarkovOracle',
    'MixtureOracle',
    'NoiseOracle',
    'NoiseSample',
    'Observation',
    'ObservationTable',
    'PerturbationOracle',
    'Solution',
    'TtsaProblem',
    'ValidationReport',
    'build_oracle',
    'mixing_time',
    'noise_sample',
    'psi',
    'reconstruct_update',
    'sample_observation',
    'solve_exact',
    'spectral_gap',
    'stationary_distribution',
    'tv_coefficient',
    'validate_assumptions',
]
