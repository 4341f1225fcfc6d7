"""
Poisson-equation machinery for finite-state Markov noise
"""
from .poisson_solver import (
    NoiseSplit,
    PoissonNoiseModel,
    PoissonSolution,
    SplitRecursions,
    asymptotic_covariance_of,
    fundamental_matrix,
    markov_asymptotic_covariance,
    solve_poisson,
    split_noise,
    split_recursions,
)

__all__ = [
    'NoiseSplit',
    'PoissonNoiseModel',
    'PoissonSolution',
    'SplitRecursions',
    'asymptotic_covariance_of',
    'fundamental_matrix',
    'markov_asymptotic_covariance',
    'solve_poisson',
    'split_noise',
    'split_recursions',
]
