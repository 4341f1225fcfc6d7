"""
Exact target covariances for the averaged and last-iterate Gaussian limits
"""
from .targets import (
    CovarianceReport,
    accumulate_last_covariance,
    covariance_report,
    markov_sigma_limit_last,
    normalized_last_covariances,
    predicted_gap_exponent,
    riccati_candidate_b1,
    sigma_eps,
    sigma_limit_last,
    sigma_n_last,
)

__all__ = [
    'CovarianceReport',
    'accumulate_last_covariance',
    'covariance_report',
    'markov_sigma_limit_last',
    'normalized_last_covariances',
    'predicted_gap_exponent',
    'riccati_candidate_b1',
    'sigma_eps',
    'sigma_limit_last',
    'sigma_n_last',
]
