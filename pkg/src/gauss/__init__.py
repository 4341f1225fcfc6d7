"""
Monte Carlo clouds, distances to Gaussian targets and rate fits
"""
from .distances import (
    METRICS,
    DistanceReport,
    distance_to_gaussian,
    ks_statistic,
    sphere_directions,
    w1_statistic,
)
from .harness import (
    TARGETS,
    SampleCloud,
    SimulationSpec,
    collect_cloud,
    collect_moments,
    collect_remainders,
    noise_source_covariance,
    target_covariance,
)
from .rate_fit import RateFit, check_noise_floor, fit_rate, noise_floor, require_grid

__all__ = [
    'METRICS',
    'TARGETS',
    'DistanceReport',
    'RateFit',
    'SampleCloud',
    'SimulationSpec',
    'check_noise_floor',
    'collect_cloud',
    'collect_moments',
    'collect_remainders',
    'distance_to_gaussian',
    'fit_rate',
    'ks_statistic',
    'noise_floor',
    'noise_source_covariance',
    'require_grid',
    'sphere_directions',
    'target_covariance',
    'w1_statistic',
]
