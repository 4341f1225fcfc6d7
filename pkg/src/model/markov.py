"""
Finite-state Markov kernel utilities: stationary law, mixing time, spectral gap
"""
import logging
import math
from typing import Any

import numpy as np

from ..config import Config
from ..errors import ConfigError, NotErgodic
from ..linalg import as_matrix

logger = logging.getLogger(__name__)


def as_kernel(kernel: Any) -> np.ndarray:
    """Coerce to a square row-stochastic matrix (rows sum to 1 within 1e-12)."""
    p = as_matrix(kernel, "kernel")
    if p.shape[0] != p.shape[1]:
        raise ConfigError(f"kernel must be square, got shape {p.shape}", field="kernel")
    if np.any(p < 0):
        raise ConfigError("kernel has negative entries", field="kernel")
    row_err = np.max(np.abs(p.sum(axis=1) - 1.0))
    if row_err > Config.STOCHASTIC_TOL:
        raise ConfigError(f"kernel rows do not sum to 1 (max error {row_err:.3e})",
                          field="kernel")
    return p


def stationary_distribution(kernel: Any) -> np.ndarray:
    """
    Stationary law pi of P from the left-eigenvector system.

    Solves [P^T - I; 1^T] pi = [0; 1] in the least-squares sense.
    """
    p = as_kernel(kernel)
    n = p.shape[0]
    system = np.vstack([p.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    err = np.max(np.abs(pi @ p - pi))
    if err > Config.STATIONARY_TOL:
        logger.warning("Stationary residual above tolerance residual=%.3e states=%d", err, n)
    return pi


def tv_coefficient(pk: np.ndarray) -> float:
    """Max pairwise total variation between rows of a stochastic matrix."""
    diffs = np.abs(pk[:, None, :] - pk[None, :, :]).sum(axis=2)
    return float(0.5 * np.max(diffs))


def mixing_time_cap(n_states: int) -> int:
    """Largest power examined before declaring a kernel non-ergodic."""
    return int(math.ceil(10 * n_states ** 2 * math.log(n_states))) + 1000


def mixing_time(kernel: Any, threshold: float = 0.25) -> int:
    """
    Smallest t with max-pairwise total variation of P^t at most `threshold`.

    Also checks the geometric decay TV(P^{mt}) <= threshold^m for m <= 4
    (logged if it fails, which only happens through round-off).

    Raises:
        NotErgodic: if the threshold is not reached by 10 S^2 log S + 1000
    """
    p = as_kernel(kernel)
    cap = mixing_time_cap(p.shape[0])
    pk = p.copy()
    t = 1
    while tv_coefficient(pk) > threshold:
        if t >= cap:
            raise NotErgodic(f"total variation of P^k still above {threshold} at k={cap}")
        pk = pk @ p
        t += 1

    pt = np.linalg.matrix_power(p, t)
    pmt = pt.copy()
    for m in range(2, 5):
        pmt = pmt @ pt
        if tv_coefficient(pmt) > threshold ** m + 1e-12:
            logger.warning("Geometric decay check failed t_mix=%d m=%d", t, m)
    return t


def spectral_gap(kernel: Any) -> float:
    """1 - second largest eigenvalue modulus of P (0 for periodic or reducible chains)."""
    p = as_kernel(kernel)
    if p.shape[0] == 1:
        return 1.0
    moduli = np.sort(np.abs(np.linalg.eigvals(p)))[::-1]
    return float(max(0.0, 1.0 - moduli[1]))
