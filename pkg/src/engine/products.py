"""
Deterministic matrix products and the linear leading statistics of the
averaging and last-iterate decompositions
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..errors import MissingNoiseLog
from ..linalg import LyapunovCertificate, solve_lyapunov
from ..model import NoiseSample, TtsaProblem, psi
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)


@dataclass
class MatrixProducts:
    """
    g1 = prod_{i=m}^{k} (I - beta_i Delta), g2 = prod (I - gamma_i A22),
    p1 = prod (1 - beta_i a_Delta / 2), p2 = prod (1 - gamma_i a22 / 2).

    bound_ok records whether ||G1|| <= sqrt(kappa_Delta) p1 and
    ||G2|| <= sqrt(kappa_22) p2 hold numerically.
    """

    g1: np.ndarray
    g2: np.ndarray
    p1: float
    p2: float
    bound_ok: bool


def _kappa(cert: LyapunovCertificate) -> float:
    vals = np.linalg.eigvalsh(cert.q)
    return float(vals[-1] / vals[0])


def matrix_products(schedule: StepSchedule, problem: TtsaProblem, m: int, k: int,
                    cert_delta: Optional[LyapunovCertificate] = None,
                    cert22: Optional[LyapunovCertificate] = None) -> MatrixProducts:
    """
    Products over i = m..k; m > k gives the identity and scalar 1.

    All factors of each product commute, so the order of multiplication is
    immaterial.
    """
    cert_delta = cert_delta or solve_lyapunov(problem.delta)
    cert22 = cert22 or solve_lyapunov(problem.a22)
    g1 = np.eye(problem.d_theta)
    g2 = np.eye(problem.d_w)
    p1 = p2 = 1.0
    if m <= k:
        idx = np.arange(m, k + 1)
        betas = schedule.beta(idx)
        gammas = schedule.gamma(idx)
        for beta, gamma in zip(betas, gammas):
            g1 = (np.eye(problem.d_theta) - beta * problem.delta) @ g1
            g2 = (np.eye(problem.d_w) - gamma * problem.a22) @ g2
        p1 = float(np.prod(1.0 - 0.5 * betas * cert_delta.contraction_rate))
        p2 = float(np.prod(1.0 - 0.5 * gammas * cert22.contraction_rate))
    bound_ok = bool(
        np.linalg.norm(g1, 2) <= np.sqrt(_kappa(cert_delta)) * p1 * (1 + 1e-12)
        and np.linalg.norm(g2, 2) <= np.sqrt(_kappa(cert22)) * p2 * (1 + 1e-12)
    )
    if not bound_ok:
        logger.warning("Product bound violated m=%d k=%d (steps above max_step?)", m, k)
    return MatrixProducts(g1=g1, g2=g2, p1=p1, p2=p2, bound_ok=bound_ok)


@dataclass
class LeadingStatistic:
    """Linear statistic and the remainder (None when the target is unavailable)"""

    statistic: np.ndarray
    residual: Optional[np.ndarray]


def _require_log(noise_log: Optional[Sequence[NoiseSample]], needed: int) -> None:
    if noise_log is None:
        raise MissingNoiseLog("run without log_noise; rerun with noise logging enabled")
    if len(noise_log) < needed:
        raise MissingNoiseLog(f"noise log has {len(noise_log)} steps, {needed} needed")


def leading_statistic_last(noise_log: Optional[Sequence[NoiseSample]], problem: TtsaProblem,
                           schedule: StepSchedule, n: int,
                           theta_tilde_next: Optional[np.ndarray] = None) -> LeadingStatistic:
    """
    sum_{j=0}^{n} beta_j G_{j+1:n} psi_{j+1}, psi = eps_V - A12 A22^{-1} eps_W.

    The remainder is theta~_{n+1} minus the statistic; theta~_{n+1} is taken
    from `theta_tilde_next` or from the log entry of step n + 1.
    """
    _require_log(noise_log, n + 1)
    stat = np.zeros(problem.d_theta)
    eye = np.eye(problem.d_theta)
    for j in range(n + 1):
        beta = float(schedule.beta(j))
        s = noise_log[j]
        stat = (eye - beta * problem.delta) @ stat + beta * psi(problem, s.eps_v, s.eps_w)
    if theta_tilde_next is None and len(noise_log) > n + 1:
        theta_tilde_next = noise_log[n + 1].theta_err
    residual = None if theta_tilde_next is None else np.asarray(theta_tilde_next) - stat
    return LeadingStatistic(statistic=stat, residual=residual)


def psi_series(noise_log: Sequence[NoiseSample], problem: TtsaProblem) -> List[np.ndarray]:
    """psi_{k+1} for every logged step."""
    return [psi(problem, s.eps_v, s.eps_w) for s in noise_log]


def leading_statistic_pr(noise_log: Optional[Sequence[NoiseSample]], problem: TtsaProblem,
                         n: int, theta_bar: Optional[np.ndarray] = None,
                         theta_star: Optional[np.ndarray] = None) -> LeadingStatistic:
    """
    n^{-1/2} sum_{k=1}^{n} psi_{k+1} and the remainder
    sqrt(n) Delta (theta_bar_n - theta*) - statistic.
    """
    _require_log(noise_log, n + 1)
    stat = np.sum(psi_series(noise_log[1:n + 1], problem), axis=0) / np.sqrt(n)
    residual = None
    if theta_bar is not None and theta_star is not None:
        residual = np.sqrt(n) * problem.delta @ (np.asarray(theta_bar) - theta_star) - stat
    return LeadingStatistic(statistic=stat, residual=residual)
