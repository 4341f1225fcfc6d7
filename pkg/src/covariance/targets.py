"""
Target covariances of the Gaussian limits.

sigma_eps:        Var[psi], psi = eps_V - A12 A22^{-1} eps_W
sigma_n_last:     sum_{j=0}^{n} beta_j^2 G_{j+1:n} Sigma G_{j+1:n}^T
sigma_limit_last: lim beta_n^{-1} Sigma_n, i.e. Delta X + X Delta^T = Sigma for b < 1
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from ..errors import AssumptionViolated, NotHurwitz
from ..linalg import solve_lyapunov_equation
from ..model import MarkovOracle, NoiseOracle, Solution, TtsaProblem, solve_exact
from ..model.validation import validate_assumptions
from ..poisson import markov_asymptotic_covariance
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)


def _psi_map(problem: TtsaProblem) -> np.ndarray:
    return np.hstack([np.eye(problem.d_theta), -problem.a12_a22_inv])


def sigma_eps(problem: TtsaProblem, oracle: NoiseOracle, solution: Optional[Solution] = None,
              strict: bool = False) -> np.ndarray:
    """
    Closed-form Var[psi] under the oracle's law (stationary law for Markov oracles).

    Raises:
        AssumptionViolated: strict mode, martingale oracle whose conditional
            covariance is not constant
    """
    solution = solution if solution is not None else solve_exact(problem)
    if strict and not isinstance(oracle, MarkovOracle):
        check = validate_assumptions(problem, oracle).get("A3_constant_covariance")
        if not check.passed:
            raise AssumptionViolated(check.message)
    _, cov = oracle.epsilon_moments(problem, solution)
    m = _psi_map(problem)
    out = m @ cov @ m.T
    return (out + out.T) / 2.0


def accumulate_last_covariance(delta: np.ndarray, sigma: np.ndarray,
                               betas: Iterable[float]) -> np.ndarray:
    """
    X <- (I - beta Delta) X (I - beta Delta)^T + beta^2 Sigma over the given
    steps, starting from X = 0.
    """
    delta = np.atleast_2d(delta)
    sigma = np.atleast_2d(sigma)
    eye = np.eye(delta.shape[0])
    x = np.zeros_like(sigma, dtype=float)
    for beta in betas:
        g = eye - beta * delta
        x = g @ x @ g.T + beta * beta * sigma
    return (x + x.T) / 2.0


def sigma_n_last(problem: TtsaProblem, schedule: StepSchedule, sigma_source: Any,
                 n: int) -> np.ndarray:
    """Exact Sigma_n^last by the forward recursion over j = 0..n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    betas = schedule.beta(np.arange(n + 1))
    return accumulate_last_covariance(problem.delta, np.asarray(sigma_source, dtype=float), betas)


def normalized_last_covariances(problem: TtsaProblem, schedule: StepSchedule,
                                sigma_source: Any, grid: Sequence[int]) -> Dict[int, np.ndarray]:
    """beta_n^{-1} Sigma_n^last for every n of the grid in one forward pass."""
    sigma = np.atleast_2d(np.asarray(sigma_source, dtype=float))
    wanted = set(int(n) for n in grid)
    top = max(wanted)
    eye = np.eye(problem.d_theta)
    betas = schedule.beta(np.arange(top + 1))
    x = np.zeros_like(sigma)
    out = {}
    for j in range(top + 1):
        g = eye - betas[j] * problem.delta
        x = g @ x @ g.T + betas[j] ** 2 * sigma
        if j in wanted:
            out[j] = (x + x.T) / (2.0 * betas[j])
    return out


def sigma_limit_last(problem: TtsaProblem, sigma_source: Any) -> np.ndarray:
    """
    Solution of Delta X + X Delta^T = Sigma_source (limit of beta_n^{-1} Sigma_n for b < 1).

    Raises:
        NotHurwitz
    """
    return solve_lyapunov_equation(problem.delta, np.atleast_2d(np.asarray(sigma_source, float)))


def riccati_candidate_b1(problem: TtsaProblem, sigma_source: Any, beta0: float) -> np.ndarray:
    """
    Reading of the limit that keeps the beta_0 dependence:
    (beta0 Delta - I/2) X + X (beta0 Delta - I/2)^T = beta0 Sigma_source.

    Raises:
        NotHurwitz: if beta0 Delta - I/2 is not stable
    """
    a = beta0 * problem.delta - 0.5 * np.eye(problem.d_theta)
    return solve_lyapunov_equation(a, beta0 * np.atleast_2d(np.asarray(sigma_source, float)))


def markov_sigma_limit_last(problem: TtsaProblem, schedule: StepSchedule, oracle: MarkovOracle,
                            solution: Optional[Solution] = None) -> np.ndarray:
    """Lyapunov limit with the Markov asymptotic covariance as source."""
    if schedule.b_exp >= 1.0:
        raise ValueError("the Lyapunov limit needs b < 1")
    return sigma_limit_last(problem, markov_asymptotic_covariance(oracle, problem, solution))


@dataclass
class CovarianceReport:
    """
    Target covariances plus the finite-sum convergence diagnostics.

    convergence_gaps: (n, ||beta_n^{-1} Sigma_n - Sigma_limit||)
    lambda_min: lambda_min(Sigma_limit)
    candidates: analytic limits ("lyapunov", "riccati_b1"), None when undefined
    extrapolated: Richardson extrapolation of beta_n^{-1} Sigma_n
    lambda_threshold_nb: smallest grid n^b from which
        lambda_min(beta_n^{-1} Sigma_n) >= lambda_min / 2 holds on the rest of the grid
    """

    sigma_eps: np.ndarray
    sigma_n_last: np.ndarray
    sigma_limit_last: np.ndarray
    convergence_gaps: List[tuple]
    lambda_min: float
    candidates: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    extrapolated: Optional[np.ndarray] = None
    matched_candidate: Optional[str] = None
    gap_slope: Optional[float] = None
    predicted_slope: Optional[float] = None
    monotone_from: Optional[int] = None
    lambda_threshold_nb: Optional[float] = None
    sigma_mark: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        def mat(x):
            return None if x is None else np.asarray(x).tolist()

        return {
            "sigma_eps": mat(self.sigma_eps),
            "sigma_n_last": mat(self.sigma_n_last),
            "sigma_limit_last": mat(self.sigma_limit_last),
            "sigma_mark": mat(self.sigma_mark),
            "candidates": {k: mat(v) for k, v in self.candidates.items()},
            "extrapolated": mat(self.extrapolated),
            "matched_candidate": self.matched_candidate,
            "convergence_gaps": [{"n": int(n), "gap": float(g)} for n, g in self.convergence_gaps],
            "gap_slope": self.gap_slope,
            "predicted_slope": self.predicted_slope,
            "monotone_from": self.monotone_from,
            "lambda_min": self.lambda_min,
            "lambda_threshold_nb": self.lambda_threshold_nb,
        }


def predicted_gap_exponent(b_exp: float) -> float:
    """Gap decays like n^{-(1-b)} + n^{-b}; the slower term wins."""
    return -min(b_exp, 1.0 - b_exp)


def covariance_report(problem: TtsaProblem, oracle: NoiseOracle, schedule: StepSchedule,
                      n_grid: Sequence[int], solution: Optional[Solution] = None,
                      burn_in: int = 0) -> CovarianceReport:
    """
    Sigma_eps, Sigma_n^last on the grid, the Lyapunov limit and its comparison
    against the finite sums. Markov oracles use Sigma_inf^mark as source.
    """
    solution = solution if solution is not None else solve_exact(problem)
    grid = sorted(int(n) for n in n_grid)
    s_eps = sigma_eps(problem, oracle, solution)
    s_mark = None
    source = s_eps
    if isinstance(oracle, MarkovOracle):
        s_mark = markov_asymptotic_covariance(oracle, problem, solution)
        source = s_mark

    limit = sigma_limit_last(problem, source)
    normalized = normalized_last_covariances(problem, schedule, source, grid)
    gaps = [(n, float(np.linalg.norm(normalized[n] - limit, 2))) for n in grid]

    candidates: Dict[str, Optional[np.ndarray]] = {"lyapunov": limit}
    try:
        candidates["riccati_b1"] = riccati_candidate_b1(problem, source, schedule.c0_beta)
    except NotHurwitz:
        candidates["riccati_b1"] = None

    extrapolated = None
    matched = None
    if len(grid) >= 2:
        p = -predicted_gap_exponent(schedule.b_exp)
        n1, n2 = grid[-2], grid[-1]
        factor = (n2 / n1) ** p
        extrapolated = (factor * normalized[n2] - normalized[n1]) / (factor - 1.0)
        distances = {name: float(np.linalg.norm(c - extrapolated, 2))
                     for name, c in candidates.items() if c is not None}
        matched = min(distances, key=distances.get)

    lam_min = float(np.min(np.linalg.eigvalsh(limit)))
    threshold = None
    mins = [float(np.min(np.linalg.eigvalsh(normalized[n]))) for n in grid]
    for i, n in enumerate(grid):
        if all(m >= lam_min / 2.0 - 1e-15 for m in mins[i:]):
            threshold = float(n ** schedule.b_exp)
            break

    slope = None
    fit_points = [(n, g) for n, g in gaps if n >= burn_in and g > 0]
    if len(fit_points) >= 2:
        xs = np.log([n for n, _ in fit_points])
        ys = np.log([g for _, g in fit_points])
        slope = float(stats.linregress(xs, ys).slope)

    monotone_from = None
    values = [g for _, g in gaps]
    for i in range(len(values)):
        if all(values[j + 1] <= values[j] for j in range(i, len(values) - 1)):
            monotone_from = grid[i]
            break

    logger.info("Covariance report grid=%d..%d matched=%s slope=%s", grid[0], grid[-1],
                matched, "n/a" if slope is None else f"{slope:.3f}")
    return CovarianceReport(
        sigma_eps=s_eps,
        sigma_n_last=sigma_n_last_from(normalized, schedule, grid[-1]),
        sigma_limit_last=limit,
        convergence_gaps=gaps,
        lambda_min=lam_min,
        candidates=candidates,
        extrapolated=extrapolated,
        matched_candidate=matched,
        gap_slope=slope,
        predicted_slope=predicted_gap_exponent(schedule.b_exp),
        monotone_from=monotone_from,
        lambda_threshold_nb=threshold,
        sigma_mark=s_mark,
    )


def sigma_n_last_from(normalized: Dict[int, np.ndarray], schedule: StepSchedule,
                      n: int) -> np.ndarray:
    return normalized[n] * float(schedule.beta(n))
