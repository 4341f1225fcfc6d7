"""
Poisson equation f^ - P f^ = f - pi(f) on finite chains, the martingale /
Markov split of the TTSA noise, and the Markov asymptotic covariance
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..config import Config
from ..engine import DecouplingSequence, decoupled_update
from ..errors import MissingNoiseLog, NotErgodic
from ..model import MarkovOracle, NoiseSample, Solution, TtsaProblem, solve_exact
from ..model.problem import MATRIX_FIELDS
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    """
    Per-state solution f_hat (normalized so pi(f_hat) = 0) and P f_hat.

    Arrays are (S, ...) with the trailing shape of f.
    """

    f_hat: np.ndarray
    p_f_hat: np.ndarray
    residual: float
    bound_ok: bool


def fundamental_matrix(oracle: MarkovOracle) -> np.ndarray:
    """
    Z = (I - P + 1 pi^T)^{-1}.

    Raises:
        NotErgodic: for non-mixing chains, spectral gap below 1e-6, or a
            numerically singular I - P + 1 pi^T
    """
    _ = oracle.t_mix
    if oracle.spectral_gap < Config.MIN_SPECTRAL_GAP:
        raise NotErgodic(f"spectral gap {oracle.spectral_gap:.3e} below {Config.MIN_SPECTRAL_GAP}")
    n = oracle.n_states
    mat = np.eye(n) - oracle.kernel + np.outer(np.ones(n), oracle.stationary)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > Config.SINGULAR_CONDITION:
        raise NotErgodic(f"fundamental matrix ill-conditioned (condition {cond:.3e})")
    lu = scipy.linalg.lu_factor(mat)
    return scipy.linalg.lu_solve(lu, np.eye(n))


def solve_poisson(oracle: MarkovOracle, f: Any, z: Optional[np.ndarray] = None) -> PoissonSolution:
    """
    Solve f^ - P f^ = f - pi(f) through the fundamental matrix.

    Args:
        oracle: ergodic chain
        f: per-state values, shape (S,) or (S, ...)
        z: precomputed fundamental matrix

    Raises:
        NotErgodic
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != oracle.n_states:
        raise ValueError(f"f has {f.shape[0]} rows, chain has {oracle.n_states} states")
    z = fundamental_matrix(oracle) if z is None else z
    flat = f.reshape(oracle.n_states, -1)
    centered = flat - oracle.stationary @ flat
    f_hat = z @ centered
    p_f_hat = oracle.kernel @ f_hat

    residual = float(np.max(np.abs(f_hat - p_f_hat - centered))) if flat.size else 0.0
    if residual > Config.POISSON_RESIDUAL_TOL:
        logger.warning("Poisson residual above tolerance residual=%.3e", residual)
    sup_f = float(np.max(np.abs(flat))) if flat.size else 0.0
    sup_hat = float(np.max(np.abs(f_hat))) if flat.size else 0.0
    bound_ok = sup_hat <= (8.0 / 3.0) * oracle.t_mix * sup_f + 1e-12
    if not bound_ok:
        logger.warning("Poisson sup-norm bound violated sup_hat=%.4g bound=%.4g",
                       sup_hat, (8.0 / 3.0) * oracle.t_mix * sup_f)
    return PoissonSolution(
        f_hat=f_hat.reshape(f.shape),
        p_f_hat=p_f_hat.reshape(f.shape),
        residual=residual,
        bound_ok=bound_ok,
    )


@dataclass(frozen=True, eq=False)
class NoiseSplit:
    """
    V_{k+1} = v0 + v1, W_{k+1} = w0 + w1 with (v0, w0) a martingale increment.

    martingale_defect is max |E[(v0, w0) | X_k]| computed exactly from P.
    """

    v0: np.ndarray
    w0: np.ndarray
    v1: np.ndarray
    w1: np.ndarray
    martingale_defect: float


class PoissonNoiseModel:
    """
    Poisson solutions of eps_V, eps_W and every centered A_ij(x) - A_ij for one
    (problem, chain) pair, with the per-step noise split built on them.
    """

    def __init__(self, oracle: MarkovOracle, problem: TtsaProblem,
                 solution: Optional[Solution] = None):
        self.oracle = oracle
        self.problem = problem
        self.solution = solution if solution is not None else solve_exact(problem)
        z = fundamental_matrix(oracle)
        eps_v, eps_w = oracle.table.epsilons(problem, self.solution)
        centered = oracle.table.centered(problem)
        self.eps_v = solve_poisson(oracle, eps_v, z)
        self.eps_w = solve_poisson(oracle, eps_w, z)
        self.a_tilde: Dict[str, PoissonSolution] = {
            f: solve_poisson(oracle, getattr(centered, f), z) for f in MATRIX_FIELDS
        }
        pi = oracle.stationary
        self.eps_mean = (pi @ eps_v, pi @ eps_w)
        self.a_mean = {f: np.tensordot(pi, getattr(centered, f), axes=1) for f in MATRIX_FIELDS}

    def _parts(self, x_prev: int, x_next: int, t: np.ndarray, u: np.ndarray,
               eps: str, a_first: str, a_second: str) -> Tuple[np.ndarray, np.ndarray]:
        e = getattr(self, eps)
        a1, a2 = self.a_tilde[a_first], self.a_tilde[a_second]
        part0 = ((e.f_hat[x_next] - e.p_f_hat[x_prev])
                 - (a1.f_hat[x_next] - a1.p_f_hat[x_prev]) @ t
                 - (a2.f_hat[x_next] - a2.p_f_hat[x_prev]) @ u)
        mean_e = self.eps_mean[0 if eps == "eps_v" else 1]
        part1 = ((e.p_f_hat[x_prev] - e.p_f_hat[x_next])
                 + (a1.p_f_hat[x_next] - a1.p_f_hat[x_prev]) @ t
                 + (a2.p_f_hat[x_next] - a2.p_f_hat[x_prev]) @ u
                 + mean_e - self.a_mean[a_first] @ t - self.a_mean[a_second] @ u)
        return part0, part1

    def _conditional_mean(self, x_prev: int, t: np.ndarray, u: np.ndarray,
                          eps: str, a_first: str, a_second: str) -> np.ndarray:
        row = self.oracle.kernel[x_prev]
        e = getattr(self, eps)
        a1, a2 = self.a_tilde[a_first], self.a_tilde[a_second]
        return ((np.tensordot(row, e.f_hat, axes=1) - e.p_f_hat[x_prev])
                - (np.tensordot(row, a1.f_hat, axes=1) - a1.p_f_hat[x_prev]) @ t
                - (np.tensordot(row, a2.f_hat, axes=1) - a2.p_f_hat[x_prev]) @ u)

    def split(self, sample: NoiseSample) -> NoiseSplit:
        x_prev, x_next = int(sample.prev_state), int(sample.state)
        t, u = sample.theta_err, sample.w_err
        v0, v1 = self._parts(x_prev, x_next, t, u, "eps_v", "a11", "a12")
        w0, w1 = self._parts(x_prev, x_next, t, u, "eps_w", "a21", "a22")
        defect = max(
            float(np.max(np.abs(self._conditional_mean(x_prev, t, u, "eps_v", "a11", "a12")))),
            float(np.max(np.abs(self._conditional_mean(x_prev, t, u, "eps_w", "a21", "a22")))),
        )
        return NoiseSplit(v0=v0, w0=w0, v1=v1, w1=w1, martingale_defect=defect)


def split_noise(oracle: MarkovOracle, noise_log: Optional[Sequence[NoiseSample]],
                problem: TtsaProblem, solution: Optional[Solution] = None) -> List[NoiseSplit]:
    """
    Per-step martingale / Markov split of the logged noise.

    Raises:
        MissingNoiseLog: if the trajectory was run without noise logging
    """
    if noise_log is None:
        raise MissingNoiseLog("noise split needs a trajectory run with log_noise enabled")
    model = PoissonNoiseModel(oracle, problem, solution)
    return [model.split(sample) for sample in noise_log]


@dataclass
class SplitRecursions:
    """Decoupled iterates driven separately by the martingale and Markov noise parts"""

    theta_tilde_0: np.ndarray
    w_tilde_0: np.ndarray
    theta_tilde_1: np.ndarray
    w_tilde_1: np.ndarray


def split_recursions(problem: TtsaProblem, schedule: StepSchedule, splits: Sequence[NoiseSplit],
                     theta_tilde_init: np.ndarray, w_tilde_init: np.ndarray) -> SplitRecursions:
    """
    Run the decoupled recursion twice: from the initial point with (v0, w0)
    and from zero with (v1, w1). By linearity the sums equal (theta~, w~).

    Returns the trajectories (len(splits) + 1 rows each).
    """
    decoupling = DecouplingSequence(problem, schedule)
    t0, u0 = np.asarray(theta_tilde_init, dtype=float), np.asarray(w_tilde_init, dtype=float)
    t1, u1 = np.zeros_like(t0), np.zeros_like(u0)
    rows = [(t0, u0, t1, u1)]
    for part in splits:
        dec = decoupling.advance()
        t0, u0 = decoupled_update(problem, t0, u0, part.v0, part.w0, dec)
        t1, u1 = decoupled_update(problem, t1, u1, part.v1, part.w1, dec)
        rows.append((t0, u0, t1, u1))
    cols = list(zip(*rows))
    return SplitRecursions(*(np.array(c) for c in cols))


def markov_asymptotic_covariance(oracle: MarkovOracle, problem: TtsaProblem,
                                 solution: Optional[Solution] = None) -> np.ndarray:
    """
    sum_x pi(x) sum_y P(x, y) (psi^(y) - P psi^(x)) (psi^(y) - P psi^(x))^T
    for psi(x) = eps_V(x) - A12 A22^{-1} eps_W(x).

    Raises:
        NotErgodic
    """
    solution = solution if solution is not None else solve_exact(problem)
    eps_v, eps_w = oracle.table.epsilons(problem, solution)
    psi_states = eps_v - eps_w @ problem.a12_a22_inv.T
    return asymptotic_covariance_of(oracle, psi_states)


def asymptotic_covariance_of(oracle: MarkovOracle, f: np.ndarray) -> np.ndarray:
    """Asymptotic covariance of n^{-1/2} sum_k (f(X_k) - pi(f)) for vector-valued f (S, d)."""
    f = np.asarray(f, dtype=float).reshape(oracle.n_states, -1)
    sol = solve_poisson(oracle, f)
    incr = sol.f_hat[None, :, :] - sol.p_f_hat[:, None, :]
    weights = oracle.stationary[:, None] * oracle.kernel
    cov = np.einsum("xy,xyi,xyj->ij", weights, incr, incr)
    return (cov + cov.T) / 2.0
