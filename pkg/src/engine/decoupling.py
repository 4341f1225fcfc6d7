"""
Deterministic decoupling matrices L_k, U_k, D_k, B11^k, B22^k
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..config import Config
from ..errors import DecouplingIllConditioned
from ..model import TtsaProblem
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DecouplingState:
    """
    Matrices of step k.

    l_k: L_k; u_k = b11_k = Delta - A12 L_k; d_k = L_{k+1} + A22^{-1} A21;
    b22_k = (beta_k / gamma_k) D_k A12 + A22.
    """

    k: int
    beta: float
    gamma: float
    l_k: np.ndarray
    u_k: np.ndarray
    d_k: np.ndarray
    b11_k: np.ndarray
    b22_k: np.ndarray


class DecouplingSequence:
    """
    Forward iteration of
    L_{k+1} = (L_k - gamma_k A22 L_k + beta_k A22^{-1} A21 U_k)(I - beta_k U_k)^{-1},
    starting from L_0 = 0 at step `start`.

    Tracks max_k ||L_k|| gamma_k / beta_k along the way.
    """

    def __init__(self, problem: TtsaProblem, schedule: StepSchedule, start: int = 0):
        self.problem = problem
        self.schedule = schedule
        self.k = start
        self.l_k = np.zeros((problem.d_w, problem.d_theta))
        self.l_ratio_max = 0.0

    @property
    def d_prev(self) -> np.ndarray:
        """D_{k-1} = L_k + A22^{-1} A21 (equals A22^{-1} A21 before the first step)."""
        return self.l_k + self.problem.a22_inv_a21

    def current(self) -> DecouplingState:
        """Matrices of the current step without advancing."""
        p = self.problem
        k = self.k
        beta = float(self.schedule.beta(k))
        gamma = float(self.schedule.gamma(k))
        u_k = p.delta - p.a12 @ self.l_k
        lhs = np.eye(p.d_theta) - beta * u_k
        cond = np.linalg.cond(lhs)
        if not np.isfinite(cond) or cond > Config.DECOUPLING_CONDITION_GUARD:
            raise DecouplingIllConditioned(
                f"I - beta_k U_k has condition {cond:.3e} at k={k}", k=k)
        numer = self.l_k - gamma * p.a22 @ self.l_k + beta * p.a22_inv_a21 @ u_k
        l_next = np.linalg.solve(lhs.T, numer.T).T
        d_k = l_next + p.a22_inv_a21
        b22_k = (beta / gamma) * d_k @ p.a12 + p.a22
        return DecouplingState(k=k, beta=beta, gamma=gamma, l_k=self.l_k, u_k=u_k,
                               d_k=d_k, b11_k=u_k, b22_k=b22_k)

    def advance(self) -> DecouplingState:
        """Return the matrices of step k and move to k + 1."""
        state = self.current()
        ratio = float(np.linalg.norm(self.l_k, 2)) * state.gamma / state.beta
        self.l_ratio_max = max(self.l_ratio_max, ratio)
        self.l_k = state.d_k - self.problem.a22_inv_a21
        self.k += 1
        return state


def difference_terms(state: DecouplingState, problem: TtsaProblem,
                     theta_tilde: np.ndarray, w_tilde: np.ndarray):
    """
    delta^(1)_k = A12 L_k theta~_k and delta^(2)_k = -D_k A12 w~_k.

    Broadcasts over a leading replication axis.
    """
    delta1 = theta_tilde @ (problem.a12 @ state.l_k).T
    delta2 = -(w_tilde @ (state.d_k @ problem.a12).T)
    return delta1, delta2
