"""
Noise decomposition of a single TTSA step
"""
from dataclasses import dataclass
from typing import Any

import numpy as np

from .oracles import Observation
from .problem import Solution, TtsaProblem


@dataclass(frozen=True, eq=False)
class NoiseSample:
    """
    Noise carried by one observation X_{k+1}.

    eps_v = b1(x) - A11(x) theta* - A12(x) w*, eps_w likewise;
    v = eps_v - (A11(x) - A11) t - (A12(x) - A12) u with t = theta_k - theta*,
    u = w_k - w*; w_noise likewise. Arrays may carry a leading replication axis.
    """

    state: Any
    prev_state: Any
    eps_v: np.ndarray
    eps_w: np.ndarray
    v: np.ndarray
    w_noise: np.ndarray
    theta_err: np.ndarray
    w_err: np.ndarray


def _apply(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Matrix-vector product broadcasting over a leading replication axis."""
    return np.einsum("...ij,...j->...i", mat, vec)


def noise_sample(problem: TtsaProblem, solution: Solution, obs: Observation,
                 theta: np.ndarray, w: np.ndarray, state: Any = None,
                 prev_state: Any = None) -> NoiseSample:
    """Split the observation at (theta_k, w_k) into eps and the state-dependent noise."""
    ts, ws = solution.theta_star, solution.w_star
    t = theta - ts
    u = w - ws
    eps_v = obs.b1 - _apply(obs.a11, ts) - _apply(obs.a12, ws)
    eps_w = obs.b2 - _apply(obs.a21, ts) - _apply(obs.a22, ws)
    v = eps_v - _apply(obs.a11 - problem.a11, t) - _apply(obs.a12 - problem.a12, u)
    w_noise = eps_w - _apply(obs.a21 - problem.a21, t) - _apply(obs.a22 - problem.a22, u)
    return NoiseSample(state=state, prev_state=prev_state, eps_v=eps_v, eps_w=eps_w,
                       v=v, w_noise=w_noise, theta_err=t, w_err=u)


def psi(problem: TtsaProblem, eps_v: np.ndarray, eps_w: np.ndarray) -> np.ndarray:
    """psi = eps_V - A12 A22^{-1} eps_W (broadcasts over leading axes)."""
    return eps_v - eps_w @ problem.a12_a22_inv.T


def drift(problem: TtsaProblem, theta: np.ndarray, w: np.ndarray):
    """Deterministic mean-field drift (b1 - A11 theta - A12 w, b2 - A21 theta - A22 w)."""
    return (problem.b1 - theta @ problem.a11.T - w @ problem.a12.T,
            problem.b2 - theta @ problem.a21.T - w @ problem.a22.T)


def reconstruct_update(problem: TtsaProblem, sample: NoiseSample, theta: np.ndarray,
                       w: np.ndarray):
    """Raw update directions of the coupled recursion rebuilt as drift + noise."""
    g_theta, g_w = drift(problem, theta, w)
    return g_theta + sample.v, g_w + sample.w_noise
