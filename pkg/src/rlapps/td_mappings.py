"""
GTD(0) and TDC on finite MDPs as linear TTSA instances.

The observation chain runs on transition tuples (s, a, s') with positive
probability under the behavior policy; tuple (s, a, s') moves to (s', a', s'')
with probability pi(a'|s') P(s''|s', a'). Expectations are exact under the
stationary tuple law mu(s) pi(a|s) P(s'|s, a).

Recursions (lam = discount, delta_k = r_k + lam theta^T phi_{k+1} - theta^T phi_k):
    GTD  theta += beta (phi - lam phi') phi^T w        w += gamma (delta phi - w)
    TDC  theta += beta (delta phi - lam phi' phi^T w)  w += gamma (delta - phi^T w) phi
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..config import Config
from ..errors import ConfigError, SingularFeatureGram
from ..model import (
    MarkovOracle,
    MixtureOracle,
    NoiseOracle,
    ObservationTable,
    Solution,
    TtsaProblem,
    solve_exact,
)
from ..model.markov import as_kernel, mixing_time, stationary_distribution

logger = logging.getLogger(__name__)

ALGORITHMS = ("gtd", "tdc")
NOISE_MODES = ("markov", "iid")


def _array(data: Dict[str, Any], key: str, ndim: int) -> np.ndarray:
    if key not in data:
        raise ConfigError("missing required field", field=f"mdp.{key}")
    try:
        arr = np.asarray(data[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"not numeric: {e}", field=f"mdp.{key}")
    if arr.ndim != ndim:
        raise ConfigError(f"expected {ndim} dimensions, got {arr.ndim}", field=f"mdp.{key}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("contains non-finite values", field=f"mdp.{key}")
    return arr


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """
    Discounted MDP with a fixed behavior policy.

    transition[s, a, s'] = P(s'|s, a), reward[s, a] in [0, 1],
    policy[s, a] = pi(a|s), discount in (0, 1).
    """

    transition: np.ndarray
    reward: np.ndarray
    policy: np.ndarray
    discount: float

    def __post_init__(self):
        for name in ("transition", "reward", "policy"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.reward.ndim != 2:
            raise ConfigError("expected a (states, actions) table", field="mdp.reward")
        s, a = self.reward.shape
        if self.transition.shape != (s, a, s):
            raise ConfigError(f"shape {self.transition.shape}, expected {(s, a, s)}",
                              field="mdp.transition")
        if self.policy.shape != (s, a):
            raise ConfigError(f"shape {self.policy.shape}, expected {(s, a)}", field="mdp.policy")
        if np.any(self.transition < 0) or \
                np.max(np.abs(self.transition.sum(axis=2) - 1.0)) > Config.STOCHASTIC_TOL:
            raise ConfigError("rows P(.|s, a) must be probability vectors", field="mdp.transition")
        if np.any(self.policy < 0) or \
                np.max(np.abs(self.policy.sum(axis=1) - 1.0)) > Config.STOCHASTIC_TOL:
            raise ConfigError("rows pi(.|s) must be probability vectors", field="mdp.policy")
        if np.any(self.reward < 0) or np.any(self.reward > 1):
            raise ConfigError("rewards must lie in [0, 1]", field="mdp.reward")
        if not 0.0 < self.discount < 1.0:
            raise ConfigError(f"must lie in (0, 1), got {self.discount}", field="mdp.discount")

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    @cached_property
    def state_kernel(self) -> np.ndarray:
        """P_pi(s, s') = sum_a pi(a|s) P(s'|s, a)."""
        return np.einsum("sa,sat->st", self.policy, self.transition)

    @cached_property
    def policy_reward(self) -> np.ndarray:
        """r_pi(s) = sum_a pi(a|s) r(s, a)."""
        return np.sum(self.policy * self.reward, axis=1)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FiniteMdp":
        """
        Build from {n_states, n_actions, transition, reward, discount, policy}.

        Raises:
            ConfigError: naming the offending field
        """
        transition = _array(data, "transition", 3)
        reward = _array(data, "reward", 2)
        policy = _array(data, "policy", 2)
        if "discount" not in data:
            raise ConfigError("missing required field", field="mdp.discount")
        for key, axis in (("n_states", 0), ("n_actions", 1)):
            if key in data and int(data[key]) != reward.shape[axis]:
                raise ConfigError(f"declared {data[key]}, reward has {reward.shape[axis]}",
                                  field=f"mdp.{key}")
        return cls(transition=transition, reward=reward, policy=policy,
                   discount=float(data["discount"]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "policy": self.policy.tolist(),
            "discount": self.discount,
        }


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """phi[s] in R^d with ||phi(s)|| <= 1."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        if not np.all(np.isfinite(phi)):
            raise ConfigError("contains non-finite values", field="mdp.features")
        norms = np.linalg.norm(phi, axis=1)
        if np.any(norms > 1.0 + 1e-12):
            raise ConfigError(f"feature norms must be at most 1 (max {norms.max():.4g})",
                              field="mdp.features")
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def tabular(cls, n_states: int) -> "FeatureMap":
        return cls(np.eye(n_states))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n_states: int) -> "FeatureMap":
        if data.get("features") in (None, "tabular"):
            return cls.tabular(n_states)
        phi = _array(data, "features", 2)
        if phi.shape[0] != n_states:
            raise ConfigError(f"{phi.shape[0]} rows for {n_states} states", field="mdp.features")
        return cls(phi)


def load_mdp(data: Dict[str, Any]) -> Tuple[FiniteMdp, FeatureMap]:
    mdp = FiniteMdp.from_dict(data)
    return mdp, FeatureMap.from_dict(data, mdp.n_states)


@dataclass(frozen=True, eq=False)
class TupleChain:
    """Transition tuples (s, a, s') with positive probability, their kernel and law."""

    tuples: np.ndarray  # (T, 3) integer rows (s, a, s')
    kernel: np.ndarray
    stationary: np.ndarray


def tuple_chain(mdp: FiniteMdp) -> TupleChain:
    weights = mdp.policy[:, :, None] * mdp.transition
    tuples = np.argwhere(weights > 0)
    # successor weight of (s, a, s') -> (s', a', s'') is weights[s', a', s'']
    nxt = weights[tuples[:, 0], tuples[:, 1], tuples[:, 2]]
    kernel = np.where(tuples[None, :, 0] == tuples[:, None, 2], nxt[None, :], 0.0)
    kernel = as_kernel(kernel)
    mu = stationary_distribution(mdp.state_kernel)
    law = mu[tuples[:, 0]] * nxt
    return TupleChain(tuples=tuples, kernel=kernel, stationary=law / law.sum())


def _observation_table(algorithm: str, mdp: FiniteMdp, features: FeatureMap,
                       chain: TupleChain) -> ObservationTable:
    lam = mdp.discount
    s, a, s_next = chain.tuples.T
    phi = features.phi[s]
    phi_next = features.phi[s_next]
    r = mdp.reward[s, a]
    td = np.einsum("ti,tj->tij", phi, phi - lam * phi_next)  # phi (phi - lam phi')^T
    r_phi = r[:, None] * phi
    size, d = phi.shape
    if algorithm == "gtd":
        return ObservationTable(
            a11=np.zeros((size, d, d)),
            a12=-np.transpose(td, (0, 2, 1)),
            a21=td,
            a22=np.broadcast_to(np.eye(d), (size, d, d)).copy(),
            b1=np.zeros((size, d)),
            b2=r_phi,
        )
    return ObservationTable(
        a11=td,
        a12=lam * np.einsum("ti,tj->tij", phi_next, phi),
        a21=td.copy(),
        a22=np.einsum("ti,tj->tij", phi, phi),
        b1=r_phi,
        b2=r_phi.copy(),
    )


@dataclass(eq=False)
class TdInstance:
    algorithm: str
    mode: str
    problem: TtsaProblem
    oracle: NoiseOracle
    chain: TupleChain
    mdp: FiniteMdp
    features: FeatureMap


def _build(algorithm: str, mdp: FiniteMdp, features: FeatureMap, mode: str) -> TdInstance:
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm '{algorithm}'", field="algorithm")
    if mode not in NOISE_MODES:
        raise ConfigError(f"unknown noise mode '{mode}'", field="mode")
    if features.phi.shape[0] != mdp.n_states:
        raise ConfigError(f"{features.phi.shape[0]} rows for {mdp.n_states} states",
                          field="mdp.features")
    chain = tuple_chain(mdp)
    table = _observation_table(algorithm, mdp, features, chain)
    mean = table.weighted_mean(chain.stationary)

    if algorithm == "tdc":
        cond = np.linalg.cond(mean.a22)
        if not np.isfinite(cond) or cond > Config.SINGULAR_CONDITION:
            raise SingularFeatureGram(f"E[phi phi^T] is singular (condition {cond:.3e})")

    problem = TtsaProblem(a11=mean.a11, a12=mean.a12, a21=mean.a21, a22=mean.a22,
                          b1=mean.b1, b2=mean.b2)
    if algorithm == "tdc":
        gap = max(float(np.max(np.abs(problem.a11 - problem.a21))),
                  float(np.max(np.abs(problem.a12 - (problem.a22 - problem.a11.T)))))
        if gap > 1e-12:
            logger.warning("TDC structural identities off by %.3e", gap)

    if mode == "iid":
        oracle: NoiseOracle = MixtureOracle(table, chain.stationary)
    else:
        oracle = MarkovOracle(table, chain.kernel, "stationary")
        _ = oracle.t_mix  # NotErgodic surfaces here

    logger.info("Built %s instance mode=%s states=%d tuples=%d d=%d", algorithm.upper(), mode,
                mdp.n_states, len(chain.tuples), features.dim)
    return TdInstance(algorithm=algorithm, mode=mode, problem=problem, oracle=oracle,
                      chain=chain, mdp=mdp, features=features)


def build_gtd(mdp: FiniteMdp, features: FeatureMap, mode: str = "markov") -> TdInstance:
    """
    GTD(0): b1 = 0, A11 = 0, A12 = -E[(phi - lam phi') phi^T],
    b2 = E[r phi], A21 = E[phi (phi - lam phi')^T], A22 = I.

    Raises:
        NotErgodic: tuple chain does not mix (markov mode)
    """
    return _build("gtd", mdp, features, mode)


def build_tdc(mdp: FiniteMdp, features: FeatureMap, mode: str = "markov") -> TdInstance:
    """
    TDC: b1 = b2 = E[r phi], A11 = A21 = E[phi (phi - lam phi')^T],
    A12 = lam E[phi' phi^T], A22 = E[phi phi^T].

    Raises:
        SingularFeatureGram: E[phi phi^T] is singular
        NotErgodic: tuple chain does not mix (markov mode)
    """
    return _build("tdc", mdp, features, mode)


def build_instance(algorithm: str, mdp: FiniteMdp, features: FeatureMap,
                   mode: str = "markov") -> TdInstance:
    return _build(algorithm, mdp, features, mode)


@dataclass
class PolicyEvaluation:
    """
    value: V^pi = (I - lam P_pi)^{-1} r_pi
    td_fixed_point: solution of E[phi (phi - lam phi')^T] theta = E[r phi]
    fixed_point_gap: ||theta* - td_fixed_point|| for the TTSA solution
    """

    value: np.ndarray
    td_fixed_point: np.ndarray
    solution: Solution
    fixed_point_gap: float
    approximation_error: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value.tolist(),
            "td_fixed_point": self.td_fixed_point.tolist(),
            "theta_star": self.solution.theta_star.tolist(),
            "w_star": self.solution.w_star.tolist(),
            "fixed_point_gap": self.fixed_point_gap,
            "approximation_error": self.approximation_error,
        }


def evaluate_policy_exact(instance: TdInstance) -> PolicyEvaluation:
    """
    Compare the TTSA solution theta* with the projected Bellman fixed point.

    approximation_error is max_s |phi(s)^T theta* - V^pi(s)|.
    """
    mdp, phi = instance.mdp, instance.features.phi
    value = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * mdp.state_kernel,
                            mdp.policy_reward)
    chain = instance.chain
    s, a, s_next = chain.tuples.T
    weights = chain.stationary
    td = np.einsum("t,ti,tj->ij", weights, phi[s], phi[s] - mdp.discount * phi[s_next])
    rhs = np.einsum("t,t,ti->i", weights, mdp.reward[s, a], phi[s])
    fixed = np.linalg.solve(td, rhs)
    solution = solve_exact(instance.problem)
    return PolicyEvaluation(
        value=value,
        td_fixed_point=fixed,
        solution=solution,
        fixed_point_gap=float(np.linalg.norm(solution.theta_star - fixed)),
        approximation_error=float(np.max(np.abs(phi @ solution.theta_star - value))),
    )


def td_error(theta: np.ndarray, phi: np.ndarray, phi_next: np.ndarray, reward: float,
             discount: float) -> float:
    return float(reward + discount * theta @ phi_next - theta @ phi)


def gtd_update(theta: np.ndarray, w: np.ndarray, phi: np.ndarray, phi_next: np.ndarray,
               reward: float, discount: float, beta: float,
               gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """One GTD(0) step written directly from a sample."""
    delta = td_error(theta, phi, phi_next, reward, discount)
    theta_next = theta + beta * (phi - discount * phi_next) * (phi @ w)
    w_next = w + gamma * (delta * phi - w)
    return theta_next, w_next


def tdc_update(theta: np.ndarray, w: np.ndarray, phi: np.ndarray, phi_next: np.ndarray,
               reward: float, discount: float, beta: float,
               gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """One TDC step written directly from a sample."""
    delta = td_error(theta, phi, phi_next, reward, discount)
    theta_next = theta + beta * (delta * phi - discount * phi_next * (phi @ w))
    w_next = w + gamma * (delta - phi @ w) * phi
    return theta_next, w_next


RAW_UPDATES = {"gtd": gtd_update, "tdc": tdc_update}


def raw_update(instance: TdInstance, tuple_index: int, theta: np.ndarray, w: np.ndarray,
               beta: float, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Raw algorithm step on the sample encoded by a tuple-chain state."""
    s, a, s_next = instance.chain.tuples[int(tuple_index)]
    phi = instance.features.phi
    return RAW_UPDATES[instance.algorithm](
        theta, w, phi[s], phi[s_next], float(instance.mdp.reward[s, a]),
        instance.mdp.discount, beta, gamma,
    )


def state_chain_mixing(mdp: FiniteMdp) -> Tuple[int, int]:
    """(t_mix of P_pi, t_mix of the tuple chain); they differ by at most one step."""
    return mixing_time(mdp.state_kernel), mixing_time(tuple_chain(mdp).kernel)


def random_mdp(n_states: int, n_actions: int, d: int, rng: np.random.Generator,
               discount: float = 0.9, features: Optional[str] = None) -> Tuple[FiniteMdp, FeatureMap]:
    """Dense random MDP with uniform behavior policy and unit-ball features."""
    transition = rng.random((n_states, n_actions, n_states)) + 0.05
    transition /= transition.sum(axis=2, keepdims=True)
    reward = rng.random((n_states, n_actions))
    policy = np.full((n_states, n_actions), 1.0 / n_actions)
    mdp = FiniteMdp(transition=transition, reward=reward, policy=policy, discount=discount)
    if features == "tabular":
        return mdp, FeatureMap.tabular(n_states)
    phi = rng.normal(size=(n_states, d))
    phi /= np.maximum(np.linalg.norm(phi, axis=1, keepdims=True), 1.0)
    return mdp, FeatureMap(phi)
