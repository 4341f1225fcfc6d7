"""
Noise oracles: sources of random observations (A_ij(X), b_i(X)).

Three families:
- MixtureOracle: i.i.d. draws from finitely many atoms with weights
  (a single atom is the deterministic oracle)
- PerturbationOracle: A_ij(x) = A_ij + sum_m xi_m S_m with i.i.d. bounded,
  symmetric, mean-zero xi
- MarkovOracle: observations indexed by the state of a finite Markov chain

All sampling is batched: a call advances R independent replications at once,
each observation array carrying a leading replication axis.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError
from .markov import as_kernel, mixing_time, spectral_gap, stationary_distribution
from .problem import MATRIX_FIELDS, VECTOR_FIELDS, Solution, TtsaProblem

logger = logging.getLogger(__name__)

OBSERVATION_FIELDS = MATRIX_FIELDS + VECTOR_FIELDS


@dataclass(frozen=True, eq=False)
class Observation:
    """One observation tuple; arrays may carry a leading replication axis"""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def squeeze(self) -> "Observation":
        """Drop the replication axis of a batch of size one."""
        return Observation(**{f: getattr(self, f)[0] for f in OBSERVATION_FIELDS})


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """
    Finitely many observation tuples stacked along axis 0.

    Shapes: a11 (S, dt, dt), a12 (S, dt, dw), a21 (S, dw, dt), a22 (S, dw, dw),
    b1 (S, dt), b2 (S, dw).
    """

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    @property
    def size(self) -> int:
        return self.b1.shape[0]

    def take(self, index: np.ndarray) -> Observation:
        return Observation(**{f: getattr(self, f)[index] for f in OBSERVATION_FIELDS})

    def weighted_mean(self, weights: np.ndarray) -> Observation:
        return Observation(**{
            f: np.tensordot(weights, getattr(self, f), axes=1) for f in OBSERVATION_FIELDS
        })

    def centered(self, problem: TtsaProblem) -> "ObservationTable":
        """A_ij(x) - A_ij and b_i(x) - b_i for every entry."""
        return ObservationTable(**{
            f: getattr(self, f) - getattr(problem, f)[None] for f in OBSERVATION_FIELDS
        })

    def permuted(self, order: np.ndarray) -> "ObservationTable":
        return ObservationTable(**{f: getattr(self, f)[order] for f in OBSERVATION_FIELDS})

    def epsilons(self, problem: TtsaProblem, solution: Solution) -> Tuple[np.ndarray, np.ndarray]:
        """Per-entry eps_V(x) = b1(x) - A11(x) theta* - A12(x) w* and eps_W likewise."""
        ts, ws = solution.theta_star, solution.w_star
        eps_v = self.b1 - self.a11 @ ts - self.a12 @ ws
        eps_w = self.b2 - self.a21 @ ts - self.a22 @ ws
        return eps_v, eps_w

    def sup_norms(self, problem: TtsaProblem) -> Tuple[float, float]:
        """(b_A, b_b): sup over entries of ||A_ij(x)|| v ||A_ij(x) - A_ij||, likewise for b."""
        b_a = 0.0
        for f in MATRIX_FIELDS:
            mats = getattr(self, f)
            cent = mats - getattr(problem, f)[None]
            b_a = max(b_a, float(np.max(np.linalg.norm(mats, 2, axis=(1, 2)))),
                      float(np.max(np.linalg.norm(cent, 2, axis=(1, 2)))))
        b_b = 0.0
        for f in VECTOR_FIELDS:
            vecs = getattr(self, f)
            cent = vecs - getattr(problem, f)[None]
            b_b = max(b_b, float(np.max(np.linalg.norm(vecs, axis=1))),
                      float(np.max(np.linalg.norm(cent, axis=1))))
        return b_a, b_b

    @classmethod
    def from_entries(cls, entries: List[Dict[str, Any]], defaults: Dict[str, np.ndarray],
                     field: str) -> "ObservationTable":
        """
        Stack JSON entries, filling missing fields from `defaults`.

        Raises:
            ConfigError: on empty lists or shape mismatches
        """
        if not entries:
            raise ConfigError("needs at least one entry", field=field)
        stacked = {}
        for f in OBSERVATION_FIELDS:
            arrays = []
            for i, entry in enumerate(entries):
                value = np.array(entry.get(f, defaults[f]), dtype=float)
                if value.shape != defaults[f].shape:
                    raise ConfigError(
                        f"shape {value.shape}, expected {defaults[f].shape}",
                        field=f"{field}[{i}].{f}",
                    )
                if not np.all(np.isfinite(value)):
                    raise ConfigError("non-finite entries", field=f"{field}[{i}].{f}")
                arrays.append(value)
            stacked[f] = np.stack(arrays)
        return cls(**stacked)


def _problem_defaults(problem: TtsaProblem) -> Dict[str, np.ndarray]:
    return {f: getattr(problem, f) for f in OBSERVATION_FIELDS}


def _zero_defaults(problem: TtsaProblem) -> Dict[str, np.ndarray]:
    return {f: np.zeros_like(getattr(problem, f)) for f in OBSERVATION_FIELDS}


class MixtureOracle:
    """
    i.i.d. observations drawn from weighted atoms.

    Args:
        table: stacked atoms
        weights: probabilities of the atoms (normalized internally)
    """

    kind = "martingale"
    family = "mixture"

    def __init__(self, table: ObservationTable, weights: Optional[np.ndarray] = None):
        self.table = table
        if weights is None:
            weights = np.full(table.size, 1.0 / table.size)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (table.size,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ConfigError("weights must be nonnegative, one per atom", field="oracle.weights")
        self.weights = weights / weights.sum()
        self._cumulative = np.cumsum(self.weights)

    @classmethod
    def deterministic(cls, problem: TtsaProblem) -> "MixtureOracle":
        """Single atom equal to the deterministic matrices: zero noise."""
        return cls(ObservationTable.from_entries([{}], _problem_defaults(problem), "oracle"))

    @property
    def is_deterministic(self) -> bool:
        return self.table.size == 1

    def initial_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.zeros(size, dtype=np.int64)

    def sample(self, rng: np.random.Generator, state: np.ndarray) -> Tuple[np.ndarray, Observation]:
        if self.table.size == 1:
            index = np.zeros(len(state), dtype=np.int64)
        else:
            u = rng.random(len(state))
            index = np.minimum(np.searchsorted(self._cumulative, u, side="right"),
                               self.table.size - 1)
        return index, self.table.take(index)

    def mean_observation(self) -> Observation:
        return self.table.weighted_mean(self.weights)

    def epsilon_moments(self, problem: TtsaProblem, solution: Solution):
        """Exact (mean, covariance) of the stacked (eps_V, eps_W) under the weights."""
        eps_v, eps_w = self.table.epsilons(problem, solution)
        eps = np.hstack([eps_v, eps_w])
        mean = self.weights @ eps
        cent = eps - mean
        return mean, (cent * self.weights[:, None]).T @ cent

    def sup_norms(self, problem: TtsaProblem) -> Tuple[float, float]:
        return self.table.sup_norms(problem)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "martingale", "family": "mixture", "atoms": self.table.size}


class PerturbationOracle:
    """
    Bounded perturbations A_ij(x) = A_ij + sum_m xi_m S_m^{ij}.

    xi_m are i.i.d. Rademacher (variance 1) or Uniform(-1, 1) (variance 1/3).
    """

    kind = "martingale"
    family = "perturbation"
    LAWS = {"rademacher": 1.0, "uniform": 1.0 / 3.0}

    def __init__(self, problem: TtsaProblem, directions: ObservationTable, law: str = "rademacher"):
        if law not in self.LAWS:
            raise ConfigError(f"unknown law '{law}' (use {sorted(self.LAWS)})", field="oracle.law")
        self.base = _problem_defaults(problem)
        self.directions = directions
        self.law = law

    @property
    def n_directions(self) -> int:
        return self.directions.size

    @property
    def xi_variance(self) -> float:
        return self.LAWS[self.law]

    def initial_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.zeros((size, self.n_directions))

    def sample(self, rng: np.random.Generator, state: np.ndarray) -> Tuple[np.ndarray, Observation]:
        size = len(state)
        if self.law == "rademacher":
            xi = rng.integers(0, 2, size=(size, self.n_directions)) * 2.0 - 1.0
        else:
            xi = rng.uniform(-1.0, 1.0, size=(size, self.n_directions))
        obs = {
            f: self.base[f][None] + np.tensordot(xi, getattr(self.directions, f), axes=1)
            for f in OBSERVATION_FIELDS
        }
        return xi, Observation(**obs)

    def mean_observation(self) -> Observation:
        return Observation(**{f: self.base[f].copy() for f in OBSERVATION_FIELDS})

    def epsilon_moments(self, problem: TtsaProblem, solution: Solution):
        """Closed form: eps = sum_m xi_m e_m, so Cov = Var(xi) sum_m e_m e_m^T."""
        ts, ws = solution.theta_star, solution.w_star
        base_v = problem.b1 - problem.a11 @ ts - problem.a12 @ ws
        base_w = problem.b2 - problem.a21 @ ts - problem.a22 @ ws
        d = self.directions
        e = np.hstack([d.b1 - d.a11 @ ts - d.a12 @ ws, d.b2 - d.a21 @ ts - d.a22 @ ws])
        return np.concatenate([base_v, base_w]), self.xi_variance * e.T @ e

    def sup_norms(self, problem: TtsaProblem) -> Tuple[float, float]:
        """Triangle-inequality bounds over the box |xi_m| <= 1."""
        b_a = 0.0
        for f in MATRIX_FIELDS:
            pert = float(np.sum(np.linalg.norm(getattr(self.directions, f), 2, axis=(1, 2))))
            b_a = max(b_a, float(np.linalg.norm(self.base[f], 2)) + pert, pert)
        b_b = 0.0
        for f in VECTOR_FIELDS:
            pert = float(np.sum(np.linalg.norm(getattr(self.directions, f), axis=1)))
            b_b = max(b_b, float(np.linalg.norm(self.base[f])) + pert, pert)
        return b_a, b_b

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "martingale", "family": "perturbation", "law": self.law,
                "directions": self.n_directions}


class MarkovOracle:
    """
    Observations indexed by the state of a finite Markov chain.

    Args:
        table: one observation tuple per state
        kernel: row-stochastic transition matrix P
        initial: "stationary" (X_0 ~ pi) or a fixed state index
    """

    kind = "markov"

    def __init__(self, table: ObservationTable, kernel: Any,
                 initial: Union[str, int] = "stationary"):
        self.table = table
        self.kernel = as_kernel(kernel)
        if self.kernel.shape[0] != table.size:
            raise ConfigError(
                f"kernel has {self.kernel.shape[0]} states but {table.size} observation tuples",
                field="oracle.states",
            )
        if initial != "stationary":
            if not isinstance(initial, (int, np.integer)) or not 0 <= initial < table.size:
                raise ConfigError("must be 'stationary' or a state index", field="oracle.initial")
        self.initial = initial
        self._cumulative = np.cumsum(self.kernel, axis=1)

    @property
    def n_states(self) -> int:
        return self.table.size

    @cached_property
    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.kernel)

    @cached_property
    def t_mix(self) -> int:
        return mixing_time(self.kernel)

    @cached_property
    def spectral_gap(self) -> float:
        return spectral_gap(self.kernel)

    def initial_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.initial == "stationary":
            u = rng.random(size)
            cum = np.cumsum(self.stationary)
            return np.minimum(np.searchsorted(cum, u, side="right"), self.n_states - 1)
        return np.full(size, int(self.initial), dtype=np.int64)

    def sample(self, rng: np.random.Generator, state: np.ndarray) -> Tuple[np.ndarray, Observation]:
        u = rng.random(len(state))
        nxt = np.minimum((u[:, None] >= self._cumulative[state]).sum(axis=1), self.n_states - 1)
        return nxt, self.table.take(nxt)

    def mean_observation(self) -> Observation:
        return self.table.weighted_mean(self.stationary)

    def epsilon_moments(self, problem: TtsaProblem, solution: Solution):
        """Stationary (mean, covariance) of (eps_V, eps_W)."""
        eps_v, eps_w = self.table.epsilons(problem, solution)
        eps = np.hstack([eps_v, eps_w])
        mean = self.stationary @ eps
        cent = eps - mean
        return mean, (cent * self.stationary[:, None]).T @ cent

    def conditional_epsilon_covariances(self, problem: TtsaProblem,
                                        solution: Solution) -> np.ndarray:
        """Cov[(eps_V, eps_W)(X') | X = x] for every state x, shape (S, d, d)."""
        eps_v, eps_w = self.table.epsilons(problem, solution)
        eps = np.hstack([eps_v, eps_w])
        means = self.kernel @ eps
        second = np.einsum("xy,yi,yj->xij", self.kernel, eps, eps)
        return second - np.einsum("xi,xj->xij", means, means)

    def sup_norms(self, problem: TtsaProblem) -> Tuple[float, float]:
        return self.table.sup_norms(problem)

    def permuted(self, order: np.ndarray) -> "MarkovOracle":
        """Same chain with states relabeled: new state i is old state order[i]."""
        order = np.asarray(order)
        initial = self.initial
        if initial != "stationary":
            initial = int(np.argsort(order)[initial])
        return MarkovOracle(self.table.permuted(order), self.kernel[np.ix_(order, order)], initial)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "markov", "n_states": self.n_states, "initial": self.initial,
                "stationary": self.stationary.tolist()}


NoiseOracle = Union[MixtureOracle, PerturbationOracle, MarkovOracle]


def sample_observation(oracle: NoiseOracle, rng: np.random.Generator,
                       current_state: Any) -> Tuple[Any, Observation]:
    """
    Draw one observation for a single replication.

    For i.i.d. oracles the state is ignored; for MarkovOracle the chain
    advances one kernel step and the observation at the new state is returned.
    """
    state = np.asarray([current_state])
    nxt, obs = oracle.sample(rng, state)
    return nxt[0], obs.squeeze()


def build_oracle(spec: Optional[Dict[str, Any]], problem: TtsaProblem) -> NoiseOracle:
    """
    Build an oracle from its JSON block.

    Layouts:
        {"type": "deterministic"}
        {"type": "martingale", "family": "mixture", "atoms": [...], "weights": [...]}
        {"type": "martingale", "family": "perturbation", "law": "rademacher",
         "directions": [...]}
        {"type": "markov", "kernel": [[...]], "states": [...], "initial": "stationary"}

    Mixture atoms and Markov states default missing fields to the
    deterministic matrices; perturbation directions default them to zero.
    """
    spec = spec or {"type": "deterministic"}
    kind = spec.get("type")
    if kind == "deterministic":
        return MixtureOracle.deterministic(problem)
    if kind == "martingale":
        family = spec.get("family", "mixture")
        if family == "mixture":
            table = ObservationTable.from_entries(spec.get("atoms", []),
                                                  _problem_defaults(problem), "oracle.atoms")
            return MixtureOracle(table, spec.get("weights"))
        if family == "perturbation":
            table = ObservationTable.from_entries(spec.get("directions", []),
                                                  _zero_defaults(problem), "oracle.directions")
            return PerturbationOracle(problem, table, spec.get("law", "rademacher"))
        raise ConfigError(f"unknown family '{family}'", field="oracle.family")
    if kind == "markov":
        if "kernel" not in spec:
            raise ConfigError("missing required field", field="oracle.kernel")
        table = ObservationTable.from_entries(spec.get("states", []),
                                              _problem_defaults(problem), "oracle.states")
        return MarkovOracle(table, spec["kernel"], spec.get("initial", "stationary"))
    raise ConfigError(f"unknown oracle type '{kind}'", field="oracle.type")

