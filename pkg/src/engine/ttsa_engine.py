"""
Two-timescale recursion engine.

TtsaEngine runs
    theta_{k+1} = theta_k + beta_k (b1(X) - A11(X) theta_k - A12(X) w_k)
    w_{k+1}     = w_k + gamma_k (b2(X) - A21(X) theta_k - A22(X) w_k)
with X = X_{k+1} drawn from the oracle, keeps Polyak-Ruppert running means,
and maintains the decoupled variables (theta~, w~) alongside.

All state arrays carry a leading replication axis so one engine call
advances a whole batch of independent replications.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd

from ..config import Config
from ..errors import ConfigError, Diverged
from ..model import NoiseOracle, NoiseSample, Solution, TtsaProblem, noise_sample, psi, solve_exact
from ..schedule import StepSchedule
from .decoupling import DecouplingSequence, DecouplingState

logger = logging.getLogger(__name__)


def _apply(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("rij,rj->ri", mat, vec)


class KahanMean:
    """Compensated running mean over the leading axis of repeated additions"""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)
        self.count = 0

    def add(self, x: np.ndarray) -> None:
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t
        self.count += 1

    def value(self, default: np.ndarray) -> np.ndarray:
        if self.count == 0:
            return default.copy()
        return self.total / self.count


@dataclass
class IterateState:
    """
    Iterates at step k (arrays shaped (R, d)).

    theta_bar / w_bar average theta_1..theta_k; at k = 0 they equal the
    initial point.
    """

    k: int
    theta: np.ndarray
    w: np.ndarray
    theta_bar: np.ndarray
    w_bar: np.ndarray
    theta_tilde: np.ndarray
    w_tilde: np.ndarray
    x_state: np.ndarray
    theta_mean: KahanMean = field(repr=False, default=None)
    w_mean: KahanMean = field(repr=False, default=None)


@dataclass
class StepOutcome:
    state: IterateState
    noise: NoiseSample
    decoupling: DecouplingState
    identity_residual: np.ndarray


@dataclass
class Checkpoint:
    k: int
    theta: np.ndarray
    w: np.ndarray
    theta_bar: np.ndarray
    w_bar: np.ndarray
    theta_tilde: np.ndarray
    w_tilde: np.ndarray
    residual: float


@dataclass
class RunOptions:
    """Per-run switches; noise retention is opt-in because it costs O(n d) memory"""

    theta0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    log_noise: bool = False
    check_identity: bool = True
    run_decoupled: bool = False


@dataclass
class TrajectoryRecord:
    horizon: int
    checkpoints: List[Checkpoint]
    identity_residual_max: float
    noise_log: Optional[List[NoiseSample]]
    final: Checkpoint
    decoupled_discrepancy_max: Optional[float] = None
    l_ratio_max: float = 0.0

    def to_frame(self) -> pd.DataFrame:
        """Checkpoints as a table: k, theta_i, w_i, theta_bar_i, w_bar_i, residual."""
        rows = []
        for cp in self.checkpoints:
            row = {"k": cp.k}
            for prefix, values in (("theta", cp.theta), ("w", cp.w),
                                   ("theta_bar", cp.theta_bar), ("w_bar", cp.w_bar)):
                for i, v in enumerate(values):
                    row[f"{prefix}_{i}"] = v
            row["residual"] = cp.residual
            rows.append(row)
        return pd.DataFrame(rows)


@dataclass
class BatchResult:
    """
    Final values of a batch of replications after `horizon` steps.

    leading_last = sum_{j<horizon} beta_j G_{j+1:horizon-1} psi_{j+1}.
    """

    horizon: int
    theta: np.ndarray
    w: np.ndarray
    theta_bar: np.ndarray
    w_bar: np.ndarray
    theta_tilde: np.ndarray
    w_tilde: np.ndarray
    diverged: np.ndarray
    leading_last: Optional[np.ndarray] = None
    moments: List[dict] = field(default_factory=list)

    @property
    def n_diverged(self) -> int:
        return int(self.diverged.sum())


def default_checkpoints(horizon: int) -> List[int]:
    """0, powers of two below the horizon, and the horizon itself."""
    grid = {0, horizon}
    k = 1
    while k < horizon:
        grid.add(k)
        k *= 2
    return sorted(grid)


class TtsaEngine:
    """
    Coupled and decoupled two-timescale iterations for one (problem, oracle, schedule).

    Args:
        problem: linear system
        oracle: observation source
        schedule: step sizes (k0 >= 1 so that beta_0 is finite)
        solution: exact solution; computed when omitted
    """

    def __init__(self, problem: TtsaProblem, oracle: NoiseOracle, schedule: StepSchedule,
                 solution: Optional[Solution] = None):
        if schedule.k0 <= 0:
            raise ConfigError("must be positive to run the recursion (beta_0 is infinite)",
                              field="schedule.k0")
        self.problem = problem
        self.oracle = oracle
        self.schedule = schedule
        self.solution = solution if solution is not None else solve_exact(problem)

    def decoupling(self) -> DecouplingSequence:
        return DecouplingSequence(self.problem, self.schedule)

    def initial_state(self, rng: np.random.Generator, decoupling: DecouplingSequence,
                      replications: int = 1, theta0=None, w0=None) -> IterateState:
        p = self.problem
        theta = np.zeros((replications, p.d_theta)) if theta0 is None else \
            np.tile(np.asarray(theta0, dtype=float).reshape(1, -1), (replications, 1))
        w = np.zeros((replications, p.d_w)) if w0 is None else \
            np.tile(np.asarray(w0, dtype=float).reshape(1, -1), (replications, 1))
        if theta.shape[1] != p.d_theta or w.shape[1] != p.d_w:
            raise ConfigError("initial point has the wrong dimension", field="theta0/w0")
        theta_tilde = theta - self.solution.theta_star
        w_tilde = w - self.solution.w_star + theta_tilde @ decoupling.d_prev.T
        return IterateState(
            k=decoupling.k, theta=theta, w=w, theta_bar=theta.copy(), w_bar=w.copy(),
            theta_tilde=theta_tilde, w_tilde=w_tilde,
            x_state=self.oracle.initial_state(rng, replications),
            theta_mean=KahanMean(theta.shape), w_mean=KahanMean(w.shape),
        )

    def step(self, state: IterateState, rng: np.random.Generator,
             decoupling: DecouplingSequence, diverged: Optional[np.ndarray] = None,
             check_identity: bool = True) -> StepOutcome:
        """
        One coupled update with a fresh observation.

        Advances the decoupling matrices, recomputes the tilde variables from
        their definitions and evaluates the per-iterate averaging identity.

        Args:
            diverged: batch mode; rows exceeding the divergence threshold are
                flagged here and reset instead of raising

        Raises:
            Diverged: if ||theta|| or ||w|| exceeds 1e12 (single-run mode)
        """
        if decoupling.k != state.k:
            raise ValueError(f"decoupling at k={decoupling.k} but state at k={state.k}")
        p = self.problem
        dec = decoupling.advance()
        beta, gamma = dec.beta, dec.gamma

        x_next, obs = self.oracle.sample(rng, state.x_state)
        g_theta = obs.b1 - _apply(obs.a11, state.theta) - _apply(obs.a12, state.w)
        g_w = obs.b2 - _apply(obs.a21, state.theta) - _apply(obs.a22, state.w)
        theta = state.theta + beta * g_theta
        w = state.w + gamma * g_w

        sample = noise_sample(p, self.solution, obs, state.theta, state.w,
                              state=x_next, prev_state=state.x_state)

        if check_identity:
            residual = self._identity_residual(state, theta, w, beta, gamma, sample)
        else:
            residual = np.zeros(theta.shape[0])

        norms = np.maximum(np.linalg.norm(theta, axis=1), np.linalg.norm(w, axis=1))
        bad = ~(norms <= Config.DIVERGENCE_THRESHOLD)
        if np.any(bad):
            if diverged is None:
                raise Diverged(f"iterates exceeded {Config.DIVERGENCE_THRESHOLD:.0e} at k={state.k + 1}",
                               k=state.k + 1)
            diverged |= bad
            theta[bad] = 0.0
            w[bad] = 0.0

        state.theta_mean.add(theta)
        state.w_mean.add(w)
        theta_tilde = theta - self.solution.theta_star
        w_tilde = w - self.solution.w_star + theta_tilde @ dec.d_k.T
        new_state = IterateState(
            k=state.k + 1, theta=theta, w=w,
            theta_bar=state.theta_mean.value(theta), w_bar=state.w_mean.value(w),
            theta_tilde=theta_tilde, w_tilde=w_tilde, x_state=x_next,
            theta_mean=state.theta_mean, w_mean=state.w_mean,
        )
        return StepOutcome(state=new_state, noise=sample, decoupling=dec,
                           identity_residual=residual)

    def _identity_residual(self, state: IterateState, theta: np.ndarray, w: np.ndarray,
                           beta: float, gamma: float, sample: NoiseSample) -> np.ndarray:
        """
        Relative residual of
        Delta(theta_k - theta*) = (theta_k - theta_{k+1}) / beta_k
            - A12 A22^{-1} (w_k - w_{k+1}) / gamma_k + (V - A12 A22^{-1} W).
        """
        p = self.problem
        lhs = sample.theta_err @ p.delta.T
        t1 = (state.theta - theta) / beta
        t2 = -((state.w - w) / gamma) @ p.a12_a22_inv.T
        t3 = sample.v - sample.w_noise @ p.a12_a22_inv.T
        err = np.linalg.norm(lhs - t1 - t2 - t3, axis=1)
        scale = sum(np.linalg.norm(x, axis=1) for x in (lhs, t1, t2, t3))
        return err / np.maximum(scale, np.finfo(float).tiny)

    def step_decoupled(self, theta_tilde: np.ndarray, w_tilde: np.ndarray,
                       sample: NoiseSample, dec: DecouplingState):
        """
        Decoupled update on the same noise realization:
        theta~ <- (I - beta B11) theta~ - beta A12 w~ + beta V
        w~     <- (I - gamma B22) w~ + beta D_k V + gamma W
        """
        return decoupled_update(self.problem, theta_tilde, w_tilde, sample.v, sample.w_noise, dec)

    def run(self, horizon: int, rng: np.random.Generator,
            checkpoints: Optional[Iterable[int]] = None,
            options: Optional[RunOptions] = None) -> TrajectoryRecord:
        """
        Single trajectory of `horizon` steps.

        Deterministic given the RNG stream. Diverged propagates with the
        offending k.
        """
        if horizon < 0:
            raise ConfigError("must be nonnegative", field="horizon")
        options = options or RunOptions()
        grid = set(default_checkpoints(horizon) if checkpoints is None else checkpoints)
        decoupling = self.decoupling()
        state = self.initial_state(rng, decoupling, 1, options.theta0, options.w0)
        noise_log = [] if options.log_noise else None
        records = []
        residual_max = 0.0
        discrepancy = 0.0 if options.run_decoupled else None
        dec_theta, dec_w = state.theta_tilde.copy(), state.w_tilde.copy()
        scale_star = float(np.linalg.norm(self.solution.theta_star)
                           + np.linalg.norm(self.solution.w_star))

        if 0 in grid:
            records.append(self._checkpoint(state, 0.0))
        for _ in range(horizon):
            outcome = self.step(state, rng, decoupling, check_identity=options.check_identity)
            state = outcome.state
            residual_max = max(residual_max, float(outcome.identity_residual[0]))
            if noise_log is not None:
                noise_log.append(_squeeze_sample(outcome.noise))
            if options.run_decoupled:
                dec_theta, dec_w = self.step_decoupled(dec_theta, dec_w, outcome.noise,
                                                       outcome.decoupling)
                diff = (np.linalg.norm(dec_theta - state.theta_tilde)
                        + np.linalg.norm(dec_w - state.w_tilde))
                scale = (np.linalg.norm(state.theta_tilde) + np.linalg.norm(state.w_tilde)
                         + scale_star)
                discrepancy = max(discrepancy, float(diff / max(scale, np.finfo(float).tiny)))
            if state.k in grid:
                records.append(self._checkpoint(state, residual_max))

        logger.debug("Finished run horizon=%d residual_max=%.3e", horizon, residual_max)
        return TrajectoryRecord(
            horizon=horizon,
            checkpoints=records,
            identity_residual_max=residual_max,
            noise_log=noise_log,
            final=self._checkpoint(state, residual_max),
            decoupled_discrepancy_max=discrepancy,
            l_ratio_max=decoupling.l_ratio_max,
        )

    @staticmethod
    def _checkpoint(state: IterateState, residual: float) -> Checkpoint:
        return Checkpoint(
            k=state.k, theta=state.theta[0].copy(), w=state.w[0].copy(),
            theta_bar=state.theta_bar[0].copy(), w_bar=state.w_bar[0].copy(),
            theta_tilde=state.theta_tilde[0].copy(), w_tilde=state.w_tilde[0].copy(),
            residual=residual,
        )

    def run_batch(self, horizon: int, replications: int, rng: np.random.Generator,
                  theta0=None, w0=None, track_leading: bool = False,
                  moment_checkpoints: Optional[Iterable[int]] = None) -> BatchResult:
        """
        `replications` independent trajectories advanced together.

        Diverged replications are flagged rather than raised. With
        `track_leading`, the linear leading statistic of the last-iterate
        decomposition is accumulated online.
        """
        p = self.problem
        decoupling = self.decoupling()
        state = self.initial_state(rng, decoupling, replications, theta0, w0)
        diverged = np.zeros(replications, dtype=bool)
        grid = set(moment_checkpoints or [])
        moments = []
        leading = np.zeros((replications, p.d_theta)) if track_leading else None

        for _ in range(horizon):
            outcome = self.step(state, rng, decoupling, diverged=diverged, check_identity=False)
            state = outcome.state
            if track_leading:
                beta = outcome.decoupling.beta
                psi_k = psi(p, outcome.noise.eps_v, outcome.noise.eps_w)
                leading = leading - beta * leading @ p.delta.T + beta * psi_k
            if state.k in grid:
                moments.append(self._moment_row(state, diverged))

        return BatchResult(
            horizon=horizon, theta=state.theta, w=state.w,
            theta_bar=state.theta_bar, w_bar=state.w_bar,
            theta_tilde=state.theta_tilde, w_tilde=state.w_tilde,
            diverged=diverged, leading_last=leading, moments=moments,
        )

    def _moment_row(self, state: IterateState, diverged: np.ndarray) -> dict:
        keep = ~diverged
        t = state.theta[keep] - self.solution.theta_star
        u = state.w[keep] - self.solution.w_star
        return {
            "k": state.k,
            "theta_mse": float(np.mean(np.sum(t ** 2, axis=1))) if keep.any() else float("nan"),
            "w_mse": float(np.mean(np.sum(u ** 2, axis=1))) if keep.any() else float("nan"),
            "replications": int(keep.sum()),
        }


def decoupled_update(problem: TtsaProblem, theta_tilde: np.ndarray, w_tilde: np.ndarray,
                     v: np.ndarray, w_noise: np.ndarray, dec: DecouplingState):
    """One decoupled step driven by an arbitrary noise pair (v, w_noise)."""
    beta, gamma = dec.beta, dec.gamma
    theta_next = (theta_tilde - beta * theta_tilde @ dec.b11_k.T
                  - beta * w_tilde @ problem.a12.T + beta * v)
    w_next = (w_tilde - gamma * w_tilde @ dec.b22_k.T
              + beta * v @ dec.d_k.T + gamma * w_noise)
    return theta_next, w_next


def _squeeze_sample(sample: NoiseSample) -> NoiseSample:
    return NoiseSample(
        state=sample.state[0], prev_state=sample.prev_state[0],
        eps_v=sample.eps_v[0], eps_w=sample.eps_w[0], v=sample.v[0],
        w_noise=sample.w_noise[0], theta_err=sample.theta_err[0], w_err=sample.w_err[0],
    )


def run(problem: TtsaProblem, oracle: NoiseOracle, schedule: StepSchedule, horizon: int,
        rng: np.random.Generator, checkpoints: Optional[Iterable[int]] = None,
        options: Optional[RunOptions] = None) -> TrajectoryRecord:
    """Module-level shortcut for TtsaEngine(problem, oracle, schedule).run(...)."""
    return TtsaEngine(problem, oracle, schedule).run(horizon, rng, checkpoints, options)
