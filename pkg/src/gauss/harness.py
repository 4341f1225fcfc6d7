"""
Monte Carlo harness: sample clouds of the scaled TTSA errors.

Replications are split into fixed-size blocks; block b at horizon n draws
from the stream (seed, n, b), so clouds are identical for any worker count.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import Config
from ..covariance import normalized_last_covariances, sigma_eps, sigma_limit_last
from ..engine import TtsaEngine, make_stream
from ..errors import DegenerateTarget, Diverged, EmptyCloud
from ..model import MarkovOracle, NoiseOracle, Solution, TtsaProblem, solve_exact
from ..poisson import markov_asymptotic_covariance
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)

TARGETS = ("pr", "last")
TARGET_MODES = ("limit", "finite")


@dataclass
class SimulationSpec:
    """
    Everything a replication needs; picklable for worker processes.

    schedule_block is the JSON schedule block; presets without an explicit
    horizon are resolved at each simulated horizon.
    """

    problem: TtsaProblem
    oracle: NoiseOracle
    schedule_block: Dict[str, Any]
    theta0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    solution: Optional[Solution] = None

    def __post_init__(self):
        if self.solution is None:
            self.solution = solve_exact(self.problem)

    def schedule_at(self, n: int) -> StepSchedule:
        return StepSchedule.from_dict(self.schedule_block, horizon=max(int(n), 2))

    def engine(self, n: int) -> TtsaEngine:
        return TtsaEngine(self.problem, self.oracle, self.schedule_at(n), self.solution)


@dataclass
class SampleCloud:
    n: int
    target: str
    replications: int
    points: np.ndarray
    diverged: int = 0
    whitened: bool = False
    degenerate: bool = False
    target_cov: Optional[np.ndarray] = None


def block_sizes(replications: int, block: int) -> List[int]:
    full, rest = divmod(replications, block)
    return [block] * full + ([rest] if rest else [])


def noise_source_covariance(spec: SimulationSpec) -> np.ndarray:
    """Sigma_eps for martingale noise, Sigma_inf^mark for Markov noise."""
    if isinstance(spec.oracle, MarkovOracle):
        return markov_asymptotic_covariance(spec.oracle, spec.problem, spec.solution)
    return sigma_eps(spec.problem, spec.oracle, spec.solution)


def target_covariance(spec: SimulationSpec, target: str, n: int, mode: str = "limit") -> np.ndarray:
    """
    Covariance of the Gaussian limit of the chosen statistic.

    pr: the noise source covariance (the statistic already carries Delta).
    last: the Lyapunov limit ("limit") or beta_n^{-1} Sigma_n^last ("finite").
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target '{target}'")
    if mode not in TARGET_MODES:
        raise ValueError(f"unknown target covariance mode '{mode}'")
    source = noise_source_covariance(spec)
    if target == "pr":
        return source
    if mode == "limit":
        return sigma_limit_last(spec.problem, source)
    return normalized_last_covariances(spec.problem, spec.schedule_at(n), source, [n])[n]


def _simulate_block(spec: SimulationSpec, target: str, n: int, seed: int, block: int,
                    size: int) -> Tuple[np.ndarray, int]:
    engine = spec.engine(n)
    rng = make_stream(seed, n, block)
    if target == "pr":
        res = engine.run_batch(n, size, rng, spec.theta0, spec.w0)
        points = np.sqrt(n) * (res.theta_bar - spec.solution.theta_star) @ spec.problem.delta.T
    else:
        res = engine.run_batch(n + 1, size, rng, spec.theta0, spec.w0)
        points = res.theta_tilde / np.sqrt(float(engine.schedule.beta(n)))
    return points[~res.diverged], res.n_diverged


def _run_blocks(func, jobs: Sequence[tuple], threads: int) -> List[Any]:
    if threads <= 1 or len(jobs) <= 1:
        return [func(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(func, *zip(*jobs)))


def collect_cloud(spec: SimulationSpec, target: str, n: int, replications: int, seed: int,
                  threads: int = 1, whiten: bool = False, target_mode: str = "limit",
                  block: Optional[int] = None) -> SampleCloud:
    """
    Independent replications of the scaled error at horizon n.

    target "pr": sqrt(n) Delta (theta_bar_n - theta*); "last": beta_n^{-1/2} theta~_{n+1}.

    Raises:
        EmptyCloud: replications == 0
        Diverged: more than 1% of the replications diverged
        DegenerateTarget: whitening against a target covariance that is not
            positive definite
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target '{target}'")
    if replications <= 0:
        raise EmptyCloud("a sample cloud needs at least one replication")
    block = block or Config.REPLICATION_BLOCK
    jobs = [(spec, target, n, seed, b, size)
            for b, size in enumerate(block_sizes(replications, block))]
    results = _run_blocks(_simulate_block, jobs, threads)
    points = np.vstack([pts for pts, _ in results])
    diverged = sum(d for _, d in results)
    if diverged:
        logger.warning("Excluded diverged replications n=%d target=%s diverged=%d", n, target,
                       diverged)
    if diverged > Config.MAX_DIVERGED_FRACTION * replications:
        raise Diverged(f"{diverged} of {replications} replications diverged at n={n}")

    cov = target_covariance(spec, target, n, target_mode)
    if whiten:
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DegenerateTarget(f"cannot whiten against the {target} target at n={n}: "
                                   f"covariance eigenvalues {np.linalg.eigvalsh(cov)}") from None
        points = np.linalg.solve(chol, points.T).T
        cov = np.eye(cov.shape[0])

    sample_cov = np.atleast_2d(np.cov(points, rowvar=False)) if len(points) > 1 else None
    degenerate = sample_cov is None or np.linalg.matrix_rank(sample_cov) < points.shape[1]
    if degenerate:
        logger.warning("Degenerate cloud n=%d target=%s", n, target)
    logger.info("Collected cloud target=%s n=%d replications=%d diverged=%d", target, n,
                len(points), diverged)
    return SampleCloud(n=n, target=target, replications=len(points), points=points,
                       diverged=diverged, whitened=whiten, degenerate=bool(degenerate),
                       target_cov=cov)


def _moment_block(spec: SimulationSpec, horizon: int, checkpoints: Tuple[int, ...], seed: int,
                  block: int, size: int) -> List[dict]:
    engine = spec.engine(horizon)
    rng = make_stream(seed, horizon, block)
    res = engine.run_batch(horizon, size, rng, spec.theta0, spec.w0,
                           moment_checkpoints=checkpoints)
    return res.moments


def collect_moments(spec: SimulationSpec, horizon: int, checkpoints: Sequence[int],
                    replications: int, seed: int, threads: int = 1,
                    block: Optional[int] = None) -> List[dict]:
    """
    E||theta_k - theta*||^2 and E||w_k - w*||^2 at the checkpoints, averaged
    over replications (blocks merged in block order).
    """
    if replications <= 0:
        raise EmptyCloud("moment estimates need at least one replication")
    block = block or Config.REPLICATION_BLOCK
    grid = tuple(sorted(int(k) for k in checkpoints if 0 < k <= horizon))
    jobs = [(spec, horizon, grid, seed, b, size)
            for b, size in enumerate(block_sizes(replications, block))]
    per_block = _run_blocks(_moment_block, jobs, threads)
    rows = []
    for i, k in enumerate(grid):
        counts = np.array([blk[i]["replications"] for blk in per_block], dtype=float)
        total = counts.sum()
        theta = sum(blk[i]["theta_mse"] * c for blk, c in zip(per_block, counts) if c > 0)
        w = sum(blk[i]["w_mse"] * c for blk, c in zip(per_block, counts) if c > 0)
        rows.append({"k": k, "theta_mse": theta / total if total else float("nan"),
                     "w_mse": w / total if total else float("nan"),
                     "replications": int(total)})
    return rows


def _remainder_block(spec: SimulationSpec, n: int, seed: int, block: int,
                     size: int) -> Tuple[float, int]:
    engine = spec.engine(n)
    rng = make_stream(seed, n, block)
    res = engine.run_batch(n + 1, size, rng, spec.theta0, spec.w0, track_leading=True)
    keep = ~res.diverged
    resid = (res.theta_tilde[keep] - res.leading_last[keep]) / np.sqrt(float(engine.schedule.beta(n)))
    return float(np.sum(resid ** 2)), int(keep.sum())


def collect_remainders(spec: SimulationSpec, n: int, replications: int, seed: int,
                       threads: int = 1, block: Optional[int] = None) -> float:
    """Root mean square of beta_n^{-1/2} (theta~_{n+1} - linear leading statistic)."""
    block = block or Config.REPLICATION_BLOCK
    jobs = [(spec, n, seed, b, size) for b, size in enumerate(block_sizes(replications, block))]
    parts = _run_blocks(_remainder_block, jobs, threads)
    total = sum(s for s, _ in parts)
    count = sum(c for _, c in parts)
    return float(np.sqrt(total / count)) if count else float("nan")
