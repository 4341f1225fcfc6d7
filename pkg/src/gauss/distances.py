"""
Distances between a sample cloud and a centered Gaussian target.

ks1d     exact Kolmogorov distance (d = 1)
proj-ks  sup over unit directions u of the 1-D Kolmogorov distance of <u, X>
         against N(0, u^T Sigma u); a lower bound on the convex distance
sw1      sliced Wasserstein-1: mean over directions of the projected W1
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import stats
from scipy.stats import qmc

from ..config import Config
from ..errors import DegenerateCloud, DegenerateTarget, DimensionMismatch

logger = logging.getLogger(__name__)

METRICS = ("ks1d", "proj-ks", "sw1")


@dataclass
class DistanceReport:
    n: int
    metric: str
    value: float
    stderr: float
    directions_used: int
    replications: int
    target: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def sphere_directions(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    Quasi-random unit directions: scrambled Sobol points pushed through the
    normal quantile and normalized. Deterministic given the generator state.
    """
    m = max(0, math.ceil(math.log2(max(count, 1))))
    sobol = qmc.Sobol(d=d, scramble=True, seed=rng)
    points = sobol.random_base2(m=m)[:count]
    gauss = stats.norm.ppf(np.clip(points, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(gauss, axis=1, keepdims=True)
    return gauss / np.where(norms > 0, norms, 1.0)


def _require_variance(sample: np.ndarray, variance: float) -> None:
    if variance > Config.POINT_MASS_TOL ** 2:
        return
    raise DegenerateTarget(f"target variance {variance:.3g} along a direction where the cloud "
                           f"spreads to {float(np.max(np.abs(sample), initial=0.0)):.3g}")


def ks_statistic(sample: np.ndarray, variance: float) -> float:
    """
    Kolmogorov distance between the empirical law of `sample` and N(0, variance).

    Raises:
        DegenerateTarget: variance is zero (a point-mass target)
    """
    _require_variance(sample, variance)
    return float(stats.kstest(sample, "norm", args=(0.0, math.sqrt(variance))).statistic)


def w1_statistic(sample: np.ndarray, variance: float) -> float:
    """Quantile-coupling W1 between the sample and N(0, variance)."""
    _require_variance(sample, variance)
    ordered = np.sort(sample)
    levels = (np.arange(1, ordered.size + 1) - 0.5) / ordered.size
    return float(np.mean(np.abs(ordered - math.sqrt(variance) * stats.norm.ppf(levels))))


def _evaluate(points: np.ndarray, target_cov: np.ndarray, metric: str,
              directions: Optional[np.ndarray]) -> float:
    if metric == "ks1d":
        return ks_statistic(points[:, 0], float(target_cov[0, 0]))
    projected = points @ directions.T
    variances = np.einsum("mi,ij,mj->m", directions, target_cov, directions)
    if metric == "proj-ks":
        return max(ks_statistic(projected[:, i], variances[i]) for i in range(len(directions)))
    return float(np.mean([w1_statistic(projected[:, i], variances[i])
                          for i in range(len(directions))]))


def distance_to_gaussian(points: Any, target_cov: Any, metric: str, rng: np.random.Generator,
                         n: int = 0, directions: Optional[np.ndarray] = None,
                         n_directions: Optional[int] = None, bootstrap: Optional[int] = None,
                         target: str = "") -> DistanceReport:
    """
    Distance of the cloud to N(0, target_cov) with a bootstrap standard error.

    Args:
        points: (R, d) sample (a SampleCloud's points)
        target_cov: (d, d) PSD target covariance
        metric: "ks1d" | "proj-ks" | "sw1"
        rng: generator for directions and bootstrap resampling
        directions: explicit (M, d) directions (normalized here)
        n_directions: number of quasi-random directions (Config.DIRECTIONS)
        bootstrap: number of bootstrap resamples (Config.BOOTSTRAP)

    Raises:
        DegenerateCloud: rank-deficient sample covariance (proj-ks / sw1)
        DimensionMismatch: ks1d on d > 1, or shapes disagree
        DegenerateTarget: the target is singular along a direction the cloud
            spreads in; a cloud sitting at 0 against a zero target is at distance 0
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    target_cov = np.atleast_2d(np.asarray(target_cov, dtype=float))
    r, d = points.shape
    if target_cov.shape != (d, d):
        raise DimensionMismatch(f"target covariance {target_cov.shape} for {d}-dimensional cloud")
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}' (use one of {', '.join(METRICS)})")
    if metric == "ks1d" and d != 1:
        raise DimensionMismatch("ks1d needs a one-dimensional cloud")

    if np.max(np.abs(target_cov), initial=0.0) <= Config.POINT_MASS_TOL ** 2:
        spread = float(np.max(np.abs(points), initial=0.0))
        if spread > Config.POINT_MASS_TOL:
            raise DegenerateTarget(f"target covariance is zero but the cloud at n={n} "
                                   f"spreads to {spread:.3g}")
        logger.info("Cloud and target are both the point mass at 0 n=%d metric=%s", n, metric)
        return DistanceReport(n=n, metric=metric, value=0.0, stderr=0.0, directions_used=0,
                              replications=r, target=target)

    used = 0
    if metric != "ks1d":
        sample_cov = np.atleast_2d(np.cov(points, rowvar=False))
        if r <= d or np.linalg.matrix_rank(sample_cov) < d:
            raise DegenerateCloud(f"sample covariance of the {r}-point cloud is rank-deficient")
        if directions is None:
            directions = sphere_directions(d, n_directions or Config.DIRECTIONS, rng)
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        used = len(directions)

    value = _evaluate(points, target_cov, metric, directions)
    boots = []
    for _ in range(bootstrap if bootstrap is not None else Config.BOOTSTRAP):
        idx = rng.integers(0, r, size=r)
        boots.append(_evaluate(points[idx], target_cov, metric, directions))
    stderr = float(np.std(boots, ddof=1)) if len(boots) > 1 else 0.0
    return DistanceReport(n=n, metric=metric, value=value, stderr=stderr,
                          directions_used=used, replications=r, target=target)
