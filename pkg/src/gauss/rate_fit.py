"""
Log-log rate fits of distance reports and the replication noise-floor check
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import DegenerateTarget, InsufficientGrid, NoiseFloorViolated
from .distances import DistanceReport

logger = logging.getLogger(__name__)

# Mean of the Kolmogorov distribution: E[sqrt(R) D_R] -> sqrt(pi/2) log 2
KS_FLOOR_CONSTANT = math.sqrt(math.pi / 2.0) * math.log(2.0)
FLOOR_MARGIN = 3.0
MIN_POINTS = 5
MIN_DOUBLINGS = 4


def noise_floor(replications: int) -> float:
    """Typical KS distance of an exact Gaussian sample of this size."""
    return KS_FLOOR_CONSTANT / math.sqrt(replications)


@dataclass
class RateFit:
    pairs: List[Tuple[float, float]]
    slope: float
    intercept: float
    slope_ci: Tuple[float, float]
    r2: float
    noise_floor: Optional[float] = None
    floor_ok: Optional[bool] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pairs": [list(p) for p in self.pairs],
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_ci": list(self.slope_ci),
            "r2": self.r2,
            "noise_floor": self.noise_floor,
            "floor_ok": self.floor_ok,
            **self.extra,
        }


def check_noise_floor(reports: Sequence[DistanceReport], strict: bool = False) -> Tuple[float, bool]:
    """
    The distance at the largest horizon must be at least 3x the floor
    0.8687 / sqrt(R); below that the fit measures replication noise.

    Raises:
        NoiseFloorViolated: strict mode only
    """
    last = max(reports, key=lambda r: r.n)
    floor = noise_floor(min(r.replications for r in reports))
    ok = last.value >= FLOOR_MARGIN * floor
    if not ok:
        message = (f"distance {last.value:.4g} at n={last.n} is below "
                   f"{FLOOR_MARGIN:g}x the noise floor {floor:.4g}")
        if strict:
            raise NoiseFloorViolated(message)
        logger.warning("Noise floor check failed: %s", message)
    return floor, ok


def require_grid(ns: Sequence[float]) -> None:
    """
    Raises:
        InsufficientGrid: fewer than 5 horizons or fewer than 4 doublings
    """
    ns = sorted(float(n) for n in ns)
    if len(ns) < MIN_POINTS:
        raise InsufficientGrid(f"{len(ns)} horizons given, at least {MIN_POINTS} needed")
    if ns[0] <= 0 or ns[-1] / ns[0] < 2 ** MIN_DOUBLINGS:
        raise InsufficientGrid(f"grid spans {ns[0]:g}..{ns[-1]:g}, "
                               f"at least {MIN_DOUBLINGS} doublings needed")


def fit_rate(reports: Sequence[DistanceReport], rng: Optional[np.random.Generator] = None,
             n_boot: int = 1000, strict: bool = False) -> RateFit:
    """
    OLS of log distance on log n with a parametric bootstrap CI that
    resamples each distance from N(value, stderr).

    Raises:
        InsufficientGrid: fewer than 5 horizons or fewer than 4 doublings
        DegenerateTarget: a zero distance (cloud and target both the point mass at 0)
    """
    reports = sorted(reports, key=lambda r: r.n)
    ns = np.array([r.n for r in reports], dtype=float)
    require_grid(ns)
    values = np.array([r.value for r in reports], dtype=float)
    if np.any(values <= 0):
        zero = [r.n for r in reports if r.value <= 0]
        raise DegenerateTarget(f"zero distance at n={zero}: "
                               "a point-mass target has no log-log rate")
    errs = np.array([r.stderr for r in reports], dtype=float)

    xs = np.log(ns)
    fit = stats.linregress(xs, np.log(values))
    slope, intercept = float(fit.slope), float(fit.intercept)

    rng = rng or np.random.default_rng(0)
    if np.any(errs > 0):
        draws = rng.normal(values, errs, size=(n_boot, len(values)))
        draws = np.maximum(draws, values * 1e-3)
        slopes = np.array([stats.linregress(xs, np.log(row)).slope for row in draws])
        lo, hi = np.percentile(slopes, [2.5, 97.5])
    else:
        lo = hi = slope
    ci = (float(min(lo, slope)), float(max(hi, slope)))

    floor, ok = (None, None)
    if all(r.replications > 0 for r in reports):
        floor, ok = check_noise_floor(reports, strict=strict)

    logger.info("Fitted rate slope=%.4f ci=[%.4f, %.4f] r2=%.3f", slope, ci[0], ci[1],
                fit.rvalue ** 2)
    return RateFit(
        pairs=[(float(x), float(y)) for x, y in zip(xs, np.log(values))],
        slope=slope,
        intercept=intercept,
        slope_ci=ci,
        r2=float(fit.rvalue ** 2),
        noise_floor=floor,
        floor_ok=ok,
    )
