"""
Step-size schedules beta_k = c0_beta (k + k0)^{-b}, gamma_k = c0_gamma (k + k0)^{-a}
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Union

import numpy as np
import numpy.typing as npt

from ..config import Config
from ..errors import ConfigError
from ..linalg import LyapunovCertificate

logger = logging.getLogger(__name__)

PRESETS = ("pr-martingale", "last-martingale", "pr-markov", "last-markov")

ArrayLike = Union[int, float, npt.NDArray[np.float64]]


@dataclass(frozen=True)
class StepSchedule:
    """
    Slow (beta) and fast (gamma) polynomial step sizes.

    a_exp < b_exp is not enforced here so that equal-exponent schedules
    can still be built and diagnosed by check_schedule.
    """

    a_exp: float
    b_exp: float
    c0_gamma: float
    c0_beta: float
    k0: float = 1.0
    preset: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("a_exp", "b_exp"):
            value = getattr(self, name)
            if not 0.5 < value < 1.0:
                raise ConfigError(f"must lie in (1/2, 1), got {value}", field=f"schedule.{name}")
        for name in ("c0_gamma", "c0_beta"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be positive", field=f"schedule.{name}")
        if not self.k0 >= 0:
            raise ConfigError("must be nonnegative", field="schedule.k0")

    def beta(self, k: ArrayLike) -> ArrayLike:
        return self.c0_beta * np.power(np.asarray(k, dtype=float) + self.k0, -self.b_exp)

    def gamma(self, k: ArrayLike) -> ArrayLike:
        return self.c0_gamma * np.power(np.asarray(k, dtype=float) + self.k0, -self.a_exp)

    def ratio(self, k: ArrayLike) -> ArrayLike:
        """beta_k / gamma_k"""
        return self.beta(k) / self.gamma(k)

    @property
    def r_step(self) -> float:
        return self.c0_beta / self.c0_gamma

    @classmethod
    def from_preset(cls, preset: str, horizon: int, c0_gamma: float = 1.0,
                    c0_beta: float = 1.0, k0: float = 1.0) -> "StepSchedule":
        """
        Rate-optimizing exponents for a planned horizon n (L = log n):

        pr-martingale:   a = 1/2 + 1/L, b = a + 1/L
        last-martingale: a = 1/2 + 1/L, b = 1 - 1/L
        pr-markov:       a = 2/3,       b = 2/3 + 1/L
        last-markov:     a = 2/3,       b = 1 - 1/L
        """
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (use one of {', '.join(PRESETS)})",
                              field="schedule.preset")
        if horizon < 2:
            raise ConfigError("must be at least 2", field="schedule.horizon")
        inv_log = 1.0 / math.log(horizon)
        if preset == "pr-martingale":
            a = 0.5 + inv_log
            b = a + inv_log
        elif preset == "last-martingale":
            a, b = 0.5 + inv_log, 1.0 - inv_log
        elif preset == "pr-markov":
            a, b = 2.0 / 3.0, 2.0 / 3.0 + inv_log
        else:
            a, b = 2.0 / 3.0, 1.0 - inv_log
        if b >= 1.0 or a >= b:
            raise ConfigError(
                f"preset {preset} gives a={a:.4f}, b={b:.4f} at horizon {horizon}; "
                "increase the horizon", field="schedule.horizon")
        return cls(a_exp=a, b_exp=b, c0_gamma=c0_gamma, c0_beta=c0_beta, k0=k0, preset=preset)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], horizon: int = None) -> "StepSchedule":
        """
        Schedule block: {a, b, c0_gamma, c0_beta, k0} or
        {preset, horizon, c0_gamma, c0_beta, k0}; `horizon` fills a missing preset horizon.
        """
        if not isinstance(data, dict):
            raise ConfigError("must be an object", field="schedule")
        common = {
            "c0_gamma": float(data.get("c0_gamma", 1.0)),
            "c0_beta": float(data.get("c0_beta", 1.0)),
            "k0": float(data.get("k0", 1.0)),
        }
        if "preset" in data:
            h = data.get("horizon", horizon)
            if h is None:
                raise ConfigError("missing required field", field="schedule.horizon")
            return cls.from_preset(data["preset"], int(h), **common)
        for key in ("a", "b"):
            if key not in data:
                raise ConfigError("missing required field", field=f"schedule.{key}")
        return cls(a_exp=float(data["a"]), b_exp=float(data["b"]), **common)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        if not self.preset:
            out.pop("preset")
        return out


@dataclass
class ScheduleCheck:
    name: str
    passed: bool
    value: float
    bound: float
    required: bool = True
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ScheduleReport:
    """Step-size diagnostics; `ok` considers required checks only"""

    checks: List[ScheduleCheck]
    unchecked: List[str]
    implied_min_k0: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def get(self, name: str) -> ScheduleCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "checks": [c.to_dict() for c in self.checks],
            "unchecked": self.unchecked,
            "implied_min_k0": self.implied_min_k0,
        }


UNCHECKED_CONDITIONS = [
    "r_step <= a_Delta / (2 ||A12|| sqrt(kappa_Delta) l_inf) (involves l_inf)",
    "fast-timescale contraction of B22^k uniformly in k (involves l_inf)",
    "boundedness ||L_k|| <= l_inf beta_k / gamma_k (involves l_inf)",
    "k0 large enough for the moment bounds' constants (involves l_inf)",
]


def _ratio_grid(k0: float, size: int) -> np.ndarray:
    head = np.arange(0, min(size, 10_000), dtype=float)
    tail = np.geomspace(10_000, 10_000 + 1e9 + k0, num=max(size // 10, 10))
    return np.unique(np.concatenate([head, np.floor(tail)]))


def check_schedule(schedule: StepSchedule, cert22: LyapunovCertificate,
                   cert_delta: LyapunovCertificate, p: float = 2.0,
                   c_a5: float = None, grid_size: int = 10_000) -> ScheduleReport:
    """
    Check the constant-free step-size conditions.

    Args:
        schedule: schedule to check
        cert22: Lyapunov certificate of A22
        cert_delta: Lyapunov certificate of Delta
        p: moment order of the k0 >= C p^{4/b} condition
        c_a5: constant C (defaults to Config.C_A5)
        grid_size: number of leading k values in the ratio-condition grid

    Returns:
        ScheduleReport; conditions involving the unspecified constant l_inf
        are listed as unchecked.
    """
    c_a5 = Config.C_A5 if c_a5 is None else c_a5
    a, b = schedule.a_exp, schedule.b_exp
    a22, a_delta = cert22.contraction_rate, cert_delta.contraction_rate
    g0, b0, k0 = schedule.c0_gamma, schedule.c0_beta, schedule.k0
    checks = []

    checks.append(ScheduleCheck(
        name="exponent_order", passed=0.5 < a < b < 1.0, value=b - a, bound=0.0,
        message="1/2 < a < b < 1" if 0.5 < a < b < 1.0
        else f"requires 1/2 < a < b < 1, got a={a}, b={b}",
    ))
    checks.append(ScheduleCheck(
        name="gamma0_max_step", passed=g0 <= cert22.max_step, value=g0, bound=cert22.max_step,
        message=f"c0_gamma={g0:.4g} vs max_step(Q22)={cert22.max_step:.4g}",
    ))
    checks.append(ScheduleCheck(
        name="beta0_max_step", passed=b0 <= cert_delta.max_step, value=b0,
        bound=cert_delta.max_step,
        message=f"c0_beta={b0:.4g} vs max_step(Q_Delta)={cert_delta.max_step:.4g}",
    ))
    r_bound = a22 / (2.0 * a_delta)
    checks.append(ScheduleCheck(
        name="step_ratio", passed=schedule.r_step <= r_bound, value=schedule.r_step,
        bound=r_bound,
        message=f"r_step={schedule.r_step:.4g} vs a22/(2 a_Delta)={r_bound:.4g} "
                f"(factor {schedule.r_step / r_bound:.3g})",
    ))

    ks = _ratio_grid(k0, grid_size)
    if k0 == 0:
        ks = ks[ks > 0]
    g_k, g_next = schedule.gamma(ks), schedule.gamma(ks + 1)
    b_k, b_next = schedule.beta(ks), schedule.beta(ks + 1)
    ratio_conditions = [
        ("gamma_ratio_fast", g_k / g_next - (1.0 + a22 / 8.0 * g_next)),
        ("beta_ratio_slow", b_k / b_next - (1.0 + a_delta / 16.0 * b_next)),
        ("gamma_ratio_slow", g_k / g_next - (1.0 + a_delta / 16.0 * b_next)),
    ]
    for name, excess in ratio_conditions:
        worst = int(np.argmax(excess))
        passed = bool(np.all(excess <= 0))
        checks.append(ScheduleCheck(
            name=name, passed=passed, value=float(excess[worst]), bound=0.0,
            message="holds on the grid" if passed else f"fails at k={int(ks[worst])}",
        ))

    lhs_b = k0 ** (1.0 - b)
    checks.append(ScheduleCheck(
        name="k0_slow", passed=lhs_b >= 2.0 * b / (a_delta * b0), value=lhs_b,
        bound=2.0 * b / (a_delta * b0), message="k0^{1-b} >= 2b / (a_Delta c0_beta)",
    ))
    implied_min_k0 = c_a5 * p ** (4.0 / b)
    checks.append(ScheduleCheck(
        name="k0_moment_order", passed=k0 >= implied_min_k0, value=k0, bound=implied_min_k0,
        message=f"k0 >= C p^(4/b) = {implied_min_k0:.4g} (C={c_a5}, p={p})",
    ))

    lhs_a = k0 ** (1.0 - a)
    checks.append(ScheduleCheck(
        name="k0_fast_strong", passed=lhs_a >= 32.0 * a / (a22 * g0), value=lhs_a,
        bound=32.0 * a / (a22 * g0), required=False,
        message="k0^{1-a} >= 32a / (a22 c0_gamma)",
    ))
    checks.append(ScheduleCheck(
        name="k0_slow_strong", passed=lhs_b >= 32.0 * b / (a_delta * b0), value=lhs_b,
        bound=32.0 * b / (a_delta * b0), required=False,
        message="k0^{1-b} >= 32b / (a_Delta c0_beta)",
    ))

    report = ScheduleReport(checks=checks, unchecked=list(UNCHECKED_CONDITIONS),
                            implied_min_k0=implied_min_k0)
    for check in checks:
        if check.required and not check.passed:
            logger.warning("Schedule check failed name=%s %s", check.name, check.message)
    return report
