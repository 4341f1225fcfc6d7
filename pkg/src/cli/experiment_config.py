"""
Experiment configuration files: parsing, validation and hashing
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..config import Config
from ..errors import ConfigError
from ..gauss import METRICS, TARGETS, SimulationSpec
from ..gauss.harness import TARGET_MODES
from ..model import TtsaProblem, build_oracle
from ..rlapps import ALGORITHMS, TdInstance, build_instance, load_mdp
from ..rlapps.td_mappings import NOISE_MODES
from ..schedule import StepSchedule

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "rates", "covariance", "rl")


def _expand_grid(value: Any) -> List[int]:
    """Explicit list, or {"min_exp": i, "max_exp": j} for 2^i..2^j."""
    if isinstance(value, dict):
        try:
            lo, hi = int(value["min_exp"]), int(value["max_exp"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("needs integer min_exp and max_exp", field="n_grid")
        return [2 ** e for e in range(lo, hi + 1)]
    if not isinstance(value, list):
        raise ConfigError("must be a list of horizons or {min_exp, max_exp}", field="n_grid")
    try:
        return [int(n) for n in value]
    except (TypeError, ValueError):
        raise ConfigError("horizons must be integers", field="n_grid")


def _optional_vector(data: Dict[str, Any], key: str) -> Optional[np.ndarray]:
    if data.get(key) is None:
        return None
    try:
        vec = np.asarray(data[key], dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError("must be a numeric vector", field=key)
    return vec


@dataclass
class ExperimentConfig:
    """
    One experiment definition.

    Either `problem` (+ `oracle`) or `mdp` (+ `algorithm`, `mode`) describes
    the recursion; `schedule` is a schedule block (explicit exponents or a
    preset whose horizon defaults to each simulated n).
    """

    schedule: Dict[str, Any]
    problem: Optional[Dict[str, Any]] = None
    oracle: Optional[Dict[str, Any]] = None
    mdp: Optional[Dict[str, Any]] = None
    algorithm: str = "gtd"
    mode: str = "markov"
    compare_schedule: Optional[Dict[str, Any]] = None
    targets: List[str] = field(default_factory=lambda: list(TARGETS))
    n_grid: List[int] = field(default_factory=list)
    replications: int = 1000
    seed: Optional[int] = None
    metrics: Optional[List[str]] = None
    output_dir: Optional[str] = None
    horizon: int = 10_000
    trajectories: int = 1
    moment_replications: int = 200
    theta0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    target_covariance: str = "limit"
    whiten: bool = False
    burn_in: int = 0
    remainders: bool = False
    run: str = "simulate"
    config_hash: str = ""

    def __post_init__(self):
        if self.problem is None and self.mdp is None:
            raise ConfigError("missing required field (or give 'mdp')", field="problem")
        if not isinstance(self.schedule, dict):
            raise ConfigError("missing required field", field="schedule")
        for t in self.targets:
            if t not in TARGETS:
                raise ConfigError(f"unknown target '{t}'", field="targets")
        for m in self.metrics or []:
            if m not in METRICS:
                raise ConfigError(f"unknown metric '{m}'", field="metrics")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("must be strictly increasing", field="n_grid")
        if any(n < 1 for n in self.n_grid):
            raise ConfigError("horizons must be positive", field="n_grid")
        if self.replications < 1:
            raise ConfigError("must be positive", field="replications")
        if self.horizon < 1:
            raise ConfigError("must be positive", field="horizon")
        if self.target_covariance not in TARGET_MODES:
            raise ConfigError(f"must be one of {', '.join(TARGET_MODES)}",
                              field="target_covariance")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"must be one of {', '.join(ALGORITHMS)}", field="algorithm")
        if self.mode not in NOISE_MODES:
            raise ConfigError(f"must be one of {', '.join(NOISE_MODES)}", field="mode")
        if self.run not in ("simulate", "rates", "covariance", "none"):
            raise ConfigError("must be simulate, rates, covariance or none", field="run")
        if self.seed is not None and not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", field="seed")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], config_hash: str = "") -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object")
        known = set(cls.__dataclass_fields__) - {"config_hash"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(unknown)}", field=unknown[0])
        if "schedule" not in data:
            raise ConfigError("missing required field", field="schedule")
        kwargs = dict(data)
        if "n_grid" in kwargs:
            kwargs["n_grid"] = _expand_grid(kwargs["n_grid"])
        for key in ("theta0", "w0"):
            kwargs[key] = _optional_vector(data, key)
        for key in ("replications", "horizon", "trajectories", "moment_replications", "burn_in"):
            if key in kwargs:
                try:
                    kwargs[key] = int(kwargs[key])
                except (TypeError, ValueError):
                    raise ConfigError("must be an integer", field=key)
        if not config_hash:
            config_hash = hash_bytes(json.dumps(data, sort_keys=True).encode())
        return cls(config_hash=config_hash, **kwargs)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """
        Read a JSON config file; its hash is taken over the raw bytes.

        Raises:
            ConfigError: unreadable file, JSON syntax error (with line and
                column) or schema problem (with the field name)
        """
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}")
        try:
            data = json.loads(raw.decode("utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}")
        logger.info("Loaded config path=%s", path)
        return cls.from_dict(data, config_hash=hash_bytes(raw))

    def resolved_seed(self, override: Optional[int] = None) -> int:
        if override is not None:
            return int(override)
        return int(self.seed) if self.seed is not None else Config.SEED

    def rl_instance(self) -> TdInstance:
        if self.mdp is None:
            raise ConfigError("missing required field", field="mdp")
        mdp, features = load_mdp(self.mdp)
        return build_instance(self.algorithm, mdp, features, self.mode)

    def build_spec(self, schedule_block: Optional[Dict[str, Any]] = None,
                   instance: Optional[TdInstance] = None) -> SimulationSpec:
        """Problem, oracle and schedule block resolved into a SimulationSpec."""
        if self.problem is not None:
            problem = TtsaProblem.from_dict(self.problem)
            oracle = build_oracle(self.oracle, problem)
        else:
            instance = instance or self.rl_instance()
            problem, oracle = instance.problem, instance.oracle
        spec = SimulationSpec(problem=problem, oracle=oracle,
                              schedule_block=schedule_block or self.schedule,
                              theta0=self.theta0, w0=self.w0)
        if self.theta0 is not None and self.theta0.size != problem.d_theta:
            raise ConfigError(f"has {self.theta0.size} entries, expected {problem.d_theta}",
                              field="theta0")
        if self.w0 is not None and self.w0.size != problem.d_w:
            raise ConfigError(f"has {self.w0.size} entries, expected {problem.d_w}", field="w0")
        # surface schedule errors before any simulation
        spec.schedule_at(max(self.n_grid or [self.horizon]))
        return spec

    def schedule_at(self, n: int) -> StepSchedule:
        return StepSchedule.from_dict(self.schedule, horizon=n)

    def default_metrics(self, d_theta: int) -> List[str]:
        if self.metrics:
            return list(self.metrics)
        return ["ks1d"] if d_theta == 1 else ["proj-ks", "sw1"]

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            out[name] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def hash_bytes(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()[:16]
