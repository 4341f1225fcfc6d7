"""
Linear TTSA problem definition and its exact solution
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict

import numpy as np

from ..config import Config
from ..errors import ConfigError, DimensionMismatch, Singular
from ..linalg import as_matrix, as_vector

logger = logging.getLogger(__name__)

MATRIX_FIELDS = ("a11", "a12", "a21", "a22")
VECTOR_FIELDS = ("b1", "b2")


@dataclass(frozen=True, eq=False)
class TtsaProblem:
    """
    Linear system A11 theta + A12 w = b1, A21 theta + A22 w = b2.

    Only shapes, finiteness and invertibility of A22 are enforced here;
    stability (A4) is a diagnostic of validate_assumptions, so deliberately
    unstable instances can still be built and inspected.
    """

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in MATRIX_FIELDS:
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        for name in VECTOR_FIELDS:
            object.__setattr__(self, name, as_vector(getattr(self, name), name))

        dt, dw = self.b1.size, self.b2.size
        expected = {"a11": (dt, dt), "a12": (dt, dw), "a21": (dw, dt), "a22": (dw, dw)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )

        cond = np.linalg.cond(self.a22)
        if not np.isfinite(cond) or cond > Config.SINGULAR_CONDITION:
            raise Singular(f"a22 is numerically singular (condition {cond:.3e})", condition=cond)

    @property
    def d_theta(self) -> int:
        return self.b1.size

    @property
    def d_w(self) -> int:
        return self.b2.size

    @cached_property
    def a22_inv(self) -> np.ndarray:
        return np.linalg.inv(self.a22)

    @cached_property
    def a22_inv_a21(self) -> np.ndarray:
        """A22^{-1} A21 (the fast-variable slope of the decoupling map)"""
        return np.linalg.solve(self.a22, self.a21)

    @cached_property
    def a12_a22_inv(self) -> np.ndarray:
        """A12 A22^{-1}"""
        return self.a12 @ self.a22_inv

    @cached_property
    def delta(self) -> np.ndarray:
        """Schur complement Delta = A11 - A12 A22^{-1} A21"""
        return self.a11 - self.a12 @ self.a22_inv_a21

    def stacked(self):
        """Full (d_theta + d_w) system as one matrix/vector pair."""
        a = np.block([[self.a11, self.a12], [self.a21, self.a22]])
        b = np.concatenate([self.b1, self.b2])
        return a, b

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TtsaProblem":
        """
        Build a problem from the JSON layout {a11, a12, a21, a22, b1, b2}.

        d_theta / d_w are optional and, when given, must match the matrices.
        """
        missing = [f for f in MATRIX_FIELDS + VECTOR_FIELDS if f not in data]
        if missing:
            raise ConfigError("missing required field", field=f"problem.{missing[0]}")
        try:
            problem = cls(**{f: data[f] for f in MATRIX_FIELDS + VECTOR_FIELDS})
        except DimensionMismatch as e:
            raise ConfigError(str(e), field="problem") from e
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"malformed matrix data: {e}", field="problem") from e
        for key, actual in (("d_theta", problem.d_theta), ("d_w", problem.d_w)):
            if key in data and int(data[key]) != actual:
                raise ConfigError(f"declared {data[key]} but matrices give {actual}",
                                  field=f"problem.{key}")
        return problem

    def to_dict(self) -> Dict[str, Any]:
        out = {"d_theta": self.d_theta, "d_w": self.d_w}
        for name in MATRIX_FIELDS + VECTOR_FIELDS:
            out[name] = getattr(self, name).tolist()
        return out


@dataclass(frozen=True, eq=False)
class Solution:
    """Exact solution (theta*, w*) of the linear system"""

    theta_star: np.ndarray
    w_star: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {"theta_star": self.theta_star.tolist(), "w_star": self.w_star.tolist()}


def solve_exact(problem: TtsaProblem) -> Solution:
    """
    Solve the system by block elimination.

    theta* = Delta^{-1}(b1 - A12 A22^{-1} b2), w* = A22^{-1}(b2 - A21 theta*).

    Raises:
        Singular: if Delta or A22 has condition number above 1e12
    """
    for name, mat in (("a22", problem.a22), ("delta", problem.delta)):
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > Config.SINGULAR_CONDITION:
            raise Singular(f"{name} is numerically singular (condition {cond:.3e})",
                           condition=cond)

    theta_star = np.linalg.solve(problem.delta, problem.b1 - problem.a12_a22_inv @ problem.b2)
    w_star = np.linalg.solve(problem.a22, problem.b2 - problem.a21 @ theta_star)

    residual = max(
        np.max(np.abs(problem.a11 @ theta_star + problem.a12 @ w_star - problem.b1)),
        np.max(np.abs(problem.a21 @ theta_star + problem.a22 @ w_star - problem.b2)),
    )
    if residual > Config.SOLUTION_RESIDUAL_TOL * max(1.0, np.max(np.abs(theta_star)),
                                                     np.max(np.abs(w_star))):
        logger.warning("Exact solution residual above tolerance residual=%.3e", residual)
    return Solution(theta_star=theta_star, w_star=w_star)
