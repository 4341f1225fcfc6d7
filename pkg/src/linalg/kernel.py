"""
Small dense linear-algebra kernel.

Matrices are plain 2-D float numpy arrays; everything here is a pure function
of its inputs, so results can be shared read-only across worker processes.
"""
import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg

from ..config import Config
from ..errors import DimensionMismatch, NotHurwitz

logger = logging.getLogger(__name__)


def as_matrix(value: Any, name: str = "matrix") -> np.ndarray:
    """Coerce nested lists / arrays to a finite 2-D float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_vector(value: Any, name: str = "vector") -> np.ndarray:
    """Coerce scalars / lists / arrays to a finite 1-D float array."""
    arr = np.array(value, dtype=float)
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")


@dataclass(frozen=True)
class HurwitzCheck:
    """Result of eig_check_hurwitz: stable iff every eigenvalue has Re > tol"""

    is_hurwitz: bool
    min_real_part: float

    def __bool__(self) -> bool:
        return self.is_hurwitz


@dataclass(frozen=True)
class LyapunovCertificate:
    """
    Solution Q of a^T Q + Q a = I together with the contraction constants.

    Attributes:
        q: symmetric positive definite solution
        contraction_rate: 1 / (2 ||Q||)
        max_step: largest step alpha for which ||I - alpha a||_Q^2 <= 1 - alpha * rate
        residual: ||a^T Q + Q a - I||_inf achieved by the solve
    """

    q: np.ndarray
    contraction_rate: float
    max_step: float
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "contraction_rate": self.contraction_rate,
            "max_step": self.max_step,
            "residual": self.residual,
        }


def eig_check_hurwitz(a: Any, tol: float = Config.HURWITZ_TOL) -> HurwitzCheck:
    """
    Check that every eigenvalue of `a` has real part above `tol`.

    (That is, -a is Hurwitz.) Never raises on a failed check; the returned
    object carries the smallest real part as diagnostic.
    """
    a = as_matrix(a, "a")
    _require_square(a, "a")
    min_re = float(np.min(np.linalg.eigvals(a).real))
    return HurwitzCheck(is_hurwitz=min_re > tol, min_real_part=min_re)


def sym_sqrt(q: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a symmetric positive definite matrix."""
    vals, vecs = np.linalg.eigh((q + q.T) / 2.0)
    if np.min(vals) <= 0:
        raise ValueError("matrix is not positive definite")
    powers = vals ** (-0.5 if inverse else 0.5)
    return (vecs * powers) @ vecs.T


def q_norm(x: Any, q: Any) -> float:
    """||x||_Q = sqrt(x^T Q x)."""
    x = as_vector(x, "x")
    q = as_matrix(q, "q")
    if q.shape != (x.size, x.size):
        raise DimensionMismatch(f"q has shape {q.shape}, x has length {x.size}")
    return float(np.sqrt(max(x @ q @ x, 0.0)))


def q_op_norm(b: Any, q: Any) -> float:
    """Operator norm induced by ||.||_Q: largest singular value of Q^{1/2} b Q^{-1/2}."""
    b = as_matrix(b, "b")
    q = as_matrix(q, "q")
    _require_square(q, "q")
    if b.shape != q.shape:
        raise DimensionMismatch(f"b has shape {b.shape}, q has shape {q.shape}")
    scaled = sym_sqrt(q) @ b @ sym_sqrt(q, inverse=True)
    return float(np.linalg.norm(scaled, 2))


def solve_lyapunov(a: Any) -> LyapunovCertificate:
    """
    Solve a^T Q + Q a = I and derive the contraction constants.

    The system is vectorized as (I kron a^T + a^T kron I) vec(Q) = vec(I)
    and solved densely; fine for the few-dozen dimensions this lab targets.

    Args:
        a: square matrix with -a Hurwitz

    Returns:
        LyapunovCertificate

    Raises:
        NotHurwitz: if some eigenvalue of a has real part <= 1e-9
    """
    a = as_matrix(a, "a")
    _require_square(a, "a")
    check = eig_check_hurwitz(a)
    if not check.is_hurwitz:
        raise NotHurwitz(
            f"-a is not Hurwitz (min real part {check.min_real_part:.3e})",
            min_real_part=check.min_real_part,
        )

    d = a.shape[0]
    eye = np.eye(d)
    kron = np.kron(eye, a.T) + np.kron(a.T, eye)
    vec_q = np.linalg.solve(kron, eye.reshape(-1, order="F"))
    q = vec_q.reshape(d, d, order="F")
    q = (q + q.T) / 2.0

    residual = float(np.max(np.abs(a.T @ q + q @ a - eye)))
    if residual > Config.LYAPUNOV_RESIDUAL_TOL:
        logger.warning("Lyapunov residual above tolerance residual=%.3e dim=%d", residual, d)

    q_norm_op = float(np.linalg.norm(q, 2))
    a_q = q_op_norm(a, q)
    return LyapunovCertificate(
        q=q,
        contraction_rate=1.0 / (2.0 * q_norm_op),
        max_step=1.0 / (2.0 * q_norm_op * a_q ** 2),
        residual=residual,
    )


def solve_lyapunov_equation(a: Any, c: Any) -> np.ndarray:
    """
    Solve a X + X a^T = c for X (c symmetric gives symmetric X).

    Raises:
        NotHurwitz: if -a is not Hurwitz (the solution need not be PSD then)
    """
    a = as_matrix(a, "a")
    c = as_matrix(c, "c")
    _require_square(a, "a")
    if c.shape != a.shape:
        raise DimensionMismatch(f"c has shape {c.shape}, a has shape {a.shape}")
    check = eig_check_hurwitz(a)
    if not check.is_hurwitz:
        raise NotHurwitz(
            f"-a is not Hurwitz (min real part {check.min_real_part:.3e})",
            min_real_part=check.min_real_part,
        )
    x = scipy.linalg.solve_continuous_lyapunov(a, c)
    return (x + x.T) / 2.0
