"""
Exception hierarchy for the TTSA lab.

Every error carries the process exit code the CLI reports for it:
2 for configuration problems, 3 for numerical failures, 4 for acceptance
checks that fail under --strict.
"""
from typing import Optional


class TtsaLabError(Exception):
    """Base class for all lab errors"""

    exit_code = 1


class ConfigError(TtsaLabError, ValueError):
    """Invalid or incomplete experiment configuration"""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionMismatch(TtsaLabError, ValueError):
    """Matrix/vector shapes do not agree"""

    exit_code = 2


class NumericalError(TtsaLabError):
    """Base class for numerical failures"""

    exit_code = 3


class NotHurwitz(NumericalError):
    """A matrix expected to have eigenvalues with positive real part does not"""

    def __init__(self, message: str, min_real_part: Optional[float] = None):
        self.min_real_part = min_real_part
        super().__init__(message)


class Singular(NumericalError):
    """A matrix is numerically singular (condition number above the limit)"""

    def __init__(self, message: str, condition: Optional[float] = None):
        self.condition = condition
        super().__init__(message)


class NotErgodic(NumericalError):
    """A Markov kernel does not mix (or mixes too slowly to be usable)"""


class Diverged(NumericalError):
    """Iterates left the bounded region"""

    def __init__(self, message: str, k: Optional[int] = None):
        self.k = k
        super().__init__(message)


class DecouplingIllConditioned(NumericalError):
    """(I - beta_k U_k) is too ill-conditioned to invert in the L_k recursion"""

    def __init__(self, message: str, k: Optional[int] = None):
        self.k = k
        super().__init__(message)


class SingularFeatureGram(NumericalError):
    """E[phi phi^T] is singular under the stationary law"""


class MissingNoiseLog(TtsaLabError):
    """An operation needs the per-step noise log but the run did not retain it"""


class AssumptionViolated(TtsaLabError):
    """A modelling assumption failed while running in strict mode"""

    exit_code = 4


class InsufficientGrid(TtsaLabError):
    """Too few horizons for a log-log rate fit"""

    exit_code = 2


class DegenerateCloud(NumericalError):
    """Sample cloud has rank-deficient sample covariance"""


class DegenerateTarget(NumericalError):
    """The Gaussian target is singular and the cloud does not sit on it"""


class EmptyCloud(TtsaLabError):
    """A sample cloud was requested with no replications"""

    exit_code = 2


class NoiseFloorViolated(TtsaLabError):
    """Distances at the largest horizon are not above the replication noise floor"""

    exit_code = 4


class AcceptanceFailed(TtsaLabError):
    """A strict-mode acceptance check failed"""

    exit_code = 4
