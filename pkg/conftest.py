"""
Shared fixtures and the --runslow switch for the Monte Carlo acceptance runs
"""
import numpy as np
import pytest

from src.model import MarkovOracle, ObservationTable, TtsaProblem, build_oracle
from src.schedule import StepSchedule


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow Monte Carlo acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo acceptance run (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


SCALAR_PROBLEM = {
    "a11": [[1.5]], "a12": [[0.5]], "a21": [[1.0]], "a22": [[1.0]],
    "b1": [1.0], "b2": [0.5],
}

ADDITIVE_NOISE = {
    "type": "martingale",
    "family": "perturbation",
    "law": "rademacher",
    "directions": [{"b1": [1.0]}, {"b2": [1.0]}],
}

TWO_STATE_MARKOV = {
    "type": "markov",
    "kernel": [[0.7, 0.3], [0.3, 0.7]],
    "states": [{"b1": [0.0], "b2": [0.0]}, {"b1": [2.0], "b2": [1.0]}],
}


def random_problem(rng: np.random.Generator, d_theta: int, d_w: int) -> TtsaProblem:
    """Random instance with -A22 and -Delta Hurwitz (diagonally dominant blocks)."""
    a22 = np.eye(d_w) * (1.0 + rng.random()) + 0.2 * rng.normal(size=(d_w, d_w)) / d_w
    a21 = 0.3 * rng.normal(size=(d_w, d_theta))
    a12 = 0.3 * rng.normal(size=(d_theta, d_w))
    a11 = np.eye(d_theta) * (1.0 + rng.random()) + 0.2 * rng.normal(size=(d_theta, d_theta)) / d_theta
    a11 = a11 + a12 @ np.linalg.solve(a22, a21)
    return TtsaProblem(a11=a11, a12=a12, a21=a21, a22=a22,
                       b1=rng.normal(size=d_theta), b2=rng.normal(size=d_w))


def random_markov_oracle(rng: np.random.Generator, problem: TtsaProblem,
                         n_states: int) -> MarkovOracle:
    """Dense ergodic chain with observations centered under its stationary law."""
    kernel = rng.random((n_states, n_states)) + 0.1
    kernel /= kernel.sum(axis=1, keepdims=True)
    entries = []
    for _ in range(n_states):
        entries.append({
            "a11": problem.a11 + 0.1 * rng.normal(size=problem.a11.shape),
            "a22": problem.a22 + 0.1 * rng.normal(size=problem.a22.shape),
            "b1": problem.b1 + rng.normal(size=problem.d_theta),
            "b2": problem.b2 + rng.normal(size=problem.d_w),
        })
    raw = MarkovOracle(ObservationTable.from_entries(
        entries, {f: getattr(problem, f) for f in ("a11", "a12", "a21", "a22", "b1", "b2")},
        "states"), kernel)
    pi = raw.stationary
    table = raw.table
    centered = ObservationTable(**{
        f: getattr(table, f) - np.tensordot(pi, getattr(table, f), axes=1)[None]
        + getattr(problem, f)[None]
        for f in ("a11", "a12", "a21", "a22", "b1", "b2")
    })
    return MarkovOracle(centered, kernel)


def slope_meets_band(slope_ci, lo: float, hi: float) -> bool:
    """True when the bootstrap interval of a fitted slope overlaps [lo, hi]."""
    ci_lo, ci_hi = slope_ci
    return ci_lo <= hi and ci_hi >= lo


@pytest.fixture
def scalar_problem():
    return TtsaProblem.from_dict(SCALAR_PROBLEM)


@pytest.fixture
def additive_oracle(scalar_problem):
    return build_oracle(ADDITIVE_NOISE, scalar_problem)


@pytest.fixture
def markov_oracle(scalar_problem):
    return build_oracle(TWO_STATE_MARKOV, scalar_problem)


@pytest.fixture
def schedule():
    return StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.5, k0=10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
