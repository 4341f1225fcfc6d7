"""
Tests for the Poisson solver, the martingale/Markov noise split and the
Markov asymptotic covariance
"""
import numpy as np
import pytest

from conftest import random_markov_oracle, random_problem
from src.engine import RunOptions, TtsaEngine, make_stream
from src.errors import MissingNoiseLog, NotErgodic
from src.model import build_oracle, psi, solve_exact
from src.poisson import (
    asymptotic_covariance_of,
    fundamental_matrix,
    markov_asymptotic_covariance,
    solve_poisson,
    split_noise,
    split_recursions,
)

UNBALANCED_KERNEL = [[0.9, 0.1], [0.2, 0.8]]


@pytest.fixture
def unbalanced_chain(scalar_problem):
    """psi = eps_V - 0.5 eps_W takes the values (1, -2), centered under pi = (2/3, 1/3)."""
    return build_oracle({
        "type": "markov",
        "kernel": UNBALANCED_KERNEL,
        "states": [{"b1": [2.0], "b2": [0.5]}, {"b1": [-1.0], "b2": [0.5]}],
    }, scalar_problem)


@pytest.fixture
def iid_chain(scalar_problem):
    return build_oracle({
        "type": "markov",
        "kernel": [[0.25, 0.75], [0.25, 0.75]],
        "states": [{"b1": [-2.0], "b2": [-1.0]}, {"b1": [2.0], "b2": [1.0]}],
    }, scalar_problem)


# ========================================
# solve_poisson
# ========================================

def test_constant_function_has_zero_solution(unbalanced_chain):
    sol = solve_poisson(unbalanced_chain, [3.0, 3.0])
    np.testing.assert_allclose(sol.f_hat, 0.0, atol=1e-14)


def test_matches_truncated_series(unbalanced_chain):
    p = np.array(UNBALANCED_KERNEL)
    f = np.array([1.0, 0.0])
    mean = 2.0 / 3.0
    series = np.zeros(2)
    pk = np.eye(2)
    for _ in range(501):
        series += pk @ f - mean
        pk = pk @ p
    sol = solve_poisson(unbalanced_chain, f)
    np.testing.assert_allclose(sol.f_hat, series, atol=1e-10)


def test_iid_chain_solution_is_centered_function(iid_chain):
    f = np.array([4.0, -1.0])
    sol = solve_poisson(iid_chain, f)
    np.testing.assert_allclose(sol.f_hat, f - (0.25 * 4.0 - 0.75), atol=1e-12)


def test_residual_and_sup_norm_bound(rng, scalar_problem):
    for _ in range(50):
        oracle = random_markov_oracle(rng, scalar_problem, int(rng.integers(2, 21)))
        f = rng.normal(size=(oracle.n_states, 3))
        sol = solve_poisson(oracle, f)
        assert sol.residual <= 1e-10
        assert sol.bound_ok
        np.testing.assert_allclose(oracle.stationary @ sol.f_hat, 0.0, atol=1e-12)
        centered = f - oracle.stationary @ f
        np.testing.assert_allclose(sol.f_hat - oracle.kernel @ sol.f_hat, centered, atol=1e-10)


def test_reducible_chain_rejected(scalar_problem):
    oracle = build_oracle({"type": "markov", "kernel": np.eye(2).tolist(),
                           "states": [{}, {}]}, scalar_problem)
    with pytest.raises(NotErgodic):
        fundamental_matrix(oracle)


# ========================================
# split_noise
# ========================================

def logged_run(problem, oracle, schedule, horizon, seed=0):
    engine = TtsaEngine(problem, oracle, schedule)
    return engine.run(horizon, make_stream(seed, 0), checkpoints=[0, horizon],
                      options=RunOptions(log_noise=True))


def test_split_is_additive_and_martingale(rng, schedule):
    problem = random_problem(rng, 2, 2)
    oracle = random_markov_oracle(rng, problem, 4)
    record = logged_run(problem, oracle, schedule, 300)
    splits = split_noise(oracle, record.noise_log, problem)
    assert len(splits) == 300
    for part, sample in zip(splits, record.noise_log):
        np.testing.assert_allclose(part.v0 + part.v1, sample.v, atol=1e-12)
        np.testing.assert_allclose(part.w0 + part.w1, sample.w_noise, atol=1e-12)
        assert part.martingale_defect <= 1e-12


def test_additive_noise_sums_match(scalar_problem, unbalanced_chain, schedule):
    record = logged_run(scalar_problem, unbalanced_chain, schedule, 500)
    splits = split_noise(unbalanced_chain, record.noise_log, scalar_problem)
    total = sum(p.v0 + p.v1 for p in splits)
    assert total == pytest.approx(sum(s.v for s in record.noise_log), abs=1e-10)


def test_iid_chain_has_no_markov_part(scalar_problem, iid_chain, schedule):
    record = logged_run(scalar_problem, iid_chain, schedule, 200)
    for part in split_noise(iid_chain, record.noise_log, scalar_problem):
        np.testing.assert_allclose(part.v1, 0.0, atol=1e-12)
        np.testing.assert_allclose(part.w1, 0.0, atol=1e-12)


def test_split_needs_noise_log(scalar_problem, unbalanced_chain):
    with pytest.raises(MissingNoiseLog):
        split_noise(unbalanced_chain, None, scalar_problem)


def test_split_recursions_add_up(rng, schedule):
    problem = random_problem(rng, 2, 1)
    oracle = random_markov_oracle(rng, problem, 3)
    record = logged_run(problem, oracle, schedule, 400)
    start = record.checkpoints[0]
    parts = split_recursions(problem, schedule, split_noise(oracle, record.noise_log, problem),
                             start.theta_tilde, start.w_tilde)
    np.testing.assert_allclose(parts.theta_tilde_0[-1] + parts.theta_tilde_1[-1],
                               record.final.theta_tilde, atol=1e-9)
    np.testing.assert_allclose(parts.w_tilde_0[-1] + parts.w_tilde_1[-1],
                               record.final.w_tilde, atol=1e-9)


# ========================================
# Asymptotic covariance
# ========================================

def test_iid_chain_covariance_is_stationary_variance(scalar_problem, iid_chain):
    sol = solve_exact(scalar_problem)
    eps_v, eps_w = iid_chain.table.epsilons(scalar_problem, sol)
    values = psi(scalar_problem, eps_v, eps_w)[:, 0]
    pi = iid_chain.stationary
    variance = pi @ values ** 2 - (pi @ values) ** 2
    assert markov_asymptotic_covariance(iid_chain, scalar_problem)[0, 0] == pytest.approx(variance)


def test_two_state_geometric_series(scalar_problem, unbalanced_chain):
    # Var = 2, autocorrelation 0.7^k: 2 (1 + 2 * 0.7 / 0.3) = 34/3
    expected = 34.0 / 3.0
    assert asymptotic_covariance_of(unbalanced_chain, [1.0, -2.0])[0, 0] == pytest.approx(expected)
    assert markov_asymptotic_covariance(unbalanced_chain, scalar_problem)[0, 0] \
        == pytest.approx(expected)


def test_covariance_is_symmetric_psd(rng):
    problem = random_problem(rng, 3, 2)
    oracle = random_markov_oracle(rng, problem, 5)
    cov = markov_asymptotic_covariance(oracle, problem)
    np.testing.assert_allclose(cov, cov.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(cov)) >= -1e-10


def test_relabeling_invariance(rng):
    problem = random_problem(rng, 2, 2)
    oracle = random_markov_oracle(rng, problem, 5)
    order = rng.permutation(5)
    np.testing.assert_allclose(markov_asymptotic_covariance(oracle.permuted(order), problem),
                               markov_asymptotic_covariance(oracle, problem), atol=1e-10)


@pytest.mark.slow
def test_normalized_sum_variance(unbalanced_chain):
    reps, n = 4000, 20_000
    rng = np.random.default_rng(99)
    values = np.array([1.0, -2.0])
    state = unbalanced_chain.initial_state(rng, reps)
    total = np.zeros(reps)
    for _ in range(n):
        state, _ = unbalanced_chain.sample(rng, state)
        total += values[state]
    empirical = np.var(total / np.sqrt(n))
    assert empirical == pytest.approx(34.0 / 3.0, rel=0.1)
