"""
Tests for the GTD(0) and TDC mappings onto linear two-timescale problems
"""
from pathlib import Path

import numpy as np
import pytest

from src.cli import ExperimentConfig
from src.engine import TtsaEngine, make_stream
from src.errors import ConfigError, SingularFeatureGram
from src.gauss import noise_source_covariance
from src.model import MixtureOracle, solve_exact, validate_assumptions
from src.rlapps import (
    FeatureMap,
    FiniteMdp,
    build_gtd,
    build_instance,
    build_tdc,
    evaluate_policy_exact,
    load_mdp,
    random_mdp,
    raw_update,
    state_chain_mixing,
    tuple_chain,
)
from src.schedule import StepSchedule

TWO_STATE_MDP = {
    "n_states": 2,
    "n_actions": 1,
    "transition": [[[0.6, 0.4]], [[0.3, 0.7]]],
    "reward": [[1.0], [0.2]],
    "policy": [[1.0], [1.0]],
    "discount": 0.8,
}


def enumerate_expectations(mdp, phi):
    """Brute-force E[phi (phi - lam phi')^T] and E[r phi] over all (s, a, s')."""
    eigvals, eigvecs = np.linalg.eig(mdp.state_kernel.T)
    mu = np.real(eigvecs[:, np.argmin(np.abs(eigvals - 1.0))])
    mu = mu / mu.sum()
    td = np.zeros((phi.shape[1], phi.shape[1]))
    r_phi = np.zeros(phi.shape[1])
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for t in range(mdp.n_states):
                weight = mu[s] * mdp.policy[s, a] * mdp.transition[s, a, t]
                td += weight * np.outer(phi[s], phi[s] - mdp.discount * phi[t])
                r_phi += weight * mdp.reward[s, a] * phi[s]
    return mu, td, r_phi


# ========================================
# MDP definitions
# ========================================

def test_load_two_state_mdp():
    mdp, features = load_mdp(TWO_STATE_MDP)
    assert (mdp.n_states, mdp.n_actions) == (2, 1)
    np.testing.assert_array_equal(features.phi, np.eye(2))
    np.testing.assert_allclose(mdp.state_kernel, [[0.6, 0.4], [0.3, 0.7]])


def test_reward_outside_unit_interval():
    with pytest.raises(ConfigError) as exc:
        FiniteMdp.from_dict(dict(TWO_STATE_MDP, reward=[[1.5], [0.2]]))
    assert exc.value.field == "mdp.reward"


def test_transition_rows_must_be_stochastic():
    with pytest.raises(ConfigError) as exc:
        FiniteMdp.from_dict(dict(TWO_STATE_MDP, transition=[[[0.6, 0.3]], [[0.3, 0.7]]]))
    assert exc.value.field == "mdp.transition"


def test_discount_bounds():
    with pytest.raises(ConfigError) as exc:
        FiniteMdp.from_dict(dict(TWO_STATE_MDP, discount=1.0))
    assert exc.value.field == "mdp.discount"


def test_feature_norms_bounded():
    with pytest.raises(ConfigError):
        FeatureMap(np.array([[1.0, 1.0], [0.0, 1.0]]))


# ========================================
# GTD(0)
# ========================================

def test_gtd_matches_enumeration():
    mdp, features = load_mdp(TWO_STATE_MDP)
    instance = build_gtd(mdp, features)
    _, td, r_phi = enumerate_expectations(mdp, features.phi)
    p = instance.problem
    np.testing.assert_allclose(p.a12, -td.T, atol=1e-12)
    np.testing.assert_allclose(p.a21, td, atol=1e-12)
    np.testing.assert_array_equal(p.a11, np.zeros((2, 2)))
    np.testing.assert_array_equal(p.a22, np.eye(2))
    np.testing.assert_allclose(p.b2, r_phi, atol=1e-12)
    np.testing.assert_array_equal(p.b1, np.zeros(2))


def test_gtd_delta_is_gram(rng):
    mdp, features = random_mdp(5, 2, 3, rng)
    p = build_gtd(mdp, features).problem
    np.testing.assert_allclose(p.delta, p.delta.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(p.delta)) > 0


def test_tabular_features_recover_value_function(rng):
    mdp, features = random_mdp(4, 2, 4, rng, features="tabular")
    for algorithm in ("gtd", "tdc"):
        evaluation = evaluate_policy_exact(build_instance(algorithm, mdp, features))
        assert evaluation.approximation_error <= 1e-10
        assert evaluation.fixed_point_gap <= 1e-10


def test_zero_reward_has_zero_solution(rng):
    mdp, features = random_mdp(4, 2, 2, rng)
    silent = FiniteMdp(transition=mdp.transition, reward=np.zeros_like(mdp.reward),
                       policy=mdp.policy, discount=mdp.discount)
    sol = solve_exact(build_tdc(silent, features).problem)
    np.testing.assert_allclose(sol.theta_star, 0.0, atol=1e-14)
    np.testing.assert_allclose(sol.w_star, 0.0, atol=1e-14)


# ========================================
# TDC
# ========================================

def test_tdc_structural_identities(rng):
    mdp, features = random_mdp(4, 2, 2, rng)
    p = build_tdc(mdp, features).problem
    np.testing.assert_allclose(p.a11, p.a21, atol=1e-12)
    np.testing.assert_allclose(p.a12, p.a22 - p.a11.T, atol=1e-12)
    expected = p.a11.T @ np.linalg.solve(p.a22, p.a11)
    np.testing.assert_allclose(p.delta, expected, atol=1e-10)
    eig = np.linalg.eigvals(p.delta)
    np.testing.assert_allclose(eig.imag, 0.0, atol=1e-10)
    assert np.all(eig.real > 0)


def test_tabular_gram_is_stationary_law():
    mdp, features = load_mdp(TWO_STATE_MDP)
    mu, _, _ = enumerate_expectations(mdp, features.phi)
    np.testing.assert_allclose(build_tdc(mdp, features).problem.a22, np.diag(mu), atol=1e-12)


def test_rank_deficient_features(rng):
    mdp, _ = random_mdp(3, 2, 3, rng)
    s = np.sqrt(0.5)
    features = FeatureMap(np.array([[s, s, 0.0], [s, s, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(SingularFeatureGram):
        build_tdc(mdp, features)


def test_unknown_algorithm(rng):
    mdp, features = random_mdp(3, 2, 2, rng)
    with pytest.raises(ConfigError) as exc:
        build_instance("q-learning", mdp, features)
    assert exc.value.field == "algorithm"


# ========================================
# Sample-level equivalence and chains
# ========================================

@pytest.mark.parametrize("algorithm", ["gtd", "tdc"])
def test_raw_update_equals_engine_step(rng, algorithm):
    mdp, features = random_mdp(4, 2, 3, rng)
    instance = build_instance(algorithm, mdp, features)
    schedule = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.5, k0=10.0)
    engine = TtsaEngine(instance.problem, instance.oracle, schedule)
    stream = make_stream(21, 0)
    decoupling = engine.decoupling()
    state = engine.initial_state(stream, decoupling, theta0=rng.normal(size=3),
                                 w0=rng.normal(size=3))
    for _ in range(200):
        theta, w = state.theta[0].copy(), state.w[0].copy()
        outcome = engine.step(state, stream, decoupling)
        state = outcome.state
        expected = raw_update(instance, state.x_state[0], theta, w,
                              outcome.decoupling.beta, outcome.decoupling.gamma)
        np.testing.assert_allclose(state.theta[0], expected[0], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(state.w[0], expected[1], rtol=1e-12, atol=1e-12)


def test_tuple_chain_law(rng):
    mdp, _ = random_mdp(3, 2, 2, rng)
    chain = tuple_chain(mdp)
    assert len(chain.tuples) == 3 * 2 * 3
    np.testing.assert_allclose(chain.kernel.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(chain.stationary @ chain.kernel, chain.stationary, atol=1e-12)


def test_tuple_chain_mixes_with_state_chain(rng):
    for _ in range(5):
        mdp, _ = random_mdp(int(rng.integers(2, 6)), 2, 2, rng)
        state_t, tuple_t = state_chain_mixing(mdp)
        assert tuple_t - state_t in (0, 1)


def test_iid_mode_is_martingale(rng):
    mdp, features = random_mdp(4, 2, 2, rng)
    instance = build_tdc(mdp, features, mode="iid")
    assert isinstance(instance.oracle, MixtureOracle)
    report = validate_assumptions(instance.problem, instance.oracle)
    assert report.get("A1_zero_mean").passed


@pytest.mark.slow
def test_tdc_average_concentrates():
    config = ExperimentConfig.load(Path(__file__).parent / "configs" / "tdc_five_state.json")
    spec = config.build_spec()
    report = validate_assumptions(spec.problem, spec.oracle)
    assert report.get("A4_a22_hurwitz").passed
    assert report.get("A4_delta_hurwitz").passed

    n, replications = 2 ** 18, 100
    sol = spec.solution
    result = spec.engine(n).run_batch(n, replications, make_stream(23, 0),
                                      theta0=sol.theta_star, w0=sol.w_star)
    assert result.n_diverged == 0
    delta_inv = np.linalg.inv(spec.problem.delta)
    clt = delta_inv @ noise_source_covariance(spec) @ delta_inv.T
    radius = 10.0 * np.sqrt(np.trace(clt) / n)
    errors = np.linalg.norm(result.theta_bar - sol.theta_star, axis=1)
    assert np.mean(errors <= radius) >= 0.95
