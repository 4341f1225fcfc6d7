"""
Tests for the coupled/decoupled recursions, decoupling matrices and products
"""
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from conftest import random_markov_oracle, random_problem
from src.engine import (
    DecouplingSequence,
    RunOptions,
    TtsaEngine,
    decoupled_update,
    difference_terms,
    leading_statistic_last,
    leading_statistic_pr,
    make_stream,
    matrix_products,
    psi_series,
)
from src.errors import ConfigError, Diverged, MissingNoiseLog
from src.linalg import q_op_norm, solve_lyapunov
from src.model import MixtureOracle, TtsaProblem, build_oracle, solve_exact
from src.schedule import StepSchedule


def scalar(a11, a12, a21, a22, b1, b2):
    return TtsaProblem(a11=[[a11]], a12=[[a12]], a21=[[a21]], a22=[[a22]], b1=[b1], b2=[b2])


# ========================================
# Coupled recursion
# ========================================

def test_fixed_point_is_stationary(scalar_problem, schedule):
    sol = solve_exact(scalar_problem)
    engine = TtsaEngine(scalar_problem, MixtureOracle.deterministic(scalar_problem), schedule)
    record = engine.run(200, make_stream(1, 0),
                        options=RunOptions(theta0=sol.theta_star, w0=sol.w_star))
    for cp in record.checkpoints:
        np.testing.assert_allclose(cp.theta, sol.theta_star, atol=1e-12)
        np.testing.assert_allclose(cp.w, sol.w_star, atol=1e-12)


def test_scalar_product_closed_form(schedule):
    problem = scalar(1, 0, 0, 1, 0, 0)
    engine = TtsaEngine(problem, MixtureOracle.deterministic(problem), schedule)
    horizon = 300
    record = engine.run(horizon, make_stream(1, 0), options=RunOptions(theta0=[1.0]))
    expected = np.prod(1.0 - schedule.beta(np.arange(horizon)))
    assert record.final.theta[0] == pytest.approx(expected, rel=1e-12)


def test_averaging_identity_every_step(scalar_problem, markov_oracle, schedule):
    engine = TtsaEngine(scalar_problem, markov_oracle, schedule)
    record = engine.run(2000, make_stream(7, 0))
    assert record.identity_residual_max <= 1e-9


def test_averaging_identity_multiplicative_noise(rng, schedule):
    problem = random_problem(rng, 2, 3)
    engine = TtsaEngine(problem, random_markov_oracle(rng, problem, 5), schedule)
    assert engine.run(2000, make_stream(8, 0)).identity_residual_max <= 1e-9


def test_same_seed_bit_identical(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    first = engine.run(500, make_stream(42, 3)).to_frame()
    second = engine.run(500, make_stream(42, 3)).to_frame()
    pd.testing.assert_frame_equal(first, second, check_exact=True)
    third = engine.run(500, make_stream(42, 4)).to_frame()
    assert not first.equals(third)


def test_horizon_zero_keeps_initial_state(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    record = engine.run(0, make_stream(1, 0), options=RunOptions(theta0=[2.0], w0=[-1.0]))
    assert [cp.k for cp in record.checkpoints] == [0]
    assert record.final.theta[0] == 2.0 and record.final.w[0] == -1.0


def test_checkpoint_frame_header(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    frame = engine.run(64, make_stream(1, 0)).to_frame()
    assert list(frame.columns) == ["k", "theta_0", "w_0", "theta_bar_0", "w_bar_0", "residual"]
    assert list(frame["k"]) == [0, 1, 2, 4, 8, 16, 32, 64]


def test_running_average_matches_checkpoints(scalar_problem, markov_oracle, schedule):
    horizon = 1000
    engine = TtsaEngine(scalar_problem, markov_oracle, schedule)
    record = engine.run(horizon, make_stream(5, 0), checkpoints=range(horizon + 1))
    thetas = np.array([cp.theta for cp in record.checkpoints[1:]])
    np.testing.assert_allclose(record.final.theta_bar, thetas.mean(axis=0), rtol=0, atol=1e-12)


def test_divergence_reports_step():
    problem = scalar(-5, 0, 0, 1, 1, 0)
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=1.0, k0=1.0)
    engine = TtsaEngine(problem, MixtureOracle.deterministic(problem), s)
    with pytest.raises(Diverged) as exc:
        engine.run(10_000, make_stream(1, 0), options=RunOptions(theta0=[1.0]))
    assert exc.value.k is not None and exc.value.k > 0


def test_batch_flags_divergence_instead_of_raising():
    problem = scalar(-5, 0, 0, 1, 1, 0)
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=1.0, k0=1.0)
    engine = TtsaEngine(problem, MixtureOracle.deterministic(problem), s)
    result = engine.run_batch(2000, 4, make_stream(1, 0), theta0=[1.0])
    assert result.n_diverged == 4


def test_zero_k0_rejected(scalar_problem, additive_oracle):
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.5, k0=0.0)
    with pytest.raises(ConfigError):
        TtsaEngine(scalar_problem, additive_oracle, s)


# ========================================
# Decoupled recursion
# ========================================

@pytest.mark.parametrize("seed", range(10))
def test_coupled_and_decoupled_agree(seed, schedule):
    rng = np.random.default_rng(seed)
    d_theta, d_w = (int(d) for d in rng.integers(1, 5, size=2))
    problem = random_problem(rng, d_theta, d_w)
    oracle = random_markov_oracle(rng, problem, int(rng.integers(2, 6)))
    record = TtsaEngine(problem, oracle, schedule).run(10_000, make_stream(seed, 0),
                                                       options=RunOptions(run_decoupled=True))
    assert record.decoupled_discrepancy_max <= 1e-8
    assert record.identity_residual_max <= 1e-8


def test_decoupled_agrees_under_perturbation_noise(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    record = engine.run(5000, make_stream(12, 0), options=RunOptions(run_decoupled=True))
    assert record.decoupled_discrepancy_max <= 1e-8


def test_no_feedback_keeps_l_at_zero(schedule):
    problem = TtsaProblem(a11=[[2.0, 0.5], [0.0, 1.0]], a12=[[0.3], [0.1]],
                          a21=[[0.0, 0.0]], a22=[[1.5]], b1=[0.0, 0.0], b2=[0.0])
    seq = DecouplingSequence(problem, schedule)
    for _ in range(200):
        state = seq.advance()
        np.testing.assert_array_equal(state.l_k, np.zeros((1, 2)))
        np.testing.assert_allclose(state.b11_k, problem.delta, atol=0)


def test_contraction_along_schedule(scalar_problem, schedule):
    cert22 = solve_lyapunov(scalar_problem.a22)
    cert_delta = solve_lyapunov(scalar_problem.delta)
    seq = DecouplingSequence(scalar_problem, schedule)
    for _ in range(2000):
        st = seq.advance()
        assert q_op_norm(np.eye(1) - st.beta * st.b11_k, cert_delta.q) \
            <= 1 - st.beta * cert_delta.contraction_rate / 4
        assert q_op_norm(np.eye(1) - st.gamma * st.b22_k, cert22.q) \
            <= 1 - st.gamma * cert22.contraction_rate / 4
    assert seq.l_ratio_max < 10.0


def small_ratio_schedule(problem):
    """Steps inside both certificates' max_step, beta/gamma at most 1/20."""
    cert22, cert_delta = solve_lyapunov(problem.a22), solve_lyapunov(problem.delta)
    c0_gamma = cert22.max_step
    c0_beta = min(cert_delta.max_step, 0.05 * c0_gamma)
    schedule = StepSchedule(a_exp=0.6, b_exp=0.9, c0_gamma=c0_gamma, c0_beta=c0_beta, k0=50.0)
    return schedule, cert22, cert_delta


def test_contraction_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        problem = random_problem(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        schedule, cert22, cert_delta = small_ratio_schedule(problem)
        eye_theta, eye_w = np.eye(problem.d_theta), np.eye(problem.d_w)
        seq = DecouplingSequence(problem, schedule)
        for _ in range(300):
            st = seq.advance()
            assert q_op_norm(eye_theta - st.beta * st.b11_k, cert_delta.q) \
                <= 1 - st.beta * cert_delta.contraction_rate / 4
            assert q_op_norm(eye_w - st.gamma * st.b22_k, cert22.q) \
                <= 1 - st.gamma * cert22.contraction_rate / 4


def test_difference_terms_rewrite_decoupled_step(rng, schedule):
    problem = random_problem(rng, 2, 3)
    seq = DecouplingSequence(problem, schedule)
    for _ in range(25):
        dec = seq.advance()
        theta, w = rng.normal(size=(4, 2)), rng.normal(size=(4, 3))
        v, w_noise = rng.normal(size=(4, 2)), rng.normal(size=(4, 3))
        delta1, delta2 = difference_terms(dec, problem, theta, w)
        theta_next, w_next = decoupled_update(problem, theta, w, v, w_noise, dec)
        b = dec.beta
        g = dec.gamma
        np.testing.assert_allclose(
            theta_next,
            theta - b * theta @ problem.delta.T + b * delta1 - b * w @ problem.a12.T + b * v,
            atol=1e-12)
        np.testing.assert_allclose(
            w_next,
            w - g * w @ problem.a22.T + b * delta2 + b * v @ dec.d_k.T + g * w_noise,
            atol=1e-12)


# ========================================
# Products and leading statistics
# ========================================

def test_empty_product(scalar_problem, schedule):
    products = matrix_products(schedule, scalar_problem, 5, 4)
    np.testing.assert_array_equal(products.g1, np.eye(1))
    assert products.p1 == 1.0 and products.p2 == 1.0


def test_constant_step_product():
    problem = scalar(1, 0, 0, 1, 0, 0)
    half = SimpleNamespace(beta=lambda k: np.full(np.shape(k), 0.5),
                           gamma=lambda k: np.full(np.shape(k), 0.5))
    products = matrix_products(half, problem, 0, 2)
    assert products.g1[0, 0] == pytest.approx(0.125)
    assert products.g2[0, 0] == pytest.approx(0.125)


def test_product_matches_incremental_accumulation():
    problem = TtsaProblem(a11=[[2.0, 1.0], [0.0, 3.0]], a12=np.zeros((2, 2)),
                          a21=np.zeros((2, 2)), a22=[[1.5, 0.2], [0.0, 1.0]],
                          b1=[0.0, 0.0], b2=[0.0, 0.0])
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=0.5, c0_beta=0.2, k0=10.0)
    cert_delta = solve_lyapunov(problem.delta)
    assert s.beta(0) <= cert_delta.max_step
    products = matrix_products(s, problem, 3, 400, cert_delta=cert_delta)
    g = np.eye(2)
    for i in range(3, 401):
        g = (np.eye(2) - s.beta(i) * problem.delta) @ g
    np.testing.assert_allclose(products.g1, g, atol=1e-12)
    assert products.bound_ok


def test_last_statistic_exact_for_additive_noise(schedule):
    problem = scalar(1, 0, 1, 1, 1, 0)
    oracle = build_oracle({"type": "martingale", "family": "perturbation",
                           "directions": [{"b1": [1.0]}, {"b2": [0.5]}]}, problem)
    sol = solve_exact(problem)
    engine = TtsaEngine(problem, oracle, schedule)
    n = 300
    record = engine.run(n + 2, make_stream(3, 0),
                        options=RunOptions(theta0=sol.theta_star, log_noise=True))
    lead = leading_statistic_last(record.noise_log, problem, schedule, n)
    assert np.max(np.abs(lead.residual)) <= 1e-12
    assert np.max(np.abs(lead.statistic)) > 0


def test_last_statistic_zero_noise(scalar_problem, schedule):
    engine = TtsaEngine(scalar_problem, MixtureOracle.deterministic(scalar_problem), schedule)
    record = engine.run(52, make_stream(1, 0), options=RunOptions(log_noise=True))
    lead = leading_statistic_last(record.noise_log, scalar_problem, schedule, 50)
    np.testing.assert_allclose(lead.statistic, 0.0, atol=1e-15)
    np.testing.assert_allclose(lead.residual, record.noise_log[51].theta_err, atol=1e-15)


def test_pr_statistic_remainder_for_additive_noise(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    n = 400
    record = engine.run(n + 1, make_stream(4, 0), options=RunOptions(log_noise=True))
    lead = leading_statistic_pr(record.noise_log, scalar_problem, n)
    assert lead.residual is None
    assert lead.statistic.shape == (1,)
    psis = psi_series(record.noise_log, scalar_problem)
    assert len(psis) == n + 1
    np.testing.assert_allclose(lead.statistic, np.sum(psis[1:], axis=0) / np.sqrt(n), rtol=1e-12)

    sol = solve_exact(scalar_problem)
    theta_bar = sol.theta_star + np.array([0.01])
    with_bar = leading_statistic_pr(record.noise_log, scalar_problem, n, theta_bar, sol.theta_star)
    np.testing.assert_allclose(with_bar.residual,
                               np.sqrt(n) * scalar_problem.delta @ [0.01] - lead.statistic,
                               rtol=1e-12, atol=1e-12)


def test_statistics_need_noise_log(scalar_problem, additive_oracle, schedule):
    record = TtsaEngine(scalar_problem, additive_oracle, schedule).run(10, make_stream(1, 0))
    with pytest.raises(MissingNoiseLog):
        leading_statistic_last(record.noise_log, scalar_problem, schedule, 5)
    with pytest.raises(MissingNoiseLog):
        leading_statistic_pr(record.noise_log, scalar_problem, 5)


def test_batch_leading_statistic_matches_logged_run(scalar_problem, additive_oracle, schedule):
    """run_batch with one replication draws the same stream as run."""
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    n = 200
    batch = engine.run_batch(n + 1, 1, make_stream(9, 0), track_leading=True)
    record = engine.run(n + 1, make_stream(9, 0),
                        options=RunOptions(log_noise=True, check_identity=False))
    lead = leading_statistic_last(record.noise_log, scalar_problem, schedule, n)
    np.testing.assert_allclose(batch.leading_last[0], lead.statistic, atol=1e-13)
    np.testing.assert_allclose(batch.theta[0], record.final.theta, atol=0)


# ========================================
# Moment decay (Monte Carlo)
# ========================================

@pytest.mark.slow
def test_mse_decays_like_beta(scalar_problem, additive_oracle, schedule):
    engine = TtsaEngine(scalar_problem, additive_oracle, schedule)
    grid = [2 ** j for j in range(8, 15)]
    result = engine.run_batch(max(grid), 1000, make_stream(2025, 0), moment_checkpoints=grid)
    ks = np.log([row["k"] for row in result.moments])
    mse = np.log([row["theta_mse"] for row in result.moments])
    slope = np.polyfit(ks, mse, 1)[0]
    assert abs(slope + schedule.b_exp) <= 0.1
