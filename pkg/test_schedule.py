"""
Tests for step-size schedules and the step-size diagnostics
"""
import math

import numpy as np
import pytest

from src.errors import ConfigError
from src.linalg import solve_lyapunov
from src.schedule import PRESETS, StepSchedule, check_schedule


@pytest.fixture
def certificates(scalar_problem):
    return solve_lyapunov(scalar_problem.a22), solve_lyapunov(scalar_problem.delta)


def test_beta_formula():
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=1.0, k0=0.0)
    assert s.beta(15) == pytest.approx(15 ** -0.75)
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.3, k0=10.0)
    assert s.beta(0) == pytest.approx(0.3 * 10 ** -0.75)
    assert s.gamma(0) == pytest.approx(10 ** -0.6)


def test_power_law_ratio_bounds(schedule):
    k = np.arange(0, 100_000, dtype=float)
    k0 = schedule.k0
    assert np.all(schedule.beta(k) / schedule.beta(k + 1) <= 1 + schedule.b_exp / (k + k0))
    assert np.all(schedule.gamma(k) / schedule.gamma(k + 1) <= 1 + schedule.a_exp / (k + k0))


def test_monotone_and_ratio_below_r_step(schedule):
    k = np.arange(0, 5000)
    beta, gamma = schedule.beta(k), schedule.gamma(k)
    assert np.all(beta > 0) and np.all(gamma > 0)
    assert np.all(np.diff(beta) <= 0) and np.all(np.diff(gamma) <= 0)
    ratio = schedule.ratio(k)
    assert np.all(np.diff(ratio) <= 0)
    assert np.all(ratio[1:] < schedule.r_step)


def test_exponents_must_lie_in_open_interval():
    with pytest.raises(ConfigError) as exc:
        StepSchedule(a_exp=0.5, b_exp=0.75, c0_gamma=1.0, c0_beta=1.0)
    assert exc.value.field == "schedule.a_exp"


@pytest.mark.parametrize("preset", PRESETS)
def test_presets_order_exponents(preset):
    s = StepSchedule.from_preset(preset, 2 ** 16)
    assert 0.5 < s.a_exp < s.b_exp < 1.0
    assert s.preset == preset


def test_pr_martingale_preset_values():
    s = StepSchedule.from_preset("pr-martingale", 2 ** 16, c0_beta=0.5, k0=10)
    inv_log = 1.0 / math.log(2 ** 16)
    assert s.a_exp == pytest.approx(0.5 + inv_log)
    assert s.b_exp == pytest.approx(0.5 + 2 * inv_log)
    assert s.c0_beta == 0.5 and s.k0 == 10


def test_preset_horizon_too_short():
    with pytest.raises(ConfigError):
        StepSchedule.from_preset("pr-martingale", 8)


def test_from_dict_layouts():
    explicit = StepSchedule.from_dict({"a": 0.6, "b": 0.75, "c0_beta": 0.5, "k0": 10})
    assert (explicit.a_exp, explicit.b_exp, explicit.c0_gamma) == (0.6, 0.75, 1.0)
    preset = StepSchedule.from_dict({"preset": "last-markov"}, horizon=4096)
    assert preset.a_exp == pytest.approx(2.0 / 3.0)
    assert preset.b_exp == pytest.approx(1.0 - 1.0 / math.log(4096))
    with pytest.raises(ConfigError) as exc:
        StepSchedule.from_dict({"preset": "last-markov"})
    assert exc.value.field == "schedule.horizon"
    with pytest.raises(ConfigError) as exc:
        StepSchedule.from_dict({"a": 0.6})
    assert exc.value.field == "schedule.b"


def test_asymptotic_regime_passes(certificates):
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=0.9, c0_beta=0.4, k0=1e6)
    report = check_schedule(s, *certificates)
    assert report.ok, [c.message for c in report.checks if c.required and not c.passed]
    assert report.implied_min_k0 == pytest.approx(2 ** (4 / 0.75))
    assert report.unchecked


def test_equal_exponents_fail(certificates):
    s = StepSchedule(a_exp=0.7, b_exp=0.7, c0_gamma=1.0, c0_beta=0.45, k0=1e6)
    check = check_schedule(s, *certificates).get("exponent_order")
    assert not check.passed
    assert "a < b" in check.message


def test_step_ratio_boundary(certificates):
    cert22, cert_delta = certificates
    r = cert22.contraction_rate / cert_delta.contraction_rate
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=r, k0=1e6)
    check = check_schedule(s, cert22, cert_delta).get("step_ratio")
    assert not check.passed
    assert check.value / check.bound == pytest.approx(2.0)


def test_moment_order_constant(certificates):
    s = StepSchedule(a_exp=0.6, b_exp=0.75, c0_gamma=1.0, c0_beta=0.45, k0=30)
    report = check_schedule(s, *certificates, p=2.0, c_a5=1.0)
    assert not report.get("k0_moment_order").passed
    assert check_schedule(s, *certificates, p=2.0, c_a5=0.5).get("k0_moment_order").passed


def test_to_dict_keeps_preset_only_when_set(schedule):
    assert "preset" not in schedule.to_dict()
    assert StepSchedule.from_preset("pr-markov", 1024).to_dict()["preset"] == "pr-markov"
