import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hwsir.errors import StepSizeUnderflow
from hwsir.integrator import (B5, P, DenseSolution, IntegratorConfig, find_threshold_time,
                              integrate, integrate_fixed)


def decay(t, y):
    return -y


def test_exponential_decay():
    sol = integrate(decay, [1.0], (0.0, 1.0))
    assert sol(1.0)[0] == pytest.approx(np.exp(-1), rel=1e-6)


def test_zero_field_constant():
    y0 = np.array([0.3, -2.0, 7.0])
    sol, vals = integrate(lambda t, y: np.zeros_like(y), y0, (0.0, 5.0), sample_grid=np.linspace(0, 5, 11))
    assert np.array_equal(vals, np.tile(y0, (11, 1)))


def test_dense_output_weights_reduce_to_step_weights():
    assert np.allclose(P.sum(axis=1), B5, atol=1e-15)


def test_dense_output_matches_step_endpoints():
    sol = integrate(lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0], (0, 10))
    assert np.array_equal(sol(sol.ts), sol.ys)
    # interior dense values track the exact solution at the tolerance level
    tt = np.linspace(0, 10, 333)
    assert np.max(np.abs(sol(tt)[:, 0] - np.cos(tt))) < 1e-5


def test_fixed_step_order_five():
    errs, hs = [], []
    for n in (4, 8, 16, 32, 64):
        sol = integrate_fixed(decay, [1.0], (0.0, 1.0), n)
        errs.append(abs(sol(1.0)[0] - np.exp(-1)))
        hs.append(1 / n)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 4.7 <= slope <= 5.3


def test_agrees_with_independent_solver():
    def lotka(t, y):
        return np.array([y[0] * (1.1 - 0.4 * y[1]), y[1] * (0.1 * y[0] - 0.4)])

    cfg = IntegratorConfig(1e-9, 1e-11)
    tt = np.linspace(0, 30, 61)
    _, ours = integrate(lotka, [10.0, 5.0], (0, 30), cfg, tt)
    ref = solve_ivp(lotka, (0, 30), [10.0, 5.0], method="DOP853", t_eval=tt, rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(ours - ref.y.T) / np.maximum(1, np.abs(ref.y.T))) < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(abs_tol=-1)


def test_step_size_underflow():
    # finite-time blow-up of y' = y^2 at t = 1
    with pytest.raises(StepSizeUnderflow):
        integrate(lambda t, y: y ** 2, [1.0], (0.0, 2.0))


def test_threshold_constant_has_no_crossing():
    sol = integrate(lambda t, y: np.zeros(1), [0.02], (0, 10))
    assert find_threshold_time(sol, 0, 0.01) is None


def test_threshold_decay_closed_form():
    sol = integrate(decay, [0.05], (0, 5), IntegratorConfig(1e-12, 1e-14))
    assert find_threshold_time(sol, 0, 0.01) == pytest.approx(np.log(5), abs=1e-8)


def test_threshold_after_peak():
    # x(t) = sin(t): rises through 0.5 first, the down-crossing is at 5*pi/6
    sol = integrate(lambda t, y: np.array([y[1], -y[0]]), [0.0, 1.0], (0, 3), IntegratorConfig(1e-12, 1e-14))
    assert find_threshold_time(sol, 0, 0.5) == pytest.approx(5 * np.pi / 6, abs=1e-8)
