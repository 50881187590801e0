from __future__ import annotations

import math

import numpy as np
import pytest

from pbcbf.errors import HorizonExceeded, NumericalError
from pbcbf.ode import Trace, propagate_until, rk4_step


def test_rk4_zero_field_is_identity():
    x = np.array([1.0, 2.0])
    out = rk4_step(lambda xs, t: np.zeros(2), x, 0.0, 0.1)
    assert np.array_equal(out, x)


def test_rk4_matches_exponential():
    out = rk4_step(lambda xs, t: xs, np.array([1.0]), 0.0, 0.1)
    assert abs(out[0] - math.exp(0.1)) < 1e-7


def test_rk4_harmonic_oscillator_period():
    def deriv(xs, t):
        return np.array([xs[1], -xs[0]])

    x = np.array([1.0, 0.0])
    dt = 2.0 * math.pi / 1000.0
    for k in range(1000):
        x = rk4_step(deriv, x, k * dt, dt)
    assert np.max(np.abs(x - [1.0, 0.0])) < 1e-6


def test_rk4_convergence_order():
    # Halving the step must shrink the error against e^t by at least 12x
    # (empirical order >= 3.5).
    def err(dt):
        x = np.array([1.0])
        n = int(round(1.0 / dt))
        for k in range(n):
            x = rk4_step(lambda xs, t: xs, x, k * dt, dt)
        return abs(x[0] - math.e)

    e1 = err(0.02)
    e2 = err(0.01)
    assert e1 / e2 >= 12.0


def test_rk4_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        rk4_step(lambda xs, t: xs, np.array([1.0]), 0.0, 0.0)


def test_rk4_nonfinite_derivative_identifies_component():
    def deriv(xs, t):
        return np.array([0.0, math.nan, 0.0])

    with pytest.raises(NumericalError, match=r"component\(s\) \[1\]"):
        rk4_step(deriv, np.zeros(3), 0.0, 0.1)


def test_propagate_immediate_stop_returns_single_node():
    trace = propagate_until(
        lambda xs, t: np.zeros(1), np.array([3.0]), lambda t, xs: True, 0.1, 1.0
    )
    assert len(trace) == 1
    assert trace.states[0, 0] == 3.0
    assert trace.stop_reached


def test_propagate_linear_decay_hits_zero_near_one_second():
    trace = propagate_until(
        lambda xs, t: np.array([-1.0]),
        np.array([1.0]),
        lambda t, xs: xs[0] <= 0.0,
        1e-3,
        10.0,
    )
    assert abs(trace.times[-1] - 1.0) <= 1e-3
    assert 990 <= len(trace) - 1 <= 1010


def test_propagate_timeout_raises_horizon_exceeded():
    with pytest.raises(HorizonExceeded):
        propagate_until(
            lambda xs, t: np.zeros(1), np.zeros(1), lambda t, xs: False, 1e-2, 0.5
        )


def test_propagate_last_time_never_exceeds_horizon_plus_step():
    rng = np.random.default_rng(7)
    for _ in range(20):
        thresh = rng.uniform(0.1, 2.0)
        dt = rng.choice([1e-3, 7e-3, 0.02])
        t_max = rng.uniform(0.2, 3.0)
        try:
            trace = propagate_until(
                lambda xs, t: np.array([-1.0]),
                np.array([thresh]),
                lambda t, xs: xs[0] <= 0.0,
                dt,
                t_max,
            )
        except HorizonExceeded:
            continue
        assert trace.times[-1] <= t_max + dt


def test_propagate_time_grid_is_uniform():
    trace = propagate_until(
        lambda xs, t: np.array([-1.0]),
        np.array([0.5]),
        lambda t, xs: xs[0] <= 0.0,
        1e-3,
        10.0,
    )
    trace.validate()
    steps = np.diff(trace.times)
    assert np.all(np.abs(steps - 1e-3) <= 1e-12)


def test_trace_validate_rejects_bad_shapes():
    trace = Trace(
        times=np.array([0.0, 0.1]),
        states=np.zeros((2, 1)),
        inputs=np.zeros((1, 0)),
    )
    with pytest.raises(ValueError):
        trace.validate()


def test_trace_validate_rejects_nonuniform_grid():
    trace = Trace(
        times=np.array([0.0, 0.1, 0.3]),
        states=np.zeros((3, 1)),
        inputs=np.zeros((3, 0)),
    )
    with pytest.raises(ValueError):
        trace.validate()
