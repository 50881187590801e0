from __future__ import annotations

import math

import numpy as np
import pytest

from pbcbf.errors import DomainError
from pbcbf.ode import rk4_step
from pbcbf.systems import (
    AircraftParams,
    Box,
    NormBall,
    acc_system,
    accel_to_polar_input,
    aircraft_longitudinal,
    cartesian_to_polar,
    double_integrator_polar,
    linearize,
    polar_to_cartesian,
    polynomial_resistance,
)
from tests.test_aircraft import trainer_params


# ---------------------------------------------------------------------------
# Polar double integrator.
# ---------------------------------------------------------------------------

def test_di_rest_state_has_zero_rates():
    s = double_integrator_polar()
    assert np.array_equal(s.dynamics(np.array([2.0, 0, 0, 0]), np.zeros(2)), np.zeros(4))


def test_di_centripetal_term():
    s = double_integrator_polar()
    xdot = s.dynamics(np.array([2.0, 0.0, 0.0, 1.0]), np.zeros(2))
    assert xdot[2] == pytest.approx(2.0)  # r * omega^2
    assert xdot[3] == pytest.approx(0.0)


def test_di_coriolis_term():
    s = double_integrator_polar()
    xdot = s.dynamics(np.array([2.0, 0.0, 1.0, 1.0]), np.zeros(2))
    assert xdot[3] == pytest.approx(-1.0)  # -2 vr omega / r


def test_di_radius_floor_raises():
    s = double_integrator_polar(r_floor=1e-6)
    with pytest.raises(DomainError):
        s.f(np.array([1e-7, 0.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        s.dynamics(np.array([0.0, 0.0, 0.0, 0.0]), np.zeros(2))


def test_di_polar_cartesian_roundtrip():
    x = np.array([2.3, 0.7, -0.4, 0.25])
    pos, vel = polar_to_cartesian(x)
    back = cartesian_to_polar(pos, vel)
    assert np.max(np.abs(back - x)) < 1e-12


# ---------------------------------------------------------------------------
# Cruise-control model.
# ---------------------------------------------------------------------------

def test_acc_matched_speed_balanced_force_is_equilibrium():
    fr = polynomial_resistance([100.0, 2.0])  # 100 + 2 v
    s = acc_system(m=1500.0, v_f=20.0, a_max=3.0, f_resistance=fr)
    x = np.array([20.0, 50.0])
    xdot = s.dynamics(x, np.array([fr(20.0)]))
    assert np.max(np.abs(xdot)) < 1e-12


def test_acc_full_brake_reaches_design_deceleration():
    s = acc_system(m=1500.0, v_f=20.0, a_max=3.0)
    xdot = s.dynamics(np.array([25.0, 50.0]), np.array([-1500.0 * 3.0]))
    assert xdot[0] == pytest.approx(-3.0)


def test_acc_gap_rate():
    s = acc_system(m=1500.0, v_f=20.0, a_max=3.0)
    xdot = s.dynamics(np.array([30.0, 50.0]), np.array([0.0]))
    assert xdot[1] == pytest.approx(-10.0)


def test_acc_rejects_bad_parameters():
    with pytest.raises(ValueError):
        acc_system(m=0.0, v_f=10.0, a_max=1.0)
    with pytest.raises(ValueError):
        acc_system(m=10.0, v_f=10.0, a_max=-1.0)


# ---------------------------------------------------------------------------
# Affinity: the input enters linearly, exactly.
# ---------------------------------------------------------------------------

def _affinity_check(system, x_samples, u_scale, rng):
    for x in x_samples:
        u1 = rng.uniform(-1.0, 1.0, system.m) * u_scale
        u2 = rng.uniform(-1.0, 1.0, system.m) * u_scale
        lam = rng.uniform(0.0, 1.0)
        mix = system.dynamics(x, lam * u1 + (1.0 - lam) * u2)
        split = lam * system.dynamics(x, u1) + (1.0 - lam) * system.dynamics(x, u2)
        assert np.max(np.abs(mix - split)) < 1e-9
        # fused fast path agrees with the separate f and G evaluations
        assert np.max(np.abs(system.dynamics(x, u1) - (system.f(x) + system.G(x) @ u1))) < 1e-9


def test_affinity_double_integrator():
    rng = np.random.default_rng(3)
    s = double_integrator_polar()
    xs = [np.array([rng.uniform(0.5, 4), rng.uniform(-3, 3), rng.uniform(-2, 2), rng.uniform(-1, 1)]) for _ in range(25)]
    _affinity_check(s, xs, 2.0, rng)


def test_affinity_acc():
    rng = np.random.default_rng(4)
    s = acc_system(m=1650.0, v_f=15.0, a_max=3.0, f_resistance=polynomial_resistance([50.0, 1.0, 0.3]))
    xs = [np.array([rng.uniform(5, 40), rng.uniform(10, 200)]) for _ in range(25)]
    _affinity_check(s, xs, 5000.0, rng)


def test_affinity_aircraft():
    rng = np.random.default_rng(5)
    s = aircraft_longitudinal(trainer_params())
    xs = [
        np.array([rng.uniform(60, 100), rng.uniform(-10, 25), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.5)])
        for _ in range(25)
    ]
    _affinity_check(s, xs, 1.0, rng)


# ---------------------------------------------------------------------------
# Polar form is a coordinate change, not new physics.
# ---------------------------------------------------------------------------

def test_polar_matches_cartesian_double_integrator():
    s = double_integrator_polar(u_max=2.0)

    def u_cart(t):
        return np.array([0.3 * math.sin(t), 0.2 * math.cos(0.7 * t)])

    def deriv_polar(x, t):
        return s.dynamics(x, accel_to_polar_input(x[1], u_cart(t)))

    def deriv_cart(x, t):
        a = u_cart(t)
        return np.array([x[2], x[3], a[0], a[1]])

    pos0 = np.array([3.0, 1.0])
    vel0 = np.array([0.2, 0.4])
    xp = cartesian_to_polar(pos0, vel0)
    xc = np.concatenate([pos0, vel0])
    dt = 1e-3
    for k in range(10000):
        xp = rk4_step(deriv_polar, xp, k * dt, dt)
        xc = rk4_step(deriv_cart, xc, k * dt, dt)
    pos_p, vel_p = polar_to_cartesian(xp)
    assert np.max(np.abs(pos_p - xc[:2])) < 1e-5
    assert np.max(np.abs(vel_p - xc[2:])) < 1e-5


# ---------------------------------------------------------------------------
# Linearization.
# ---------------------------------------------------------------------------

def test_linearize_exact_for_linear_drift():
    A0 = np.array([[0.0, 1.0], [-2.0, -0.3]])
    B0 = np.array([[0.0], [1.0]])
    from pbcbf.systems import AffineSystem

    s = AffineSystem(
        name="lti", n=2, m=1,
        f=lambda x: A0 @ x,
        G=lambda x: B0,
        bounds=Box(u_min=[-1.0], u_max=[1.0]),
        state_names=("x1", "x2"),
        input_names=("u",),
    )
    A, B = linearize(s, np.array([0.3, -0.8]))
    assert np.max(np.abs(A - A0)) < 1e-6
    assert np.array_equal(B, B0)


def test_linearize_di_input_map_rows():
    s = double_integrator_polar()
    _, B = linearize(s, np.array([2.0, 0.0, 0.0, 0.0]))
    assert np.allclose(B[2], [1.0, 0.0])
    assert np.allclose(B[3], [0.0, 0.5])


# ---------------------------------------------------------------------------
# Input bounds.
# ---------------------------------------------------------------------------

def test_box_validation_and_operations():
    with pytest.raises(ValueError):
        Box(u_min=[1.0], u_max=[0.0])
    b = Box(u_min=[-1.0, 0.0], u_max=[1.0, 4.0])
    assert b.contains(np.array([0.5, 2.0]))
    assert not b.contains(np.array([1.5, 2.0]))
    assert np.allclose(b.clamp(np.array([3.0, -1.0])), [1.0, 0.0])
    assert np.allclose(b.midpoint(), [0.0, 2.0])


def test_normball_validation_and_operations():
    with pytest.raises(ValueError):
        NormBall(u_max=0.0, m=2)
    nb = NormBall(u_max=2.0, m=2)
    assert nb.contains(np.array([1.0, 1.0]))
    clamped = nb.clamp(np.array([3.0, 4.0]))
    assert np.linalg.norm(clamped) == pytest.approx(2.0)
    box = nb.bounding_box()
    assert np.allclose(box.u_min, [-2.0, -2.0])
    assert np.allclose(box.u_max, [2.0, 2.0])
