"""Planar double integrator in polar coordinates.

State [r, theta, vr, omega] with vr = dr/dt and omega = dtheta/dt. The
acceleration input [u_r, u_theta] acts along the radial and transverse
directions, so the polar form is a pure coordinate change of the Cartesian
double integrator:

    r_ddot     = u_r + r * omega**2
    theta_ddot = u_theta / r - 2 * vr * omega / r

The input is bounded in the Euclidean norm. Evaluation raises DomainError
when r falls to the configured floor (1/r singularity).
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from .base import AffineSystem, NormBall

STATE_NAMES = ("r", "theta", "vr", "omega")
INPUT_NAMES = ("u_r", "u_theta")


def double_integrator_polar(u_max: float = 1.0, r_floor: float = 1e-6) -> AffineSystem:
    """Polar double integrator with norm-ball acceleration bound ``u_max``."""

    def _check(r):
        if r <= r_floor:
            raise DomainError(f"radius r={r:.6g} at or below the floor {r_floor:.6g}")

    def f(x):
        r, vr, om = x[0], x[2], x[3]
        _check(r)
        out = np.empty(4)
        out[0] = vr
        out[1] = om
        out[2] = r * om * om
        out[3] = -2.0 * vr * om / r
        return out

    def G(x):
        r = x[0]
        _check(r)
        out = np.zeros((4, 2))
        out[2, 0] = 1.0
        out[3, 1] = 1.0 / r
        return out

    def fused(x, u):
        r, vr, om = x[0], x[2], x[3]
        _check(r)
        out = np.empty(4)
        out[0] = vr
        out[1] = om
        out[2] = u[0] + r * om * om
        out[3] = (u[1] - 2.0 * vr * om) / r
        return out

    return AffineSystem(
        name="double_integrator_polar",
        n=4,
        m=2,
        f=f,
        G=G,
        bounds=NormBall(u_max=u_max, m=2),
        state_names=STATE_NAMES,
        input_names=INPUT_NAMES,
        fused=fused,
    )


def polar_to_cartesian(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity vectors of a polar state."""
    r, th, vr, om = x
    c, s = np.cos(th), np.sin(th)
    pos = np.array([r * c, r * s])
    vel = np.array([vr * c - r * om * s, vr * s + r * om * c])
    return pos, vel


def cartesian_to_polar(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
    """Polar state [r, theta, vr, omega] from Cartesian position and velocity."""
    x, y = pos
    r = float(np.hypot(x, y))
    if r == 0.0:
        raise DomainError("polar coordinates are undefined at the origin")
    th = float(np.arctan2(y, x))
    vr = (x * vel[0] + y * vel[1]) / r
    om = (x * vel[1] - y * vel[0]) / (r * r)
    return np.array([r, th, vr, om])


def accel_to_polar_input(theta: float, a_cart: np.ndarray) -> np.ndarray:
    """Rotate a Cartesian acceleration into the [u_r, u_theta] channels."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([a_cart[0] * c + a_cart[1] * s, -a_cart[0] * s + a_cart[1] * c])
