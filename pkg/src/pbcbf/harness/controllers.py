"""Nominal controllers and disturbance inputs for the shipped scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..systems.base import Box
from ..systems.double_integrator import accel_to_polar_input, polar_to_cartesian


# ---------------------------------------------------------------------------
# Planar double integrator: PD tracking of a serpentine reference.
# ---------------------------------------------------------------------------

def di_reference(t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference position, velocity and acceleration [sin(t pi/5), t pi/10]."""
    w = math.pi / 5.0
    pos = np.array([math.sin(w * t), 0.5 * w * t])
    vel = np.array([w * math.cos(w * t), 0.5 * w])
    acc = np.array([-w * w * math.sin(w * t), 0.0])
    return pos, vel, acc


@dataclass(frozen=True)
class DiTrackingGains:
    kp: float = 2.0
    kd: float = 3.0
    push_gain: float = 4.0
    push_radius: float = 1.0
    u_clip: Optional[float] = None


def tracking_controller_di(x: np.ndarray, t: float, gains: DiTrackingGains) -> np.ndarray:
    """PD tracking acceleration mapped to the polar input channels.

    Feedback acts on the Cartesian position/velocity error with the reference
    acceleration fed forward; the resulting acceleration is rotated into the
    radial/transverse channels. If the state has fallen inside the keep-out
    radius, an outward radial push proportional to the penetration is added
    as a recovery mechanism. The command is clipped to ``u_clip`` in norm
    when configured.
    """
    pos_r, vel_r, acc_r = di_reference(t)
    pos, vel = polar_to_cartesian(x)
    a_des = acc_r + gains.kp * (pos_r - pos) + gains.kd * (vel_r - vel)
    u = accel_to_polar_input(x[1], a_des)
    if x[0] < gains.push_radius:
        u[0] += gains.push_gain * (gains.push_radius - x[0])
    if gains.u_clip is not None:
        norm = float(np.linalg.norm(u))
        if norm > gains.u_clip:
            u *= gains.u_clip / norm
    return u


class DiTrackingController:
    """Stateless callable wrapper so the runner can treat all controllers alike."""

    def __init__(self, gains: DiTrackingGains):
        self.gains = gains

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return tracking_controller_di(x, t, self.gains)


# ---------------------------------------------------------------------------
# Aircraft: PID stability augmentation plus auto-throttle about a trim point.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SasGains:
    """Gains of the pitch SAS (elevator) and auto-throttle (throttle) loops."""

    k_P_alpha: float
    k_D_theta: float
    k_P_theta: float
    k_I_theta: float
    k_P_u: float
    k_I_u: float
    k_D_u: float
    deriv_pole: float = 50.0


class PidSasAutothrottle:
    """Hold trim: elevator from W/Q/theta feedback, throttle from a PID on U.

    The elevator channel is k_P_alpha (W - W0)/U0 + k_D_theta Q plus a PI on
    the pitch error; the throttle channel is a PID on the speed error whose
    derivative term is realized with a first-order filter (pole at
    ``deriv_pole`` rad/s; a pure derivative is not realizable and would react
    unboundedly to a speed step). Integrators advance once per call at the
    simulation step, with conditional anti-windup at the input bounds. The
    returned command is the raw (unsaturated) controller output; saturation
    is the safety filter's job.
    """

    def __init__(
        self,
        trim_x: np.ndarray,
        trim_u: np.ndarray,
        gains: SasGains,
        dt: float,
        bounds: Box,
    ):
        self.trim_x = np.asarray(trim_x, dtype=float)
        self.trim_u = np.asarray(trim_u, dtype=float)
        self.gains = gains
        self.dt = dt
        self.bounds = bounds
        self.int_theta = 0.0
        self.int_u = 0.0
        self.deriv_state = 0.0

    def reset(self) -> None:
        self.int_theta = 0.0
        self.int_u = 0.0
        self.deriv_state = 0.0

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        g = self.gains
        U0, W0, _, theta0 = self.trim_x
        e_w = x[1] - W0
        e_theta = x[3] - theta0
        e_u = x[0] - U0

        deriv = g.deriv_pole * (e_u - self.deriv_state)
        d_elev = (
            g.k_P_alpha * e_w / U0
            + g.k_D_theta * x[2]
            + g.k_P_theta * e_theta
            + g.k_I_theta * self.int_theta
        )
        d_th = g.k_P_u * e_u + g.k_I_u * self.int_u + g.k_D_u * deriv
        u = self.trim_u + np.array([d_elev, d_th])

        # Conditional integration: freeze an integrator that would push the
        # saturated channel further out of bounds.
        lo, hi = self.bounds.u_min, self.bounds.u_max
        if not (
            (u[0] > hi[0] and g.k_I_theta * e_theta > 0.0)
            or (u[0] < lo[0] and g.k_I_theta * e_theta < 0.0)
        ):
            self.int_theta += self.dt * e_theta
        if not (
            (u[1] > hi[1] and g.k_I_u * e_u > 0.0)
            or (u[1] < lo[1] and g.k_I_u * e_u < 0.0)
        ):
            self.int_u += self.dt * e_u
        self.deriv_state += self.dt * deriv
        return u


class ConstantController:
    """Fixed input, useful for open-loop scenarios and tests."""

    def __init__(self, u: np.ndarray):
        self.u = np.asarray(u, dtype=float)

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.u.copy()


# ---------------------------------------------------------------------------
# Disturbances.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubletSpec:
    """Two rectangular pulses summed on one input channel.

    Each pulse is the closed-interval indicator [start, start + width], so a
    shared endpoint adds both amplitudes at that single sample.
    """

    m: int
    channel: int
    amplitude1: float
    amplitude2: float
    width: float
    start1: float
    start2: float


def doublet(t: float, spec: DoubletSpec) -> np.ndarray:
    """Disturbance vector at time t for the given two-pulse description."""
    value = 0.0
    if spec.start1 <= t <= spec.start1 + spec.width:
        value += spec.amplitude1
    if spec.start2 <= t <= spec.start2 + spec.width:
        value += spec.amplitude2
    u = np.zeros(spec.m)
    u[spec.channel] = value
    return u
