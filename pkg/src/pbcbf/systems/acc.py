"""Adaptive-cruise-control longitudinal model.

State [v, z]: own speed and gap to a lead vehicle moving at constant speed
v_f. The wheel force F_w is the single input,

    m * dv/dt = F_w - F_r(v),      dz/dt = v_f - v,

with box force bounds equivalent to |dv/dt| <= a_max when the rolling
resistance is zero. F_r defaults to zero; any callable of v is accepted
(a polynomial in v being the usual choice).
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .base import AffineSystem, Box

STATE_NAMES = ("v", "z")
INPUT_NAMES = ("F_w",)


def polynomial_resistance(coeffs: Sequence[float]) -> Callable[[float], float]:
    """Rolling-resistance force c0 + c1 v + c2 v^2 + ... from coefficients."""
    c = np.asarray(coeffs, dtype=float)

    def f_r(v: float) -> float:
        return float(np.polyval(c[::-1], v))

    return f_r


def acc_system(
    m: float,
    v_f: float,
    a_max: float,
    f_resistance: Optional[Callable[[float], float]] = None,
) -> AffineSystem:
    """Cruise-control model with force bounds F_w in [-m*a_max, m*a_max]."""
    if m <= 0.0:
        raise ValueError("mass must be positive")
    if a_max <= 0.0:
        raise ValueError("a_max must be positive")
    fr = f_resistance if f_resistance is not None else (lambda v: 0.0)
    inv_m = 1.0 / m

    def f(x):
        v = x[0]
        out = np.empty(2)
        out[0] = -fr(v) * inv_m
        out[1] = v_f - v
        return out

    g_matrix = np.array([[inv_m], [0.0]])

    def G(x):
        return g_matrix

    def fused(x, u):
        v = x[0]
        out = np.empty(2)
        out[0] = (u[0] - fr(v)) * inv_m
        out[1] = v_f - v
        return out

    force = m * a_max
    return AffineSystem(
        name="acc",
        n=2,
        m=1,
        f=f,
        G=G,
        bounds=Box(u_min=[-force], u_max=[force]),
        state_names=STATE_NAMES,
        input_names=INPUT_NAMES,
        fused=fused,
    )
