"""Longitudinal rigid-body flight dynamics in control-affine form.

State [U, W, Q, theta]: body-axis forward and downward velocity (m/s), pitch
rate (rad/s), pitch attitude (rad). Inputs [delta_E, delta_th]: elevator angle
(rad) and throttle (percent, 0..100). Body axes are x forward, z down; the
inertial frame has z down as well, so gravity in body axes is
g * [-sin(theta), cos(theta)].

The aerodynamic force and moment are static-coefficient models in
zeta = [alpha, Mach, Q] plus alpha-rate and elevator contributions:

    force (body)  = -qbar * S * T_bs @ (c_F0 + C_Fi zeta + c_F_alpha_dot * alpha_dot
                                        + c_F_delta_E * delta_E)
    moment (body) =  qbar * S * c * (C_m0 + c_mi . zeta + C_m_delta_E * delta_E
                                     + C_m_alpha_dot * alpha_dot)

with qbar = rho ||v||^2 / 2, Mach = ||v|| / a, alpha from tan(alpha) = W / U,
alpha_dot = c' . [U_dot, W_dot] where c' = [-W, U] / ||v||^2, and T_bs the
rotation by alpha from stability to body axes. Because alpha_dot couples the
rates back into the forces, the model is assembled by moving those terms to
the left-hand side and solving the rate-coupling system

    [A_T   0  0]           [f_T + G_T u]
    [a_R'  1  0] @ x_dot = [f_R + g_R u]
    [0  0  0  1]           [Q          ]

for x_dot, which keeps the equations in the affine form f(x) + G(x) u.

Units of the coefficient blocks follow the model above literally: the alpha
column is per radian, the Mach column per unit Mach, and the Q column per
rad/s (rate coefficients already folded by c / (2 V_ref) where applicable).
The shipped trainer data set in scenarios/ is illustrative, calibrated to a
cruise trim near 10 deg angle of attack at 85.34 m/s, not traced to any
published aircraft.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import DomainError, SingularMassMatrix, TrimNotConverged
from .base import AffineSystem, Box

STATE_NAMES = ("U", "W", "Q", "theta")
INPUT_NAMES = ("delta_E", "delta_th")

#: Rate-coupling matrices with a condition estimate beyond this are rejected.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class AircraftParams:
    """Mass, geometry, aerodynamic coefficient blocks and environment.

    Angles are radians internally. ``c_F0`` stacks the static lift/drag pair,
    ``C_Fi`` their [alpha, Mach, Q] derivatives (2x3), ``c_mi`` the pitching
    moment derivatives (3,).
    """

    m: float
    Iy: float
    S: float
    c: float
    c_F0: np.ndarray
    C_Fi: np.ndarray
    c_F_alpha_dot: np.ndarray
    c_F_delta_E: np.ndarray
    C_m0: float
    c_mi: np.ndarray
    C_m_delta_E: float
    C_m_alpha_dot: float
    X_delta_th: float
    rho: float
    a: float
    g: float
    delta_E_min: float
    delta_E_max: float
    U_floor: float = 1.0

    def __post_init__(self):
        for name in ("c_F0", "C_Fi", "c_F_alpha_dot", "c_F_delta_E", "c_mi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("m", "Iy", "S", "c", "rho", "a"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.c_F0.shape != (2,):
            raise ValueError("c_F0 must have shape (2,)")
        if self.C_Fi.shape != (2, 3):
            raise ValueError("C_Fi must have shape (2, 3)")
        if self.c_F_alpha_dot.shape != (2,) or self.c_F_delta_E.shape != (2,):
            raise ValueError("c_F_alpha_dot and c_F_delta_E must have shape (2,)")
        if self.c_mi.shape != (3,):
            raise ValueError("c_mi must have shape (3,)")
        if self.delta_E_min > self.delta_E_max:
            raise ValueError("delta_E_min must not exceed delta_E_max")

    @classmethod
    def from_dict(cls, d: dict) -> "AircraftParams":
        """Build from a flat mapping with per-coefficient keys.

        Keys mirror the coefficient symbols ("C_L0", "C_D_alpha", "C_m_q",
        "X_delta_th", "rho", "a", "g", ...). Elevator limits are given in
        degrees as "delta_E_min_deg" / "delta_E_max_deg".
        """
        def need(key):
            if key not in d:
                raise KeyError(f"aircraft parameter file is missing key '{key}'")
            return d[key]

        deg = math.pi / 180.0
        return cls(
            m=float(need("m")),
            Iy=float(need("Iy")),
            S=float(need("S")),
            c=float(need("c")),
            c_F0=np.array([need("C_L0"), need("C_D0")], dtype=float),
            C_Fi=np.array(
                [
                    [need("C_L_alpha"), need("C_L_M"), need("C_L_q")],
                    [need("C_D_alpha"), need("C_D_M"), need("C_D_q")],
                ],
                dtype=float,
            ),
            c_F_alpha_dot=np.array(
                [need("C_L_alpha_dot"), need("C_D_alpha_dot")], dtype=float
            ),
            c_F_delta_E=np.array([need("C_L_delta_E"), need("C_D_delta_E")], dtype=float),
            C_m0=float(need("C_m0")),
            c_mi=np.array(
                [need("C_m_alpha"), need("C_m_M"), need("C_m_q")], dtype=float
            ),
            C_m_delta_E=float(need("C_m_delta_E")),
            C_m_alpha_dot=float(need("C_m_alpha_dot")),
            X_delta_th=float(need("X_delta_th")),
            rho=float(need("rho")),
            a=float(need("a")),
            g=float(need("g")),
            delta_E_min=float(need("delta_E_min_deg")) * deg,
            delta_E_max=float(need("delta_E_max_deg")) * deg,
            U_floor=float(d.get("U_floor", 1.0)),
        )

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "AircraftParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def angle_of_attack(x: np.ndarray) -> float:
    """alpha with tan(alpha) = W / U."""
    return math.atan2(x[1], x[0])


def _assembled(params: AircraftParams, x: np.ndarray):
    """Shared per-state quantities: (A_T terms, f_T, G_T, f_R, g_R, a_R)."""
    U, W, Q, theta = x
    if U <= params.U_floor:
        raise DomainError(
            f"forward speed U={U:.6g} m/s at or below the floor {params.U_floor:.6g}"
        )
    v2 = U * U + W * W
    v = math.sqrt(v2)
    alpha = math.atan2(W, U)
    mach = v / params.a
    qbar = 0.5 * params.rho * v2
    ca, sa = math.cos(alpha), math.sin(alpha)
    st, ct = math.sin(theta), math.cos(theta)

    qS_m = qbar * params.S / params.m
    qSc_Iy = qbar * params.S * params.c / params.Iy

    # Static aero in stability axes, rotated to body axes.
    zeta = np.array([alpha, mach, Q])
    coeff_static = params.c_F0 + params.C_Fi @ zeta
    fs0, fs1 = coeff_static
    aero_body = np.array([ca * fs0 - sa * fs1, sa * fs0 + ca * fs1])

    f_T = np.array(
        [-params.g * st - Q * W - qS_m * aero_body[0],
         params.g * ct + Q * U - qS_m * aero_body[1]]
    )

    e0, e1 = params.c_F_delta_E
    G_T = np.array(
        [
            [-qS_m * (ca * e0 - sa * e1), params.X_delta_th],
            [-qS_m * (sa * e0 + ca * e1), 0.0],
        ]
    )

    # alpha-rate coupling rows.
    cp = np.array([-W, U]) / v2
    d0, d1 = params.c_F_alpha_dot
    col = np.array([ca * d0 - sa * d1, sa * d0 + ca * d1]) * qS_m
    A_T = np.array(
        [[1.0 + col[0] * cp[0], col[0] * cp[1]],
         [col[1] * cp[0], 1.0 + col[1] * cp[1]]]
    )

    f_R = qSc_Iy * (params.C_m0 + params.c_mi @ zeta)
    g_R = np.array([qSc_Iy * params.C_m_delta_E, 0.0])
    a_R = -qSc_Iy * params.C_m_alpha_dot * cp
    return A_T, f_T, G_T, f_R, g_R, a_R


def _solve_2x2(A_T: np.ndarray, rhs0: float, rhs1: float) -> tuple[float, float, float]:
    """Solve A_T v = rhs for the velocity rates; returns (v0, v1, det)."""
    a00, a01 = A_T[0]
    a10, a11 = A_T[1]
    det = a00 * a11 - a01 * a10
    # For a 2x2 matrix ||A||_F^2 / |det| equals cond + 1/cond in the 2-norm,
    # so it is the condition number up to vanishing error where it matters.
    norm2 = a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11
    if det == 0.0 or norm2 / abs(det) > CONDITION_LIMIT:
        raise SingularMassMatrix(
            f"rate-coupling matrix is numerically singular (condition estimate "
            f"{norm2 / abs(det) if det else math.inf:.3g})"
        )
    return (a11 * rhs0 - a01 * rhs1) / det, (-a10 * rhs0 + a00 * rhs1) / det, det


def aircraft_longitudinal(params: AircraftParams) -> AffineSystem:
    """Assemble the longitudinal model as an affine system."""

    def fused(x, u):
        A_T, f_T, G_T, f_R, g_R, a_R = _assembled(params, x)
        r0 = f_T[0] + G_T[0, 0] * u[0] + G_T[0, 1] * u[1]
        r1 = f_T[1] + G_T[1, 0] * u[0] + G_T[1, 1] * u[1]
        v0, v1, _ = _solve_2x2(A_T, r0, r1)
        qdot = f_R + g_R[0] * u[0] + g_R[1] * u[1] - (a_R[0] * v0 + a_R[1] * v1)
        return np.array([v0, v1, qdot, x[2]])

    def f(x):
        A_T, f_T, _, f_R, _, a_R = _assembled(params, x)
        v0, v1, _ = _solve_2x2(A_T, f_T[0], f_T[1])
        qdot = f_R - (a_R[0] * v0 + a_R[1] * v1)
        return np.array([v0, v1, qdot, x[2]])

    def G(x):
        A_T, _, G_T, _, g_R, a_R = _assembled(params, x)
        out = np.zeros((4, 2))
        for j in range(2):
            v0, v1, _ = _solve_2x2(A_T, G_T[0, j], G_T[1, j])
            out[0, j] = v0
            out[1, j] = v1
            out[2, j] = g_R[j] - (a_R[0] * v0 + a_R[1] * v1)
        return out

    return AffineSystem(
        name="aircraft_longitudinal",
        n=4,
        m=2,
        f=f,
        G=G,
        bounds=Box(
            u_min=[params.delta_E_min, 0.0],
            u_max=[params.delta_E_max, 100.0],
        ),
        state_names=STATE_NAMES,
        input_names=INPUT_NAMES,
        fused=fused,
    )


def trim_state(V0: float, alpha: float, gamma_path: float) -> np.ndarray:
    """State [U, W, 0, theta] on a steady path: theta = alpha + gamma_path."""
    return np.array(
        [V0 * math.cos(alpha), V0 * math.sin(alpha), 0.0, alpha + gamma_path]
    )


def trim_solve(
    params: AircraftParams,
    V0: float,
    gamma_path: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Steady-flight equilibrium at speed ``V0`` and path angle ``gamma_path``.

    Newton iteration over (alpha, delta_E, delta_th) with the constraints
    ||[U, W]|| = V0, Q = 0 and theta = alpha + gamma_path folded in. Returns
    (x_trim, u_trim) with residual norm below ``tol``; raises TrimNotConverged
    (reporting the final residual) if the iteration stalls or the equilibrium
    input falls outside the actuator bounds.
    """
    if V0 <= 0.0:
        raise ValueError("V0 must be positive")
    system = aircraft_longitudinal(params)

    def residual(z):
        alpha, d_e, d_th = z
        x = trim_state(V0, alpha, gamma_path)
        try:
            r = system.dynamics(x, np.array([d_e, d_th]))
        except DomainError:
            return None
        if not np.all(np.isfinite(r)):
            return None
        return r[:3]

    z = np.array([0.05, 0.0, 50.0])
    res = residual(z)
    if res is None:
        raise TrimNotConverged("trim residual undefined at the initial guess")
    best_norm = float(np.linalg.norm(res))

    steps = np.array([1e-7, 1e-7, 1e-5])
    for _ in range(max_iter):
        if best_norm < tol:
            break
        J = np.empty((3, 3))
        ok = True
        for i in range(3):
            zp, zm = z.copy(), z.copy()
            zp[i] += steps[i]
            zm[i] -= steps[i]
            rp, rm = residual(zp), residual(zm)
            if rp is None or rm is None:
                ok = False
                break
            J[:, i] = (rp - rm) / (2.0 * steps[i])
        if not ok:
            raise TrimNotConverged(
                f"trim residual undefined near iterate {z}", residual=best_norm
            )
        try:
            delta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            raise TrimNotConverged(
                f"singular trim Jacobian at iterate {z}", residual=best_norm
            ) from None
        # Backtracking keeps the iteration inside the model domain.
        scale = 1.0
        improved = False
        for _ in range(30):
            z_new = z + scale * delta
            r_new = residual(z_new)
            if r_new is not None:
                n_new = float(np.linalg.norm(r_new))
                if n_new < best_norm:
                    z, res, best_norm = z_new, r_new, n_new
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            raise TrimNotConverged(
                f"trim iteration stalled with residual {best_norm:.3e}",
                residual=best_norm,
            )
    if best_norm >= tol:
        raise TrimNotConverged(
            f"trim did not converge in {max_iter} iterations "
            f"(residual {best_norm:.3e})",
            residual=best_norm,
        )
    x_trim = trim_state(V0, z[0], gamma_path)
    u_trim = np.array([z[1], z[2]])
    if not system.bounds.contains(u_trim):
        raise TrimNotConverged(
            f"trim input {u_trim} violates the actuator bounds", residual=best_norm
        )
    return x_trim, u_trim
