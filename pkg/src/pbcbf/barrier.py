"""Barrier functions, their rates, and dual-barrier bookkeeping.

A barrier is a scalar field h with gradient c = dh/dx whose positive
super-level set is the safe region. Along a control-affine system the rate is
affine in the input,

    h_dot(x, u) = c(x) . (f(x) + G(x) u),

and the second rate is a quadratic form in u whose coefficients come from the
Jacobians of c, f and G. Opposed barrier pairs (antiparallel unit gradients,
as with an upper and lower limit on the same scalar) admit at most one
"active" barrier at a time: the one whose rate stays negative even under its
own stopping policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import MultipleActive, ZeroGradient
from .systems.base import AffineSystem, jacobian


@dataclass(frozen=True)
class Barrier:
    """Scalar safety field h with analytic gradient and raw boundary margin.

    ``margin`` is the untransformed boundary distance used for violation
    metrics (for example r - R when h also carries a braking term); it
    defaults to h itself.
    """

    name: str
    h: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    margin: Optional[Callable[[np.ndarray], float]] = None

    def raw_margin(self, x: np.ndarray) -> float:
        if self.margin is None:
            return float(self.h(x))
        return float(self.margin(x))


class ClassKappa:
    """Strictly increasing gain with alpha(0) = 0, extended to negative arguments."""

    def __call__(self, z: float) -> float:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class LinearKappa(ClassKappa):
    """alpha(z) = gamma * z with gamma > 0."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    def __call__(self, z: float) -> float:
        return self.gamma * z


def h_dot(barrier: Barrier, system: AffineSystem, x: np.ndarray, u: np.ndarray) -> float:
    """Barrier rate c(x) . (f(x) + G(x) u)."""
    return float(barrier.grad(x) @ system.dynamics(x, u))


@dataclass(frozen=True)
class HddotQuadraticForm:
    """Second barrier rate as h_ddot(x, u) = u'Qu + q.u + r0 at a fixed state."""

    Q: np.ndarray
    q: np.ndarray
    r0: float

    def evaluate(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.Q @ u + self.q @ u + self.r0)


def h_ddot_form(barrier: Barrier, system: AffineSystem, x: np.ndarray) -> HddotQuadraticForm:
    """Quadratic-in-u coefficients of the second barrier rate.

    The Jacobians of c, f and the input-map columns are taken by central
    finite differences (analytic overrides are possible by differentiating
    upstream and bypassing this helper, but the tensor bookkeeping is easy to
    get wrong by hand).
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(barrier.grad(x), dtype=float)
    f0 = np.asarray(system.f(x), dtype=float)
    G0 = np.asarray(system.G(x), dtype=float)
    Jc = jacobian(barrier.grad, x)
    Jf = jacobian(system.f, x)

    # dG[i, j, k] = d G[i, j] / d x[k]
    n, m = G0.shape
    dG = np.empty((n, m, n))
    for k in range(n):
        h = 1e-6 * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        dG[:, :, k] = (np.asarray(system.G(xp)) - np.asarray(system.G(xm))) / (2.0 * h)

    # c . (dG/dx (G u)) u  =  u' M u
    M = np.einsum("i,ijk,kl->jl", c, dG, G0)
    Q = G0.T @ Jc.T @ G0 + M
    q = f0 @ (Jc.T + Jc) @ G0 + c @ Jf @ G0 + np.einsum("i,ijk,k->j", c, dG, f0)
    r0 = float(f0 @ Jc.T @ f0 + c @ Jf @ f0)
    return HddotQuadraticForm(Q=Q, q=q, r0=r0)


def check_opposed_pair(
    b1: Barrier,
    b2: Barrier,
    samples: Iterable[np.ndarray],
    tol: float = 1e-9,
) -> bool:
    """True iff the unit gradients are antiparallel at every sample state."""
    checked = False
    for x in samples:
        c1 = np.asarray(b1.grad(x), dtype=float)
        c2 = np.asarray(b2.grad(x), dtype=float)
        n1 = float(np.linalg.norm(c1))
        n2 = float(np.linalg.norm(c2))
        if n1 < 1e-12 or n2 < 1e-12:
            raise ZeroGradient(
                f"vanishing gradient at sample {x} "
                f"({b1.name}: {n1:.3e}, {b2.name}: {n2:.3e})"
            )
        if np.max(np.abs(c1 / n1 + c2 / n2)) > tol:
            return False
        checked = True
    if not checked:
        raise ValueError("at least one sample state is required")
    return True


def evaluate_policies(
    barriers: Sequence[tuple[Barrier, object]],
    system: AffineSystem,
    x: np.ndarray,
    u_ref: Optional[np.ndarray] = None,
) -> list[tuple[np.ndarray, float]]:
    """Stopping input and resulting rate, (u0_i, h_dot_i), for each barrier."""
    out = []
    for b, policy in barriers:
        u0 = policy.u0(system, b, x, u_ref=u_ref)
        out.append((u0, h_dot(b, system, x, u0)))
    return out


def pick_active(rates: Sequence[float], names: Sequence[str]) -> Optional[int]:
    """Index of the single negative rate, None if all are nonnegative.

    A rate of exactly zero counts as inactive. Raises MultipleActive when two
    rates are negative at once, which an opposed pair cannot legitimately do
    and therefore signals a modeling bug.
    """
    active = [i for i, rate in enumerate(rates) if rate < 0.0]
    if len(active) > 1:
        detail = ", ".join(f"{names[i]}: {rates[i]:.3e}" for i in active)
        raise MultipleActive(f"multiple barriers active at once ({detail})")
    return active[0] if active else None


def select_active(
    barriers: Sequence[tuple[Barrier, object]],
    system: AffineSystem,
    x: np.ndarray,
    u_ref: Optional[np.ndarray] = None,
) -> Optional[int]:
    """Index of the barrier whose rate is negative under its own policy."""
    evals = evaluate_policies(barriers, system, x, u_ref=u_ref)
    return pick_active(
        [rate for _, rate in evals], [b.name for b, _ in barriers]
    )


# ---------------------------------------------------------------------------
# Built-in barrier definitions for the shipped models.
# ---------------------------------------------------------------------------

def radial_stop_barrier(R: float, mu: float) -> Barrier:
    """Keep-out-circle barrier for the polar double integrator.

    h = r - R - vr^2 / (2 mu). The quadratic term reserves braking distance
    for inbound radial speed; mu > 0 scales how much is reserved. The raw
    margin is r - R.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")

    def h(x):
        return x[0] - R - x[2] * x[2] / (2.0 * mu)

    def grad(x):
        return np.array([1.0, 0.0, -x[2] / mu, 0.0])

    return Barrier(
        name=f"radial_stop(R={R:g},mu={mu:g})",
        h=h,
        grad=grad,
        margin=lambda x: x[0] - R,
    )


def gap_barrier(z0: float) -> Barrier:
    """Constant minimum-gap barrier h = z - z0 for the cruise-control model.

    The rate z_dot does not depend on the input, so this barrier cannot drive
    a safety-filter row; it serves as the analytic stopping-margin oracle.
    """
    g = np.array([0.0, 1.0])

    def h(x):
        return x[1] - z0

    return Barrier(name=f"gap(z0={z0:g})", h=h, grad=lambda x: g)


def headway_barrier(a_s: float) -> Barrier:
    """Speed-scaled minimum gap h = z - a_s * v for the cruise-control model.

    Unlike the constant-gap form, the braking force enters the rate directly,
    so this barrier can be enforced by the filter. The raw margin is h itself.
    """
    if a_s <= 0.0:
        raise ValueError("a_s must be positive")
    g = np.array([-a_s, 1.0])

    def h(x):
        return x[1] - a_s * x[0]

    return Barrier(name=f"headway(a_s={a_s:g})", h=h, grad=lambda x: g)


def _alpha_gradient(x: np.ndarray) -> np.ndarray:
    U, W = x[0], x[1]
    v2 = U * U + W * W
    return np.array([-W / v2, U / v2, 0.0, 0.0])


def alpha_max_barrier(alpha_max: float) -> Barrier:
    """Upper angle-of-attack limit, h = alpha_max - alpha."""

    def h(x):
        return alpha_max - math.atan2(x[1], x[0])

    return Barrier(
        name=f"alpha_max({math.degrees(alpha_max):g}deg)",
        h=h,
        grad=lambda x: -_alpha_gradient(x),
    )


def alpha_min_barrier(alpha_min: float) -> Barrier:
    """Lower angle-of-attack limit, h = alpha - alpha_min."""

    def h(x):
        return math.atan2(x[1], x[0]) - alpha_min

    return Barrier(
        name=f"alpha_min({math.degrees(alpha_min):g}deg)",
        h=h,
        grad=_alpha_gradient,
    )
