"""Stopping-margin prediction under near-time-optimal policies.

The stopping margin of a barrier at a state x is the total change of h
accumulated while a bounded stopping input u0 drives the barrier rate from
negative up to zero:

    delta_h(x) = integral of h_dot(x(tau), u0(x(tau))) from t to T,
    with h_dot(T) = 0, h_dot < 0 before T     (zero when h_dot(x, u0) >= 0).

T is found by forward propagation, never in closed form. Three policy
families are provided: a bang-bang law driven by the sign of a linearized
rate gradient, the exact gradient direction on a norm-ball input set, and an
exact quadratic-program maximizer of the second rate over a box.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .barrier import Barrier, HddotQuadraticForm, h_ddot_form, h_dot
from .errors import (
    HorizonExceeded,
    PolicyFailure,
    UnsupportedDimension,
    ZeroGradientWarning,
)
from .ode import DEFAULT_PREDICTION_DT, propagate_until
from .systems.base import AffineSystem, Box, NormBall, linearize

#: Horizon after which a stopping policy is declared failed, seconds.
DEFAULT_T_MAX = 60.0


@dataclass(frozen=True)
class PredictionResult:
    """Outcome of one stopping-margin prediction.

    delta_h <= 0 always, with delta_h = 0 exactly when the initial rate was
    already nonnegative; T is the propagation time to the detected stop
    (0 in that same case); stop_state is the state at the stop node.
    """

    delta_h: float
    T: float
    stop_state: np.ndarray
    steps: int


# ---------------------------------------------------------------------------
# Stopping-input laws.
# ---------------------------------------------------------------------------

def bang_bang_u0(
    c: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    bounds: Box,
    gradient_source: str = "CAB",
    neutral: Optional[np.ndarray] = None,
    zero_tol: float = 0.0,
) -> np.ndarray:
    """Bang-bang stopping input from the sign of a linearized rate gradient.

    The per-channel gradient is (c'AB)_i for gradient_source "CAB" or (c'B)_i
    for "CB". Channels with a positive gradient go to their upper bound,
    negative to the lower bound, and channels whose gradient magnitude is at
    most ``zero_tol`` are held at the neutral value (box midpoint when not
    given): an input with no leverage on the rate is left alone.
    """
    c = np.asarray(c, dtype=float)
    if gradient_source == "CAB":
        g = c @ A @ B
    elif gradient_source == "CB":
        g = c @ B
    else:
        raise ValueError(f"unknown gradient_source '{gradient_source}'")
    if neutral is None:
        neutral = bounds.midpoint()
    u = np.array(neutral, dtype=float, copy=True)
    hi = g > zero_tol
    lo = g < -zero_tol
    u[hi] = bounds.u_max[hi]
    u[lo] = bounds.u_min[lo]
    return u


def normball_u0(c: np.ndarray, B: np.ndarray, u_max: float) -> np.ndarray:
    """Rate-gradient direction scaled to the norm-ball radius.

    u0 = u_max * B'c / ||B'c||, the exact maximizer of the linear rate term
    over the ball. A vanishing gradient (||B'c|| <= 1e-12) yields zero input
    and a ZeroGradientWarning rather than an error: the rate is then
    insensitive to the input and any admissible choice is equivalent.
    """
    d = np.asarray(c, dtype=float) @ np.asarray(B, dtype=float)
    norm = math.sqrt(float(d @ d))
    if norm <= 1e-12:
        warnings.warn(
            "input-map gradient B'c vanished; stopping input set to zero",
            ZeroGradientWarning,
            stacklevel=2,
        )
        return np.zeros(d.size)
    return (u_max / norm) * d


def qp_maximal_u0(form: HddotQuadraticForm, bounds: Box) -> np.ndarray:
    """Exact maximizer of u'Qu + q.u over a box, for up to three inputs.

    Every candidate with each coordinate either fixed at a bound or
    stationary in the free directions is enumerated (3^m patterns), which
    covers all face-critical points of a possibly indefinite quadratic; the
    best feasible candidate is returned. Ties break toward the first pattern
    in (upper, lower, free) order, so a symmetric 1-D problem returns the
    upper bound.
    """
    m = bounds.m
    if m > 3:
        raise UnsupportedDimension(f"exact box maximization supports m <= 3, got {m}")
    Qs = form.Q + form.Q.T
    best_u = None
    best_val = -np.inf
    for pattern in itertools.product(("hi", "lo", "free"), repeat=m):
        u = np.empty(m)
        free = [i for i, p in enumerate(pattern) if p == "free"]
        for i, p in enumerate(pattern):
            if p == "hi":
                u[i] = bounds.u_max[i]
            elif p == "lo":
                u[i] = bounds.u_min[i]
        if free:
            fixed = [i for i in range(m) if i not in free]
            rhs = -(form.q[free] + (Qs[np.ix_(free, fixed)] @ u[fixed] if fixed else 0.0))
            try:
                u_free = np.linalg.solve(Qs[np.ix_(free, free)], np.atleast_1d(rhs))
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(u_free)):
                continue
            u[free] = u_free
            if np.any(u[free] < bounds.u_min[free] - 1e-12) or np.any(
                u[free] > bounds.u_max[free] + 1e-12
            ):
                continue
            u[free] = np.clip(u[free], bounds.u_min[free], bounds.u_max[free])
        val = float(u @ form.Q @ u + form.q @ u)
        if val > best_val:
            best_val = val
            best_u = u.copy()
    return best_u


# ---------------------------------------------------------------------------
# Policy objects used by the filter and the scenario runner.
# ---------------------------------------------------------------------------

class PredictionPolicy:
    """Interface: map a state to an admissible stopping input.

    ``u_ref`` optionally carries the controller output at filter time so a
    policy can hold a no-leverage channel at its current value.
    """

    def u0(
        self,
        system: AffineSystem,
        barrier: Barrier,
        x: np.ndarray,
        u_ref: Optional[np.ndarray] = None,
    ) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def prediction_fn(
        self,
        system: AffineSystem,
        barrier: Barrier,
        u_ref: Optional[np.ndarray] = None,
    ) -> Callable[[np.ndarray], np.ndarray]:
        """State-to-input map specialized for one prediction.

        The default simply binds ``u0``; policies whose output is constant
        over a prediction override this to avoid re-deriving it at every
        step of the propagation.
        """
        return lambda x: self.u0(system, barrier, x, u_ref=u_ref)


class BangBangPolicy(PredictionPolicy):
    """Bang-bang law on the sign of c'AB (or c'B) with box bounds.

    With ``freeze_at=(x_lin, u_lin)`` the gradient is computed once from the
    linearization at that point (the usual choice is an equilibrium) and
    reused for every prediction step; otherwise the model is relinearized at
    each queried state. ``neutral`` may be a vector, None (box midpoint), or
    the string "hold" to pin zero-gradient channels at the filter-time
    controller output.
    """

    def __init__(
        self,
        gradient_source: str = "CAB",
        neutral=None,
        zero_tol_rel: float = 0.0,
        freeze_at: Optional[tuple[np.ndarray, np.ndarray]] = None,
    ):
        if gradient_source not in ("CAB", "CB"):
            raise ValueError(f"unknown gradient_source '{gradient_source}'")
        self.gradient_source = gradient_source
        self.neutral = neutral
        self.zero_tol_rel = zero_tol_rel
        self.freeze_at = freeze_at
        self._frozen: Optional[tuple[int, int, np.ndarray]] = None

    def _gradient(self, system: AffineSystem, barrier: Barrier, x: np.ndarray) -> np.ndarray:
        if self.freeze_at is not None:
            key = (id(system), id(barrier))
            if self._frozen is not None and self._frozen[:2] == key:
                return self._frozen[2]
            x_lin, u_lin = self.freeze_at
            A, B = linearize(system, x_lin, u_lin)
            c = barrier.grad(x_lin)
            g = c @ A @ B if self.gradient_source == "CAB" else c @ B
            self._frozen = (key[0], key[1], g)
            return g
        A, B = linearize(system, x)
        c = barrier.grad(x)
        return c @ A @ B if self.gradient_source == "CAB" else c @ B

    def _neutral_vector(self, bounds: Box, u_ref) -> np.ndarray:
        if isinstance(self.neutral, str) and self.neutral == "hold":
            if u_ref is None:
                return bounds.midpoint()
            return bounds.clamp(np.asarray(u_ref, dtype=float))
        if self.neutral is None:
            return bounds.midpoint()
        return np.asarray(self.neutral, dtype=float)

    def u0(self, system, barrier, x, u_ref=None):
        bounds = system.bounds
        if not isinstance(bounds, Box):
            raise TypeError("bang-bang stopping requires box input bounds")
        g = self._gradient(system, barrier, x)
        zero_tol = self.zero_tol_rel * float(np.max(np.abs(g))) if g.size else 0.0
        u = self._neutral_vector(bounds, u_ref).copy()
        hi = g > zero_tol
        lo = g < -zero_tol
        u[hi] = bounds.u_max[hi]
        u[lo] = bounds.u_min[lo]
        return u

    def prediction_fn(self, system, barrier, u_ref=None):
        if self.freeze_at is None:
            return super().prediction_fn(system, barrier, u_ref)
        # Frozen gradient and fixed neutral make the stopping input a
        # constant for the whole prediction.
        u_const = self.u0(system, barrier, self.freeze_at[0], u_ref=u_ref)
        return lambda x: u_const


class NormBallGradientPolicy(PredictionPolicy):
    """Exact rate-gradient direction for a norm-ball input set, B = G(x)."""

    def u0(self, system, barrier, x, u_ref=None):
        bounds = system.bounds
        if not isinstance(bounds, NormBall):
            raise TypeError("gradient-direction stopping requires norm-ball bounds")
        return normball_u0(barrier.grad(x), system.G(x), bounds.u_max)

    def prediction_fn(self, system, barrier, u_ref=None):
        bounds = system.bounds
        if not isinstance(bounds, NormBall):
            raise TypeError("gradient-direction stopping requires norm-ball bounds")
        u_max = bounds.u_max
        grad = barrier.grad
        G = system.G
        return lambda x: normball_u0(grad(x), G(x), u_max)


class QpMaximalPolicy(PredictionPolicy):
    """Pointwise maximizer of the second barrier rate over box bounds."""

    def u0(self, system, barrier, x, u_ref=None):
        bounds = system.bounds
        if not isinstance(bounds, Box):
            raise TypeError("quadratic-program stopping requires box input bounds")
        form = h_ddot_form(barrier, system, x)
        return qp_maximal_u0(form, bounds)


class CustomPolicy(PredictionPolicy):
    """Wrap an arbitrary state-feedback map as a stopping policy."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def u0(self, system, barrier, x, u_ref=None):
        return np.asarray(self.fn(x), dtype=float)


# ---------------------------------------------------------------------------
# The stopping-margin integral.
# ---------------------------------------------------------------------------

def compute_delta_h(
    system: AffineSystem,
    barrier: Barrier,
    policy: PredictionPolicy,
    x: np.ndarray,
    dt: float = DEFAULT_PREDICTION_DT,
    t_max: float = DEFAULT_T_MAX,
    u_ref: Optional[np.ndarray] = None,
) -> PredictionResult:
    """Stopping margin by forward propagation under the policy.

    If the rate at ``x`` under the stopping input is already nonnegative the
    margin is zero. Otherwise the closed loop x_dot = f + G u0(x) is
    propagated (the stopping input is refreshed once per step and held across
    the stage evaluations) until the rate first reaches zero at step
    granularity, and the margin is the left-endpoint Riemann sum of the rate
    over the integrated steps; no sub-step refinement of the crossing is
    attempted, so the result underestimates the true margin by at most one
    step's rate magnitude. A horizon overrun means the chosen policy does not
    null the rate from this state and raises PolicyFailure.
    """
    x = np.asarray(x, dtype=float)
    rates: list[float] = []
    held_u0: list[Optional[np.ndarray]] = [None]
    u0_of = policy.prediction_fn(system, barrier, u_ref=u_ref)
    grad = barrier.grad
    dynamics = system.dynamics
    record = rates.append

    # The stop predicate runs once per node in time order, so it doubles as
    # the place where the stopping input is refreshed and the rate recorded.
    def stop(t, xs):
        u0 = u0_of(xs)
        held_u0[0] = u0
        rate = float(grad(xs) @ dynamics(xs, u0))
        record(rate)
        return rate >= 0.0

    def deriv(xs, t):
        return dynamics(xs, held_u0[0])

    try:
        trace = propagate_until(deriv, x, stop, dt=dt, t_max=t_max)
    except HorizonExceeded as exc:
        raise PolicyFailure(
            f"stopping policy for '{barrier.name}' did not null the rate within "
            f"{t_max:.6g} s (last rate {rates[-1]:.3e})"
        ) from exc

    delta_h = dt * float(np.sum(rates[:-1]))
    return PredictionResult(
        delta_h=delta_h,
        T=float(trace.times[-1] - trace.times[0]),
        stop_state=trace.states[-1],
        steps=len(trace) - 1,
    )
