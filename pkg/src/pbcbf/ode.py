"""Fixed-step integration and event-terminated propagation.

The classical fourth-order Runge-Kutta scheme with a fixed step keeps every
propagation deterministic and reproducible, which matters because the stopping
margin of the prediction-based barrier is itself defined through propagation.
Stop events are resolved at step granularity: no bisection refinement of the
crossing is attempted, so the final partial step beyond the detected node is
never evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import HorizonExceeded, NumericalError

DerivativeFn = Callable[[np.ndarray, float], np.ndarray]
StopFn = Callable[[float, np.ndarray], bool]

#: Default integration step for stopping-margin predictions, seconds.
DEFAULT_PREDICTION_DT = 1e-3


@dataclass
class Trace:
    """Time-indexed record of a propagated trajectory.

    times are uniformly spaced (step within 1e-12); states and inputs carry
    one row per time sample. annotations holds named per-step scalar channels
    (barrier values, stopping margins, filter activity and the like).
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    annotations: dict[str, np.ndarray] = field(default_factory=dict)
    stop_reached: bool = True

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        if self.times[0] < 0.0:
            raise ValueError("trace must start at a nonnegative time")
        if len(self.states) != len(self.times) or len(self.inputs) != len(self.times):
            raise ValueError("states and inputs must have one row per time sample")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(np.abs(steps - steps[0]) > 1e-12):
                raise ValueError("time grid is not uniform")
        for name, channel in self.annotations.items():
            if len(channel) != len(self.times):
                raise ValueError(f"annotation channel '{name}' has wrong length")


def _raise_nonfinite(stages, t: float) -> None:
    for name, k in stages:
        k = np.asarray(k, dtype=float)
        bad = np.flatnonzero(~np.isfinite(k))
        if bad.size:
            raise NumericalError(
                f"non-finite derivative in component(s) {bad.tolist()} "
                f"(stage {name}, t={t:.6g})"
            )
    raise NumericalError(f"non-finite state update at t={t:.6g}")


def rk4_step(derivative: DerivativeFn, x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """Advance ``x`` by one classical RK4 step of size ``dt``.

    ``derivative(x, t)`` must return the state rate. Raises NumericalError,
    identifying the offending component, if any stage evaluates non-finite.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    half = 0.5 * dt
    k1 = derivative(x, t)
    k2 = derivative(x + half * k1, t + half)
    k3 = derivative(x + half * k2, t + half)
    k4 = derivative(x + dt * k3, t + dt)
    out = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    # Summation funnels any NaN or infinity into a non-finite total, which is
    # much cheaper on the hot path than an elementwise check.
    if not math.isfinite(float(out.sum())):
        _raise_nonfinite([("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)], t)
    return out


def propagate_until(
    derivative: DerivativeFn,
    x0: np.ndarray,
    stop: StopFn,
    dt: float,
    t_max: float,
    t0: float = 0.0,
    input_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
) -> Trace:
    """Integrate until ``stop(t, x)`` first holds or the horizon runs out.

    The stop predicate is evaluated once per node, in time order, starting at
    the initial state; the returned trace ends at the first node where it
    holds. If the predicate never fires before ``t_max``, HorizonExceeded is
    raised (carrying the last time and state reached). ``input_fn`` optionally
    records an input vector per node; otherwise the trace has zero-width
    inputs.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_max <= 0.0:
        raise ValueError(f"t_max must be positive, got {t_max}")

    x = np.asarray(x0, dtype=float)
    times = [t0]
    states = [x]
    inputs = [input_fn(x, t0)] if input_fn is not None else None
    append_t = times.append
    append_x = states.append
    horizon = t0 + t_max - 1e-12

    k = 0
    t = t0
    while not stop(t, x):
        if t >= horizon:
            raise HorizonExceeded(
                f"stop condition not reached within t_max={t_max:.6g} s",
                t_max=t_max,
                last_time=t,
                last_state=x,
            )
        x = rk4_step(derivative, x, t, dt)
        k += 1
        t = t0 + k * dt
        append_t(t)
        append_x(x)
        if inputs is not None:
            inputs.append(input_fn(x, t))

    n_nodes = len(times)
    if inputs is None:
        input_arr = np.zeros((n_nodes, 0))
    else:
        input_arr = np.asarray(inputs, dtype=float)
    return Trace(
        times=np.asarray(times, dtype=float),
        states=np.asarray(states, dtype=float),
        inputs=input_arr,
        stop_reached=True,
    )
