"""Control-affine system abstraction with hard input bounds.

A system is the pair (f, G) of drift and input map, x_dot = f(x) + G(x) u,
together with the admissible input set. Systems are immutable after
construction and evaluation is pure, so instances may be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from ..errors import NumericalError


@dataclass(frozen=True)
class Box:
    """Componentwise input bounds u_min <= u <= u_max."""

    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_min", np.atleast_1d(np.asarray(self.u_min, dtype=float)))
        object.__setattr__(self, "u_max", np.atleast_1d(np.asarray(self.u_max, dtype=float)))
        if self.u_min.shape != self.u_max.shape:
            raise ValueError("u_min and u_max must have the same shape")
        if np.any(self.u_min > self.u_max):
            raise ValueError("box bounds require u_min <= u_max componentwise")

    @property
    def m(self) -> int:
        return self.u_min.size

    def contains(self, u: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(u >= self.u_min - tol) and np.all(u <= self.u_max + tol))

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_min, self.u_max)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.u_min + self.u_max)


@dataclass(frozen=True)
class NormBall:
    """Euclidean input bound ||u||_2 <= u_max in m dimensions."""

    u_max: float
    m: int

    def __post_init__(self):
        if self.u_max <= 0.0:
            raise ValueError("norm-ball radius must be positive")
        if self.m < 1:
            raise ValueError("input dimension must be at least 1")

    def bounding_box(self) -> Box:
        r = self.u_max
        return Box(u_min=-r * np.ones(self.m), u_max=r * np.ones(self.m))

    def contains(self, u: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(u) <= self.u_max + tol)

    def clamp(self, u: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(u))
        if norm <= self.u_max:
            return np.asarray(u, dtype=float)
        return np.asarray(u, dtype=float) * (self.u_max / norm)

    def midpoint(self) -> np.ndarray:
        return np.zeros(self.m)


InputBounds = Union[Box, NormBall]


@dataclass(frozen=True)
class AffineSystem:
    """Dynamics x_dot = f(x) + G(x) u with declared dimensions and bounds.

    ``fused`` is an optional fast path computing f(x) + G(x) u in one call;
    when present it must agree with the separate f and G evaluations (the
    affinity property test exercises this).
    """

    name: str
    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    bounds: InputBounds
    state_names: tuple[str, ...]
    input_names: tuple[str, ...]
    fused: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if len(self.state_names) != self.n or len(self.input_names) != self.m:
            raise ValueError("state/input name lists must match the declared dimensions")

    def dynamics(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Evaluate x_dot = f(x) + G(x) u."""
        if self.fused is not None:
            return self.fused(x, u)
        return self.f(x) + self.G(x) @ u

    def derivative_with_input(self, u: np.ndarray) -> Callable[[np.ndarray, float], np.ndarray]:
        """Closed-loop derivative field with the input held constant (zero-order hold)."""
        def deriv(x, t):
            return self.dynamics(x, u)
        return deriv


def linearize(
    system: AffineSystem,
    x0: np.ndarray,
    u0: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Local linear model (A, B) at ``x0`` by central finite differences.

    A is the Jacobian of f(x) + G(x) u0 with the input held at ``u0``
    (zero input by default, which yields the pure drift Jacobian) using a
    per-component step 1e-6 * max(1, |x0_i|); B is G(x0) evaluated exactly.
    """
    x0 = np.asarray(x0, dtype=float)
    if u0 is None:
        u0 = np.zeros(system.m)
    else:
        u0 = np.asarray(u0, dtype=float)

    def held(x):
        return system.dynamics(x, u0)

    A = np.empty((system.n, system.n))
    for i in range(system.n):
        h = 1e-6 * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        A[:, i] = (held(xp) - held(xm)) / (2.0 * h)
    B = np.asarray(system.G(x0), dtype=float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise NumericalError(f"non-finite difference quotient while linearizing at x0={x0}")
    return A, B


def jacobian(fn: Callable[[np.ndarray], np.ndarray], x0: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued map, same stepping as linearize."""
    x0 = np.asarray(x0, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(x0), dtype=float))
    n = x0.size
    J = np.empty((f0.size, n))
    for i in range(n):
        h = 1e-6 * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(fn(xp), dtype=float) - np.asarray(fn(xm), dtype=float)) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise NumericalError(f"non-finite difference quotient in Jacobian at x0={x0}")
    return J
