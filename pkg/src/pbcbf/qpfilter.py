"""Minimal-modification safety filter.

At every step the filter solves

    min  (1/2) du' H du
    s.t. a . du >= b          (barrier row, when a barrier is active)
         u_min - u <= du <= u_max - u

and applies u + du. The barrier row comes in two flavors. The base row is the
plain barrier condition h_dot(x, u + du) + kappa(h) >= 0. The prediction-based
row compares the applied input against the stopping input u0 instead,

    c'G(x) (u + du - u0) + kappa(h + delta_h) >= 0,

which no longer involves the drift term c'f and is therefore always satisfied
by du = u0 - u whenever h + delta_h > 0: the filter stays feasible under the
hard input bounds by construction. Rows are imposed non-strictly with zero
slack; positivity of the gain recovers the strict margin.

The solver enumerates active sets exactly, which is cheap and exact for the
one-to-three input channels these models have.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .barrier import Barrier, ClassKappa, LinearKappa, evaluate_policies, h_dot, pick_active
from .errors import Infeasible, UnsupportedDimension
from .ode import DEFAULT_PREDICTION_DT
from .predictor import DEFAULT_T_MAX, PredictionPolicy, PredictionResult, compute_delta_h
from .systems.base import AffineSystem, Box, NormBall

log = logging.getLogger(__name__)

MODE_NONE = "none"
MODE_BASE = "base"
MODE_PB = "pb"
MODES = (MODE_NONE, MODE_BASE, MODE_PB)

#: qp_status codes recorded in traces.
QP_INACTIVE = 0   # no barrier row imposed (or filtering disabled)
QP_SOLVED = 1     # QP solved with the barrier row
QP_RELAXED = 2    # base-mode row was infeasible: row dropped, input clamped

FEAS_TOL = 1e-9
BIND_TOL = 1e-9


@dataclass(frozen=True)
class FilterConfig:
    """Filter mode, gain, objective weight and prediction stepping."""

    mode: str = MODE_PB
    kappa: ClassKappa = field(default_factory=lambda: LinearKappa(1.0))
    H: Optional[np.ndarray] = None
    dt_prediction: float = DEFAULT_PREDICTION_DT
    t_max_prediction: float = DEFAULT_T_MAX

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.dt_prediction <= 0.0 or self.t_max_prediction <= 0.0:
            raise ValueError("prediction stepping must be positive")
        if self.H is not None:
            H = np.asarray(self.H, dtype=float)
            if H.ndim != 2 or H.shape[0] != H.shape[1]:
                raise ValueError("H must be a square matrix")
            if np.max(np.abs(H - H.T)) > 1e-12:
                raise ValueError("H must be symmetric (within 1e-12)")
            if np.min(np.linalg.eigvalsh(H)) <= 0.0:
                raise ValueError("H must be positive definite")
            object.__setattr__(self, "H", H)

    def weight(self, m: int) -> np.ndarray:
        if self.H is None:
            return np.eye(m)
        if self.H.shape[0] != m:
            raise ValueError(f"H is {self.H.shape[0]}x{self.H.shape[0]}, expected {m}x{m}")
        return self.H


@dataclass
class QpProblem:
    """min (1/2) du'H du subject to rows a.du >= b and box lo <= du <= hi."""

    H: np.ndarray
    rows: list[tuple[np.ndarray, float]]
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        if np.any(self.box_lo > self.box_hi):
            raise ValueError("empty box: lower bound exceeds upper bound")

    def all_constraints(self) -> tuple[np.ndarray, np.ndarray]:
        """Stack every constraint as A du >= b (rows then box faces)."""
        m = self.H.shape[0]
        eye = np.eye(m)
        a_list = [a for a, _ in self.rows]
        b_list = [b for _, b in self.rows]
        for i in range(m):
            a_list.append(eye[i])
            b_list.append(self.box_lo[i])
            a_list.append(-eye[i])
            b_list.append(-self.box_hi[i])
        return np.asarray(a_list, dtype=float), np.asarray(b_list, dtype=float)

    def is_feasible(self, du: np.ndarray, tol: float = FEAS_TOL) -> bool:
        A, b = self.all_constraints()
        return bool(np.all(A @ du - b >= -tol))


def solve_small_qp(problem: QpProblem) -> np.ndarray:
    """Exact active-set enumeration for m <= 3.

    Every subset of at most m constraints is treated as the active set; the
    equality-constrained KKT system is solved, and candidates that are primal
    feasible with nonnegative multipliers compete on the objective. This
    enumerates every KKT point of the strictly convex program, so the best
    candidate is the exact optimum. Raises Infeasible when no candidate
    satisfies all constraints.
    """
    H = problem.H
    m = H.shape[0]
    if m > 3:
        raise UnsupportedDimension(f"exact QP enumeration supports m <= 3, got {m}")
    A, b = problem.all_constraints()
    n_con = len(b)

    # The objective's unconstrained minimum is du = 0; when it is feasible it
    # is the exact optimum and the enumeration below is unnecessary.
    if np.all(b <= FEAS_TOL):
        return np.zeros(m)

    best_du = None
    best_obj = np.inf
    for k in range(0, m + 1):
        for subset in itertools.combinations(range(n_con), k):
            if k == 0:
                du = np.zeros(m)
                lam_ok = True
            else:
                As = A[list(subset)]
                kkt = np.zeros((m + k, m + k))
                kkt[:m, :m] = H
                kkt[:m, m:] = -As.T
                kkt[m:, :m] = As
                rhs = np.concatenate([np.zeros(m), b[list(subset)]])
                try:
                    sol = np.linalg.solve(kkt, rhs)
                except np.linalg.LinAlgError:
                    continue
                if not np.all(np.isfinite(sol)):
                    continue
                # Guard against near-singular systems solved to garbage.
                if np.max(np.abs(kkt @ sol - rhs)) > 1e-8 * max(1.0, np.max(np.abs(rhs))):
                    continue
                du = sol[:m]
                lam_ok = bool(np.all(sol[m:] >= -1e-9))
            if not lam_ok:
                continue
            if not np.all(A @ du - b >= -FEAS_TOL):
                continue
            obj = 0.5 * float(du @ H @ du)
            if obj < best_obj - 1e-15:
                best_obj = obj
                best_du = du
    if best_du is None:
        raise Infeasible(
            f"safety-filter QP has no feasible point "
            f"(rows={[(a.tolist(), float(bb)) for a, bb in problem.rows]}, "
            f"box=[{problem.box_lo.tolist()}, {problem.box_hi.tolist()}])"
        )
    return best_du


# ---------------------------------------------------------------------------
# Barrier rows.
# ---------------------------------------------------------------------------

def base_cbf_row(
    system: AffineSystem,
    barrier: Barrier,
    kappa: ClassKappa,
    x: np.ndarray,
    u_nominal: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Row (a, b) for the plain condition h_dot(x, u + du) + kappa(h) >= 0."""
    a = barrier.grad(x) @ system.G(x)
    b = -h_dot(barrier, system, x, u_nominal) - kappa(barrier.h(x))
    return np.asarray(a, dtype=float), float(b)


def pb_cbf_row(
    system: AffineSystem,
    barrier: Barrier,
    kappa: ClassKappa,
    x: np.ndarray,
    u_nominal: np.ndarray,
    u0: np.ndarray,
    delta_h: float,
) -> tuple[np.ndarray, float]:
    """Row (a, b) for c'G (u + du - u0) + kappa(h + delta_h) >= 0.

    Unlike the base row this never references the drift, only the distance of
    the applied input from the stopping input and the margin-corrected
    barrier value.
    """
    a = np.asarray(barrier.grad(x) @ system.G(x), dtype=float)
    b = -float(a @ (u_nominal - u0)) - kappa(barrier.h(x) + delta_h)
    return a, float(b)


# ---------------------------------------------------------------------------
# One filtering step.
# ---------------------------------------------------------------------------

@dataclass
class FilterDiagnostics:
    """Per-step record of what the filter saw and did."""

    mode: str
    active: Optional[int]
    h: np.ndarray
    h_p: np.ndarray
    rates: np.ndarray
    delta_h: float
    T_stop: float
    prediction_steps: int
    delta_u: np.ndarray
    u_star: np.ndarray
    qp_status: int
    row_residuals: np.ndarray
    cbf_binding: bool
    saturated: bool
    ball_projected: bool


def filter_step(
    system: AffineSystem,
    barriers: Sequence[tuple[Barrier, PredictionPolicy]],
    config: FilterConfig,
    x: np.ndarray,
    u_nominal: np.ndarray,
) -> tuple[np.ndarray, FilterDiagnostics]:
    """Minimally modify ``u_nominal`` so every barrier condition holds.

    Each barrier contributes one row per step. In prediction mode the active
    barrier (negative rate under its own stopping policy) gets the
    prediction-based row with a freshly computed stopping margin, while
    inactive barriers get the plain row with zero margin; the two coincide on
    the boundary between the branches, where the stopping rate is exactly
    zero. This mirrors the piecewise definition of the margin-corrected
    barrier, and the stopping input of the active barrier remains a feasible
    point for the whole row set as long as the corrected barrier value is
    positive (asserted directly). In base mode every barrier gets the plain
    row; if that set is infeasible under the input box, the rows are dropped
    for the step, the input clamped, and the step flagged so prediction-less
    behavior can be observed to the end of the run.

    Norm-ball input sets are handled by solving over the bounding box and
    projecting the result onto the ball, flagged in the diagnostics when the
    projection actually moved the input.
    """
    x = np.asarray(x, dtype=float)
    u_nominal = np.asarray(u_nominal, dtype=float)
    n_b = len(barriers)
    h_vals = np.array([b.h(x) for b, _ in barriers], dtype=float)

    if config.mode == MODE_NONE:
        u_star = system.bounds.clamp(u_nominal)
        return u_star, FilterDiagnostics(
            mode=config.mode,
            active=None,
            h=h_vals,
            h_p=h_vals.copy(),
            rates=np.zeros(n_b),
            delta_h=0.0,
            T_stop=0.0,
            prediction_steps=0,
            delta_u=u_star - u_nominal,
            u_star=u_star,
            qp_status=QP_INACTIVE,
            row_residuals=np.full(n_b, np.nan),
            cbf_binding=False,
            saturated=not system.bounds.contains(u_nominal),
            ball_projected=False,
        )

    if isinstance(system.bounds, NormBall):
        box = system.bounds.bounding_box()
    else:
        box = system.bounds

    policy_evals = evaluate_policies(barriers, system, x, u_ref=u_nominal)
    rates = np.array([rate for _, rate in policy_evals], dtype=float)
    active = pick_active(rates, [b.name for b, _ in barriers])

    h_p = h_vals.copy()
    delta_h = 0.0
    T_stop = 0.0
    pred_steps = 0
    rows: list[tuple[np.ndarray, float]] = []
    for i, (b, pol) in enumerate(barriers):
        if config.mode == MODE_PB and i == active:
            pred: PredictionResult = compute_delta_h(
                system,
                b,
                pol,
                x,
                dt=config.dt_prediction,
                t_max=config.t_max_prediction,
                u_ref=u_nominal,
            )
            delta_h = pred.delta_h
            T_stop = pred.T
            pred_steps = pred.steps
            h_p[i] = h_vals[i] + delta_h
            rows.append(
                pb_cbf_row(
                    system, b, config.kappa, x, u_nominal, policy_evals[i][0], delta_h
                )
            )
        else:
            rows.append(base_cbf_row(system, b, config.kappa, x, u_nominal))

    problem = QpProblem(
        H=config.weight(system.m),
        rows=rows,
        box_lo=box.u_min - u_nominal,
        box_hi=box.u_max - u_nominal,
    )

    # Structural feasibility: stepping to the active barrier's stopping input
    # satisfies its prediction row whenever h + delta_h > 0, and makes every
    # opposed partner's rate nonnegative, so it satisfies their rows too.
    if config.mode == MODE_PB and active is not None and h_p[active] > 0.0:
        feasible_point = policy_evals[active][0] - u_nominal
        if not problem.is_feasible(feasible_point):
            raise Infeasible(
                f"stopping input is not a feasible point for the safety rows at "
                f"x={x.tolist()} (h_p={h_p[active]:.6g}); the feasibility "
                f"invariant is broken"
            )

    qp_status = QP_SOLVED
    try:
        delta_u = solve_small_qp(problem)
    except Infeasible:
        if config.mode == MODE_PB:
            raise
        # Base mode: drop the rows, clamp to the box, record the failure.
        log.debug("base rows infeasible at x=%s; clamping", x)
        delta_u = np.clip(np.zeros(system.m), problem.box_lo, problem.box_hi)
        qp_status = QP_RELAXED

    u_star = u_nominal + delta_u
    ball_projected = False
    if isinstance(system.bounds, NormBall):
        norm = float(np.linalg.norm(u_star))
        if norm > system.bounds.u_max + 1e-12:
            u_star = u_star * (system.bounds.u_max / norm)
            ball_projected = True
    else:
        u_star = np.clip(u_star, box.u_min, box.u_max)

    if qp_status == QP_SOLVED:
        row_residuals = np.array([float(a @ delta_u - b) for a, b in rows])
    else:
        row_residuals = np.full(n_b, np.nan)

    cbf_binding = (
        qp_status == QP_SOLVED
        and bool(np.any(row_residuals <= BIND_TOL))
        and float(np.max(np.abs(delta_u))) > 1e-12
    )
    if isinstance(system.bounds, NormBall):
        saturated = ball_projected or float(np.linalg.norm(u_star)) >= system.bounds.u_max - 1e-12
    else:
        saturated = bool(
            np.any(u_star <= box.u_min + 1e-12) or np.any(u_star >= box.u_max - 1e-12)
        )

    return u_star, FilterDiagnostics(
        mode=config.mode,
        active=active,
        h=h_vals,
        h_p=h_p,
        rates=rates,
        delta_h=delta_h,
        T_stop=T_stop,
        prediction_steps=pred_steps,
        delta_u=delta_u,
        u_star=u_star,
        qp_status=qp_status,
        row_residuals=row_residuals,
        cbf_binding=cbf_binding,
        saturated=saturated,
        ball_projected=ball_projected,
    )
