"""Closed-loop scenario execution and safe-set slicing."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError, NumericalError, PolicyFailure, ZeroGradientWarning
from ..ode import Trace, rk4_step
from ..predictor import compute_delta_h
from ..qpfilter import QP_RELAXED, filter_step
from .scenario import Scenario

log = logging.getLogger(__name__)

#: Raw-margin deficits beyond this count as a boundary violation.
VIOLATION_TOL = 1e-3


@dataclass
class Metrics:
    """Run-level summary of safety and filter activity."""

    min_h: list[float]
    min_margin: float
    violated: bool
    first_activation_time: Optional[float]
    saturation_steps: int
    qp_infeasible_steps: int

    def to_dict(self) -> dict:
        return {
            "min_h": self.min_h,
            "min_margin": self.min_margin,
            "violated": self.violated,
            "first_activation_time": self.first_activation_time,
            "saturation_steps": self.saturation_steps,
            "qp_infeasible_steps": self.qp_infeasible_steps,
        }


def run_scenario(scenario: Scenario) -> tuple[Trace, Metrics]:
    """Simulate the scenario loop: nominal control, safety filter, RK4 step.

    The filtered input is held constant over each simulation step (zero-order
    hold). Every node records the barrier values, the active barrier's
    stopping margin, and the filter diagnostics; the final node is evaluated
    but not stepped. Prediction-mode infeasibility and numerical failures
    propagate as errors, aborting the run.
    """
    system = scenario.system
    n_steps = int(round(scenario.duration / scenario.dt_sim))
    dt = scenario.dt_sim
    n_b = len(scenario.barriers)
    controller = scenario.make_controller()

    n_nodes = n_steps + 1
    times = dt * np.arange(n_nodes)
    states = np.empty((n_nodes, system.n))
    inputs = np.empty((n_nodes, system.m))
    u_nom_rec = np.empty((n_nodes, system.m))
    h_rec = np.empty((n_nodes, n_b))
    hp_rec = np.empty((n_nodes, n_b))
    rate_rec = np.empty((n_nodes, n_b))
    delta_h_rec = np.empty(n_nodes)
    active_rec = np.zeros(n_nodes, dtype=int)
    filter_on_rec = np.zeros(n_nodes, dtype=int)
    qp_status_rec = np.zeros(n_nodes, dtype=int)

    margins = np.empty((n_nodes, n_b))
    first_activation = None
    saturation_steps = 0
    qp_infeasible_steps = 0

    x = scenario.x0.copy()
    for k in range(n_nodes):
        t = times[k]
        u_nom = np.asarray(controller(x, t), dtype=float)
        if scenario.disturbance is not None:
            u_nom = u_nom + scenario.disturbance(t)

        u_star, diag = filter_step(
            system, scenario.barriers, scenario.filter_config, x, u_nom
        )

        states[k] = x
        inputs[k] = u_star
        u_nom_rec[k] = u_nom
        h_rec[k] = diag.h
        hp_rec[k] = diag.h_p
        rate_rec[k] = diag.rates
        delta_h_rec[k] = diag.delta_h
        active_rec[k] = 0 if diag.active is None else diag.active + 1
        filter_on_rec[k] = int(diag.cbf_binding)
        qp_status_rec[k] = diag.qp_status
        margins[k] = [b.raw_margin(x) for b, _ in scenario.barriers]

        if diag.cbf_binding and first_activation is None:
            first_activation = float(t)
        if diag.saturated:
            saturation_steps += 1
        if diag.qp_status == QP_RELAXED:
            qp_infeasible_steps += 1

        if k < n_steps:
            x = rk4_step(system.derivative_with_input(u_star), x, t, dt)

    annotations = {
        "delta_h": delta_h_rec,
        "active": active_rec,
        "filter_on": filter_on_rec,
        "qp_status": qp_status_rec,
    }
    for j, name in enumerate(system.input_names):
        annotations[f"u_nom_{name}"] = u_nom_rec[:, j]
    for i in range(n_b):
        annotations[f"h_{i + 1}"] = h_rec[:, i]
        annotations[f"hP_{i + 1}"] = hp_rec[:, i]
        annotations[f"hdot_{i + 1}"] = rate_rec[:, i]

    trace = Trace(times=times, states=states, inputs=inputs, annotations=annotations)
    min_margin = float(np.min(margins))
    metrics = Metrics(
        min_h=[float(v) for v in np.min(h_rec, axis=0)],
        min_margin=min_margin,
        violated=bool(min_margin < -VIOLATION_TOL),
        first_activation_time=first_activation,
        saturation_steps=saturation_steps,
        qp_infeasible_steps=qp_infeasible_steps,
    )
    log.info(
        "scenario '%s' [%s]: min_margin=%.4g violated=%s first_activation=%s",
        scenario.name,
        scenario.filter_config.mode,
        metrics.min_margin,
        metrics.violated,
        metrics.first_activation_time,
    )
    return trace, metrics


# ---------------------------------------------------------------------------
# Safe-set slices.
# ---------------------------------------------------------------------------

@dataclass
class SliceGrid:
    """Two varying state coordinates over a fixed base state."""

    index1: int
    values1: np.ndarray
    index2: int
    values2: np.ndarray
    x_fixed: np.ndarray
    dt: float = 1e-3
    t_max: float = 60.0


@dataclass
class SliceResult:
    """Barrier value and margin-corrected value over the grid.

    Cells where the prediction failed (policy could not stop, or the model
    left its domain) hold NaN in ``h_p`` and are flagged in ``failed``.
    """

    grid: SliceGrid
    h: np.ndarray
    h_p: np.ndarray
    failed: np.ndarray

    def trimmed(self, tol: float = 1e-12) -> np.ndarray:
        """Mask of cells where the margin strictly shrank the barrier."""
        with np.errstate(invalid="ignore"):
            return self.h_p < self.h - tol

    def asymmetry(self, axis: int = 2) -> tuple[int, int]:
        """Trimmed-cell counts split by the sign of one grid axis."""
        values = self.grid.values2 if axis == 2 else self.grid.values1
        trimmed = self.trimmed()
        if axis == 2:
            lower = trimmed[:, values < 0.0]
            upper = trimmed[:, values > 0.0]
        else:
            lower = trimmed[values < 0.0, :]
            upper = trimmed[values > 0.0, :]
        return int(np.count_nonzero(lower)), int(np.count_nonzero(upper))


def safe_set_slice(system, barrier, policy, grid: SliceGrid) -> SliceResult:
    """Evaluate h and h_p = h + delta_h over a 2-D slice of the state space.

    Cells whose stopping rate is already nonnegative get h_p = h exactly.
    Per-cell failures are recorded as missing data rather than aborting, so a
    slice can straddle regions where the policy has no stopping guarantee.
    """
    n1, n2 = len(grid.values1), len(grid.values2)
    h = np.empty((n1, n2))
    h_p = np.empty((n1, n2))
    failed = np.zeros((n1, n2), dtype=bool)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroGradientWarning)
        for i, v1 in enumerate(grid.values1):
            for j, v2 in enumerate(grid.values2):
                x = grid.x_fixed.copy()
                x[grid.index1] = v1
                x[grid.index2] = v2
                try:
                    h_val = float(barrier.h(x))
                    pred = compute_delta_h(
                        system, barrier, policy, x, dt=grid.dt, t_max=grid.t_max
                    )
                    h[i, j] = h_val
                    h_p[i, j] = h_val + pred.delta_h
                except (PolicyFailure, DomainError, NumericalError):
                    h[i, j] = barrier.h(x)
                    h_p[i, j] = np.nan
                    failed[i, j] = True
    return SliceResult(grid=grid, h=h, h_p=h_p, failed=failed)
