"""Declarative scenario descriptions and their JSON loader.

A scenario file names a built-in model, an initial state, a nominal
controller, optional disturbance, the filter configuration and the barrier
list with per-barrier stopping policies. All angles in scenario and
parameter files are degrees and are converted to radians at load time.
Load-time validation guarantees the initial state lies strictly inside every
barrier's safe set (and, in prediction mode, inside the margin-corrected
set), so a run never starts from an already-lost position.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from ..barrier import (
    Barrier,
    alpha_max_barrier,
    alpha_min_barrier,
    check_opposed_pair,
    gap_barrier,
    headway_barrier,
    radial_stop_barrier,
)
from ..errors import PbcbfError, ScenarioError
from ..predictor import (
    BangBangPolicy,
    NormBallGradientPolicy,
    PredictionPolicy,
    QpMaximalPolicy,
    compute_delta_h,
)
from ..qpfilter import MODE_PB, FilterConfig
from ..barrier import LinearKappa
from ..systems import (
    AffineSystem,
    AircraftParams,
    NormBall,
    acc_system,
    aircraft_longitudinal,
    cartesian_to_polar,
    double_integrator_polar,
    polynomial_resistance,
    trim_solve,
)
from .controllers import (
    ConstantController,
    DiTrackingController,
    DiTrackingGains,
    DoubletSpec,
    PidSasAutothrottle,
    SasGains,
    doublet,
)

DEG = math.pi / 180.0


@dataclass
class Scenario:
    """Everything the runner needs, plus the raw document for overrides."""

    name: str
    system: AffineSystem
    x0: np.ndarray
    barriers: list[tuple[Barrier, PredictionPolicy]]
    filter_config: FilterConfig
    duration: float
    dt_sim: float
    controller_factory: Callable[[], Callable]
    disturbance: Optional[Callable[[float], np.ndarray]]
    outputs: dict
    raw: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)
    trim: Optional[tuple[np.ndarray, np.ndarray]] = None

    def make_controller(self):
        return self.controller_factory()

    def with_overrides(self, overrides: dict[str, object]) -> "Scenario":
        """Rebuild from the raw document with dotted-path overrides applied."""
        doc = json.loads(json.dumps(self.raw))
        for dotted, value in overrides.items():
            node = doc
            keys = dotted.split(".")
            for key in keys[:-1]:
                if key not in node or not isinstance(node[key], dict):
                    node[key] = {}
                node = node[key]
            node[keys[-1]] = value
        return build_scenario(doc, self.base_dir, name=self.name)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario '{path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario '{path}' is not valid JSON: {exc}") from exc
    return build_scenario(doc, path.parent, name=doc.get("name", path.stem))


def _need(doc: dict, key: str, ctx: str):
    if key not in doc:
        raise ScenarioError(f"{ctx}: missing required key '{key}'")
    return doc[key]


def _build_system(doc: dict, base_dir: Path):
    """Returns (system, model_id, aux) where aux carries model extras."""
    model = _need(doc, "model", "system")
    params = doc.get("params", {})
    if model == "double_integrator_polar":
        system = double_integrator_polar(
            u_max=float(params.get("u_max", 1.0)),
            r_floor=float(params.get("r_floor", 1e-6)),
        )
        return system, model, {}
    if model == "acc":
        resistance = None
        if "resistance_poly" in params:
            resistance = polynomial_resistance(params["resistance_poly"])
        system = acc_system(
            m=float(_need(params, "m", "system.params")),
            v_f=float(_need(params, "v_f", "system.params")),
            a_max=float(_need(params, "a_max", "system.params")),
            f_resistance=resistance,
        )
        return system, model, {}
    if model == "aircraft_longitudinal":
        if "params_file" in doc:
            p = base_dir / doc["params_file"]
            try:
                ac = AircraftParams.from_json(p)
            except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
                raise ScenarioError(f"cannot load aircraft parameters '{p}': {exc}") from exc
        else:
            try:
                ac = AircraftParams.from_dict(params)
            except (KeyError, ValueError) as exc:
                raise ScenarioError(f"bad inline aircraft parameters: {exc}") from exc
        return aircraft_longitudinal(ac), model, {"aircraft_params": ac}
    raise ScenarioError(f"unknown system model '{model}'")


def _build_x0(doc, system, model, aux):
    """Initial state; aircraft scenarios may start from a solved trim."""
    if model == "aircraft_longitudinal" and isinstance(doc, dict) and "trim" in doc:
        spec = doc["trim"]
        try:
            x_trim, u_trim = trim_solve(
                aux["aircraft_params"],
                V0=float(_need(spec, "V0", "x0.trim")),
                gamma_path=float(spec.get("gamma_path_deg", 0.0)) * DEG,
            )
        except PbcbfError as exc:
            raise ScenarioError(f"trim failed while building x0: {exc}") from exc
        aux["trim"] = (x_trim, u_trim)
        return x_trim.copy()
    if isinstance(doc, dict) and "cartesian" in doc:
        spec = doc["cartesian"]
        return cartesian_to_polar(
            np.asarray(_need(spec, "pos", "x0.cartesian"), dtype=float),
            np.asarray(_need(spec, "vel", "x0.cartesian"), dtype=float),
        )
    if isinstance(doc, dict) and "polar" in doc:
        spec = doc["polar"]
        return np.array(
            [
                float(_need(spec, "r", "x0.polar")),
                float(spec.get("theta_deg", 0.0)) * DEG,
                float(spec.get("vr", 0.0)),
                float(spec.get("omega_deg_s", 0.0)) * DEG,
            ]
        )
    if isinstance(doc, dict) and "state" in doc:
        x0 = np.asarray(doc["state"], dtype=float)
        if x0.shape != (system.n,):
            raise ScenarioError(
                f"x0.state has shape {x0.shape}, expected ({system.n},)"
            )
        return x0
    raise ScenarioError("x0 must provide one of: trim, cartesian, polar, state")


def _build_barrier(doc: dict) -> Barrier:
    btype = _need(doc, "type", "barrier")
    if btype == "radial_stop":
        return radial_stop_barrier(
            R=float(_need(doc, "R", "barrier")), mu=float(_need(doc, "mu", "barrier"))
        )
    if btype == "gap":
        return gap_barrier(z0=float(_need(doc, "z0", "barrier")))
    if btype == "headway":
        return headway_barrier(a_s=float(_need(doc, "a_s", "barrier")))
    if btype == "alpha_max":
        return alpha_max_barrier(float(_need(doc, "limit_deg", "barrier")) * DEG)
    if btype == "alpha_min":
        return alpha_min_barrier(float(_need(doc, "limit_deg", "barrier")) * DEG)
    raise ScenarioError(f"unknown barrier type '{btype}'")


def _build_policy(doc: dict, aux: dict) -> PredictionPolicy:
    kind = _need(doc, "kind", "policy")
    if kind == "normball_gradient":
        return NormBallGradientPolicy()
    if kind == "qp_maximal":
        return QpMaximalPolicy()
    if kind == "bang_bang":
        freeze = None
        where = doc.get("freeze_at")
        if where == "trim":
            if "trim" not in aux:
                raise ScenarioError(
                    "policy.freeze_at='trim' requires an x0 defined by trim"
                )
            freeze = aux["trim"]
        elif where == "x0":
            freeze = (aux["x0"], np.zeros(aux["m"]))
        elif where not in (None, "current"):
            raise ScenarioError(f"unknown policy.freeze_at '{where}'")
        neutral = doc.get("neutral")
        if isinstance(neutral, list):
            neutral = np.asarray(neutral, dtype=float)
        elif neutral not in (None, "hold"):
            raise ScenarioError("policy.neutral must be 'hold', a vector, or absent")
        return BangBangPolicy(
            gradient_source=doc.get("gradient_source", "CAB"),
            neutral=neutral,
            zero_tol_rel=float(doc.get("zero_tol_rel", 0.0)),
            freeze_at=freeze,
        )
    raise ScenarioError(f"unknown policy kind '{kind}'")


def _build_filter(doc: dict) -> FilterConfig:
    try:
        return FilterConfig(
            mode=doc.get("mode", MODE_PB),
            kappa=LinearKappa(float(doc.get("gamma", 1.0))),
            H=np.asarray(doc["H"], dtype=float) if "H" in doc else None,
            dt_prediction=float(doc.get("dt_prediction", 1e-3)),
            t_max_prediction=float(doc.get("t_max_prediction", 60.0)),
        )
    except ValueError as exc:
        raise ScenarioError(f"bad filter configuration: {exc}") from exc


def _build_controller_factory(doc: dict, system, aux: dict, dt_sim: float):
    cid = _need(doc, "id", "controller")
    gains = doc.get("gains", {})
    if cid == "di_tracking":
        u_clip = gains.get("u_clip")
        if u_clip is None and isinstance(system.bounds, NormBall):
            u_clip = system.bounds.u_max
        g = DiTrackingGains(
            kp=float(gains.get("kp", 2.0)),
            kd=float(gains.get("kd", 3.0)),
            push_gain=float(gains.get("push_gain", 4.0)),
            push_radius=float(gains.get("push_radius", 1.0)),
            u_clip=float(u_clip) if u_clip is not None else None,
        )
        return lambda: DiTrackingController(g)
    if cid == "pid_sas_autothrottle":
        if "trim" not in aux:
            raise ScenarioError("pid_sas_autothrottle requires an x0 defined by trim")
        x_trim, u_trim = aux["trim"]
        g = SasGains(
            k_P_alpha=float(_need(gains, "k_P_alpha", "controller.gains")),
            k_D_theta=float(_need(gains, "k_D_theta", "controller.gains")),
            k_P_theta=float(_need(gains, "k_P_theta", "controller.gains")),
            k_I_theta=float(_need(gains, "k_I_theta", "controller.gains")),
            k_P_u=float(_need(gains, "k_P_u", "controller.gains")),
            k_I_u=float(_need(gains, "k_I_u", "controller.gains")),
            k_D_u=float(_need(gains, "k_D_u", "controller.gains")),
            deriv_pole=float(gains.get("deriv_pole", 50.0)),
        )
        bounds = system.bounds
        return lambda: PidSasAutothrottle(x_trim, u_trim, g, dt_sim, bounds)
    if cid == "constant":
        u = np.asarray(_need(doc, "u", "controller"), dtype=float)
        if u.shape != (system.m,):
            raise ScenarioError(f"constant controller u has shape {u.shape}, expected ({system.m},)")
        return lambda: ConstantController(u)
    raise ScenarioError(f"unknown controller id '{cid}'")


def _build_disturbance(doc: Optional[dict], system):
    if doc is None:
        return None
    if "doublet" in doc:
        spec_doc = doc["doublet"]
        if "amplitude1_deg" in spec_doc:
            a1 = float(spec_doc["amplitude1_deg"]) * DEG
            a2 = float(spec_doc["amplitude2_deg"]) * DEG
        else:
            a1 = float(_need(spec_doc, "amplitude1", "disturbance.doublet"))
            a2 = float(_need(spec_doc, "amplitude2", "disturbance.doublet"))
        spec = DoubletSpec(
            m=system.m,
            channel=int(spec_doc.get("channel", 0)),
            amplitude1=a1,
            amplitude2=a2,
            width=float(_need(spec_doc, "width", "disturbance.doublet")),
            start1=float(_need(spec_doc, "start1", "disturbance.doublet")),
            start2=float(_need(spec_doc, "start2", "disturbance.doublet")),
        )
        if not 0 <= spec.channel < system.m:
            raise ScenarioError(f"doublet channel {spec.channel} out of range")
        return lambda t: doublet(t, spec)
    raise ScenarioError("disturbance must currently be a doublet")


def build_scenario(doc: dict, base_dir: Union[str, Path], name: str = "scenario") -> Scenario:
    """Assemble and validate a scenario from a parsed JSON document."""
    base_dir = Path(base_dir)
    system, model, aux = _build_system(_need(doc, "system", "scenario"), base_dir)

    dt_sim = float(doc.get("dt_sim", 1e-3))
    duration = float(_need(doc, "duration", "scenario"))
    if dt_sim <= 0.0:
        raise ScenarioError(f"dt_sim must be positive, got {dt_sim}")
    if duration < 0.0:
        raise ScenarioError(f"duration must be nonnegative, got {duration}")

    x0 = _build_x0(_need(doc, "x0", "scenario"), system, model, aux)
    aux["x0"] = x0
    aux["m"] = system.m

    barriers: list[tuple[Barrier, PredictionPolicy]] = []
    for bdoc in _need(doc, "barriers", "scenario"):
        barrier = _build_barrier(bdoc)
        policy = _build_policy(_need(bdoc, "policy", "barrier"), aux)
        barriers.append((barrier, policy))
    if not barriers:
        raise ScenarioError("at least one barrier is required")
    if len(barriers) == 2:
        samples = [x0] + [
            x0 + d for d in 0.05 * np.eye(system.n) if system_state_ok(system, x0 + d)
        ]
        try:
            if not check_opposed_pair(barriers[0][0], barriers[1][0], samples):
                raise ScenarioError(
                    "a two-barrier scenario requires an opposed pair "
                    "(antiparallel unit gradients)"
                )
        except PbcbfError as exc:
            raise ScenarioError(f"opposed-pair validation failed: {exc}") from exc

    filter_config = _build_filter(doc.get("filter", {}))
    controller_factory = _build_controller_factory(
        _need(doc, "controller", "scenario"), system, aux, dt_sim
    )
    disturbance = _build_disturbance(doc.get("disturbance"), system)

    scenario = Scenario(
        name=name,
        system=system,
        x0=x0,
        barriers=barriers,
        filter_config=filter_config,
        duration=duration,
        dt_sim=dt_sim,
        controller_factory=controller_factory,
        disturbance=disturbance,
        outputs=dict(doc.get("outputs", {})),
        raw=doc,
        base_dir=base_dir,
        trim=aux.get("trim"),
    )
    _validate_initial_state(scenario)
    return scenario


def system_state_ok(system, x) -> bool:
    try:
        system.f(np.asarray(x, dtype=float))
        return True
    except PbcbfError:
        return False


def _validate_initial_state(scenario: Scenario) -> None:
    for barrier, policy in scenario.barriers:
        h0 = barrier.h(scenario.x0)
        if not h0 > 0.0:
            raise ScenarioError(
                f"x0 is not strictly inside the safe set of '{barrier.name}' "
                f"(h(x0) = {h0:.6g})"
            )
        if scenario.filter_config.mode == MODE_PB:
            try:
                pred = compute_delta_h(
                    scenario.system,
                    barrier,
                    policy,
                    scenario.x0,
                    dt=scenario.filter_config.dt_prediction,
                    t_max=scenario.filter_config.t_max_prediction,
                )
            except PbcbfError as exc:
                raise ScenarioError(
                    f"stopping-margin prediction failed at x0 for '{barrier.name}': {exc}"
                ) from exc
            if not h0 + pred.delta_h > 0.0:
                raise ScenarioError(
                    f"x0 is outside the margin-corrected safe set of "
                    f"'{barrier.name}' (h_p(x0) = {h0 + pred.delta_h:.6g})"
                )
