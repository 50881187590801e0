"""Scenario definitions, controllers, the simulation loop, and trace output."""

from .controllers import (
    ConstantController,
    DiTrackingController,
    DiTrackingGains,
    DoubletSpec,
    PidSasAutothrottle,
    SasGains,
    di_reference,
    doublet,
    tracking_controller_di,
)
from .runner import Metrics, SliceGrid, SliceResult, run_scenario, safe_set_slice
from .scenario import Scenario, build_scenario, load_scenario
from .traceio import read_trace_csv, trace_columns, write_metrics_json, write_trace_csv

__all__ = [
    "ConstantController",
    "DiTrackingController",
    "DiTrackingGains",
    "DoubletSpec",
    "Metrics",
    "PidSasAutothrottle",
    "SasGains",
    "Scenario",
    "SliceGrid",
    "SliceResult",
    "build_scenario",
    "di_reference",
    "doublet",
    "load_scenario",
    "read_trace_csv",
    "run_scenario",
    "safe_set_slice",
    "trace_columns",
    "tracking_controller_di",
    "write_metrics_json",
    "write_trace_csv",
]
