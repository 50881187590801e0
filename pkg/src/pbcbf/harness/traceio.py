"""Trace and metrics serialization.

The trace CSV schema is fixed:

    t,<state names>,<input names>,u_nom_<names>,h_<i>,hP_<i>,delta_h,active,filter_on,qp_status

one row per step, floats with 17 significant digits (enough to round-trip
float64 exactly), integer channels as plain integers. Annotation channels
that are absent are still emitted as zero-filled columns so the schema never
shifts.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import OutputError
from ..ode import Trace

INT_CHANNELS = ("active", "filter_on", "qp_status")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def trace_columns(
    trace: Trace,
    state_names: tuple[str, ...],
    input_names: tuple[str, ...],
    n_barriers: int,
) -> tuple[list[str], list[np.ndarray], list[bool]]:
    """Header names, column arrays and integer flags in schema order."""
    n_rows = len(trace)

    def channel(name: str) -> np.ndarray:
        arr = trace.annotations.get(name)
        if arr is None:
            return np.zeros(n_rows)
        return np.asarray(arr)

    names: list[str] = ["t"]
    cols: list[np.ndarray] = [trace.times]
    for j, s in enumerate(state_names):
        names.append(s)
        cols.append(trace.states[:, j])
    for j, s in enumerate(input_names):
        names.append(s)
        cols.append(trace.inputs[:, j])
    for s in input_names:
        names.append(f"u_nom_{s}")
        cols.append(channel(f"u_nom_{s}"))
    for i in range(1, n_barriers + 1):
        names.append(f"h_{i}")
        cols.append(channel(f"h_{i}"))
    for i in range(1, n_barriers + 1):
        names.append(f"hP_{i}")
        cols.append(channel(f"hP_{i}"))
    for name in ("delta_h",) + INT_CHANNELS:
        names.append(name)
        cols.append(channel(name))
    is_int = [name in INT_CHANNELS for name in names]
    return names, cols, is_int


def write_trace_csv(
    trace: Trace,
    path: Union[str, Path],
    state_names: tuple[str, ...],
    input_names: tuple[str, ...],
    n_barriers: int,
) -> None:
    """Write the trace in the fixed CSV schema; OSErrors carry the path."""
    names, cols, is_int = trace_columns(trace, state_names, input_names, n_barriers)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(names) + "\n")
            for row in range(len(trace)):
                fields = [
                    str(int(col[row])) if flag else _fmt(float(col[row]))
                    for col, flag in zip(cols, is_int)
                ]
                fh.write(",".join(fields) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write trace to '{path}': {exc}") from exc


def read_trace_csv(path: Union[str, Path]) -> dict[str, np.ndarray]:
    """Columns of a trace CSV keyed by header name."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
    except OSError as exc:
        raise OutputError(f"cannot read trace from '{path}': {exc}") from exc
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_metrics_json(metrics, path: Union[str, Path]) -> None:
    """Write the metrics record; OSErrors carry the path."""
    payload = metrics.to_dict() if hasattr(metrics, "to_dict") else dict(metrics)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write metrics to '{path}': {exc}") from exc
