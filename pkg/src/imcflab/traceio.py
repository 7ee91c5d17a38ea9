"""Trace CSV, node archive and report serialization."""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .flow import FlowTrace, TraceRecord

TRACE_COLUMNS = (
    "t",
    "area",
    "m_H",
    "r_min",
    "r_max",
    "min_H",
    "max_H",
    "min_angle",
    "int_A0_2",
    "int_H2",
    "int_R6",
    "int_grad_log_H2",
    "sup_H_minus_2",
    "sup_A0",
    "rho_plus",
    "rho_minus",
    "res_w",
    "res_H",
    "u_sha1",
)
TRACE_HEADER = ",".join(TRACE_COLUMNS)

# CSV column -> TraceRecord attribute
_ATTR = {"m_H": "hawking_mass"}


def fmt(x: float) -> str:
    return "%.17g" % x


def trace_row(rec: TraceRecord) -> str:
    vals = [fmt(getattr(rec, _ATTR.get(c, c))) for c in TRACE_COLUMNS[:-1]]
    vals.append(rec.u_sha1)
    return ",".join(vals)


class TraceSink:
    """Streams rows as samples arrive; each row goes out in a single write."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="ascii", newline="")
        self._fh.write(TRACE_HEADER + "\n")
        self._fh.flush()

    def __call__(self, rec: TraceRecord):
        self._fh.write(trace_row(rec) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _atomic_write(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace(trace: FlowTrace, path) -> None:
    """Whole-trace write (residual columns filled), replacing the file atomically."""
    lines = [TRACE_HEADER] + [trace_row(r) for r in trace.records]
    _atomic_write(path, "\n".join(lines) + "\n")


def read_trace(path, grid=None, metric=None) -> FlowTrace:
    """Rebuild a node-free FlowTrace from trace.csv."""
    with open(path, encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header")
        recs = []
        for row in reader:
            if len(row) != len(TRACE_COLUMNS):
                raise ValueError(f"{path}: torn row {len(recs) + 2}")
            kw = {_ATTR.get(c, c): float(v) for c, v in zip(TRACE_COLUMNS[:-1], row[:-1])}
            kw["u_sha1"] = row[-1]
            recs.append(TraceRecord(**kw))
    return FlowTrace(grid, metric, recs)


def write_nodes(trace: FlowTrace, path) -> None:
    keys = ("u", "grad_u2")
    arrays = {"t": trace.t}
    for k in keys:
        if all(k in r.nodes for r in trace.records):
            arrays[k] = np.stack([r.nodes[k] for r in trace.records])
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def attach_nodes(trace: FlowTrace, path) -> None:
    with np.load(path) as data:
        t = data["t"]
        if t.shape[0] != len(trace) or not np.array_equal(t, trace.t):
            raise ValueError("node archive does not match trace")
        for k in data.files:
            if k == "t":
                continue
            for rec, arr in zip(trace.records, data[k]):
                rec.nodes[k] = arr
    for rec in trace.records:
        if not rec.geometry_hash_ok():
            raise ValueError(f"node archive hash mismatch at t={rec.t}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_report(report: dict, path) -> None:
    _atomic_write(path, json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
