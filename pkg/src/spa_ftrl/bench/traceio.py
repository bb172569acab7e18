"""Trace files: one CSV per episode plus a JSON sidecar with totals and config hash.

Floats are written in shortest round-trip form, so parsing a written trace gives
back the same arrays bit for bit, and the same episode always produces the same bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..environments import RegretTrace

TRACE_FORMAT_VERSION = 1

# leading columns, in this order, whenever the trace has them
HEADER_PREFIX = ("t", "A_t", "loss_observed", "regret_cum", "beta", "h", "z", "s1_ok", "stab_lemma_ok", "f4_ok")


class TraceFormatError(ValueError):
    pass


def column_order(columns) -> list[str]:
    names = list(columns)
    head = [c for c in HEADER_PREFIX if c in columns]
    return head + [c for c in names if c not in head]


def _fmt(col: np.ndarray) -> list[str]:
    if col.dtype.kind in "iu":
        return col.astype(str).tolist()
    return [repr(v) for v in col.astype(np.float64).tolist()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_trace(csv_path: str | Path, trace: RegretTrace, meta: dict) -> None:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    names = column_order(trace.columns)
    cols = [_fmt(np.asarray(trace.columns[n])) for n in names]
    lines = [",".join(names)]
    lines.extend(",".join(row) for row in zip(*cols))
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "trace_format_version": TRACE_FORMAT_VERSION,
        **meta,
        "columns": names,
        "dtypes": {n: np.asarray(trace.columns[n]).dtype.str for n in names},
        "totals": trace.totals,
    }
    csv_path.with_suffix(".json").write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")


def read_sidecar(csv_path: str | Path) -> dict:
    side = Path(csv_path).with_suffix(".json")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"{side}: unreadable sidecar ({exc})") from None
    version = meta.get("trace_format_version")
    if version != TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"{side}: trace format version {version!r}, expected {TRACE_FORMAT_VERSION}")
    return meta


def read_trace(csv_path: str | Path) -> tuple[RegretTrace, dict]:
    meta = read_sidecar(csv_path)
    with open(csv_path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != meta["columns"]:
            raise TraceFormatError(f"{csv_path}: header does not match the sidecar column list")
        body = fh.read()
    rows = [line.split(",") for line in body.splitlines() if line]
    cols = {}
    for j, name in enumerate(header):
        dtype = np.dtype(meta["dtypes"][name])
        vals = [r[j] for r in rows]
        cols[name] = np.array([int(v) for v in vals] if dtype.kind in "iu" else [float(v) for v in vals],
                              dtype=dtype)
    return RegretTrace(cols, meta["totals"]), meta
