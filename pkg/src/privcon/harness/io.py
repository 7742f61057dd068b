"""CSV traces, run manifests and JSON reports."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from ..protocols import ExecutionTrace

OUTPUT_ENV = "PRIVCON_OUTPUT_DIR"
TRACE_COLUMNS = ("k", "agent", "x", "v", "f", "w")


def output_dir(default: str | Path | None = None) -> Path:
    """The environment override wins over the configured directory."""
    env = os.environ.get(OUTPUT_ENV)
    return Path(env if env else (default or "out"))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(trace: ExecutionTrace, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    has_v = trace.spec.algorithm.value in ("alg2", "alg3", "alg2_perturbed")
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TRACE_COLUMNS)
        for k in range(trace.x.shape[0]):
            for i in range(trace.x.shape[1]):
                out.writerow([
                    k,
                    i + 1,
                    _fmt(trace.x[k, i]),
                    _fmt(trace.v[k, i]) if has_v else "",
                    _fmt(trace.f[k, i]) if trace.f is not None else "",
                    _fmt(trace.w[k, i]) if trace.w is not None else "",
                ])
    return path


def read_trace_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a trace CSV back into ``(K+1, n)`` arrays; absent columns come back as NaN."""
    rows = list(csv.DictReader(Path(path).open()))
    K = max(int(r["k"]) for r in rows)
    n = max(int(r["agent"]) for r in rows)
    out = {c: np.full((K + 1, n), np.nan) for c in TRACE_COLUMNS[2:]}
    for r in rows:
        k, i = int(r["k"]), int(r["agent"]) - 1
        for c in out:
            if r[c] != "":
                out[c][k, i] = float(r[c])
    return out


def manifest(trace: ExecutionTrace, **extra) -> dict:
    doc = {
        "spec": trace.spec.to_dict(),
        "graph": trace.graph.to_dict(),
        "graph_sha256": trace.graph.digest(),
        "horizon": trace.horizon,
    }
    doc.update(extra)
    return doc


def write_json(doc, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_table(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
