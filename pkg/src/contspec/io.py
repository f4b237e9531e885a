"""Serialization: JSON block layout, CSV tables and phase-space arrays.

JSON layout of an observable or state::

    {"kind": "observable" | "state",
     "grid": {"scheme", "omega_max", "nodes", "weights"},
     "blocks": {"bb": [[[re, im], ...], ...], "cc_diag": ..., "cross_lo": ..., "cross_ol": ...,
                "cc_full": ... | {"u": ..., "v": ...}}}

Complex numbers are ``[re, im]`` pairs; absent blocks are ``null``.  CSV files
use ``.`` decimals, ``,`` separators and a mandatory header row; floats are
written with 17 significant digits so files round-trip exactly and are
byte-stable across runs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algebra import Observable, SeparableKernel, StateFunctional
from .spectral import SpectrumGrid

FLOAT_FMT = ".17g"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), FLOAT_FMT)
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], seed: int | None = None) -> Path:
    """Write a CSV table; a ``# seed=`` comment line precedes the header when given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if seed is not None:
            fh.write(f"# seed={int(seed)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


_BOOLS = {"true": "1", "false": "0"}


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a numeric table written by :func:`write_csv`; booleans become 1/0."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    body = [[_BOOLS.get(v, v) for v in r] for r in rows[1:]]
    return rows[0], np.array(body, dtype=float) if body else np.zeros((0, len(rows[0])))


def _to_json_array(a):
    if a is None:
        return None
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _from_json_array(x):
    if x is None:
        return None
    a = np.asarray(x, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def to_jsonable(obj) -> dict:
    """Observable / StateFunctional -> JSON-compatible dict."""
    full = obj.cc_full
    if isinstance(full, SeparableKernel):
        full_js = {"u": _to_json_array(full.u), "v": _to_json_array(full.v)}
    else:
        full_js = _to_json_array(full)
    return {
        "kind": "state" if isinstance(obj, StateFunctional) else "observable",
        "grid": {"scheme": obj.grid.scheme, "omega_max": obj.grid.omega_max,
                 "nodes": obj.grid.nodes.tolist(), "weights": obj.grid.weights.tolist()},
        "blocks": {
            "bb": _to_json_array(obj.bb),
            "cc_diag": _to_json_array(obj.cc_diag),
            "cross_lo": _to_json_array(obj.cross_lo),
            "cross_ol": _to_json_array(obj.cross_ol),
            "cc_full": full_js,
        },
    }


def from_jsonable(d: dict):
    g = d["grid"]
    grid = SpectrumGrid(float(g["omega_max"]), np.asarray(g["nodes"], float), np.asarray(g["weights"], float),
                        g["scheme"])
    b = d["blocks"]
    full = b.get("cc_full")
    if isinstance(full, dict):
        full = SeparableKernel(_from_json_array(full["u"]), _from_json_array(full["v"]))
    else:
        full = _from_json_array(full)
    cls = StateFunctional if d.get("kind") == "state" else Observable
    return cls(grid, _from_json_array(b["bb"]), _from_json_array(b["cc_diag"]),
               _from_json_array(b.get("cross_lo")), _from_json_array(b.get("cross_ol")), full)


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = to_jsonable(obj) if hasattr(obj, "cc_diag") else obj
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def load_json(path):
    d = json.loads(Path(path).read_text())
    return from_jsonable(d) if isinstance(d, dict) and "blocks" in d else d


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def diagonal_profile_rows(obj):
    """Rows ``(omega, m, value)`` of the real part of the diagonal entries of ``cc_diag``."""
    d = np.real(np.diagonal(obj.cc_diag, axis1=1, axis2=2))
    for k, w in enumerate(obj.grid.nodes):
        for m in range(d.shape[1]):
            yield w, m, d[k, m]


def write_profile_csv(obj, path, seed=None) -> Path:
    return write_csv(path, ["omega", "m", "value"], diagonal_profile_rows(obj), seed)


def write_phase_space(values: np.ndarray, grid, stem, seed=None) -> dict:
    """Write ``stem.csv`` (q, p, value), ``stem.bin`` (float64, row-major) and ``stem.json`` header."""
    stem = Path(stem)
    values = np.ascontiguousarray(np.real(values), dtype="<f8")
    q, p = grid.mesh()
    csv_path = write_csv(stem.with_suffix(".csv"), ["q", "p", "value"],
                         zip(q.ravel(), p.ravel(), values.ravel()), seed)
    bin_path = stem.with_suffix(".bin")
    values.tofile(bin_path)
    header = dict(grid.header(), dtype="float64-le", order="C", seed=seed)
    json_path = stem.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return {"csv": str(csv_path), "bin": str(bin_path), "header": str(json_path)}


def read_phase_space(stem) -> tuple[np.ndarray, dict]:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    values = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(header["shape"])
    return values, header
