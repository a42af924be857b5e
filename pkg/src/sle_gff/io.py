"""CSV and JSON artifacts with '#'-prefixed provenance headers."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _header_lines(config: dict | None, seed: int | None):
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True, default=str))
    if seed is not None:
        lines.append(f"# seed: {int(seed)}")
    return lines


def write_csv(path, columns: dict, config: dict | None = None, seed: int | None = None):
    """Write named columns with a provenance header.  Floats use %.17g so reruns are byte-identical."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    lines = _header_lines(config, seed)
    lines.append(",".join(names))
    for row in data:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Returns (columns, meta) where meta holds the parsed header entries."""
    meta = {}
    rows = []
    names = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(":")
            val = val.strip()
            try:
                meta[key.strip()] = json.loads(val)
            except json.JSONDecodeError:
                meta[key.strip()] = val
        elif names is None:
            names = line.split(",")
        elif line:
            rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    return {k: arr[:, i] for i, k in enumerate(names)}, meta


def csv_body(path) -> str:
    return "\n".join(l for l in Path(path).read_text().splitlines() if not l.startswith("#"))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))
