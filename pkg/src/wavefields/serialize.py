"""Deterministic run output writers.

Identical runs must produce byte-identical files, so everything is
written through one float formatter (17 significant digits, enough to
round-trip a double) with sorted JSON keys and fixed newlines.
"""

from __future__ import annotations

import csv
import os
from dataclasses import fields

import numpy as np

SNAPSHOT_HEADER = ("t", "x", "index_label", "re", "im", "density")
BOUNDARY_HEADER = ("t", "x12", "crossed_fraction_left", "crossed_fraction_right")


def format_float(value: float) -> str:
    value = float(value)
    if value != value:
        return "NaN"
    if value == float("inf"):
        return "Infinity"
    if value == float("-inf"):
        return "-Infinity"
    return f"{value:.17g}"


def _encode(obj, out: list, indent: int) -> None:
    pad = "  " * indent
    if obj is None:
        out.append("null")
    elif obj is True or obj is False:
        out.append("true" if obj else "false")
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        rendered = format_float(obj)
        # JSON has no literal for non-finite numbers; quote them
        out.append(rendered if rendered[-1].isdigit() else f'"{rendered}"')
    elif isinstance(obj, (complex, np.complexfloating)):
        _encode([obj.real, obj.imag], out, indent)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for i, (key, value) in enumerate(items):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(pad + "  ")
            _encode(key, out, indent + 1)
            out.append(": ")
            _encode(value, out, indent + 1)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(seq):
            out.append(pad + "  ")
            _encode(value, out, indent + 1)
            out.append(",\n" if i + 1 < len(seq) else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    out: list = []
    _encode(obj, out, 0)
    return "".join(out) + "\n"


def write_snapshots_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SNAPSHOT_HEADER)
        for t, x, label, re, im, density in rows:
            writer.writerow(
                (
                    format_float(t),
                    format_float(x),
                    label,
                    format_float(re),
                    format_float(im),
                    format_float(density),
                )
            )


def write_boundary_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BOUNDARY_HEADER)
        for t, x12, left, right in rows:
            writer.writerow(
                (format_float(t), format_float(x12), format_float(left), format_float(right))
            )


def config_echo(cfg) -> dict:
    echo = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, complex):
            value = [value.real, value.imag]
        echo[f.name] = value
    return echo


def write_run(result, out_dir: str) -> list[str]:
    """Write one run directory; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p = os.path.join(out_dir, "snapshots.csv")
    write_snapshots_csv(result.snapshot_rows, p)
    paths.append(p)
    p = os.path.join(out_dir, "boundary.csv")
    write_boundary_csv(result.boundary_rows, p)
    paths.append(p)
    p = os.path.join(out_dir, "summary.json")
    with open(p, "w", newline="") as fh:
        fh.write(dumps(result.summary))
    paths.append(p)
    p = os.path.join(out_dir, "config.json")
    with open(p, "w", newline="") as fh:
        fh.write(dumps(config_echo(result.config)))
    paths.append(p)
    return paths
