"""Deterministic report files.

The JSON report holds only values that follow from the config and the seed;
wall-clock data goes to a ``.meta.json`` sidecar so reruns compare equal.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import re
import time
from pathlib import Path

import numpy as np

SCHEMA = "mourre-lab/1"


def plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj):
    return json.dumps(plain(obj), sort_keys=True, indent=2) + "\n"


def slug(label):
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower() or "op"


def csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def plot_text(rows, header):
    lines = [f"# {header}\n"]
    lines += [" ".join(f"{float(x):.17g}" for x in row) + "\n" for row in rows]
    return "".join(lines)


class ReportWriter:
    """Collects files for one scenario and writes them under ``out_dir``."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files = {}

    def add_table(self, label, rows):
        """CSV (header row first) plus a two-column plot file; returns the names."""
        base = slug(label)
        self.files[base + ".csv"] = csv_text(rows)
        self.files[base + ".dat"] = plot_text(rows[1:], " ".join(rows[0]))
        return [base + ".csv", base + ".dat"]

    def write(self, report, started, elapsed):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        report = dict(report, schema=SCHEMA)
        (self.out_dir / "report.json").write_text(dumps(report), encoding="utf-8")
        for name, text in self.files.items():
            (self.out_dir / name).write_text(text, encoding="utf-8")
        meta = {
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
            "elapsed_seconds": round(elapsed, 3),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        (self.out_dir / "report.meta.json").write_text(dumps(meta), encoding="utf-8")
        return self.out_dir / "report.json"


def compare_reports(actual, expected, rtol=1e-6, atol=1e-12, field_tol=None, path=""):
    """List of mismatches between two report trees.

    Numbers compare with ``|a - e| <= atol + rtol |e|``; ``field_tol`` maps a
    key name to its own ``(rtol, atol)``. Everything else compares exactly.
    """
    field_tol = field_tol or {}
    out = []
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return [f"{path}: expected an object"]
        for key in sorted(set(expected) | set(actual)):
            if key not in actual or key not in expected:
                out.append(f"{path}/{key}: present on one side only")
                continue
            r, a = field_tol.get(key, (rtol, atol))
            out += compare_reports(actual[key], expected[key], r, a, field_tol, f"{path}/{key}")
        return out
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(actual) != len(expected):
            return [f"{path}: list length differs"]
        for i, (x, y) in enumerate(zip(actual, expected)):
            out += compare_reports(x, y, rtol, atol, field_tol, f"{path}[{i}]")
        return out
    numeric = (int, float)
    if isinstance(expected, numeric) and not isinstance(expected, bool):
        if not isinstance(actual, numeric) or isinstance(actual, bool):
            return [f"{path}: expected a number, got {actual!r}"]
        if abs(actual - expected) > atol + rtol * abs(expected):
            return [f"{path}: {actual!r} vs {expected!r}"]
        return []
    return [] if actual == expected else [f"{path}: {actual!r} vs {expected!r}"]
