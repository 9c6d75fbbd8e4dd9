"""Serialisation helpers shared by the command line front end."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from . import __version__


def header_line(config):
    """Single comment line recording the artifact version and the full run config."""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return f"# artifact {__version__} config={payload}\n"


def fmt_float(v):
    return f"{float(v):.17g}"


def _jsonable(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def to_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def table_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
