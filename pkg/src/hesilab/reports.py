"""Deterministic CSV and JSON report writers."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import fields, is_dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np


def fmt_float(x) -> str:
    """17 significant digits, ``inf``/``-inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (complex, np.complexfloating)):
        return f"{fmt_float(v.real)}{'+' if not v.imag < 0 else '-'}{fmt_float(abs(v.imag))}j"
    return str(v)


def csv_text(columns, rows) -> str:
    """RFC-4180 CSV (CRLF line ends) with a fixed column order.

    ``rows`` are mappings; missing keys become empty cells, extra keys are an
    error so that column drift is caught early.
    """
    columns = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(columns)
    for r in rows:
        extra = set(r) - set(columns)
        if extra:
            raise KeyError(f"unexpected report columns: {sorted(extra)}")
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def to_plain(obj):
    """Recursively convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt_float(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_plain(obj.real), to_plain(obj.imag)]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, enum.Enum):
        return obj.value if isinstance(obj.value, (str, int)) else obj.name
    if hasattr(obj, "as_dict"):
        return to_plain(obj.as_dict())
    if is_dataclass(obj):
        return to_plain({f.name: getattr(obj, f.name) for f in fields(obj)})
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def json_text(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_csv(path, columns, rows) -> Path:
    return _write(path, csv_text(columns, rows))


def write_json(path, obj) -> Path:
    return _write(path, json_text(obj))
