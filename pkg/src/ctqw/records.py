"""Deterministic experiment records: canonical JSON plus plot-ready CSV.

Reruns with the same config and seed must produce byte-identical files, so
everything about serialization is pinned here. Floats are printed with 17
significant digits (enough for exact binary round-trips) and always keep a
decimal marker so they reload as floats. JSON objects are emitted with
sorted keys by a small recursive printer; NaN and infinities are rejected
outright. CSV files start with a single '#' comment line that gnuplot
skips, then a header row.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import ValidationError

__all__ = [
    "ExperimentRecord",
    "canonical_json",
    "format_float",
    "record_from_json",
    "render_csv",
    "write_csv",
]


def format_float(value: float) -> str:
    """Render a float with 17 significant digits, keeping it a float.

    format(x, '.17g') already round-trips IEEE doubles; integral values get
    a trailing '.0' appended so json.loads and CSV readers see a float, not
    an int. Non-finite values have no place in a record.
    """
    x = float(value)
    if math.isnan(x) or math.isinf(x):
        raise ValidationError("non-finite value is not representable in a record")
    text = format(x, ".17g")
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def _coerce(obj):
    # numpy scalars and arrays sneak into rows easily; normalize up front
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _emit(obj, indent: int, out: list) -> None:
    obj = _coerce(obj)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        pad = " " * (indent + 2)
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad)
            _emit(item, indent + 2, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(" " * indent + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        keys = sorted(obj)
        for key in keys:
            if not isinstance(key, str):
                raise ValidationError(f"record keys must be strings, got {key!r}")
        pad = " " * (indent + 2)
        out.append("{\n")
        for i, key in enumerate(keys):
            out.append(pad + json.dumps(key) + ": ")
            _emit(obj[key], indent + 2, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(" " * indent + "}")
    else:
        raise ValidationError(f"unsupported type in record: {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Serialize with sorted keys, 2-space indent, 17-digit floats."""
    out: list = []
    _emit(obj, 0, out)
    out.append("\n")
    return "".join(out)


@dataclass(frozen=True)
class ExperimentRecord:
    """One experiment run: config echo, per-row results, summary stats.

    wall_clock_s stays None by default; byte-identical reruns are part of
    the contract and a timing field would break them.
    """

    kind: str
    config: dict
    seed: int | None
    rows: tuple
    summary: dict
    version: str = __version__
    rng: str = "philox"
    wall_clock_s: float | None = None

    def to_json(self) -> str:
        return canonical_json(
            {
                "kind": self.kind,
                "version": self.version,
                "rng": self.rng,
                "seed": self.seed,
                "config": self.config,
                "rows": list(self.rows),
                "summary": self.summary,
                "wall_clock_s": self.wall_clock_s,
            }
        )

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def record_from_json(text: str) -> ExperimentRecord:
    data = json.loads(text)
    required = {"kind", "version", "rng", "seed", "config", "rows", "summary"}
    missing = required - set(data)
    if missing:
        raise ValidationError(f"record is missing fields: {sorted(missing)}")
    return ExperimentRecord(
        kind=data["kind"],
        config=data["config"],
        seed=data["seed"],
        rows=tuple(data["rows"]),
        summary=data["summary"],
        version=data["version"],
        rng=data["rng"],
        wall_clock_s=data.get("wall_clock_s"),
    )


def _cell(value) -> str:
    value = _coerce(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        if any(ch in value for ch in ',"\n\r'):
            raise ValidationError(f"CSV cell may not contain commas or newlines: {value!r}")
        return value
    raise ValidationError(f"unsupported CSV cell type: {type(value).__name__}")


def render_csv(columns: list, rows, comment: str = "") -> str:
    """Header + rows, preceded by one '#' comment line for gnuplot."""
    lines = []
    if comment:
        if "\n" in comment:
            raise ValidationError("CSV comment must be a single line")
        lines.append("# " + comment)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_cell(row[col]) for col in columns))
    return "\n".join(lines) + "\n"


def write_csv(path, columns: list, rows, comment: str = "") -> None:
    Path(path).write_text(render_csv(columns, rows, comment), encoding="utf-8")
