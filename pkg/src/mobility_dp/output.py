"""Flat-file writers. CSV uses '.' decimals, '\\n' line endings and a header row."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .config import OutputConfig


def format_cell(value, precision: int = 9) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.{precision}g}"


def _json_cell(value, precision):
    if value is None or isinstance(value, (bool, int, str)):
        return value
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.{precision}g}")


def write_table(directory, stem: str, header, rows, output: OutputConfig) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    p = output.precision
    if output.format == "json":
        path = directory / f"{stem}.json"
        records = [{h: _json_cell(v, p) for h, v in zip(header, row)} for row in rows]
        path.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
        return path
    path = directory / f"{stem}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v, p) for v in row])
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "item"):  # numpy scalars
        return _clean(obj.item())
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
