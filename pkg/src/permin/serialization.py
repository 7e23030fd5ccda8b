"""
Serialization
=============
Canonical JSON and CSV forms for rationals, points, systems and reports.

Rationals are written as "p/q" (or "p"), +inf as "inf", and every JSON
document is dumped with sorted keys so reruns are byte-identical.
"""

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from .errors import ValidationError
from .modules.dynamics import (
    CirclePoint,
    Point,
    SymbolPoint,
    SystemDescriptor,
    SystemKind,
    TorusPoint,
)
from .modules.observables import parse_word


def rational_from_json(value: Any, name: str = "value") -> Fraction:
    try:
        if isinstance(value, float):
            return Fraction(value).limit_denominator(10 ** 12)
        return Fraction(str(value).strip())
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"{name}: not a rational: {value!r}") from exc


def to_plain(value: Any) -> Any:
    """Convert results into JSON-ready data."""
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [to_plain(v) for v in value]
    return str(value)


def dumps(data: Any) -> str:
    return json.dumps(to_plain(data), sort_keys=True, indent=2, ensure_ascii=False)


def point_from_json(system: SystemDescriptor, data: Any) -> Point:
    if system.kind == SystemKind.CIRCLE:
        return CirclePoint(rational_from_json(data, "point"))
    if system.kind == SystemKind.TORUS_CAT:
        if not isinstance(data, (list, tuple)) or len(data) != 2:
            raise ValidationError(f"torus point must be a pair, got {data!r}")
        return TorusPoint(rational_from_json(data[0], "point.x"), rational_from_json(data[1], "point.y"))
    if isinstance(data, dict):
        return SymbolPoint(parse_word(data["period"]), parse_word(data.get("prefix", "")))
    return SymbolPoint(parse_word(data))


def point_to_json(point: Point) -> Any:
    return point.to_dict()


def system_from_json(data: Dict[str, Any]) -> SystemDescriptor:
    return SystemDescriptor.from_dict(data)


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data) + "\n", encoding="utf-8")
    return path


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([to_plain(v) if not isinstance(v, str) else v for v in row])
    return buffer.getvalue()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows), encoding="utf-8")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ValidationError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno) from exc


def rows_from(records: List[Dict[str, Any]], columns: Sequence[str]) -> List[List[Any]]:
    return [[r.get(c, "") for c in columns] for r in records]
