"""Result rows: canonical CSV output, JSON mirror and a file validator."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ValidationError
from .fluctuations import BETA_DENOMINATOR_FLOOR

__all__ = ["ResultRow", "HEADER", "fmt", "write_rows_csv", "write_rows_json", "read_rows_csv", "validate_rows_file"]

HEADER = (
    "L", "J", "gamma", "Jz", "axis", "cut", "backend", "energy", "energy_residual_or_variance",
    "S_vN", "var_omega", "var_complement", "var_total", "reduced", "beta", "imbalance", "G_r", "xi",
)
_TEXT = {"axis", "backend"}
_INT = {"L", "cut"}
_REQUIRED = {"L", "J", "gamma", "Jz", "axis", "cut", "backend"}
BACKEND_LABELS = ("ed", "dmrg", "ed+dmrg")


@dataclass
class ResultRow:
    L: int
    J: float
    gamma: float
    Jz: float
    axis: str
    cut: int
    backend: str
    energy: float | None = None
    energy_residual_or_variance: float | None = None
    S_vN: float | None = None
    var_omega: float | None = None
    var_complement: float | None = None
    var_total: float | None = None
    reduced: float | None = None
    beta: float | None = None
    imbalance: float | None = None
    G_r: float | None = None
    xi: float | None = None
    flags: list = field(default_factory=list)

    def csv_fields(self) -> list[str]:
        return [fmt(getattr(self, name)) for name in HEADER]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = str(v)
        return d


assert tuple(f.name for f in fields(ResultRow))[: len(HEADER)] == HEADER


def fmt(value) -> str:
    """17 significant digits for floats; ``None`` becomes an empty field."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value + 0.0:.17g}"
    return str(value)


def write_rows_csv(path, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in rows:
            w.writerow(row.csv_fields())


def write_rows_json(path, rows) -> None:
    with open(Path(path), "w") as fh:
        json.dump({"header": list(HEADER), "rows": [r.to_dict() for r in rows]}, fh, indent=1)
        fh.write("\n")


def read_rows_csv(path) -> list[ResultRow]:
    rows = []
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != HEADER:
            raise ValidationError(f"{path}: header does not match the result-row schema")
        for k, rec in enumerate(r, start=2):
            if len(rec) != len(HEADER):
                raise ValidationError(f"{path}:{k}: expected {len(HEADER)} fields, got {len(rec)}")
            vals = {}
            for name, raw in zip(HEADER, rec):
                if raw == "":
                    vals[name] = None
                elif name in _TEXT:
                    vals[name] = raw
                elif name in _INT:
                    vals[name] = int(raw)
                else:
                    vals[name] = float(raw)
            rows.append(ResultRow(**vals))
    return rows


def validate_rows_file(path, tol: float = 1e-9) -> list[str]:
    """Return a list of problems; an empty list means the file is valid."""
    problems = []
    try:
        with open(Path(path), newline="") as fh:
            records = list(csv.reader(fh))
    except OSError as e:
        return [str(e)]
    if not records or tuple(records[0]) != HEADER:
        return ["header does not match the result-row schema"]
    for k, rec in enumerate(records[1:], start=2):
        where = f"line {k}"
        if len(rec) != len(HEADER):
            problems.append(f"{where}: expected {len(HEADER)} fields, got {len(rec)}")
            continue
        vals = {}
        for name, raw in zip(HEADER, rec):
            if raw == "":
                if name in _REQUIRED:
                    problems.append(f"{where}: required field {name} is empty")
                vals[name] = None
                continue
            if name in _TEXT:
                vals[name] = raw
                continue
            try:
                vals[name] = int(raw) if name in _INT else float(raw)
            except ValueError:
                problems.append(f"{where}: {name}={raw!r} is not numeric")
                vals[name] = None
                continue
            if name not in _INT and math.isnan(vals[name]):
                problems.append(f"{where}: {name} is NaN; missing values must be empty")
        if vals.get("axis") not in (None, "x", "y", "z"):
            problems.append(f"{where}: axis {vals['axis']!r} is not x, y or z")
        if vals.get("backend") not in (None, *BACKEND_LABELS):
            problems.append(f"{where}: backend {vals['backend']!r} unknown")
        beta = vals.get("beta")
        if beta is not None and not -1 - 1e-10 <= beta <= 1 + 1e-10:
            problems.append(f"{where}: beta={beta} outside [-1, 1]")
        vo, vc, vt, red = (vals.get(n) for n in ("var_omega", "var_complement", "var_total", "reduced"))
        if None not in (vo, vc, vt, red):
            scale = max(1.0, abs(vo), abs(vc), abs(vt))
            if abs(red - 0.5 * (vo + vc - vt)) > tol * scale:
                problems.append(f"{where}: reduced={red} inconsistent with variances")
            if abs(vo + vc) < BETA_DENOMINATOR_FLOOR and beta is not None:
                problems.append(f"{where}: beta must be empty when var_omega + var_complement vanishes")
            if abs(vo + vc) >= BETA_DENOMINATOR_FLOOR and beta is None:
                problems.append(f"{where}: beta missing although it is defined")
        xi = vals.get("xi")
        if xi is not None and xi <= 0:
            problems.append(f"{where}: xi={xi} must be positive")
    return problems
