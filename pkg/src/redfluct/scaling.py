"""Finite-size scaling: area / log / volume classification and decay lengths."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ScalingSeries",
    "ScalingFit",
    "CorrelationFit",
    "fit_form",
    "classify_scaling",
    "correlation_length",
    "read_series_csv",
    "write_series_csv",
    "FORMS",
    "CLASS_OF_FORM",
]

FORMS = ("constant", "log", "linear")
CLASS_OF_FORM = {"constant": "area", "log": "log", "linear": "volume"}
_N_PARAMS = {"constant": 1, "log": 2, "linear": 2, "mixed": 3}
CORRELATOR_FLOOR = 1e-12
# slopes of ln|C| flatter than this are treated as no decay
SLOPE_FLOOR = 1e-10


@dataclass
class ScalingSeries:
    points: list
    label: str = ""

    def __post_init__(self):
        pts = [(int(L), float(v)) for L, v in self.points]
        Ls = [p[0] for p in pts]
        if any(L <= 0 for L in Ls):
            raise ValueError("sizes must be positive")
        if any(b <= a for a, b in zip(Ls, Ls[1:])):
            raise ValueError("sizes must be strictly increasing")
        self.points = pts

    @property
    def L(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def restrict(self, min_L: int) -> "ScalingSeries":
        return ScalingSeries([p for p in self.points if p[0] >= min_L], self.label)

    def scaled(self, c: float) -> "ScalingSeries":
        return ScalingSeries([(L, c * v) for L, v in self.points], self.label)


@dataclass
class ScalingFit:
    scaling_class: str
    coefficients: tuple
    rss: float
    scores: dict
    fits: dict = field(default_factory=dict)
    r_squared: dict = field(default_factory=dict)
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "class": self.scaling_class,
            "coefficients": list(self.coefficients),
            "rss": self.rss,
            "scores": self.scores,
            "fits": {k: {"a": a, "b": b, "rss": r} for k, (a, b, r) in self.fits.items()},
            "r_squared": self.r_squared,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass
class CorrelationFit:
    xi: float
    r_squared: float
    amplitude: float = float("nan")
    rejected: bool = False

    def __iter__(self):
        return iter((self.xi, self.r_squared))


def _design(L: np.ndarray, form: str) -> np.ndarray:
    one = np.ones_like(L)
    if form == "constant":
        return one[:, None]
    if form == "log":
        return np.column_stack([one, np.log(L)])
    if form == "linear":
        return np.column_stack([one, L])
    if form == "mixed":
        return np.column_stack([one, np.log(L), L])
    raise ValueError(f"unknown form {form!r}")


def fit_form(series: ScalingSeries, form: str):
    """Least-squares (a, b, rss) for ``a``, ``a + b ln L`` or ``a + b L``.

    For ``mixed`` (``a + b ln L + c L``) the tuple is (a, b, c, rss).
    """
    L, y = series.L, series.values
    k = _N_PARAMS.get(form)
    if k is None:
        raise ValueError(f"unknown form {form!r}")
    if len(y) < max(2, k + 1) and form != "constant":
        raise ValueError(f"need at least {k + 1} points for a {form} fit")
    if len(y) < 1:
        raise ValueError("empty series")
    X = _design(L, form)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rss = float(np.sum((y - X @ coef) ** 2))
    if form == "constant":
        return float(coef[0]), 0.0, rss
    if form == "mixed":
        return float(coef[0]), float(coef[1]), float(coef[2]), rss
    return float(coef[0]), float(coef[1]), rss


def classify_scaling(series: ScalingSeries, min_points: int = 4, include_mixed: bool = False) -> ScalingFit:
    """Pick the form with the smallest ``n ln(rss/n) + 2k``.

    The residual sum is floored relative to the data scale so that exact
    synthetic data do not produce ``-inf`` scores.
    """
    n = len(series.points)
    if n < min_points:
        raise ValueError(f"classification needs at least {min_points} points, got {n}")
    y = series.values
    scale = float(np.max(np.abs(y)))
    floor = n * (1e-13 * (scale if scale > 0 else 1.0)) ** 2
    fits, scores, r2 = {}, {}, {}
    tss = float(np.sum((y - y.mean()) ** 2))
    forms = FORMS + (("mixed",) if include_mixed else ())
    for form in forms:
        res = fit_form(series, form)
        rss = res[-1]
        scores[form] = n * math.log(max(rss, floor) / n) + 2 * _N_PARAMS[form]
        if form != "mixed":
            fits[form] = res
        r2[form] = 1.0 - rss / tss if tss > 0 else float("nan")
    best = min(scores, key=lambda f: (scores[f], _N_PARAMS[f]))
    best_res = fit_form(series, best)
    scaling_class = CLASS_OF_FORM.get(best, best)
    return ScalingFit(
        scaling_class=scaling_class,
        coefficients=tuple(best_res[:-1]),
        rss=best_res[-1],
        scores=scores,
        fits=fits,
        r_squared=r2,
        label=series.label,
    )


def correlation_length(decay, floor: float = CORRELATOR_FLOOR) -> CorrelationFit:
    """Fit ``|C(r)| = A exp(-r / xi)`` by least squares on ``ln |C|``.

    A slope that is not negative beyond round-off means no decay; the fit is
    then flagged as rejected and ``xi`` is ``inf``.
    """
    pts = [(float(r), float(c)) for r, c in decay if abs(c) > floor]
    if len(pts) < 3:
        raise ValueError("need at least 3 correlator values above the floor")
    r = np.array([p[0] for p in pts])
    y = np.log(np.abs([p[1] for p in pts]))
    X = np.column_stack([np.ones_like(r), r])
    (a, slope), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ np.array([a, slope])
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / tss if tss > 0 else 0.0
    if slope > -SLOPE_FLOOR:
        return CorrelationFit(math.inf, r2, float(np.exp(a)), rejected=True)
    return CorrelationFit(-1.0 / slope, r2, float(np.exp(a)))


def write_series_csv(path, series: ScalingSeries) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["L", "value"])
        for L, v in series.points:
            w.writerow([L, f"{v:.17g}"])


def read_series_csv(path, label: str | None = None) -> ScalingSeries:
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if [h.strip() for h in header] != ["L", "value"]:
            raise ValueError("series file must have header 'L,value'")
        pts = [(int(row[0]), float(row[1])) for row in r if row and row[1].strip() != ""]
    return ScalingSeries(pts, label if label is not None else Path(path).stem)
