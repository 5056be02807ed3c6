"""Shot-based estimation of reduced fluctuations.

A shot measures every site in the eigenbasis of one spin component; the
estimator only uses per-shot subsystem sums, as an experiment would.
Randomness comes from a Philox counter-based generator keyed by the seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exact import ED_DEFAULT_MAX_L, PureState
from .model import Bipartition, SpinAxis

__all__ = [
    "ShotMatrix",
    "sample_shots",
    "estimate_reduced_fluctuation",
    "jackknife_reduced_fluctuation",
    "write_shots_csv",
    "read_shots_csv",
]

_SQ2 = 1 / np.sqrt(2)
# rows are <+| and <-| of the chosen spin component in the (up, down) basis
_ROTATIONS = {
    SpinAxis.X: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    SpinAxis.Y: np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=complex),
    SpinAxis.Z: np.eye(2, dtype=complex),
}


@dataclass(frozen=True)
class ShotMatrix:
    values: np.ndarray  # (N, L), entries +-0.5
    axis: SpinAxis
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("shot matrix must be two-dimensional")
        if not np.all(np.abs(v) == 0.5):
            raise ValueError("shot values must be +-1/2")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_shots(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]


def _rotate(psi: np.ndarray, L: int, U: np.ndarray) -> np.ndarray:
    t = psi.astype(complex).reshape([2] * L)
    # tensor axis a holds site L-1-a
    for a in range(L):
        t = np.moveaxis(np.tensordot(U, t, axes=(1, a)), 0, a)
    return t.reshape(-1)


def sample_shots(state: PureState, axis, n_shots: int, seed: int, max_L: int = ED_DEFAULT_MAX_L) -> ShotMatrix:
    """Draw ``n_shots`` product-basis measurement records from the Born rule."""
    axis = SpinAxis.parse(axis)
    L = state.L
    if L > max_L:
        raise ValueError(f"sampling limited to L <= {max_L}")
    if n_shots < 1:
        raise ValueError("need at least one shot")
    psi = np.asarray(state.amplitudes)
    if axis is not SpinAxis.Z:
        psi = _rotate(psi, L, _ROTATIONS[axis])
    prob = np.abs(psi) ** 2
    cdf = np.cumsum(prob)
    cdf /= cdf[-1]
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random(n_shots)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    bits = (idx[:, None] >> np.arange(L)[None, :]) & 1
    return ShotMatrix(0.5 - bits.astype(np.float64), axis, seed)


def _sums(shots: ShotMatrix, omega: Bipartition):
    if omega.length != shots.L:
        raise ValueError("bipartition does not match the shot record width")
    v = shots.values
    return v[:, : omega.size].sum(axis=1), v[:, omega.size :].sum(axis=1)


def _estimator(sa, sb, sab, n):
    # unbiased covariance, sign flipped
    return -(sab - sa * sb / n) / (n - 1)


def jackknife_reduced_fluctuation(shots: ShotMatrix, omega: Bipartition):
    """Full-sample estimate, delete-1 replicates, and jackknife standard error."""
    a, b = _sums(shots, omega)
    n = a.size
    if n < 2:
        raise ValueError("need at least two shots")
    sa, sb, sab = a.sum(), b.sum(), (a * b).sum()
    est = _estimator(sa, sb, sab, n)
    if n < 3:
        return est, np.array([]), float("nan")
    reps = _estimator(sa - a, sb - b, sab - a * b, n - 1)
    se = np.sqrt((n - 1) / n * np.sum((reps - reps.mean()) ** 2))
    return float(est), reps, float(se)


def estimate_reduced_fluctuation(shots: ShotMatrix, omega: Bipartition) -> tuple[float, float]:
    est, _, se = jackknife_reduced_fluctuation(shots, omega)
    return est, se


def write_shots_csv(path, shots: ShotMatrix) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shot"] + [f"site_{j}" for j in range(shots.L)])
        for k, row in enumerate(shots.values):
            w.writerow([k] + ["0.5" if x > 0 else "-0.5" for x in row])


def read_shots_csv(path, axis="z", seed: int = 0) -> ShotMatrix:
    with open(Path(path), newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[0] != "shot" or header[1:] != [f"site_{j}" for j in range(len(header) - 1)]:
            raise ValueError("unexpected shot file header")
        rows = [[float(x) for x in row[1:]] for row in r if row]
    return ShotMatrix(np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1), SpinAxis.parse(axis), seed)
