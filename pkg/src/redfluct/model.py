"""Domain types shared by the solvers and the observables.

Conventions used everywhere in the package:

* spin operators are ``S^a = sigma^a / 2`` (hbar = 1);
* basis index ``k`` encodes site ``j`` in bit ``j``; a zero bit is spin up;
* subsystems are contiguous left blocks ``[0, m)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChainSpec",
    "XYZParams",
    "SpinAxis",
    "Bipartition",
    "ParitySector",
    "SPIN_OPS",
    "critical_line_distance",
    "parity_of_basis_state",
    "basis_parities",
    "basis_magnetizations",
]


@dataclass(frozen=True)
class ChainSpec:
    """Open spin-1/2 chain of ``length`` sites."""

    length: int

    def __post_init__(self):
        if not isinstance(self.length, (int, np.integer)) or isinstance(self.length, bool):
            raise TypeError("chain length must be an integer")
        if self.length < 2:
            raise ValueError(f"chain length must be >= 2, got {self.length}")

    @property
    def boundary(self) -> str:
        return "open"

    @property
    def dimension(self) -> int:
        return 1

    @property
    def hilbert_dim(self) -> int:
        return 1 << self.length

    def half(self) -> "Bipartition":
        if self.length % 2:
            raise ValueError("half bipartition needs an even chain length")
        return Bipartition(self.length // 2, self.length)


@dataclass(frozen=True)
class XYZParams:
    """Exchange couplings of the XYZ chain.

    The Hamiltonian is ``coupling_sign * sum_j [(J+gamma)/2 SxSx
    + (J-gamma)/2 SySy + Jz SzSz]`` over the ``L-1`` bonds.
    ``coupling_sign=-1`` is the chain exactly as usually written (an overall
    minus sign); ``+1`` flips every exchange constant.
    """

    J: float = 1.0
    gamma: float = 0.0
    Jz: float = 0.0
    coupling_sign: float = -1.0

    def __post_init__(self):
        for name in ("J", "gamma", "Jz"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.coupling_sign not in (-1.0, 1.0):
            raise ValueError("coupling_sign must be +1 or -1")

    @property
    def cx(self) -> float:
        return self.coupling_sign * (self.J + self.gamma) / 2

    @property
    def cy(self) -> float:
        return self.coupling_sign * (self.J - self.gamma) / 2

    @property
    def cz(self) -> float:
        return self.coupling_sign * self.Jz

    @property
    def flip_amplitudes(self) -> tuple[float, float]:
        """Amplitudes of the two-spin flips (parallel pair, antiparallel pair)."""
        return (self.cx - self.cy) / 4, (self.cx + self.cy) / 4

    def conserves(self, axis: "SpinAxis") -> bool:
        """True when the total spin along ``axis`` commutes with H."""
        if axis is SpinAxis.Z:
            return self.cx == self.cy
        if axis is SpinAxis.Y:
            return self.cx == self.cz
        return self.cy == self.cz


class SpinAxis(str, enum.Enum):
    X = "x"
    Y = "y"
    Z = "z"

    @classmethod
    def parse(cls, value) -> "SpinAxis":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


SPIN_OPS = {
    SpinAxis.X: np.array([[0, 0.5], [0.5, 0]], dtype=complex),
    SpinAxis.Y: np.array([[0, -0.5j], [0.5j, 0]], dtype=complex),
    SpinAxis.Z: np.array([[0.5, 0], [0, -0.5]], dtype=complex),
}


@dataclass(frozen=True)
class Bipartition:
    """Left block ``[0, size)`` of a chain of ``length`` sites."""

    size: int
    length: int

    def __post_init__(self):
        if not 0 < self.size < self.length:
            raise ValueError(f"subsystem size must satisfy 0 < m < L, got m={self.size}, L={self.length}")

    @classmethod
    def half(cls, length: int) -> "Bipartition":
        return ChainSpec(length).half()

    @property
    def omega(self) -> range:
        return range(0, self.size)

    @property
    def complement(self) -> range:
        return range(self.size, self.length)

    def swapped_size(self) -> int:
        return self.length - self.size


class ParitySector(str, enum.Enum):
    EVEN = "even"
    ODD = "odd"
    FULL = "full"

    @classmethod
    def parse(cls, value) -> "ParitySector":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


def critical_line_distance(params: XYZParams) -> float:
    """Signed offset of ``Jz`` from the nearer of the lines ``Jz = +-(J+gamma)/2``."""
    offsets = [params.Jz - s * (params.J + params.gamma) / 2 for s in (1.0, -1.0)]
    # ties go to the + line
    return min(offsets, key=abs)


def parity_of_basis_state(bits: int, spec: ChainSpec) -> ParitySector:
    if not 0 <= bits < spec.hilbert_dim:
        raise ValueError(f"basis index {bits} out of range for L={spec.length}")
    return ParitySector.EVEN if bin(bits).count("1") % 2 == 0 else ParitySector.ODD


def _popcounts(L: int) -> np.ndarray:
    k = np.arange(1 << L, dtype=np.uint32)
    counts = np.zeros(1 << L, dtype=np.int8)
    for j in range(L):
        counts += ((k >> j) & 1).astype(np.int8)
    return counts


def basis_parities(L: int) -> np.ndarray:
    """0 for even, 1 for odd, one entry per basis index."""
    return (_popcounts(L) & 1).astype(np.int8)


def basis_magnetizations(L: int) -> np.ndarray:
    """Total S^z of every basis state, in units of 1/2 (i.e. ``2 S^z``)."""
    return (L - 2 * _popcounts(L).astype(np.int16)).astype(np.int16)
