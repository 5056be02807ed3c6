"""Reduced fluctuations and entanglement scaling in open spin-1/2 XYZ chains."""
from ._core import KERNEL
from .model import (
    Bipartition,
    ChainSpec,
    ParitySector,
    SpinAxis,
    XYZParams,
    critical_line_distance,
    parity_of_basis_state,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL",
    "Bipartition",
    "ChainSpec",
    "ParitySector",
    "SpinAxis",
    "XYZParams",
    "critical_line_distance",
    "parity_of_basis_state",
]
