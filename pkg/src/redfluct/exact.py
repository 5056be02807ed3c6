"""Exact diagonalization backend for the open XYZ chain.

Everything works on the full ``2**L`` amplitude vector; the Hamiltonian is
never stored as a matrix except in the small-``L`` oracles
(:func:`dense_hamiltonian`, :func:`full_spectrum_small`).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._core import apply_xyz
from .errors import ConvergenceError
from .model import (
    SPIN_OPS,
    Bipartition,
    ChainSpec,
    ParitySector,
    SpinAxis,
    XYZParams,
    basis_magnetizations,
    basis_parities,
)

__all__ = [
    "PureState",
    "ReducedDensityMatrix",
    "GroundState",
    "LanczosResult",
    "apply_hamiltonian",
    "hamiltonian_matvec",
    "dense_hamiltonian",
    "lanczos_lowest",
    "ground_state_lanczos",
    "full_spectrum_small",
    "reduced_density_matrix",
    "von_neumann_entropy",
    "entanglement_entropy",
    "apply_onsite",
    "apply_onsite_sum",
    "product_state",
    "random_state",
    "random_product_state",
    "write_state",
    "read_state",
]

ED_DEFAULT_MAX_L = 20
ED_HARD_MAX_L = 24
RDM_MAX_SITES = 14
DENSE_MAX_L = 10
KRYLOV_MEMORY_BYTES = 512 * 2**20
STATE_MAGIC = b"FLUXPSI1"


@dataclass(frozen=True)
class PureState:
    """Amplitudes over the ``2**L`` computational basis (read-only)."""

    amplitudes: np.ndarray
    spec: ChainSpec

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.ndim != 1 or amps.shape[0] != self.spec.hilbert_dim:
            raise ValueError(
                f"state has {amps.shape} amplitudes, expected ({self.spec.hilbert_dim},) for L={self.spec.length}"
            )
        if not (np.issubdtype(amps.dtype, np.floating) or np.issubdtype(amps.dtype, np.complexfloating)):
            amps = amps.astype(np.float64)
        amps = np.array(amps, copy=True)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def L(self) -> int:
        return self.spec.length

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.amplitudes / n, self.spec)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class ReducedDensityMatrix:
    matrix: np.ndarray
    omega: Bipartition

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass
class LanczosResult:
    value: float
    vector: np.ndarray
    residual_norm: float
    matvecs: int
    restarts: int


@dataclass
class GroundState:
    energy: float
    state: PureState
    residual_norm: float
    sector: ParitySector
    matvecs: int = 0
    magnetization: float | None = None
    notes: list[str] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (energy, state, residual_norm)
        return iter((self.energy, self.state, self.residual_norm))


def hamiltonian_matvec(L: int, params: XYZParams):
    """Return ``f(x) -> H x`` for real or complex vectors of length ``2**L``."""
    c_par, c_anti = params.flip_amplitudes
    c_zz = params.cz

    def matvec(x: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(x):
            return matvec(np.ascontiguousarray(x.real)) + 1j * matvec(np.ascontiguousarray(x.imag))
        x = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty_like(x)
        apply_xyz(x, out, L, c_zz, c_par, c_anti)
        return out

    return matvec


def apply_hamiltonian(state: PureState, params: XYZParams) -> PureState:
    """``H|psi>`` without normalization."""
    return PureState(hamiltonian_matvec(state.L, params)(state.amplitudes), state.spec)


def dense_hamiltonian(L: int, params: XYZParams, max_L: int = 12) -> np.ndarray:
    if L > max_L:
        raise ValueError(f"dense Hamiltonian limited to L <= {max_L}")
    matvec = hamiltonian_matvec(L, params)
    n = 1 << L
    H = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        H[:, k] = matvec(e)
        e[k] = 0.0
    return H


def full_spectrum_small(spec: ChainSpec, params: XYZParams) -> np.ndarray:
    if spec.length > DENSE_MAX_L:
        raise ValueError(f"full spectrum limited to L <= {DENSE_MAX_L}, got {spec.length}")
    return np.linalg.eigvalsh(dense_hamiltonian(spec.length, params))


def _default_krylov_dim(n: int, itemsize: int) -> int:
    return int(np.clip(KRYLOV_MEMORY_BYTES // (n * itemsize), 20, 120))


def lanczos_lowest(matvec, v0, tol=1e-12, max_iter=2000, krylov_dim=None) -> LanczosResult:
    """Lowest eigenpair of a Hermitian operator by restarted Lanczos.

    Every Krylov vector is reorthogonalized against the whole basis (two
    Gram-Schmidt passes). When the basis is full, the iteration restarts from
    the current Ritz vector. ``tol`` bounds ``||H x - theta x||``.
    """
    x = np.array(v0, dtype=np.result_type(v0, np.float64), copy=True)
    n = x.shape[0]
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("start vector is zero")
    x /= nrm
    if krylov_dim is None:
        krylov_dim = _default_krylov_dim(n, x.itemsize)
    krylov_dim = max(2, min(krylov_dim, n))
    matvecs = 0
    restarts = 0
    while True:
        m = min(krylov_dim, max(1, max_iter - matvecs - 1))
        V = np.empty((m, n), dtype=x.dtype)
        V[0] = x
        alphas, betas = [], []
        y = np.ones(1)
        for i in range(m):
            w = matvec(V[i])
            matvecs += 1
            a = float(np.vdot(V[i], w).real)
            alphas.append(a)
            w = w - a * V[i]
            if i > 0:
                w -= betas[-1] * V[i - 1]
            basis = V[: i + 1]
            before = np.linalg.norm(w)
            w -= basis.T @ (basis.conj() @ w)
            b = float(np.linalg.norm(w))
            if b < 0.7 * before:
                # second pass only after heavy cancellation
                w -= basis.T @ (basis.conj() @ w)
                b = float(np.linalg.norm(w))
            if i == 0:
                theta, y = alphas[0], np.ones(1)
            else:
                evals, evecs = eigh_tridiagonal(
                    np.array(alphas), np.array(betas), select="i", select_range=(0, 0)
                )
                theta, y = evals[0], evecs[:, 0]
            scale = max(abs(theta), 1.0)
            if b <= 1e-14 * scale or b * abs(y[-1]) < 0.05 * tol or i == m - 1:
                break
            V[i + 1] = w / b
            betas.append(b)
        x = V[: len(alphas)].T @ y
        x /= np.linalg.norm(x)
        hx = matvec(x)
        matvecs += 1
        theta = float(np.vdot(x, hx).real)
        residual = float(np.linalg.norm(hx - theta * x))
        if residual <= tol:
            return LanczosResult(theta, x, residual, matvecs, restarts)
        if matvecs >= max_iter - 1:
            raise ConvergenceError(
                f"Lanczos did not reach residual {tol:g} in {max_iter} matvecs (last {residual:.3e})"
            )
        restarts += 1


def _start_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.standard_normal(n)


def ground_state_lanczos(
    spec: ChainSpec,
    params: XYZParams,
    sector: ParitySector | str = ParitySector.EVEN,
    tol: float = 1e-12,
    *,
    seed: int = 0,
    max_iter: int = 2000,
    max_L: int = ED_DEFAULT_MAX_L,
    krylov_dim: int | None = None,
    resolve_magnetization: bool = True,
) -> GroundState:
    """Lowest eigenstate of H inside a parity sector.

    When ``params`` conserve total ``S^z`` and the ground level spans several
    magnetization sectors, the state of smallest ``|S^z|`` (positive on ties)
    is returned, so the result is always an ``S^z`` eigenstate in that case.
    """
    sector = ParitySector.parse(sector)
    L = spec.length
    if L > min(max_L, ED_HARD_MAX_L):
        raise ValueError(f"L={L} exceeds the exact-diagonalization ceiling {min(max_L, ED_HARD_MAX_L)}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    matvec = hamiltonian_matvec(L, params)
    v0 = _start_vector(spec.hilbert_dim, seed)
    if sector is not ParitySector.FULL:
        parity = basis_parities(L)
        v0[parity != (0 if sector is ParitySector.EVEN else 1)] = 0.0
    res = lanczos_lowest(matvec, v0, tol=tol, max_iter=max_iter, krylov_dim=krylov_dim)
    gs = GroundState(res.value, PureState(res.vector, spec), res.residual_norm, sector, res.matvecs)
    if resolve_magnetization and params.conserves(SpinAxis.Z):
        gs = _resolve_magnetization(gs, matvec, tol, max_iter, krylov_dim)
    return gs


def _resolve_magnetization(gs: GroundState, matvec, tol, max_iter, krylov_dim) -> GroundState:
    L = gs.state.L
    x = np.asarray(gs.state.amplitudes)
    mags = basis_magnetizations(L)
    levels = np.unique(mags)
    weights = {int(m): float(np.sum(np.abs(x[mags == m]) ** 2)) for m in levels}
    candidates = [m for m, w in weights.items() if w > 1e-8]
    if len(candidates) == 1:
        gs.magnetization = candidates[0] / 2
        return gs
    best = None
    for m in sorted(candidates, key=lambda m: (abs(m), -m)):
        v = np.where(mags == m, x, 0.0)
        res = lanczos_lowest(matvec, v, tol=tol, max_iter=max_iter, krylov_dim=krylov_dim)
        if best is None or res.value < best[1].value - 1e-10:
            best = (m, res)
    m, res = best
    out = GroundState(
        res.value,
        PureState(res.vector, gs.state.spec),
        res.residual_norm,
        gs.sector,
        gs.matvecs + res.matvecs,
        magnetization=m / 2,
    )
    out.notes.append(f"degenerate magnetization sectors {sorted(c / 2 for c in candidates)}; chose S^z={m / 2}")
    return out


def reduced_density_matrix(state: PureState, omega: Bipartition, max_sites: int = RDM_MAX_SITES) -> ReducedDensityMatrix:
    """Partial trace over the complement of the left block ``omega``."""
    if omega.length != state.L:
        raise ValueError("bipartition and state have different chain lengths")
    m = omega.size
    if m > max_sites:
        raise ValueError(f"subsystem of {m} sites exceeds the reduced-density-matrix ceiling {max_sites}")
    M = np.asarray(state.amplitudes).reshape(1 << (state.L - m), 1 << m)
    rho = M.T @ M.conj()
    rho = (rho + rho.conj().T) / 2
    return ReducedDensityMatrix(rho, omega)


def _entropy_from_probabilities(p: np.ndarray) -> float:
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rdm: ReducedDensityMatrix) -> float:
    """``-Tr rho ln rho`` in nats."""
    return _entropy_from_probabilities(rdm.eigenvalues())


def entanglement_entropy(state: PureState, omega: Bipartition) -> float:
    """Entropy of ``omega`` from the Schmidt values of the amplitude matrix."""
    m = omega.size
    M = np.asarray(state.amplitudes).reshape(1 << (state.L - m), 1 << m)
    s = np.linalg.svd(M, compute_uv=False)
    return _entropy_from_probabilities(s**2)


def apply_onsite(psi: np.ndarray, L: int, site: int, op: np.ndarray) -> np.ndarray:
    """Apply a 2x2 operator to ``site`` of an amplitude vector."""
    if not 0 <= site < L:
        raise IndexError(f"site {site} out of range for L={L}")
    t = psi.reshape(1 << (L - site - 1), 2, 1 << site)
    out = np.einsum("ab,ibj->iaj", op, t)
    return out.reshape(-1)


def apply_onsite_sum(psi: np.ndarray, L: int, axis: SpinAxis, sites) -> np.ndarray:
    """``A_S |psi>`` with ``A_S = sum_{i in S} S^axis_i``."""
    axis = SpinAxis.parse(axis)
    sites = list(sites)
    if axis is SpinAxis.Z:
        k = np.arange(psi.shape[0], dtype=np.int64)
        diag = np.zeros(psi.shape[0])
        for i in sites:
            if not 0 <= i < L:
                raise IndexError(f"site {i} out of range for L={L}")
            diag += 0.5 - ((k >> i) & 1)
        return diag * psi
    out = np.zeros(psi.shape[0], dtype=complex)
    for i in sites:
        out += apply_onsite(psi, L, i, SPIN_OPS[axis])
    return out


def product_state(local_states, normalize: bool = True) -> PureState:
    """Tensor product of single-site 2-vectors; ``local_states[j]`` is site ``j``."""
    vecs = [np.asarray(v, dtype=complex) for v in local_states]
    psi = np.ones(1, dtype=complex)
    for v in vecs:
        # site j is bit j, so later sites are more significant
        psi = np.kron(v, psi)
    if normalize:
        psi = psi / np.linalg.norm(psi)
    return PureState(psi, ChainSpec(len(vecs)))


def random_state(L: int, rng: np.random.Generator) -> PureState:
    n = 1 << L
    psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(psi / np.linalg.norm(psi), ChainSpec(L))


def random_product_state(L: int, rng: np.random.Generator) -> PureState:
    return product_state([rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(L)])


def write_state(path, state: PureState) -> None:
    """Binary dump: magic, L as uint64, then little-endian (re, im) float64 pairs."""
    amps = np.asarray(state.amplitudes, dtype=np.complex128)
    with open(Path(path), "wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<Q", state.L))
        fh.write(amps.astype("<c16").tobytes())


def read_state(path) -> PureState:
    data = Path(path).read_bytes()
    if data[:8] != STATE_MAGIC:
        raise ValueError("not a state dump (bad magic)")
    (L,) = struct.unpack("<Q", data[8:16])
    amps = np.frombuffer(data[16:], dtype="<c16")
    if amps.shape[0] != 1 << L:
        raise ValueError("truncated state dump")
    return PureState(amps.astype(np.complex128), ChainSpec(int(L)))
