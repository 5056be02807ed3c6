"""Matrix-product-state backend: XYZ MPO, two-site DMRG, observables.

Site tensors have shape ``(left bond, physical, right bond)``; physical
index 0 is spin up. Bonds optionally carry Z2 labels (the parity of the
number of down spins to the left of the bond). With labels the DMRG update
never leaves the requested parity sector; tensors themselves stay dense.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError
from .exact import PureState, lanczos_lowest
from .model import SPIN_OPS, Bipartition, ChainSpec, ParitySector, XYZParams

__all__ = [
    "MPSState",
    "MPOOperator",
    "DmrgReport",
    "DmrgResult",
    "build_xyz_mpo",
    "dmrg_ground_state",
    "energy_variance",
    "energy_expectation",
    "schmidt_entropy",
    "schmidt_values",
    "mps_expectation",
    "onsite_expectations",
    "correlation_matrix",
    "parity_expectation",
    "mps_to_dense",
    "product_mps",
    "random_mps",
    "write_mps",
    "read_mps",
]

log = logging.getLogger(__name__)

MPS_MAGIC = b"FLUXMPS1"
DENSE_MAX_L = 16
DISCARD_WEIGHT = 1e-12
_LOCAL_DENSE_DIM = 256

_ID = np.eye(2)
_SP = np.array([[0.0, 1.0], [0.0, 0.0]])
_SM = np.array([[0.0, 0.0], [1.0, 0.0]])
_SZ = np.diag([0.5, -0.5])
_PARITY = np.diag([1.0, -1.0])


@dataclass
class MPSState:
    tensors: list
    spec: ChainSpec
    center: int | None = None
    labels: list | None = None

    def __post_init__(self):
        if len(self.tensors) != self.spec.length:
            raise ValueError("one tensor per site required")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors[:-1], self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError("bond dimension mismatch between neighbouring tensors")

    @property
    def L(self) -> int:
        return self.spec.length

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MPSState":
        labels = None if self.labels is None else [q.copy() for q in self.labels]
        return MPSState([t.copy() for t in self.tensors], self.spec, self.center, labels)

    def norm(self) -> float:
        return float(np.sqrt(abs(_overlap(self, self))))

    def canonicalize(self, center: int) -> "MPSState":
        """Return a copy in mixed canonical form around ``center`` (unlabeled)."""
        out = MPSState([t.copy() for t in self.tensors], self.spec, None, None)
        T = out.tensors
        for i in range(center):
            chi_l, d, chi_r = T[i].shape
            q, r = np.linalg.qr(T[i].reshape(chi_l * d, chi_r))
            T[i] = q.reshape(chi_l, d, q.shape[1])
            T[i + 1] = np.tensordot(r, T[i + 1], axes=(1, 0))
        for i in range(self.L - 1, center, -1):
            chi_l, d, chi_r = T[i].shape
            q, r = np.linalg.qr(T[i].reshape(chi_l, d * chi_r).T)
            T[i] = q.T.reshape(q.shape[1], d, chi_r)
            T[i - 1] = np.tensordot(T[i - 1], r.T, axes=(2, 0))
        out.center = center
        return out

    def isometry_errors(self) -> list[float]:
        """Deviation of each non-center tensor from its isometry condition."""
        if self.center is None:
            raise ValueError("state is not in canonical form")
        errs = []
        for i, A in enumerate(self.tensors):
            if i < self.center:
                M = A.reshape(-1, A.shape[2])
                errs.append(float(np.abs(M.conj().T @ M - np.eye(M.shape[1])).max()))
            elif i > self.center:
                M = A.reshape(A.shape[0], -1)
                errs.append(float(np.abs(M @ M.conj().T - np.eye(M.shape[0])).max()))
        return errs


@dataclass
class MPOOperator:
    tensors: list
    spec: ChainSpec
    params: XYZParams | None = None

    @property
    def bond_dim(self) -> int:
        return max(W.shape[1] for W in self.tensors[:-1]) if self.spec.length > 1 else 1

    def to_dense(self, max_L: int = 10) -> np.ndarray:
        """Dense matrix in the package basis (site ``j`` is bit ``j``)."""
        L = self.spec.length
        if L > max_L:
            raise ValueError(f"dense reconstruction limited to L <= {max_L}")
        # running tensor: (D, out_0..out_i, in_0..in_i)
        acc = self.tensors[0][0]  # (D, s, s')
        acc = acc.reshape(acc.shape[0], 2, 2)
        for i in range(1, L):
            W = self.tensors[i]
            acc = np.tensordot(acc, W, axes=(0, 0))  # (outs, ins, D, s, s')
            n = acc.ndim
            # move new out index next to the others
            nouts = i
            perm = [n - 3] + list(range(nouts)) + [n - 2] + list(range(nouts, 2 * nouts)) + [n - 1]
            acc = acc.transpose(perm)
        acc = acc[0]
        # axes: out_0..out_{L-1}, in_0..in_{L-1}; site L-1 most significant
        rev = list(range(L - 1, -1, -1))
        acc = acc.transpose(rev + [L + r for r in rev])
        return acc.reshape(1 << L, 1 << L)


@dataclass
class DmrgReport:
    energies: list = field(default_factory=list)
    truncation_errors: list = field(default_factory=list)
    variances: list = field(default_factory=list)
    max_bond: list = field(default_factory=list)
    energy_variance: float = float("nan")
    sweeps: int = 0
    stop_reason: str = ""
    converged: bool = False
    parity: float = float("nan")
    sector: str = "even"
    warnings: list = field(default_factory=list)

    @property
    def sector_mixing(self) -> bool:
        return abs(self.parity) < 0.99


@dataclass
class DmrgResult:
    energy: float
    state: MPSState
    report: DmrgReport

    def __iter__(self):
        return iter((self.energy, self.state, self.report))


def build_xyz_mpo(spec: ChainSpec, params: XYZParams) -> MPOOperator:
    """Nearest-neighbour automaton with states (done, S+, S-, Sz, pending)."""
    c_par, c_anti = params.flip_amplitudes
    c_zz = params.cz
    D = 5
    W = np.zeros((D, D, 2, 2))
    W[0, 0] = _ID
    W[1, 0] = c_par * _SP + c_anti * _SM
    W[2, 0] = c_par * _SM + c_anti * _SP
    W[3, 0] = c_zz * _SZ
    W[4, 1] = _SP
    W[4, 2] = _SM
    W[4, 3] = _SZ
    W[4, 4] = _ID
    L = spec.length
    tensors = []
    for i in range(L):
        Wi = W
        if i == 0:
            Wi = Wi[4:5]
        if i == L - 1:
            Wi = Wi[:, 0:1]
        tensors.append(Wi.copy())
    return MPOOperator(tensors, spec, params)


# ---------------------------------------------------------------- states


def _charges(sector: ParitySector) -> np.ndarray:
    return np.zeros(2, dtype=np.int8) if sector is ParitySector.FULL else np.array([0, 1], dtype=np.int8)


def product_mps(local_states) -> MPSState:
    tensors = [np.asarray(v, dtype=float if np.isrealobj(v) else complex).reshape(1, 2, 1) for v in local_states]
    mps = MPSState(tensors, ChainSpec(len(tensors)))
    return mps


def random_mps(spec: ChainSpec, chi: int, rng: np.random.Generator, sector=ParitySector.FULL, complex_=False) -> MPSState:
    """Random normalized MPS; with a parity sector the bonds are labelled."""
    sector = ParitySector.parse(sector)
    L = spec.length
    n = _charges(sector)
    target = 1 if sector is ParitySector.ODD else 0
    labels = [np.zeros(1, dtype=np.int8)]
    for i in range(1, L):
        dim = min(chi, 2 ** min(i, L - i))
        if sector is ParitySector.FULL:
            labels.append(np.zeros(dim, dtype=np.int8))
        else:
            labels.append((np.arange(dim) % 2).astype(np.int8))
    labels.append(np.array([target], dtype=np.int8))
    tensors = []
    for i in range(L):
        shape = (labels[i].size, 2, labels[i + 1].size)
        A = rng.standard_normal(shape)
        if complex_:
            A = A + 1j * rng.standard_normal(shape)
        mask = (labels[i][:, None, None] ^ n[None, :, None]) == labels[i + 1][None, None, :]
        tensors.append(A * mask)
    mps = MPSState(tensors, spec, None, labels)
    return _right_canonical_labelled(mps, n)


def _block_svd(M, row_q, col_q):
    """SVD of a parity-block-diagonal matrix, block by block."""
    Us, Ss, Vs, qs = [], [], [], []
    for q in np.unique(row_q):
        rows = np.flatnonzero(row_q == q)
        cols = np.flatnonzero(col_q == q)
        if rows.size == 0 or cols.size == 0:
            continue
        u, s, vh = np.linalg.svd(M[np.ix_(rows, cols)], full_matrices=False)
        U = np.zeros((M.shape[0], s.size), dtype=u.dtype)
        U[rows] = u
        V = np.zeros((s.size, M.shape[1]), dtype=vh.dtype)
        V[:, cols] = vh
        Us.append(U)
        Ss.append(s)
        Vs.append(V)
        qs.append(np.full(s.size, q, dtype=np.int8))
    if not Ss:
        raise ValueError("matrix has no allowed parity block")
    return np.hstack(Us), np.concatenate(Ss), np.vstack(Vs), np.concatenate(qs)


def _truncate(U, S, Vh, q, chi_max, discard=DISCARD_WEIGHT):
    order = np.argsort(-S, kind="stable")
    S = S[order]
    w = S**2
    tail = np.cumsum(w[::-1])[::-1]  # tail[k] = weight discarded when keeping k values
    keep = int(np.count_nonzero(tail > discard))
    keep = max(1, min(chi_max, keep))
    trunc = float(w[keep:].sum())
    sel = order[:keep]
    S = S[:keep]
    norm = np.linalg.norm(S)
    return U[:, sel], S / norm, Vh[sel], q[sel], trunc


def _right_canonical_labelled(mps: MPSState, n: np.ndarray) -> MPSState:
    T = [t.copy() for t in mps.tensors]
    labels = [q.copy() for q in mps.labels]
    for i in range(len(T) - 1, 0, -1):
        chi_l, d, chi_r = T[i].shape
        M = T[i].reshape(chi_l, d * chi_r)
        col_q = (labels[i + 1][None, :] ^ n[:, None]).reshape(-1)
        U, S, Vh, q = _block_svd(M, labels[i], col_q)
        T[i] = Vh.reshape(S.size, d, chi_r)
        T[i - 1] = np.tensordot(T[i - 1], U * S, axes=(2, 0))
        labels[i] = q
    T[0] /= np.linalg.norm(T[0])
    return MPSState(T, mps.spec, 0, labels)


def _infer_labels(mps: MPSState, sector: ParitySector):
    """Recover bond parity labels of a parity-definite MPS, or None."""
    labels = [np.zeros(1, dtype=np.int8)]
    for A in mps.tensors:
        ql = labels[-1]
        mag = np.abs(A)
        qr = np.zeros(A.shape[2], dtype=np.int8)
        for r in range(A.shape[2]):
            l, s = np.unravel_index(np.argmax(mag[:, :, r]), mag.shape[:2])
            qr[r] = ql[l] ^ s
        allowed = (ql[:, None, None] ^ np.array([0, 1])[None, :, None]) == qr[None, None, :]
        if np.abs(A[~allowed]).max(initial=0.0) > 1e-10 * max(mag.max(), 1e-300):
            return None
        labels.append(qr)
    if sector is not ParitySector.FULL and labels[-1][0] != (1 if sector is ParitySector.ODD else 0):
        return None
    return labels


# ---------------------------------------------------------- contractions


def _transfer(E, A, op=None, B=None):
    """Advance a left environment E[bra, ket] over one site."""
    B = A if B is None else B
    X = np.tensordot(E, A, axes=(1, 0))  # (bra, s', r)
    if op is not None:
        X = np.tensordot(op, X, axes=(1, 1)).transpose(1, 0, 2)  # (bra, s, r)
    return np.tensordot(B.conj(), X, axes=([0, 1], [0, 1]))  # (r_bra, r)


def _overlap(a: MPSState, b: MPSState) -> complex:
    E = np.ones((1, 1))
    for A, B in zip(b.tensors, a.tensors):
        E = _transfer(E, A, None, B)
    return complex(E[0, 0])


def _right_envs(mps: MPSState):
    """R[i][bra, ket] for the block of sites >= i (identity operators)."""
    L = mps.L
    R = [None] * (L + 1)
    R[L] = np.ones((1, 1))
    for i in range(L - 1, -1, -1):
        A = mps.tensors[i]
        X = np.tensordot(A, R[i + 1], axes=(2, 1))  # (l, s, r_bra)
        R[i] = np.tensordot(A.conj(), X, axes=([1, 2], [1, 2]))
    return R


def _left_envs(mps: MPSState):
    L = mps.L
    Lenv = [np.ones((1, 1))]
    for i in range(L - 1):
        Lenv.append(_transfer(Lenv[-1], mps.tensors[i]))
    return Lenv


def mps_expectation(mps: MPSState, ops: dict) -> complex:
    """``<psi| prod_i ops[i] |psi> / <psi|psi>`` for site -> 2x2 operator."""
    for i in ops:
        if not 0 <= i < mps.L:
            raise IndexError(f"site {i} out of range for L={mps.L}")
    E = np.ones((1, 1))
    N = np.ones((1, 1))
    for i, A in enumerate(mps.tensors):
        E = _transfer(E, A, ops.get(i))
        N = _transfer(N, A)
    return complex(E[0, 0] / N[0, 0])


def onsite_expectations(mps: MPSState, op: np.ndarray) -> np.ndarray:
    Lenv = _left_envs(mps)
    R = _right_envs(mps)
    norm = R[0][0, 0].real
    out = np.empty(mps.L, dtype=complex)
    for i, A in enumerate(mps.tensors):
        E = _transfer(Lenv[i], A, op)
        out[i] = np.sum(E * R[i + 1]) / norm
    return out


def correlation_matrix(mps: MPSState, op: np.ndarray) -> np.ndarray:
    """``C[i, j] = <op_i op_j>`` for all pairs (diagonal uses op @ op)."""
    L = mps.L
    Lenv = _left_envs(mps)
    R = _right_envs(mps)
    norm = R[0][0, 0].real
    C = np.empty((L, L), dtype=complex)
    op2 = op @ op
    for i in range(L):
        C[i, i] = np.sum(_transfer(Lenv[i], mps.tensors[i], op2) * R[i + 1]) / norm
        T = _transfer(Lenv[i], mps.tensors[i], op)
        for j in range(i + 1, L):
            A = mps.tensors[j]
            C[i, j] = np.sum(_transfer(T, A, op) * R[j + 1]) / norm
            C[j, i] = C[i, j]
            T = _transfer(T, A)
    return C


def parity_expectation(mps: MPSState) -> float:
    return mps_expectation(mps, {i: _PARITY for i in range(mps.L)}).real


def schmidt_values(mps: MPSState, cut: int) -> np.ndarray:
    """Schmidt coefficients across the bond between sites ``cut-1`` and ``cut``."""
    if not 0 < cut < mps.L:
        raise ValueError(f"cut must lie strictly inside the chain, got {cut}")
    c = mps.canonicalize(cut)
    A = c.tensors[cut]
    s = np.linalg.svd(A.reshape(A.shape[0], -1), compute_uv=False)
    return s / np.linalg.norm(s)


def schmidt_entropy(mps: MPSState, cut) -> float:
    m = cut.size if isinstance(cut, Bipartition) else int(cut)
    p = schmidt_values(mps, m) ** 2
    p = p[p > 1e-14]
    return float(-np.sum(p * np.log(p)))


def mps_to_dense(mps: MPSState, max_L: int = DENSE_MAX_L) -> PureState:
    L = mps.L
    if L > max_L:
        raise ValueError(f"dense conversion limited to L <= {max_L}")
    acc = mps.tensors[0][0]  # (s0, r)
    for A in mps.tensors[1:]:
        acc = np.tensordot(acc, A, axes=(-1, 0))
    acc = acc[..., 0]  # (s0, ..., s_{L-1})
    acc = acc.transpose(list(range(L - 1, -1, -1))).reshape(-1)
    acc = acc / np.linalg.norm(acc)
    return PureState(acc, mps.spec)


# ------------------------------------------------------ MPO environments


def _mpo_left(E, A, W):
    """E[a, bra, ket] -> next site."""
    X = np.tensordot(E, A, axes=(2, 0))  # (a, bra, s', r)
    X = np.tensordot(X, W, axes=([0, 2], [0, 3]))  # (bra, r, b, s)
    X = np.tensordot(A.conj(), X, axes=([0, 1], [0, 3]))  # (r_bra, r, b)
    return X.transpose(2, 0, 1)


def _mpo_right(E, A, W):
    """E[c, bra, ket] for the block right of a site -> include the site."""
    X = np.tensordot(A, E, axes=(2, 2))  # (l, s', c, bra)
    X = np.tensordot(X, W, axes=([1, 2], [3, 1]))  # (l, bra, b, s)
    X = np.tensordot(A.conj(), X, axes=([1, 2], [3, 1]))  # (l_bra, l, b)
    return X.transpose(2, 0, 1)


def energy_expectation(mps: MPSState, mpo: MPOOperator) -> float:
    E = np.ones((1, 1, 1))
    for A, W in zip(mps.tensors, mpo.tensors):
        E = _mpo_left(E, A, W)
    return float((E[0, 0, 0] / _overlap(mps, mps)).real)


def energy_variance(mps: MPSState, mpo: MPOOperator) -> float:
    """``<H^2> - <H>^2`` with two MPO layers contracted through the chain."""
    E1 = np.ones((1, 1, 1))
    E2 = np.ones((1, 1, 1, 1))  # (bra, a_upper, a_lower, ket)
    for A, W in zip(mps.tensors, mpo.tensors):
        E1 = _mpo_left(E1, A, W)
        X = np.tensordot(E2, A, axes=(3, 0))  # (bra, a, b, s'', r)
        X = np.tensordot(X, W, axes=([2, 3], [0, 3]))  # (bra, a, r, b', s')
        X = np.tensordot(X, W, axes=([1, 4], [0, 3]))  # (bra, r, b', a', s)
        X = np.tensordot(A.conj(), X, axes=([0, 1], [0, 4]))  # (r_bra, r, b', a')
        E2 = X.transpose(0, 3, 2, 1)
    norm = _overlap(mps, mps).real
    h = E1[0, 0, 0].real / norm
    h2 = E2[0, 0, 0, 0].real / norm
    return float(h2 - h * h)


# ------------------------------------------------------------------ DMRG


def _heff_apply(Lenv, W1, W2, Renv, theta):
    X = np.tensordot(Lenv, theta, axes=(2, 0))  # (a, l, s', t', r')
    X = np.tensordot(X, W1, axes=([0, 2], [0, 3]))  # (l, t', r', b, s)
    X = np.tensordot(X, W2, axes=([3, 1], [0, 3]))  # (l, r', s, c, t)
    X = np.tensordot(X, Renv, axes=([3, 1], [0, 2]))  # (l, s, t, r)
    return X


def _local_ground(Lenv, W1, W2, Renv, theta, mask, tol):
    shape = theta.shape
    idx = np.flatnonzero(mask.reshape(-1))
    dtype = np.result_type(theta, Lenv, Renv)

    def matvec(v):
        full = np.zeros(shape, dtype=dtype).reshape(-1)
        full[idx] = v
        return _heff_apply(Lenv, W1, W2, Renv, full.reshape(shape)).reshape(-1)[idx]

    v0 = theta.reshape(-1)[idx].astype(dtype)
    dim = idx.size
    if dim <= _LOCAL_DENSE_DIM:
        H = np.empty((dim, dim), dtype=dtype)
        e = np.zeros(dim, dtype=dtype)
        for k in range(dim):
            e[k] = 1
            H[:, k] = matvec(e)
            e[k] = 0
        w, v = np.linalg.eigh((H + H.conj().T) / 2)
        val, vec = float(w[0]), v[:, 0]
    else:
        if np.linalg.norm(v0) == 0:
            v0 = np.ones(dim, dtype=dtype)
        try:
            res = lanczos_lowest(matvec, v0, tol=tol, max_iter=400, krylov_dim=40)
        except ConvergenceError:
            res = lanczos_lowest(matvec, v0, tol=max(tol * 1e3, 1e-9), max_iter=2000, krylov_dim=60)
        val, vec = res.value, res.vector
    out = np.zeros(shape, dtype=dtype).reshape(-1)
    out[idx] = vec
    return val, out.reshape(shape)


def dmrg_ground_state(
    mpo: MPOOperator,
    chi_max: int = 128,
    max_sweeps: int = 50,
    variance_target: float = 1e-10,
    *,
    sector: ParitySector | str = ParitySector.EVEN,
    seed: int = 0,
    initial: MPSState | None = None,
    chi_init: int = 8,
    energy_tol: float = 1e-12,
    min_sweeps: int = 2,
    local_tol: float = 1e-11,
) -> DmrgResult:
    """Two-site DMRG; one sweep is a left-to-right plus a right-to-left pass.

    Stops when the energy variance reaches ``variance_target`` or the energy
    changes by less than ``energy_tol`` between sweeps. A variance above
    target is reported in ``report.warnings``; it is not an exception.
    """
    if chi_max < 2:
        raise ValueError("chi_max must be >= 2")
    if variance_target <= 0:
        raise ValueError("variance_target must be positive")
    sector = ParitySector.parse(sector)
    spec = mpo.spec
    L = spec.length
    n = _charges(sector)
    rng = np.random.Generator(np.random.Philox(seed))
    if initial is None:
        mps = random_mps(spec, min(chi_init, chi_max), rng, sector)
    else:
        labels = None if sector is ParitySector.FULL else _infer_labels(initial, sector)
        if labels is None:
            if sector is not ParitySector.FULL:
                raise ValueError("initial state is not parity-definite in the requested sector")
            labels = [np.zeros(t.shape[0], dtype=np.int8) for t in initial.tensors] + [np.zeros(1, dtype=np.int8)]
        mps = _right_canonical_labelled(MPSState([t.copy() for t in initial.tensors], spec, None, labels), n)
    T = mps.tensors
    Q = mps.labels
    W = mpo.tensors
    Lenv = [None] * (L + 1)
    Renv = [None] * (L + 1)
    Lenv[0] = np.ones((1, 1, 1))
    Renv[L] = np.ones((1, 1, 1))
    for i in range(L - 1, 0, -1):
        Renv[i] = _mpo_right(Renv[i + 1], T[i], W[i])

    report = DmrgReport(sector=sector.value)
    energy = np.inf
    prev = np.inf

    def update(i, direction):
        nonlocal energy
        theta = np.tensordot(T[i], T[i + 1], axes=(2, 0))
        mask = ((Q[i][:, None, None, None] ^ n[None, :, None, None] ^ n[None, None, :, None]) == Q[i + 2][None, None, None, :])
        energy, theta = _local_ground(Lenv[i], W[i], W[i + 1], Renv[i + 2], theta * mask, mask, local_tol)
        chi_l, d1, d2, chi_r = theta.shape
        M = theta.reshape(chi_l * d1, d2 * chi_r)
        row_q = (Q[i][:, None] ^ n[None, :]).reshape(-1)
        col_q = (n[:, None] ^ Q[i + 2][None, :]).reshape(-1)
        U, S, Vh, q, trunc = _truncate(*_block_svd(M, row_q, col_q), chi_max)
        Q[i + 1] = q
        if direction > 0:
            T[i] = U.reshape(chi_l, d1, S.size)
            T[i + 1] = (S[:, None] * Vh).reshape(S.size, d2, chi_r)
            Lenv[i + 1] = _mpo_left(Lenv[i], T[i], W[i])
        else:
            T[i] = (U * S).reshape(chi_l, d1, S.size)
            T[i + 1] = Vh.reshape(S.size, d2, chi_r)
            Renv[i + 1] = _mpo_right(Renv[i + 2], T[i + 1], W[i + 1])
        return trunc

    for sweep in range(1, max_sweeps + 1):
        trunc = 0.0
        for i in range(0, L - 1):
            trunc = max(trunc, update(i, +1))
        for i in range(L - 2, -1, -1):
            trunc = max(trunc, update(i, -1))
        mps.center = 0
        var = energy_variance(mps, mpo)
        report.energies.append(float(energy))
        report.truncation_errors.append(trunc)
        report.variances.append(var)
        report.max_bond.append(max(mps.bond_dims) if L > 1 else 1)
        report.sweeps = sweep
        log.debug("sweep %d: E=%.14f var=%.3e chi=%d", sweep, energy, var, report.max_bond[-1])
        if sweep >= min_sweeps or var <= variance_target:
            if var <= variance_target:
                report.stop_reason = "variance"
                break
            if abs(prev - energy) < energy_tol:
                report.stop_reason = "energy"
                break
        prev = energy
    else:
        report.stop_reason = "max_sweeps"
    report.energy_variance = report.variances[-1]
    report.converged = report.energy_variance <= variance_target
    if not report.converged:
        report.warnings.append(
            f"energy variance {report.energy_variance:.3e} above target {variance_target:.1e} (stopped on {report.stop_reason})"
        )
    report.parity = parity_expectation(mps)
    if report.sector_mixing:
        report.warnings.append(f"parity expectation {report.parity:.4f} indicates sector mixing")
    return DmrgResult(float(energy_expectation(mps, mpo)), mps, report)


# -------------------------------------------------------------- file IO


def write_mps(path, mps: MPSState) -> None:
    """Checkpoint: magic, then per site three uint64 dims and (re, im) float64 pairs."""
    with open(Path(path), "wb") as fh:
        fh.write(MPS_MAGIC)
        for A in mps.tensors:
            fh.write(struct.pack("<3Q", *A.shape))
            fh.write(np.ascontiguousarray(A, dtype=np.complex128).astype("<c16").tobytes())


def read_mps(path) -> MPSState:
    data = Path(path).read_bytes()
    if data[:8] != MPS_MAGIC:
        raise ValueError("not an MPS checkpoint (bad magic)")
    pos = 8
    tensors = []
    while pos < len(data):
        dims = struct.unpack("<3Q", data[pos : pos + 24])
        pos += 24
        count = int(np.prod(dims))
        block = np.frombuffer(data[pos : pos + 16 * count], dtype="<c16")
        if block.size != count:
            raise ValueError("truncated MPS checkpoint")
        pos += 16 * count
        A = block.astype(np.complex128).reshape(dims)
        if not np.any(A.imag):
            A = A.real.copy()
        tensors.append(A)
    return MPSState(tensors, ChainSpec(len(tensors)))
