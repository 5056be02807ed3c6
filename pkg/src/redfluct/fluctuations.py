"""Fluctuation observables of sums of on-site spin operators.

For ``A_S = sum_{i in S} S^a_i`` and a bipartition into a left block and
its complement this module evaluates subsystem and total variances, the
reduced fluctuation (minus the connected cross-correlator of the two
halves), the visibility, and the phase diagnostics used for the XYZ chain.

States are either :class:`~redfluct.exact.PureState` or
:class:`~redfluct.mps.MPSState`; both go through :func:`view_of`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import comb

from . import exact
from . import mps as mpsmod
from .model import SPIN_OPS, Bipartition, SpinAxis

__all__ = [
    "FluctuationReport",
    "view_of",
    "onsite_expectation",
    "connected_correlator",
    "subsystem_variance",
    "total_variance",
    "reduced_fluctuation",
    "visibility",
    "imbalance",
    "string_correlator_avg",
    "correlator_decay",
    "binomial_counting_variance",
    "binomial_counting_variance_bruteforce",
    "fluctuation_report",
    "ROUTES",
]

ROUTES = ("variance_diff", "cross", "correlator_sum")
BETA_DENOMINATOR_FLOOR = 1e-14

# real operator R and phase with S^a = phase * R, so that real states stay real
_REAL_FORM = {
    SpinAxis.X: (1.0, np.array([[0.0, 0.5], [0.5, 0.0]])),
    SpinAxis.Y: (1j, np.array([[0.0, -0.5], [0.5, 0.0]])),
    SpinAxis.Z: (1.0, np.array([[0.5, 0.0], [0.0, -0.5]])),
}


class DenseView:
    backend = "ed"

    def __init__(self, state: exact.PureState):
        self.state = state
        self.psi = np.asarray(state.amplitudes)
        self.L = state.L
        self._corr = {}

    def _apply_sum(self, axis, sites):
        phase, R = _REAL_FORM[axis]
        out = np.zeros_like(self.psi)
        for i in sites:
            out = out + exact.apply_onsite(self.psi, self.L, i, R)
        return phase, out

    def sum_moments(self, axis, sites_a, sites_b):
        """(<A>, <B>, <A B>) by applying the operator sums to the state."""
        pa, va = self._apply_sum(axis, sites_a)
        pb, vb = self._apply_sum(axis, sites_b)
        ea = (pa * np.vdot(self.psi, va)).real
        eb = (pb * np.vdot(self.psi, vb)).real
        eab = (np.conj(pa) * pb * np.vdot(va, vb)).real
        return float(ea), float(eb), float(eab)

    def moments(self, axis):
        """On-site means m_i and the matrix <a_i a_j>."""
        if axis not in self._corr:
            phase, R = _REAL_FORM[axis]
            phis = np.stack([exact.apply_onsite(self.psi, self.L, i, R) for i in range(self.L)])
            m = (phase * (phis @ self.psi.conj())).real
            C = (phis.conj() @ phis.T).real
            self._corr[axis] = (m, (C + C.T) / 2)
        return self._corr[axis]

    def pair(self, axis, i, j):
        op = SPIN_OPS[axis]
        ai = exact.apply_onsite(self.psi, self.L, i, op)
        aj = exact.apply_onsite(self.psi, self.L, j, op)
        aij = exact.apply_onsite(aj, self.L, i, op)
        return (
            float(np.vdot(self.psi, ai).real),
            float(np.vdot(self.psi, aj).real),
            float(np.vdot(self.psi, aij).real),
        )

    def entropy(self, omega: Bipartition) -> float:
        if omega.size <= exact.RDM_MAX_SITES:
            return exact.von_neumann_entropy(exact.reduced_density_matrix(self.state, omega))
        return exact.entanglement_entropy(self.state, omega)


class MPSView:
    backend = "dmrg"

    def __init__(self, state: mpsmod.MPSState):
        self.state = state
        self.L = state.L
        self._corr = {}

    def moments(self, axis):
        if axis not in self._corr:
            op = SPIN_OPS[axis]
            m = mpsmod.onsite_expectations(self.state, op).real
            C = mpsmod.correlation_matrix(self.state, op).real
            self._corr[axis] = (m, C)
        return self._corr[axis]

    def sum_moments(self, axis, sites_a, sites_b):
        m, C = self.moments(axis)
        a, b = list(sites_a), list(sites_b)
        return float(m[a].sum()), float(m[b].sum()), float(C[np.ix_(a, b)].sum())

    def pair(self, axis, i, j):
        m, C = self.moments(axis)
        return float(m[i]), float(m[j]), float(C[i, j])

    def entropy(self, omega: Bipartition) -> float:
        return mpsmod.schmidt_entropy(self.state, omega)


def view_of(state):
    """Wrap a state in the common expectation interface (idempotent)."""
    if isinstance(state, (DenseView, MPSView)):
        return state
    if isinstance(state, exact.PureState):
        return DenseView(state)
    if isinstance(state, mpsmod.MPSState):
        return MPSView(state)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _check_site(view, i):
    if not 0 <= i < view.L:
        raise IndexError(f"site {i} out of range for L={view.L}")


def _check_omega(view, omega: Bipartition):
    if omega.length != view.L:
        raise ValueError(f"bipartition for L={omega.length} applied to a chain of L={view.L}")


def onsite_expectation(state, axis, site: int) -> float:
    view = view_of(state)
    _check_site(view, site)
    axis = SpinAxis.parse(axis)
    return view.sum_moments(axis, [site], [site])[0]


def connected_correlator(state, axis, i: int, j: int) -> float:
    view = view_of(state)
    _check_site(view, i)
    _check_site(view, j)
    if i == j:
        raise ValueError("connected correlator needs two distinct sites")
    ai, aj, aij = view.pair(SpinAxis.parse(axis), i, j)
    return aij - ai * aj


def _variance(view, axis, sites) -> float:
    a, _, aa = view.sum_moments(axis, sites, sites)
    return aa - a * a


def subsystem_variance(state, axis, omega: Bipartition) -> float:
    view = view_of(state)
    _check_omega(view, omega)
    return _variance(view, SpinAxis.parse(axis), omega.omega)


def total_variance(state, axis) -> float:
    view = view_of(state)
    return _variance(view, SpinAxis.parse(axis), range(view.L))


def reduced_fluctuation(state, axis, omega: Bipartition, route: str = "variance_diff") -> float:
    """Reduced fluctuation of ``A`` across ``omega`` by one of three routes.

    ``cross``: <A_O><A_Oc> - <A_O A_Oc>.
    ``variance_diff``: (var A_O + var A_Oc - var A_tot) / 2.
    ``correlator_sum``: minus the sum of on-site connected correlators
    across the cut.
    """
    view = view_of(state)
    _check_omega(view, omega)
    axis = SpinAxis.parse(axis)
    if route == "cross":
        a, b, ab = view.sum_moments(axis, omega.omega, omega.complement)
        return a * b - ab
    if route == "variance_diff":
        v_o = _variance(view, axis, omega.omega)
        v_c = _variance(view, axis, omega.complement)
        v_t = _variance(view, axis, range(view.L))
        return 0.5 * (v_o + v_c - v_t)
    if route == "correlator_sum":
        m, C = view.moments(axis)
        o, c = list(omega.omega), list(omega.complement)
        connected = C[np.ix_(o, c)] - np.outer(m[o], m[c])
        return float(-connected.sum())
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")


def _beta(v_o, v_c, v_t):
    denom = v_o + v_c
    if abs(denom) < BETA_DENOMINATOR_FLOOR:
        return None
    return 1.0 - v_t / denom


def visibility(state, axis, omega: Bipartition) -> float | None:
    """``1 - var(A_tot) / (var(A_O) + var(A_Oc))``; ``None`` when 0/0."""
    view = view_of(state)
    _check_omega(view, omega)
    axis = SpinAxis.parse(axis)
    return _beta(
        _variance(view, axis, omega.omega),
        _variance(view, axis, omega.complement),
        _variance(view, axis, range(view.L)),
    )


def imbalance(state) -> float:
    """Sublattice imbalance of <S^z_j>, even/odd by 0-based site index."""
    view = view_of(state)
    m, _ = view.moments(SpinAxis.Z)
    even = m[0::2].sum()
    odd = m[1::2].sum()
    return float((even - odd) / (m.sum() + view.L))


def string_correlator_avg(state, r: int) -> float:
    """Average of |<S^x_j S^x_{j+r}>| over the L - r pairs at separation r."""
    view = view_of(state)
    L = view.L
    if not 1 <= r <= L - 1:
        raise ValueError(f"separation must satisfy 1 <= r <= L-1, got {r}")
    _, C = view.moments(SpinAxis.X)
    return float(np.mean(np.abs(np.diagonal(C, offset=r))))


def correlator_decay(state, axis, ref: int | None = None, r_max: int | None = None):
    """``[(r, |<a_ref a_ref+r>_c|)]`` for r = 1..r_max from a bulk site."""
    view = view_of(state)
    L = view.L
    ref = L // 4 if ref is None else ref
    r_max = L // 2 if r_max is None else r_max
    m, C = view.moments(SpinAxis.parse(axis))
    out = []
    for r in range(1, r_max + 1):
        j = ref + r
        if j >= L:
            break
        out.append((r, float(abs(C[ref, j] - m[ref] * m[j]))))
    return out


def binomial_counting_variance(n_sites: int) -> float:
    """Subsystem S^z variance for independent +-1/2 spins: ``n_sites / 4``."""
    if n_sites < 1:
        raise ValueError("need at least one site")
    return n_sites / 4


def binomial_counting_variance_bruteforce(n_sites: int) -> float:
    k = np.arange(n_sites + 1)
    p = comb(n_sites, k, exact=False) / 2.0**n_sites
    sz = k - n_sites / 2
    return float(np.sum(p * sz**2) - np.sum(p * sz) ** 2)


@dataclass
class FluctuationReport:
    axis: str
    omega: int
    L: int
    var_omega: float
    var_complement: float
    var_total: float
    reduced: float
    visibility: float | None
    entropy: float | None
    backend: str

    def __post_init__(self):
        check = 0.5 * (self.var_omega + self.var_complement - self.var_total)
        if not math.isclose(self.reduced, check, rel_tol=0, abs_tol=1e-10):
            raise ValueError(f"inconsistent report: reduced={self.reduced} but variance form gives {check}")
        if self.visibility is not None and not -1 - 1e-10 <= self.visibility <= 1 + 1e-10:
            raise ValueError(f"visibility {self.visibility} outside [-1, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def fluctuation_report(state, axis, omega: Bipartition, with_entropy: bool = True) -> FluctuationReport:
    view = view_of(state)
    _check_omega(view, omega)
    axis = SpinAxis.parse(axis)
    v_o = _variance(view, axis, omega.omega)
    v_c = _variance(view, axis, omega.complement)
    v_t = _variance(view, axis, range(view.L))
    return FluctuationReport(
        axis=axis.value,
        omega=omega.size,
        L=view.L,
        var_omega=v_o,
        var_complement=v_c,
        var_total=v_t,
        reduced=0.5 * (v_o + v_c - v_t),
        visibility=_beta(v_o, v_c, v_t),
        entropy=view.entropy(omega) if with_entropy else None,
        backend=view.backend,
    )
