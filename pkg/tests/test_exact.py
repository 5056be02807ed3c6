import numpy as np
import pytest

from redfluct import _core
from redfluct.errors import ConvergenceError
from redfluct.exact import (
    PureState,
    apply_hamiltonian,
    dense_hamiltonian,
    entanglement_entropy,
    full_spectrum_small,
    ground_state_lanczos,
    hamiltonian_matvec,
    lanczos_lowest,
    product_state,
    random_state,
    read_state,
    reduced_density_matrix,
    von_neumann_entropy,
    write_state,
)
from redfluct.fluctuations import total_variance
from redfluct.model import Bipartition, ChainSpec, ParitySector, XYZParams, basis_parities

from .conftest import DOWN, UP


def rand_params(rng):
    return XYZParams(rng.uniform(-1.5, 1.5), rng.uniform(-1, 1), rng.uniform(-1.5, 1.5))


def test_apply_hamiltonian_micro_examples():
    up_up = product_state([UP, UP])
    out = apply_hamiltonian(up_up, XYZParams(1, 0, 1)).amplitudes
    assert np.allclose(out, -0.25 * up_up.amplitudes, atol=1e-15)

    up_down = product_state([UP, DOWN])
    down_up = product_state([DOWN, UP])
    out = apply_hamiltonian(up_down, XYZParams(1, 0, 0)).amplitudes
    assert np.allclose(out, -0.25 * down_up.amplitudes, atol=1e-15)

    zero = PureState(np.zeros(16), ChainSpec(4))
    assert not np.any(apply_hamiltonian(zero, XYZParams(0.3, 0.2, 0.1)).amplitudes)


def test_hermiticity(rng):
    for _ in range(10):
        L = int(rng.choice([3, 4, 6, 8]))
        p = rand_params(rng)
        phi, psi = random_state(L, rng), random_state(L, rng)
        a = np.vdot(phi.amplitudes, apply_hamiltonian(psi, p).amplitudes)
        b = np.vdot(psi.amplitudes, apply_hamiltonian(phi, p).amplitudes)
        assert abs(a - np.conj(b)) < 1e-12


def test_parity_conservation(rng):
    for _ in range(10):
        L = int(rng.choice([4, 5, 8]))
        p = rand_params(rng)
        even = basis_parities(L) == 0
        psi = random_state(L, rng).amplitudes
        projected = np.where(even, psi, 0)
        h_then_p = np.where(even, apply_hamiltonian(PureState(psi, ChainSpec(L)), p).amplitudes, 0)
        p_then_h = apply_hamiltonian(PureState(projected, ChainSpec(L)), p).amplitudes
        assert np.max(np.abs(p_then_h - h_then_p)) < 1e-12
        assert np.max(np.abs(p_then_h[~even])) < 1e-12


def test_ground_state_examples():
    spec = ChainSpec(2)
    gs = ground_state_lanczos(spec, XYZParams(1, 0, 0), ParitySector.FULL)
    assert gs.energy == pytest.approx(-0.25, abs=1e-12)
    triplet = np.array([0, 1, 1, 0]) / np.sqrt(2)
    assert abs(abs(np.vdot(triplet, gs.state.amplitudes)) - 1) < 1e-10

    energy, _, _ = ground_state_lanczos(spec, XYZParams(1, 0, 0), ParitySector.EVEN)
    assert energy == pytest.approx(0.0, abs=1e-12)

    energy, _, residual = ground_state_lanczos(ChainSpec(6), XYZParams(0, 0, 0))
    assert energy == 0.0 and residual == 0.0


def test_full_spectrum_examples(rng):
    assert np.allclose(full_spectrum_small(ChainSpec(2), XYZParams(1, 0, 0)), [-0.25, 0, 0, 0.25])
    assert np.allclose(full_spectrum_small(ChainSpec(2), XYZParams(0, 0, 0)), 0)
    with pytest.raises(ValueError):
        full_spectrum_small(ChainSpec(11), XYZParams())
    for _ in range(5):
        L = int(rng.choice([3, 4, 6]))
        p = rand_params(rng)
        e = ground_state_lanczos(ChainSpec(L), p, ParitySector.FULL).energy
        assert abs(e - full_spectrum_small(ChainSpec(L), p)[0]) < 1e-10


@pytest.mark.parametrize("L", [4, 6, 8])
def test_lanczos_matches_dense_oracle(L):
    rng = np.random.default_rng(L)
    even = basis_parities(L) == 0
    for _ in range(17):
        p = rand_params(rng)
        H = dense_hamiltonian(L, p)
        exact_even = np.linalg.eigvalsh(H[np.ix_(even, even)])[0]
        assert abs(ground_state_lanczos(ChainSpec(L), p).energy - exact_even) < 1e-10


def test_dense_matches_matvec(rng):
    p = rand_params(rng)
    H = dense_hamiltonian(5, p)
    assert np.allclose(H, H.T, atol=1e-15)
    x = rng.standard_normal(32)
    assert np.allclose(H @ x, hamiltonian_matvec(5, p)(x), atol=1e-13)


def test_conserved_case_has_sharp_total_sz(rng):
    for L in (6, 8, 10):
        gs = ground_state_lanczos(ChainSpec(L), XYZParams(1, 0, rng.uniform(-1, 1)))
        assert total_variance(gs.state, "z") < 1e-10


def test_magnetization_resolution_at_ferromagnet():
    gs = ground_state_lanczos(ChainSpec(8), XYZParams(1, 0, 0.5))
    assert gs.magnetization == 0.0
    assert gs.notes and "degenerate" in gs.notes[0]


def test_lanczos_raises_when_budget_exhausted(rng):
    A = np.diag(np.arange(200.0)) + 0.01 * rng.standard_normal((200, 200))
    A = A + A.T
    with pytest.raises(ConvergenceError):
        lanczos_lowest(lambda v: A @ v, rng.standard_normal(200), tol=1e-14, max_iter=3, krylov_dim=3)


def test_size_ceiling():
    with pytest.raises(ValueError):
        ground_state_lanczos(ChainSpec(22), XYZParams())


def test_rdm_examples(singlet, upup, rng):
    rho = reduced_density_matrix(singlet, Bipartition(1, 2)).matrix
    assert np.allclose(rho, np.eye(2) / 2, atol=1e-15)
    assert von_neumann_entropy(reduced_density_matrix(singlet, Bipartition(1, 2))) == pytest.approx(np.log(2), abs=1e-12)
    rho = reduced_density_matrix(upup, Bipartition(1, 2)).matrix
    assert np.allclose(rho, np.diag([1, 0]), atol=1e-15)
    assert von_neumann_entropy(reduced_density_matrix(upup, Bipartition(1, 2))) == 0.0

    psi = random_state(6, rng)
    for m in (1, 2, 3):
        a = reduced_density_matrix(psi, Bipartition(m, 6)).eigenvalues()
        flipped = PureState(
            psi.amplitudes.reshape([2] * 6).transpose(list(range(5, -1, -1))).reshape(-1), ChainSpec(6)
        )
        b = reduced_density_matrix(flipped, Bipartition(6 - m, 6)).eigenvalues()
        top = min(a.size, b.size)
        assert np.allclose(np.sort(a)[-top:], np.sort(b)[-top:], atol=1e-12)
        s = von_neumann_entropy(reduced_density_matrix(psi, Bipartition(m, 6)))
        assert abs(s - von_neumann_entropy(reduced_density_matrix(flipped, Bipartition(6 - m, 6)))) < 1e-10
        assert abs(s - entanglement_entropy(psi, Bipartition(m, 6))) < 1e-10


def test_rdm_is_a_density_matrix(rng):
    psi = random_state(7, rng)
    rho = reduced_density_matrix(psi, Bipartition(3, 7)).matrix
    assert np.allclose(rho, rho.conj().T, atol=1e-14)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-14


def test_pure_state_is_read_only():
    psi = PureState(np.ones(4) / 2, ChainSpec(2))
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0
    with pytest.raises(ValueError):
        PureState(np.ones(3), ChainSpec(2))


def test_state_dump_round_trip(tmp_path, rng):
    psi = random_state(5, rng)
    path = tmp_path / "psi.bin"
    write_state(path, psi)
    raw = path.read_bytes()
    assert raw[:8] == b"FLUXPSI1" and len(raw) == 16 + 16 * 32
    back = read_state(path)
    assert back.L == 5 and np.array_equal(back.amplitudes, psi.amplitudes)


def test_kernels_agree(rng):
    for L in (2, 3, 7, 12):
        p = rand_params(rng)
        coeffs = (p.cz, *p.flip_amplitudes)
        x = rng.standard_normal(1 << L)
        a, b = np.empty_like(x), np.empty_like(x)
        _core.apply_xyz(x, a, L, *coeffs)
        _core.apply_xyz_python(x, b, L, *coeffs)
        assert np.max(np.abs(a - b)) < 1e-13
