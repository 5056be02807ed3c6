import numpy as np
import pytest

from redfluct.exact import dense_hamiltonian, entanglement_entropy, full_spectrum_small, ground_state_lanczos
from redfluct.fluctuations import DenseView, MPSView
from redfluct.model import SPIN_OPS, Bipartition, ChainSpec, ParitySector, SpinAxis, XYZParams
from redfluct.mps import (
    MPSState,
    build_xyz_mpo,
    dmrg_ground_state,
    energy_variance,
    mps_expectation,
    mps_to_dense,
    product_mps,
    random_mps,
    read_mps,
    schmidt_entropy,
    write_mps,
)

from .conftest import DOWN, UP

SZ, SX = SPIN_OPS[SpinAxis.Z], SPIN_OPS[SpinAxis.X]


def singlet_mps():
    s = 1 / np.sqrt(2)
    A = np.zeros((1, 2, 2))
    A[0, 0, 0], A[0, 1, 1] = 1, 1
    B = np.zeros((2, 2, 1))
    B[0, 1, 0], B[1, 0, 0] = s, -s
    return MPSState([A, B], ChainSpec(2))


def rand_params(rng):
    return XYZParams(rng.uniform(-1.5, 1.5), rng.uniform(-1, 1), rng.uniform(-1.5, 1.5))


def test_mpo_micro_examples():
    H = build_xyz_mpo(ChainSpec(2), XYZParams(1, 0, 1)).to_dense()
    assert H[0, 0] == pytest.approx(-0.25)
    assert not np.any(build_xyz_mpo(ChainSpec(4), XYZParams(0, 0, 0)).to_dense())


def test_mpo_faithful_for_small_chains():
    rng = np.random.default_rng(7)
    for L in range(2, 9):
        for _ in range(20):
            p = rand_params(rng)
            diff = build_xyz_mpo(ChainSpec(L), p).to_dense(max_L=8) - dense_hamiltonian(L, p)
            assert np.max(np.abs(diff)) < 1e-12


def test_dmrg_two_sites_matches_spectrum(rng):
    for _ in range(5):
        p = rand_params(rng)
        e, _, _ = dmrg_ground_state(build_xyz_mpo(ChainSpec(2), p), chi_max=4, sector=ParitySector.FULL)
        assert abs(e - full_spectrum_small(ChainSpec(2), p)[0]) < 1e-12


def test_dmrg_trivial_hamiltonian():
    e, _, rep = dmrg_ground_state(build_xyz_mpo(ChainSpec(6), XYZParams(0, 0, 0)), max_sweeps=1, min_sweeps=1)
    assert e == pytest.approx(0.0, abs=1e-14)
    assert rep.energy_variance == pytest.approx(0.0, abs=1e-14)


def test_dmrg_matches_ed_at_critical_point():
    spec, p = ChainSpec(12), XYZParams(1, 0.4, 0.7)
    gs = ground_state_lanczos(spec, p)
    e, mps, rep = dmrg_ground_state(build_xyz_mpo(spec, p), chi_max=64)
    assert abs(e - gs.energy) < 1e-8
    assert rep.energy_variance <= 1e-8
    assert rep.parity == pytest.approx(1.0, abs=1e-8)
    half = Bipartition.half(12)
    assert abs(schmidt_entropy(mps, half) - entanglement_entropy(gs.state, half)) < 1e-8
    dense = mps_to_dense(mps)
    assert abs(abs(np.vdot(dense.amplitudes, gs.state.amplitudes)) - 1) < 1e-8


def test_truncation_monotonicity():
    mpo = build_xyz_mpo(ChainSpec(16), XYZParams(1, 0.3, 0.6))
    energies = [dmrg_ground_state(mpo, chi_max=c, max_sweeps=6, seed=3).energy for c in (4, 8, 16, 32)]
    for a, b in zip(energies, energies[1:]):
        assert b <= a + 1e-10


def test_isometries_after_sweeps(rng):
    mps = random_mps(ChainSpec(8), 6, rng, ParitySector.EVEN)
    assert max(mps.isometry_errors()) < 1e-12
    _, out, _ = dmrg_ground_state(build_xyz_mpo(ChainSpec(8), XYZParams(1, 0.5, 0.2)), chi_max=16)
    assert max(out.isometry_errors()) < 1e-10
    c = out.canonicalize(4)
    assert max(c.isometry_errors()) < 1e-12


def test_energy_variance_examples(rng):
    p = XYZParams(0.8, 0.3, -0.4)
    H = dense_hamiltonian(2, p)
    w, v = np.linalg.eigh(H)
    vec = v[:, 0]
    # amplitude index is s0 + 2 s1, so reshape gives [s1, s0]
    A = np.eye(2).reshape(1, 2, 2)
    B = vec.reshape(2, 2).T.reshape(2, 2, 1)
    mps = MPSState([A, B], ChainSpec(2))
    assert abs(energy_variance(mps, build_xyz_mpo(ChainSpec(2), p))) < 1e-12
    r = random_mps(ChainSpec(6), 4, rng)
    assert energy_variance(r, build_xyz_mpo(ChainSpec(6), p)) >= -1e-12


def test_schmidt_entropy_examples():
    assert schmidt_entropy(product_mps([UP, DOWN, UP]), 1) == 0.0
    assert schmidt_entropy(singlet_mps(), 1) == pytest.approx(np.log(2), abs=1e-12)


def test_expectation_examples():
    up = product_mps([UP, UP, UP])
    assert mps_expectation(up, {0: SZ}).real == pytest.approx(0.5)
    assert abs(mps_expectation(up, {0: SX})) < 1e-15
    assert mps_expectation(singlet_mps(), {0: SZ, 1: SZ}).real == pytest.approx(-0.25)
    with pytest.raises(IndexError):
        mps_expectation(up, {3: SZ})


def test_dense_conversion_examples(rng):
    psi = mps_to_dense(product_mps([UP, UP])).amplitudes
    assert np.allclose(psi, [1, 0, 0, 0])
    psi = mps_to_dense(singlet_mps()).amplitudes
    ref = np.array([0, 1, -1, 0]) / np.sqrt(2)
    assert abs(abs(np.vdot(ref, psi)) - 1) < 1e-14

    mps = random_mps(ChainSpec(10), 8, rng, complex_=True)
    dense = mps_to_dense(mps)
    dv, mv = DenseView(dense), MPSView(mps)
    for axis in SpinAxis:
        m1, c1 = dv.moments(axis)
        m2, c2 = mv.moments(axis)
        assert np.allclose(m1, m2, atol=1e-10)
        assert np.allclose(c1, c2, atol=1e-10)


def test_parity_sectors_respected():
    spec, p = ChainSpec(8), XYZParams(1, 0.5, 0.0)
    for sector in (ParitySector.EVEN, ParitySector.ODD):
        e, _, rep = dmrg_ground_state(build_xyz_mpo(spec, p), chi_max=32, sector=sector)
        assert abs(e - ground_state_lanczos(spec, p, sector).energy) < 1e-9
        assert rep.parity == pytest.approx(1.0 if sector is ParitySector.EVEN else -1.0, abs=1e-8)
        assert not rep.sector_mixing


def test_checkpoint_round_trip(tmp_path, rng):
    mps = random_mps(ChainSpec(7), 5, rng, complex_=True)
    path = tmp_path / "state.mps"
    write_mps(path, mps)
    assert path.read_bytes()[:8] == b"FLUXMPS1"
    back = read_mps(path)
    assert len(back.tensors) == 7
    for a, b in zip(mps.tensors, back.tensors):
        assert a.shape == b.shape and np.array_equal(a, b)


def test_chi_validation():
    with pytest.raises(ValueError):
        dmrg_ground_state(build_xyz_mpo(ChainSpec(4), XYZParams()), chi_max=1)
