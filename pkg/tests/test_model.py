import numpy as np
import pytest

from redfluct.model import (
    Bipartition,
    ChainSpec,
    ParitySector,
    SpinAxis,
    XYZParams,
    basis_magnetizations,
    basis_parities,
    critical_line_distance,
    parity_of_basis_state,
)


def test_chain_spec_validation():
    assert ChainSpec(4).hilbert_dim == 16
    with pytest.raises(ValueError):
        ChainSpec(1)
    with pytest.raises(TypeError):
        ChainSpec(3.0)


def test_half_bipartition():
    b = ChainSpec(8).half()
    assert (b.size, b.length) == (4, 8)
    assert list(b.omega) == [0, 1, 2, 3]
    assert list(b.complement) == [4, 5, 6, 7]
    with pytest.raises(ValueError):
        ChainSpec(5).half()
    with pytest.raises(ValueError):
        Bipartition(0, 4)
    with pytest.raises(ValueError):
        Bipartition(4, 4)


def test_params_couplings_and_symmetries():
    p = XYZParams(1.0, 0.4, 0.7)
    assert p.cx == pytest.approx(-0.7)
    assert p.cy == pytest.approx(-0.3)
    assert p.cz == pytest.approx(-0.7)
    assert p.conserves(SpinAxis.Y)
    assert not p.conserves(SpinAxis.Z)
    assert XYZParams(1.0, 0.0, 0.3).conserves(SpinAxis.Z)
    with pytest.raises(ValueError):
        XYZParams(1.0, float("nan"), 0.0)
    with pytest.raises(ValueError):
        XYZParams(coupling_sign=2.0)


@pytest.mark.parametrize(
    "params, expected",
    [((1, 0.4, 0.7), 0.0), ((1, 0, 0), -0.5), ((1, 0.5, 0.75), 0.0)],
)
def test_critical_line_distance_examples(params, expected):
    assert critical_line_distance(XYZParams(*params)) == pytest.approx(expected, abs=1e-15)


def test_critical_line_distance_antisymmetry(rng):
    for _ in range(20):
        J, g, jz = rng.uniform(0.2, 2), rng.uniform(-1, 1), rng.uniform(-2, 2)
        a = critical_line_distance(XYZParams(J, g, jz))
        b = critical_line_distance(XYZParams(J, g, -jz))
        assert abs(a) == pytest.approx(abs(b), abs=1e-14)


def test_parity_examples():
    spec = ChainSpec(2)
    assert parity_of_basis_state(0b00, spec) is ParitySector.EVEN
    assert parity_of_basis_state(0b10, spec) is ParitySector.ODD
    assert parity_of_basis_state(0b11, spec) is ParitySector.EVEN
    with pytest.raises(ValueError):
        parity_of_basis_state(4, spec)


def test_basis_tables():
    assert list(basis_parities(2)) == [0, 1, 1, 0]
    # 2 S^z: up = +1 per site
    assert list(basis_magnetizations(2)) == [2, 0, 0, -2]


def test_enum_parsing():
    assert SpinAxis.parse("X") is SpinAxis.X
    assert ParitySector.parse(" Even ") is ParitySector.EVEN
    with pytest.raises(ValueError):
        SpinAxis.parse("w")
