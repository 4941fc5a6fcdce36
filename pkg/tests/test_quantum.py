import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holosim.quantum import (DensityMatrix, HilbertSpace, Operator, QuantumState, basis_state, embed, fidelity, ket,
                             lowering_operator, number_operator, parse_label, partial_trace, psd_sqrt)


def random_density(rng, n, rank=None):
    rank = rank or n
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = a @ a.conj().T
    return m / np.trace(m).real


def test_row_major_index():
    space = HilbertSpace((4, 4, 3))
    assert space.total == 48
    assert space.index((2, 0, 0)) == 24
    assert space.index("gf0") == 6
    assert space.index("gg1") == 1
    assert space.levels(24) == (2, 0, 0)
    assert space.label(24) == "fg0"


def test_parse_label():
    assert parse_label("fg0") == (2, 0, 0)
    assert parse_label("eh2") == (1, 3, 2)
    with pytest.raises(ValueError):
        parse_label("xg0")


def test_space_validation():
    with pytest.raises(ValueError):
        HilbertSpace((1, 3))
    with pytest.raises(ValueError):
        HilbertSpace((4, 4, 3)).index((4, 0, 0))


def test_operator_algebra_and_hermiticity():
    space = HilbertSpace((3,))
    a = lowering_operator(space, 0)
    n = number_operator(space, 0)
    assert np.allclose((a.dag() @ a).matrix, n.matrix)
    assert n.is_hermitian()
    assert not a.is_hermitian()
    assert np.allclose((a + a.dag()).matrix, (a.dag() + a).matrix)
    with pytest.raises(ValueError):
        n.matrix[0, 0] = 5


def test_ladder_sqrt_scaling():
    space = HilbertSpace((4, 4, 3))
    b = lowering_operator(space, 0).matrix
    psi_f = basis_state(space, "fg0").amplitudes
    out = b @ psi_f
    assert out[space.index("eg0")] == pytest.approx(np.sqrt(2))


def test_state_validation():
    space = HilbertSpace((2, 2))
    with pytest.raises(ValueError):
        QuantumState(space, [1, 1, 0, 0])
    with pytest.raises(ValueError):
        DensityMatrix(space, np.diag([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(space, np.diag([0.5, 0.6, 0, 0]))
    with pytest.raises(ValueError):
        DensityMatrix(space, np.array([[0.5, 1, 0, 0], [0, 0.5, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]]))


def test_partial_trace_of_product_state():
    rng = np.random.default_rng(0)
    ra, rb = random_density(rng, 3), random_density(rng, 2)
    space = HilbertSpace((3, 2))
    rho = DensityMatrix(space, np.kron(ra, rb))
    assert np.allclose(partial_trace(rho, [0]).matrix, ra)
    assert np.allclose(partial_trace(rho, [1]).matrix, rb)


def test_partial_trace_of_bell_is_mixed():
    rho = ket(HilbertSpace((2, 2)), {"eg": 1, "ge": 1}).density()
    red = partial_trace(rho, [0])
    assert np.allclose(red.matrix, np.eye(2) / 2)


def test_embed_places_operator():
    space = HilbertSpace((2, 3))
    x = np.array([[0, 1], [1, 0]])
    op = embed(space, 0, x).matrix
    assert np.allclose(op, np.kron(x, np.eye(3)))


def test_fidelity_pure_target_is_root_overlap():
    rng = np.random.default_rng(1)
    space = HilbertSpace((2, 2))
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    target = QuantumState(space, psi).density()
    m = DensityMatrix(space, random_density(rng, 4))
    expected = np.sqrt(np.real(psi.conj() @ m.matrix @ psi))
    assert fidelity(target, m) == pytest.approx(expected, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_fidelity_properties(seed, rank):
    rng = np.random.default_rng(seed)
    space = HilbertSpace((2, 2))
    a = DensityMatrix(space, random_density(rng, 4, rank))
    b = DensityMatrix(space, random_density(rng, 4))
    f = fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(fidelity(b, a), abs=1e-6)
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_partial_trace_preserves_trace(seed):
    rng = np.random.default_rng(seed)
    space = HilbertSpace((3, 2, 2))
    rho = DensityMatrix(space, random_density(rng, 12))
    for keep in ([0], [1, 2], [0, 2]):
        assert np.trace(partial_trace(rho, keep).matrix).real == pytest.approx(1.0)


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(2)
    m = random_density(rng, 5)
    s = psd_sqrt(m)
    assert np.allclose(s @ s, m, atol=1e-12)


def test_density_expect_and_purity():
    space = HilbertSpace((2,))
    rho = DensityMatrix(space, np.diag([0.75, 0.25]))
    assert rho.expect(np.diag([1, -1])) == pytest.approx(0.5)
    assert rho.purity() == pytest.approx(0.625)
    assert isinstance(Operator(space, np.eye(2)) * 2, Operator)
