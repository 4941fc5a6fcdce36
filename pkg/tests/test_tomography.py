import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.exceptions import NotFittedError

from holosim.model import dressed_state
from holosim.quantum import DensityMatrix, QuantumState, fidelity
from holosim.tomography import (QUBITS, SETTINGS, ShotRecord, StateTomography, bell_state, density_from_paulis,
                                empirical_pauli_vector, extract_relative_phase, pauli_vector, qubit_state,
                                reconstruct_density_matrix, sample_all, sample_shots, trace_distance, virtual_z,
                                wrap_phase)

GG = QuantumState(QUBITS, [1, 0, 0, 0]).density()
MIXED = DensityMatrix(QUBITS, np.eye(4) / 4)


def random_rho(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = a @ a.conj().T
    return DensityMatrix(QUBITS, m / np.trace(m).real)


def test_ground_state_z_outcomes():
    rec = sample_shots(GG, ("Z", "Z"), 100, seed=1)
    assert np.all(rec.outcomes == 0)
    assert rec.counts().tolist() == [100, 0, 0, 0]


def test_bell_zz_anticorrelated():
    bell = bell_state()
    rec = sample_shots(bell, ("Z", "Z"), 2000, seed=2)
    s = rec.signs()
    assert np.all(s[:, 0] * s[:, 1] == -1)


def test_seeded_sampling_is_reproducible():
    a = sample_shots(bell_state(), ("X", "Y"), 500, seed=11)
    b = sample_shots(bell_state(), ("X", "Y"), 500, seed=11)
    assert np.array_equal(a.outcomes, b.outcomes)
    c = sample_all(bell_state(), 50, np.random.SeedSequence(3))
    d = sample_all(bell_state(), 50, 3)
    assert all(np.array_equal(x.outcomes, y.outcomes) for x, y in zip(c, d))


def test_shot_record_validation():
    with pytest.raises(ValueError):
        ShotRecord(("Z", "Q"), np.zeros((2, 2)), 2)
    with pytest.raises(ValueError):
        ShotRecord(("Z", "Z"), np.zeros((3, 2)), 2)
    with pytest.raises(ValueError):
        sample_shots(GG, ("Z", "Z"), 0)


def test_pauli_vector_examples():
    pv = pauli_vector(GG)
    for k, v in pv.as_dict().items():
        assert v == pytest.approx(1.0 if k in ("ZI", "IZ", "ZZ") else 0.0, abs=1e-15)
    pv = pauli_vector(bell_state())
    assert pv["XX"] == pytest.approx(1) and pv["YY"] == pytest.approx(1) and pv["ZZ"] == pytest.approx(-1)
    assert pv["ZI"] == pytest.approx(0, abs=1e-15) and pv["IZ"] == pytest.approx(0, abs=1e-15)
    assert np.allclose(pauli_vector(MIXED).values, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_pauli_bijection(seed):
    rho = random_rho(seed)
    pv = pauli_vector(rho)
    assert np.all(np.abs(pv.values) <= 1 + 1e-12)
    assert np.allclose(density_from_paulis(pv), rho.matrix, atol=1e-12)


def test_exact_reconstruction():
    rho = random_rho(5)
    est = StateTomography(shots=None).fit(rho)
    assert np.allclose(est.rho_.matrix, rho.matrix, atol=1e-10)


def test_incomplete_settings_raise():
    recs = sample_all(bell_state(), 10, 0)[:-1]
    with pytest.raises(ValueError):
        empirical_pauli_vector(recs)


def test_mixed_state_reconstruction():
    rho = reconstruct_density_matrix(sample_all(MIXED, 1000, 9))
    w = np.linalg.eigvalsh(rho.matrix)
    assert np.trace(rho.matrix).real == pytest.approx(1.0)
    assert np.allclose(w, 0.25, atol=0.05)


def test_bell_fidelity_typical():
    fids = [StateTomography(1000, s).fit(bell_state()).score(bell_state()) for s in range(30)]
    assert np.median(fids) > 0.97


def test_phase_extraction():
    est = extract_relative_phase(bell_state(math.pi / 4, math.pi / 3))
    assert est.confident and est.phase == pytest.approx(math.pi / 3, abs=1e-12)
    flagged = extract_relative_phase(bell_state(0.0, 0.0))
    assert not flagged.confident and flagged.phase is None
    rho = virtual_z(bell_state(math.pi / 4, 0.2), 1, 0.5)
    assert extract_relative_phase(rho).phase == pytest.approx(0.7)
    assert wrap_phase(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_phase(-math.pi) == pytest.approx(math.pi)


def test_trace_distance():
    assert trace_distance(GG, GG) == 0
    assert trace_distance(GG, bell_state()) == pytest.approx(1.0)


def test_estimator_interface():
    est = StateTomography(100, 1)
    with pytest.raises(NotFittedError):
        est.predict()
    est.fit(bell_state())
    assert isinstance(est.predict(), DensityMatrix)
    assert len(est.records_) == len(SETTINGS)
    assert est.get_params() == {"shots": 100, "seed": 1}


def test_device_state_maps_f_to_e(device):
    psi = dressed_state(device, "fg0")
    q = qubit_state(device, psi, 0.0)
    assert q.leakage == pytest.approx(0.0, abs=1e-12)
    assert fidelity(QuantumState(QUBITS, [0, 0, 1, 0]).density(), q.rho) == pytest.approx(1.0)
    q = qubit_state(device, dressed_state(device, "gg1"), 0.0)
    assert q.rho.matrix[0, 0].real == pytest.approx(1.0)
