import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holosim.device import bare_transition, coupling_per_eta
from holosim.holonomy import (HolonomyParams, closed_form_propagator, gate_matrix, lambda_matrix, numeric_propagator,
                              params_from_theta_phi, synthesize_drives, theta_phi_from_params, verify_cyclicity,
                              verify_parallel_transport)
from holosim.pulse import EnvelopeSpec, envelope_area

angles = st.tuples(st.floats(0, math.pi), st.floats(0, 2 * math.pi))


def test_params_examples():
    p = params_from_theta_phi(0.0, 0.0)
    assert p.lambdas == pytest.approx((0, 1))
    p = params_from_theta_phi(math.pi / 2, math.pi)
    assert p.lambda1 == pytest.approx(1 / math.sqrt(2))
    assert p.lambda2 == pytest.approx(1 / math.sqrt(2))
    p = params_from_theta_phi(math.pi, 0.3)
    assert abs(p.lambda1) == pytest.approx(1.0) and p.lambda2 == 0


def test_params_validation():
    with pytest.raises(ValueError):
        HolonomyParams(0.5, 0.5, 0.1, 0.0)
    with pytest.raises(ValueError):
        params_from_theta_phi(-0.1, 0.0)
    with pytest.raises(ValueError):
        HolonomyParams(1 / math.sqrt(2), 1 / math.sqrt(2), math.pi / 2, 0.0)


@pytest.mark.parametrize("theta", np.linspace(0.05, math.pi - 0.05, 9))
@pytest.mark.parametrize("phi", np.linspace(0, 2 * math.pi, 7, endpoint=False))
def test_theta_phi_round_trip(theta, phi):
    t, p = theta_phi_from_params(params_from_theta_phi(theta, phi))
    assert t == pytest.approx(theta, abs=1e-9)
    assert math.remainder(p - phi, 2 * math.pi) == pytest.approx(0, abs=1e-9)


def test_gate_examples():
    assert np.allclose(gate_matrix(params_from_theta_phi(0, 0)).matrix, np.diag([1, -1]))
    assert np.allclose(gate_matrix(params_from_theta_phi(math.pi / 2, 0)).matrix, [[0, 1], [1, 0]])
    assert gate_matrix(params_from_theta_phi(math.pi / 4, 1.0)).transfer() == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(angles)
def test_gate_structure(tp):
    u = gate_matrix(params_from_theta_phi(*tp)).matrix
    i = np.eye(2)
    assert np.max(np.abs(u.conj().T @ u - i)) < 1e-12
    assert np.max(np.abs(u - u.conj().T)) < 1e-12
    assert np.max(np.abs(u @ u - i)) < 1e-12
    assert abs(np.linalg.det(u) + 1) < 1e-12


@settings(max_examples=50, deadline=None)
@given(angles, st.floats(0, 4 * math.pi))
def test_closed_form_matches_expm(tp, area):
    p = params_from_theta_phi(*tp)
    m = lambda_matrix(p)
    assert np.max(np.abs(m @ m @ m - m)) < 1e-14
    assert np.max(np.abs(closed_form_propagator(p, area) - numeric_propagator(p, area))) < 1e-12


def test_closed_form_reduces_to_gate():
    assert np.allclose(closed_form_propagator(params_from_theta_phi(1.0, 0.2), 0.0), np.eye(3))
    p = params_from_theta_phi(math.pi / 2, math.pi)
    u = closed_form_propagator(p, math.pi)
    assert abs(u[1, 0]) < 1e-15
    assert u[2, 0] == pytest.approx(-1.0)
    for theta, phi in [(0.4, 0.0), (1.2, 2.0), (math.pi / 2, 4.0)]:
        p = params_from_theta_phi(theta, phi)
        u = closed_form_propagator(p, math.pi)
        outer = u[np.ix_([0, 2], [0, 2])]
        assert np.allclose(outer, gate_matrix(p).matrix, atol=1e-12)


def test_cyclicity():
    for theta in np.linspace(0, math.pi, 7):
        ok, leak = verify_cyclicity(params_from_theta_phi(theta, 0.7))
        assert ok and leak < 1e-12
    ok, leak = verify_cyclicity(params_from_theta_phi(math.pi / 2, 0.0), math.pi / 2)
    assert not ok and leak > 0.1
    u = closed_form_propagator(params_from_theta_phi(0.0, 0.0), math.pi)
    assert u[0, 0] == pytest.approx(1.0)


def test_parallel_transport_examples():
    p = params_from_theta_phi(math.pi / 2, math.pi)
    grid = np.linspace(0, math.pi, 100)
    assert verify_parallel_transport(p, grid) < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(5):
        q = params_from_theta_phi(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert verify_parallel_transport(q, grid, a, b) < 1e-12


def test_synthesize_drives(device):
    env = EnvelopeSpec.flat_top(1.0, 206e-9, 3.5e-9)
    d1, d2 = synthesize_drives(params_from_theta_phi(0.0, 0.0), device, envelope=env)
    assert d1.envelope.amplitude * abs(d1.scale) == 0.0
    p = params_from_theta_phi(math.pi / 2, 0.8)
    d1, d2 = synthesize_drives(p, device, envelope=env)
    assert d1.drive_freq == bare_transition(device, 0)
    assert d1.phase == 0.0 and d2.phase == pytest.approx(p.phi)
    areas = [abs(coupling_per_eta(device, d.qubit)) * envelope_area(d.envelope) for d in (d1, d2)]
    # combined coupling area closes the loop
    assert math.hypot(areas[0] * abs(d1.scale), areas[1] * abs(d2.scale)) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        synthesize_drives(p, device, total_duration=1e-9)
    with pytest.raises(ValueError):
        synthesize_drives(p, device)
