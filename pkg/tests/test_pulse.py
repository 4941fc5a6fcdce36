import math

import numpy as np
import pytest
from scipy.integrate import quad

from holosim.pulse import (DrivePulse, EnvelopeSpec, PulseSchedule, envelope_area, envelope_value,
                           solve_amplitude_for_area)

NS = 1e-9


def test_flat_top_geometry():
    env = EnvelopeSpec.flat_top(1.0, 206 * NS, 3.5 * NS)
    assert env.duration == pytest.approx(220 * NS)
    assert env.edge == pytest.approx(7 * NS)
    assert env.breakpoints() == pytest.approx([0, 7 * NS, 213 * NS, 220 * NS])
    assert envelope_value(env, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert envelope_value(env, 110 * NS) == pytest.approx(1.0)
    assert envelope_value(env, 7 * NS) == pytest.approx(1.0)


def test_closed_form_area_matches_quadrature():
    env = EnvelopeSpec.flat_top(2.5, 206 * NS, 3.5 * NS)
    numeric, _ = quad(lambda t: float(envelope_value(env, t)), 0, env.duration, points=env.breakpoints(),
                      epsabs=1e-20, epsrel=1e-12)
    assert envelope_area(env) == pytest.approx(numeric, rel=1e-10)
    assert env.with_amplitude(1.0).unit_area() == pytest.approx(213.49 * NS, abs=0.01 * NS)


def test_square_area():
    env = EnvelopeSpec("square", 3.0, 10 * NS)
    assert envelope_area(env) == pytest.approx(30 * NS)
    assert envelope_value(env, -1 * NS) == 0.0
    assert envelope_value(env, 11 * NS) == 0.0


def test_solve_amplitude_for_area():
    env = EnvelopeSpec.flat_top(1.0, 100 * NS, 5 * NS)
    out = solve_amplitude_for_area(env, math.pi)
    assert envelope_area(out) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        solve_amplitude_for_area(env, 0.0)


def test_envelope_validation():
    with pytest.raises(ValueError):
        EnvelopeSpec("triangle", 1.0, 1.0)
    with pytest.raises(ValueError):
        EnvelopeSpec("square", -1.0, 1.0)
    with pytest.raises(ValueError):
        EnvelopeSpec("flat_top_gaussian", 1.0, 10 * NS, 1 * NS, 20 * NS)


def test_drive_pulse_signal():
    env = EnvelopeSpec("square", 2.0, 10 * NS)
    p = DrivePulse(0, env, 2 * math.pi * 1e9, phase=0.3, scale=0.5j)
    assert p.total_phase == pytest.approx(0.3 + math.pi / 2)
    t = np.array([1 * NS, 2.5 * NS])
    assert np.allclose(p.value(t), 1.0 * np.cos(2 * math.pi * 1e9 * t + 0.3 + math.pi / 2))
    with pytest.raises(ValueError):
        DrivePulse(2, env, 1.0)
    with pytest.raises(ValueError):
        DrivePulse(0, env, 1.0, scale=1.5)


def test_schedule_windows_and_validation():
    env = EnvelopeSpec.flat_top(1.0, 20 * NS, 2 * NS)
    s = PulseSchedule.simultaneous([DrivePulse(0, env, 1.0), DrivePulse(1, env, 2.0)])
    assert s.total_duration == pytest.approx(env.duration)
    wins = s.constant_windows()
    assert wins == [(pytest.approx(4 * NS), pytest.approx(24 * NS))]
    with pytest.raises(ValueError):
        PulseSchedule(((5 * NS, DrivePulse(0, env, 1.0)),), total_duration=10 * NS)
