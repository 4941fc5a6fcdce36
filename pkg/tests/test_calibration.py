import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from holosim.calibration.fitting import fit_gaussian_2d
from holosim.calibration.protocol import (VOLT, CalibrationTable, DeviceCalibrator, calibrate_rabi_rate,
                                          measure_rabi_rate, spectroscopy_signal, transfer_map)
from holosim.device import MHZ, dressed_transition


def test_table_round_trip(tmp_path, spectral_table):
    path = tmp_path / "cal.ini"
    spectral_table.save(path)
    again = CalibrationTable.load(path)
    assert np.allclose(again.stark_poly, spectral_table.stark_poly, rtol=1e-15, atol=0)
    assert again.rabi_amp == pytest.approx(spectral_table.rabi_amp, rel=1e-15)
    assert np.allclose(again.cross_stark, spectral_table.cross_stark, rtol=1e-15)
    assert again.source == "spectral"
    text = path.read_text()
    assert "stark_a_ghz_per_v2" in text and "rabi_amp_v" in text
    with pytest.raises(FileNotFoundError):
        CalibrationTable.load(tmp_path / "missing.ini")


def test_table_validation():
    with pytest.raises(ValueError):
        CalibrationTable(((0.0, -1.0), (0.0, 1.0)), (1.0, 1.0))
    t = CalibrationTable(((-1.0, 5.0), (-2.0, 6.0)), (1.0, 2.0), ((0.1, 0.2, 0.3), (0.0, 0.0, 0.0)))
    assert t.drive_frequency(0, 1.0, 0.3) == pytest.approx(5.6)
    assert t.without_cross_stark().drive_frequency(0, 1.0, VOLT) == pytest.approx(4.0)
    assert t.intercept_only().stark_frequency(1, VOLT) == 6.0


def test_spectroscopy_signal_peaks_on_resonance(device):
    amp = 0.12 * VOLT
    w0 = dressed_transition(device, 0)
    far = spectroscopy_signal(device, 0, w0 + 20 * MHZ, amp, 2e-6)
    assert far < 0.05
    assert max(spectroscopy_signal(device, 0, w0 + d * MHZ, amp, 2e-6) for d in np.linspace(-5, 1, 25)) > 0.3


def test_single_tone_stark_curves(device, protocol_report):
    for q, curve in enumerate(protocol_report.stark):
        assert abs(curve.b - dressed_transition(device, q)) < 0.5 * MHZ
        assert curve.a < 0
        assert curve.linear_zscore() < 3
        assert np.all(np.abs(curve.centers - [curve.predict(v) for v in curve.voltages]) < 0.1 * MHZ)


def test_rabi_rate_hits_target(device, protocol_report):
    table = protocol_report.table
    for q in range(2):
        freq = table.stark_frequency(q, table.rabi_amp[q])
        rate = measure_rabi_rate(device, q, table.rabi_amp[q], freq, table.target_rate)["frequency"]
        assert rate == pytest.approx(4.70e6, rel=5e-3)


def test_rabi_amplitude_scales_linearly(device, protocol_report):
    curve = protocol_report.stark[0]
    a1 = calibrate_rabi_rate(device, 0, 2.35e6, curve)
    a2 = calibrate_rabi_rate(device, 0, 4.70e6, curve)
    assert a2 / a1 == pytest.approx(2.0, rel=0.02)


def test_rabi_edge_cases(device):
    assert calibrate_rabi_rate(device, 0, 0.0) == 0.0
    with pytest.raises(ValueError):
        calibrate_rabi_rate(device, 0, 200e6, v_max=0.6)
    with pytest.raises(ValueError):
        calibrate_rabi_rate(device, 0, -1.0)


def test_transfer_map_fit_matches_argmax(device, spectral_table):
    offsets, m, centre = transfer_map(device, spectral_table, 1.1, span=3 * MHZ, n_grid=13)
    fit = fit_gaussian_2d(offsets, offsets, m)
    i, j = np.unravel_index(np.argmax(m), m.shape)
    step = offsets[1] - offsets[0]
    assert abs(fit["center_x"] - offsets[i]) <= step
    assert abs(fit["center_y"] - offsets[j]) <= step
    assert m.max() > 0.95 * math.sin(1.1) ** 2


def test_cross_stark_quadratic_and_limit(protocol_report):
    cross = protocol_report.cross
    step = 6 * MHZ / 12
    assert np.all(cross.residual < step)
    # drive 1 vanishes as theta -> 0, so its curve starts at the single-tone intercept
    assert abs(cross.polys[0][0]) < step


def test_device_calibrator(device):
    est = DeviceCalibrator(amplitude_grid=(0.08, 0.12, 0.16), theta_grid=None)
    with pytest.raises(NotFittedError):
        est.predict([0.5])
    est.fit(device)
    freqs = est.predict([0.3, math.pi / 2])
    assert freqs.shape == (2, 2)
    assert abs(freqs[0, 0] - dressed_transition(device, 0)) < 5 * MHZ
    assert est.get_params()["theta_grid"] is None
