import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from holosim.calibration.fitting import (DampedSineModel, FitError, FitResult, LorentzianModel, fit_damped_sine,
                                         fit_gaussian_2d, fit_lorentzian, fit_polynomial)

GHZ = 2 * math.pi * 1e9
MHZ = 2 * math.pi * 1e6


def lorentzian(x, c, w, a, o):
    return a * w * w / ((x - c) ** 2 + w * w) + o


def gauss2d(x, y, cx, cy, sx, sy, rho, a, o):
    u, v = (x - cx) / sx, (y - cy) / sy
    return a * np.exp(-0.5 * (u * u - 2 * rho * u * v + v * v) / (1 - rho * rho)) + o


def test_lorentzian_exact_recovery():
    truth = (3.19 * GHZ, 0.4 * MHZ, 0.8, 0.05)
    f = np.linspace(truth[0] - 3 * MHZ, truth[0] + 3 * MHZ, 41)
    fit = fit_lorentzian(f, lorentzian(f, *truth))
    for name, t in zip(fit.names, truth):
        assert fit[name] == pytest.approx(t, rel=1e-8, abs=1e-12)
    dip = fit_lorentzian(f, lorentzian(f, truth[0], truth[1], -0.6, 1.0))
    assert dip["center"] == pytest.approx(truth[0], rel=1e-12)
    assert dip["amplitude"] == pytest.approx(-0.6)


def test_lorentzian_noise_monte_carlo():
    c, w = 3.19 * GHZ, 0.4 * MHZ
    f = np.linspace(c - 3 * MHZ, c + 3 * MHZ, 41)
    clean = lorentzian(f, c, w, 1.0, 0.0)
    misses = []
    for seed in range(100):
        y = clean + 0.01 * np.random.default_rng(seed).normal(size=f.size)
        misses.append(abs(fit_lorentzian(f, y)["center"] - c))
    assert max(misses) < w / 10


def test_flat_signal_raises():
    f = np.linspace(0, 1, 21)
    with pytest.raises(FitError):
        fit_lorentzian(f, np.ones_like(f))
    with pytest.raises(FitError):
        fit_lorentzian(f[:4], np.arange(4.0))
    with pytest.raises(FitError):
        fit_gaussian_2d(np.arange(5), np.arange(5), np.random.default_rng(0).random((5, 5)))


def test_gaussian_exact_recovery():
    truth = (0.3 * MHZ, -0.7 * MHZ, 1.1 * MHZ, 0.8 * MHZ, 0.35, 0.9, 0.02)
    g = np.linspace(-3 * MHZ, 3 * MHZ, 13)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    fit = fit_gaussian_2d(g, g, gauss2d(xx, yy, *truth))
    for name, t in zip(fit.names, truth):
        assert fit[name] == pytest.approx(t, rel=1e-8, abs=1e-8 * MHZ if "center" in name else 1e-10)


def test_gaussian_asymmetric_peak_near_argmax():
    g = np.linspace(-3, 3, 13)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    # skewed peak: a Gaussian times a smooth ramp
    y = np.exp(-((xx - 0.4) ** 2 / 2.0 + (yy + 0.6) ** 2 / 1.2)) * (1 + 0.25 * np.tanh(xx + yy))
    fit = fit_gaussian_2d(g, g, y)
    i, j = np.unravel_index(np.argmax(y), y.shape)
    step = g[1] - g[0]
    assert abs(fit["center_x"] - g[i]) <= step
    assert abs(fit["center_y"] - g[j]) <= step


def test_damped_sine_exact_recovery():
    t = np.linspace(0, 600e-9, 121)
    truth = (0.5, 4.7e6, 0.3, 2e5, 0.5)
    y = truth[0] * np.exp(-truth[3] * t) * np.cos(2 * np.pi * truth[1] * t + truth[2]) + truth[4]
    fit = fit_damped_sine(t, y)
    for name, v in zip(fit.names, truth):
        assert fit[name] == pytest.approx(v, rel=1e-6, abs=1e-9)
    assert fit_damped_sine(t, y, frequency_guess=4.5e6)["frequency"] == pytest.approx(truth[1], rel=1e-10)


def test_polynomial_exact_and_stderr():
    x = np.linspace(0.04, 0.2, 5)
    y = -0.16 * GHZ * x ** 2 + 3.19 * GHZ
    fit = fit_polynomial(x, y)
    assert fit["c2"] == pytest.approx(-0.16 * GHZ, rel=1e-10)
    assert fit["c0"] == pytest.approx(3.19 * GHZ, rel=1e-14)
    assert fit.residual_norm < 1e-3
    with pytest.raises(FitError):
        fit_polynomial(x[:2], y[:2], (0, 1, 2))


def test_fit_determinism():
    f = np.linspace(-1, 1, 31)
    y = lorentzian(f, 0.1, 0.2, 1.0, 0.0) + 0.01 * np.random.default_rng(7).normal(size=f.size)
    a, b = fit_lorentzian(f, y), fit_lorentzian(f, y)
    assert np.array_equal(a.params, b.params) and np.array_equal(a.covariance, b.covariance)


def test_estimator_interface():
    model = LorentzianModel()
    with pytest.raises(NotFittedError):
        model.predict([[0.0]])
    f = np.linspace(-1, 1, 31)
    y = lorentzian(f, 0.1, 0.2, 1.0, 0.0)
    model.fit(f[:, None], y)
    assert np.allclose(model.predict(f[:, None]), y, atol=1e-10)
    assert model.score(f[:, None], y) == pytest.approx(1.0)
    assert DampedSineModel(frequency_guess=1.0).get_params()["frequency_guess"] == 1.0
    with pytest.raises(ValueError):
        FitResult(np.zeros(1), np.zeros((1, 1)), -1.0)
