"""Least-squares line-shape fits used by the calibration steps.

Each model is a small scikit-learn style estimator (``fit`` / ``predict`` /
``get_params``) around scipy's Levenberg-Marquardt driver with an analytic
Jacobian.  Abscissae are centred and rescaled internally so that GHz-scale
frequencies and MHz-scale widths stay well conditioned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError


class FitError(RuntimeError):
    """The optimiser failed or the data carry no usable feature."""


@dataclass(frozen=True)
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be >= 0")

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def stderr(self, name: str) -> float:
        i = self.names.index(name)
        return float(np.sqrt(max(self.covariance[i, i], 0.0)))

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.params)}


def _covariance(jac: np.ndarray, resid: np.ndarray) -> np.ndarray:
    n, p = jac.shape
    dof = max(n - p, 1)
    s2 = float(resid @ resid) / dof
    return np.linalg.pinv(jac.T @ jac) * s2


class _CurveModel(BaseEstimator, RegressorMixin):
    """Shared Levenberg-Marquardt machinery; subclasses define the model."""

    names: tuple[str, ...] = ()

    def __init__(self, max_nfev: int = 2000, xtol: float = 1e-14, ftol: float = 1e-14):
        self.max_nfev = max_nfev
        self.xtol = xtol
        self.ftol = ftol

    # subclasses: _scale(X) -> (Xs, info), _guess(Xs, y), _model(p, Xs), _jac(p, Xs), _unscale(p, cov, info)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError("X and y lengths differ")
        if X.shape[0] < len(self.names) + 1:
            raise FitError(f"need more than {len(self.names)} points")
        if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
            raise FitError("signal is flat, no feature to fit")
        xs, info = self._scale(X)
        p0 = self._guess(xs, y)
        res = least_squares(lambda p: self._model(p, xs) - y, p0, jac=lambda p: self._jac(p, xs),
                            method="lm", xtol=self.xtol, ftol=self.ftol, gtol=1e-15, max_nfev=self.max_nfev)
        if res.status <= 0 or not np.all(np.isfinite(res.x)):
            raise FitError(f"fit did not converge: {res.message}")
        cov = _covariance(res.jac, res.fun)
        params, cov = self._unscale(res.x, cov, info)
        self._check(params, X)
        self.result_ = FitResult(params, cov, float(np.linalg.norm(res.fun)), self.names)
        self.params_ = params
        self._fit_scaled = (res.x, info)
        return self

    def _check(self, params, X):
        pass

    def predict(self, X):
        if not hasattr(self, "result_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        p, info = self._fit_scaled
        xs, _ = self._scale(np.asarray(X, dtype=float), info)
        return self._model(p, xs)


def _affine(x: np.ndarray, info=None):
    if info is None:
        lo, hi = float(np.min(x)), float(np.max(x))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        info = (mid, half if half > 0 else 1.0)
    return (x - info[0]) / info[1], info


class LorentzianModel(_CurveModel):
    """``amplitude * width^2 / ((x - center)^2 + width^2) + offset``; width is the HWHM."""

    names = ("center", "width", "amplitude", "offset")

    def _scale(self, X, info=None):
        return _affine(X.ravel(), info)

    def _guess(self, x, y):
        offset = float(np.median(y))
        k = int(np.argmax(np.abs(y - offset)))
        amp = float(y[k] - offset)
        half = np.abs(y - offset) >= 0.5 * abs(amp)
        width = 0.5 * (x[half].max() - x[half].min()) if half.sum() > 1 else 0.1
        return np.array([x[k], max(width, 1e-3), amp, offset])

    def _model(self, p, x):
        c, w, a, o = p
        return a * w * w / ((x - c) ** 2 + w * w) + o

    def _jac(self, p, x):
        c, w, a, o = p
        d = (x - c) ** 2 + w * w
        return np.column_stack([
            2 * a * w * w * (x - c) / d ** 2,
            2 * a * w * (x - c) ** 2 / d ** 2,
            w * w / d,
            np.ones_like(x),
        ])

    def _unscale(self, p, cov, info):
        mid, half = info
        t = np.diag([half, half, 1.0, 1.0])
        q = np.array([mid + half * p[0], abs(half * p[1]), p[2], p[3]])
        return q, t @ cov @ t

    def _check(self, params, X):
        if not (np.min(X) <= params[0] <= np.max(X)):
            raise FitError("fitted center lies outside the scanned range")


class Gaussian2DModel(_CurveModel):
    """Correlated 2-D Gaussian plus offset.

    Parameters are ``(center_x, center_y, width_x, width_y, rho, amplitude,
    offset)``; internally the correlation is carried as ``tanh`` of a free
    variable so it stays inside (-1, 1).
    """

    names = ("center_x", "center_y", "width_x", "width_y", "rho", "amplitude", "offset")

    def _scale(self, X, info=None):
        if info is None:
            ix = _affine(X[:, 0])[1]
            iy = _affine(X[:, 1])[1]
            info = (ix, iy)
        return np.column_stack([(X[:, 0] - info[0][0]) / info[0][1], (X[:, 1] - info[1][0]) / info[1][1]]), info

    def _guess(self, X, y):
        med = float(np.median(y))
        sign = 1.0 if y.max() - med >= med - y.min() else -1.0
        offset = float(y.min() if sign > 0 else y.max())
        w = np.clip(sign * (y - offset), 0.0, None)
        k = int(np.argmax(w))
        # weighted moments of the feature seed centre, widths and correlation
        w = w * (w >= 0.5 * w[k])
        cx, cy = np.average(X[:, 0], weights=w), np.average(X[:, 1], weights=w)
        c = np.cov(X[:, 0], X[:, 1], aweights=w)
        sx, sy = (max(math.sqrt(max(c[i, i], 0.0)), 0.05) for i in range(2))
        r = math.atanh(float(np.clip(c[0, 1] / (sx * sy), -0.9, 0.9)))
        return np.array([cx, cy, sx, sy, r, float(y[k] - offset), offset])

    @staticmethod
    def _parts(p, X):
        cx, cy, sx, sy, r, a, o = p
        rho = np.tanh(r)
        den = 1 - rho * rho
        u = (X[:, 0] - cx) / sx
        v = (X[:, 1] - cy) / sy
        q = (u * u - 2 * rho * u * v + v * v) / den
        e = np.exp(-0.5 * q)
        return cx, cy, sx, sy, rho, den, u, v, q, e, a, o

    def _model(self, p, X):
        *_, e, a, o = self._parts(p, X)
        return a * e + o

    def _jac(self, p, X):
        cx, cy, sx, sy, rho, den, u, v, q, e, a, o = self._parts(p, X)
        dq_du = 2 * (u - rho * v) / den
        dq_dv = 2 * (v - rho * u) / den
        dq_drho = (-2 * u * v + 2 * rho * q) / den
        g = -0.5 * a * e
        return np.column_stack([
            g * dq_du * (-1 / sx),
            g * dq_dv * (-1 / sy),
            g * dq_du * (-u / sx),
            g * dq_dv * (-v / sy),
            g * dq_drho * (1 - rho * rho),
            e,
            np.ones_like(u),
        ])

    def _unscale(self, p, cov, info):
        (mx, hx), (my, hy) = info
        rho = np.tanh(p[4])
        t = np.diag([hx, hy, hx, hy, 1 - rho * rho, 1.0, 1.0])
        q = np.array([mx + hx * p[0], my + hy * p[1], abs(hx * p[2]), abs(hy * p[3]), rho, p[5], p[6]])
        return q, t @ cov @ t

    def _check(self, params, X):
        inside = (X[:, 0].min() <= params[0] <= X[:, 0].max()) and (X[:, 1].min() <= params[1] <= X[:, 1].max())
        if not inside:
            raise FitError("fitted center lies outside the grid")


class DampedSineModel(_CurveModel):
    """``amplitude * exp(-decay t) * cos(2 pi frequency t + phase) + offset``."""

    names = ("amplitude", "frequency", "phase", "decay", "offset")

    def __init__(self, frequency_guess: float | None = None, max_nfev: int = 2000, xtol: float = 1e-14,
                 ftol: float = 1e-14):
        super().__init__(max_nfev=max_nfev, xtol=xtol, ftol=ftol)
        self.frequency_guess = frequency_guess

    def _scale(self, X, info=None):
        t = X.ravel()
        if info is None:
            span = float(np.max(t))
            info = span if span > 0 else 1.0
        return t / info, info

    def _guess(self, t, y):
        offset = float(np.mean(y))
        amp = 0.5 * float(np.ptp(y))
        span = self._fit_span if hasattr(self, "_fit_span") else None
        if self.frequency_guess is not None and span:
            f = self.frequency_guess * span
        else:
            n = len(t)
            pad = 16 * n
            spec = np.abs(np.fft.rfft(y - offset, pad))
            freqs = np.fft.rfftfreq(pad, d=(t[-1] - t[0]) / (n - 1))
            f = float(freqs[1 + np.argmax(spec[1:])])
        phase = 0.0 if y[0] >= offset else np.pi
        return np.array([amp, f, phase, 0.0, offset])

    def fit(self, X, y):
        t = np.asarray(X, dtype=float).ravel()
        self._fit_span = float(np.max(t)) if t.size else None
        return super().fit(t[:, None], y)

    def _model(self, p, t):
        a, f, ph, k, o = p
        return a * np.exp(-k * t) * np.cos(2 * np.pi * f * t + ph) + o

    def _jac(self, p, t):
        a, f, ph, k, o = p
        env = np.exp(-k * t)
        arg = 2 * np.pi * f * t + ph
        c, s = np.cos(arg), np.sin(arg)
        return np.column_stack([env * c, -a * env * s * 2 * np.pi * t, -a * env * s, -a * t * env * c,
                                np.ones_like(t)])

    def _unscale(self, p, cov, span):
        a, f, ph, k, o = p
        if a < 0:
            a, ph = -a, ph + np.pi
        if f < 0:
            f, ph = -f, -ph
        t = np.diag([1.0, 1 / span, 1.0, 1 / span, 1.0])
        return np.array([a, f / span, ph % (2 * np.pi), k / span, o]), t @ cov @ t


def fit_lorentzian(freqs, signal) -> FitResult:
    """Fit a single Lorentzian peak or dip."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size < 5:
        raise FitError("need at least 5 points")
    return LorentzianModel().fit(freqs[:, None], signal).result_


def fit_gaussian_2d(grid_x, grid_y, signal) -> FitResult:
    """Fit a 2-D Gaussian to ``signal[i, j]`` sampled at ``(grid_x[i], grid_y[j])``."""
    gx, gy = np.asarray(grid_x, dtype=float), np.asarray(grid_y, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if gx.size < 6 or gy.size < 6:
        raise FitError("need at least a 6x6 grid")
    if signal.shape != (gx.size, gy.size):
        raise ValueError("signal shape must be (len(grid_x), len(grid_y))")
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    return Gaussian2DModel().fit(np.column_stack([xx.ravel(), yy.ravel()]), signal.ravel()).result_


def fit_damped_sine(times, signal, frequency_guess: float | None = None) -> FitResult:
    return DampedSineModel(frequency_guess=frequency_guess).fit(times, signal).result_


def fit_polynomial(x, y, powers=(0, 2)) -> FitResult:
    """Linear least squares for ``sum_k c_k x^powers[k]``, with covariance."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    powers = tuple(powers)
    if x.size < len(powers):
        raise FitError("not enough points for the requested polynomial")
    design = np.column_stack([x ** k for k in powers])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = design @ coef - y
    return FitResult(coef, _covariance(design, resid), float(np.linalg.norm(resid)),
                     tuple(f"c{k}" for k in powers))
