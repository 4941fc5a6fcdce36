"""Drive calibration re-enacted on the simulated device.

Steps mirror a laboratory tune-up of the two-tone operation:

1. single-tone spectroscopy of the |f0> <-> |g1> line at several drive
   amplitudes, a Lorentzian per amplitude and a quadratic Stark curve;
2. single-tone Rabi oscillations, with the amplitude adjusted until the
   oscillation frequency hits the target;
3. two-tone transfer maps over a grid of frequency offsets, fitted with a
   2-D Gaussian, for several mixing angles;
4. a quadratic in the mixing angle through the optimal offsets.

Drive amplitudes are quoted in "volts", an arbitrary linear unit with
``1 V = 2 pi x 1 GHz`` of drive amplitude.
"""
from __future__ import annotations

import configparser
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..device import GHZ, MHZ, DeviceParams, coupling_per_eta, dressed_basis, dressed_transition
from ..dynamics import IntegratorConfig
from ..model import dressed_state, rwa_hamiltonian, simulate
from ..pulse import DrivePulse, EnvelopeSpec, PulseSchedule
from .fitting import FitError, FitResult, fit_damped_sine, fit_gaussian_2d, fit_lorentzian, fit_polynomial

VOLT = GHZ
DEFAULT_TARGET_RATE = 4.70e6
DEFAULT_AMPLITUDES = (0.04, 0.08, 0.12, 0.16, 0.20)
DEFAULT_THETAS = (0.3, 0.6, 0.9, 1.2, math.pi / 2)


def parallel_map(func: Callable, items: Iterable, workers: int = 1) -> list:
    """Order-preserving map, fanned out to processes when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


# ---------------------------------------------------------------- table

@dataclass(frozen=True)
class CalibrationTable:
    """Stark curves, cross-Stark curves and Rabi amplitudes (SI angular units).

    ``stark_poly[i] = (a, b)`` gives the line at drive amplitude ``V`` as
    ``a V^2 + b``.  ``cross_stark[i]`` holds ``(c0, c1, c2)`` of the optimal
    two-tone frequency offset from ``b`` as a quadratic in the mixing angle.
    ``rabi_amp[i]`` is the single-tone amplitude whose oscillation frequency
    equals ``target_rate`` (Hz).
    """

    stark_poly: tuple[tuple[float, float], tuple[float, float]]
    rabi_amp: tuple[float, float]
    cross_stark: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None
    target_rate: float = DEFAULT_TARGET_RATE
    source: str = "protocol"

    def __post_init__(self):
        sp = tuple((float(a), float(b)) for a, b in self.stark_poly)
        if len(sp) != 2 or any(b <= 0 or not math.isfinite(a) for a, b in sp):
            raise ValueError("stark intercepts must be positive and curvatures finite")
        object.__setattr__(self, "stark_poly", sp)
        object.__setattr__(self, "rabi_amp", tuple(float(x) for x in self.rabi_amp))
        if self.cross_stark is not None:
            object.__setattr__(self, "cross_stark", tuple(tuple(float(c) for c in cs) for cs in self.cross_stark))

    def stark_frequency(self, qubit: int, amplitude: float) -> float:
        a, b = self.stark_poly[qubit]
        v = amplitude / VOLT
        return a * v * v + b

    def cross_shift(self, qubit: int, theta: float) -> float:
        c0, c1, c2 = self.cross_stark[qubit]
        return c0 + c1 * theta + c2 * theta * theta

    def drive_frequency(self, qubit: int, theta: float, amplitude: float) -> float:
        """Two-tone frequency: cross-Stark curve when present, else the single-tone curve."""
        if self.cross_stark is not None:
            return self.stark_poly[qubit][1] + self.cross_shift(qubit, theta)
        return self.stark_frequency(qubit, amplitude)

    def amplitude_for(self, qubit: int, coupling: float) -> float:
        """Drive amplitude (at unit scale) giving the exchange coupling ``coupling`` (rad/s).

        The coupling is the matrix element; it equals ``pi`` times the
        population oscillation frequency.
        """
        return self.rabi_amp[qubit] * coupling / (math.pi * self.target_rate)

    def without_cross_stark(self) -> "CalibrationTable":
        return CalibrationTable(self.stark_poly, self.rabi_amp, None, self.target_rate, self.source)

    def intercept_only(self) -> "CalibrationTable":
        """Same table with all Stark corrections removed."""
        sp = tuple((0.0, b) for _, b in self.stark_poly)
        return CalibrationTable(sp, self.rabi_amp, None, self.target_rate, self.source)

    def save(self, path) -> None:
        cp = configparser.ConfigParser()
        cp["calibration"] = {"target_rate_mhz": repr(self.target_rate / 1e6), "source": self.source}
        for q in range(2):
            a, b = self.stark_poly[q]
            sec = {
                "stark_a_ghz_per_v2": repr(a / GHZ),
                "stark_b_ghz": repr(b / GHZ),
                "rabi_amp_v": repr(self.rabi_amp[q] / VOLT),
            }
            if self.cross_stark is not None:
                for k, c in enumerate(self.cross_stark[q]):
                    sec[f"cross_c{k}_ghz"] = repr(c / GHZ)
            cp[f"qubit{q + 1}"] = sec
        with open(path, "w") as fh:
            fh.write("# frequencies in GHz, curvatures in GHz/V^2, amplitudes in V (1 V = 1 GHz drive)\n")
            cp.write(fh)

    @classmethod
    def load(cls, path) -> "CalibrationTable":
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(path)
        stark, amps, cross = [], [], []
        for q in range(2):
            s = cp[f"qubit{q + 1}"]
            stark.append((float(s["stark_a_ghz_per_v2"]) * GHZ, float(s["stark_b_ghz"]) * GHZ))
            amps.append(float(s["rabi_amp_v"]) * VOLT)
            if "cross_c0_ghz" in s:
                cross.append(tuple(float(s[f"cross_c{k}_ghz"]) * GHZ for k in range(3)))
        c = cp["calibration"]
        return cls(tuple(stark), tuple(amps), tuple(cross) if len(cross) == 2 else None,
                   float(c.get("target_rate_mhz", DEFAULT_TARGET_RATE / 1e6)) * 1e6, c.get("source", "protocol"))


# ---------------------------------------------------------------- single tone

def single_tone_hamiltonian(device: DeviceParams, qubit: int, freq: float, amplitude: float) -> np.ndarray:
    """Static rotating-frame Hamiltonian under one constant tone."""
    pulse = DrivePulse(qubit, EnvelopeSpec("square", amplitude, 1.0), freq)
    return rwa_hamiltonian(device, PulseSchedule.simultaneous([pulse]))(0.5)


def _f0(qubit: int) -> tuple[int, int, int]:
    lv = [0, 0, 0]
    lv[qubit] = 2
    return tuple(lv)


def _source_amplitudes(device: DeviceParams, qubit: int, h: np.ndarray):
    e, v = np.linalg.eigh(h)
    d = dressed_state(device, _f0(qubit)).amplitudes
    c = (v.conj().T @ d)
    return e, np.abs(c) ** 2


def source_population(device: DeviceParams, qubit: int, freq: float, amplitude: float, times) -> np.ndarray:
    """Dressed |f0> population of a driven qubit at the given times."""
    e, w = _source_amplitudes(device, qubit, single_tone_hamiltonian(device, qubit, freq, amplitude))
    times = np.asarray(times, dtype=float)
    amp = np.exp(-1j * np.outer(times, e)) @ w
    return np.abs(amp) ** 2


def spectroscopy_signal(device: DeviceParams, qubit: int, freq: float, amplitude: float, duration: float) -> float:
    """Population removed from |f0>, averaged over a pulse of ``duration``."""
    e, w = _source_amplitudes(device, qubit, single_tone_hamiltonian(device, qubit, freq, amplitude))
    de = e[:, None] - e[None, :]
    x = de * duration
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(np.abs(x) > 1e-12, (1 - np.exp(-1j * x)) / (1j * x), 1.0)
    p = np.real(w @ avg @ w)
    return float(1.0 - p)


def _spectro_point(args):
    device, qubit, freq, amplitude, duration = args
    return spectroscopy_signal(device, qubit, freq, amplitude, duration)


def linewidth_estimate(device: DeviceParams, qubit: int, amplitude: float) -> float:
    """Half width (rad/s) of the time-averaged resonance, to leading order."""
    return 2 * abs(coupling_per_eta(device, qubit)) * amplitude


@dataclass
class StarkCurve:
    qubit: int
    voltages: np.ndarray
    centers: np.ndarray
    center_err: np.ndarray
    fit: FitResult
    fit_with_linear: FitResult
    scans: list = field(default_factory=list, repr=False)

    def linear_zscore(self) -> float:
        """Significance of a linear term added to the quadratic fit."""
        c, e = self.linear
        return abs(c) / e if e > 0 else math.inf

    @property
    def a(self) -> float:
        return self.fit["c2"]

    @property
    def b(self) -> float:
        return self.fit["c0"]

    @property
    def linear(self) -> tuple[float, float]:
        """Linear coefficient and its error from the probe fit (zero error if not fitted)."""
        if "c1" not in self.fit_with_linear.names:
            return 0.0, 0.0
        return self.fit_with_linear["c1"], self.fit_with_linear.stderr("c1")

    def predict(self, voltage: float) -> float:
        return self.a * voltage * voltage + self.b

    def shift_stderr(self, voltage: float) -> float:
        """Standard error of the fitted curve at ``voltage``, relative to the true line."""
        g = np.array([1.0, voltage * voltage])
        return float(math.sqrt(max(g @ self.fit.covariance @ g, 0.0)))


def calibrate_single_stark(device: DeviceParams, qubit: int, amplitude_grid: Sequence[float] = DEFAULT_AMPLITUDES,
                           duration: float = 2e-6, n_points: int = 41, span_widths: float = 5.0,
                           workers: int = 1) -> StarkCurve:
    """Spectroscopy at each drive amplitude (in volts) and a quadratic Stark fit."""
    volts = np.sort(np.asarray(amplitude_grid, dtype=float))
    if volts.size < 2 or np.any(volts <= 0):
        raise ValueError("need at least two positive amplitudes")
    guess_b = dressed_transition(device, qubit)
    guess_a = 0.0
    centers, errs, scans = [], [], []
    for k, v in enumerate(volts):
        amp = v * VOLT
        mid = guess_b + guess_a * v * v
        half = span_widths * linewidth_estimate(device, qubit, amp) + 0.5 * MHZ
        freqs = np.linspace(mid - half, mid + half, n_points)
        signal = np.array(parallel_map(_spectro_point, [(device, qubit, f, amp, duration) for f in freqs], workers))
        fit = fit_lorentzian(freqs, signal)
        centers.append(fit["center"])
        errs.append(fit.stderr("center"))
        scans.append((freqs, signal, fit))
        if k >= 1:
            guess = fit_polynomial(volts[: k + 1], np.array(centers), (0, 2))
            guess_a, guess_b = guess["c2"], guess["c0"]
    centers, errs = np.array(centers), np.array(errs)
    quad = fit_polynomial(volts, centers, (0, 2))
    # the shift is even in the amplitude, so the linear probe carries the next even order along
    if volts.size >= 5:
        lin = fit_polynomial(volts, centers, (0, 1, 2, 4))
    elif volts.size >= 4:
        lin = fit_polynomial(volts, centers, (0, 1, 2))
    else:
        lin = quad
    return StarkCurve(qubit, volts, centers, errs, quad, lin, scans)


def measure_rabi_rate(device: DeviceParams, qubit: int, amplitude: float, freq: float, target_rate: float,
                      periods: float = 3.0, n_times: int = 121) -> FitResult:
    """Fit the |f0> population oscillation under a constant tone."""
    times = np.linspace(0.0, periods / target_rate, n_times)
    pop = source_population(device, qubit, freq, amplitude, times)
    return fit_damped_sine(times, pop, frequency_guess=target_rate)


def calibrate_rabi_rate(device: DeviceParams, qubit: int, target_rate: float = DEFAULT_TARGET_RATE,
                        stark: StarkCurve | tuple[float, float] | None = None, tol: float = 1e-4,
                        v_max: float = 0.6) -> float:
    """Drive amplitude (rad/s) whose single-tone oscillation frequency is ``target_rate`` (Hz).

    The tone follows the Stark curve ``stark`` (``(a, b)`` or a
    :class:`StarkCurve`) and sits on the dressed line if none is given.
    The amplitude is bracketed and refined by Brent's method until the
    fitted rate is within ``tol`` (relative) of the target.
    """
    if target_rate < 0:
        raise ValueError("target rate must be >= 0")
    if target_rate == 0:
        return 0.0
    if isinstance(stark, StarkCurve):
        a, b = stark.a, stark.b
    elif stark is None:
        a, b = 0.0, dressed_transition(device, qubit)
    else:
        a, b = stark

    def rate(v):
        res = measure_rabi_rate(device, qubit, v * VOLT, a * v * v + b, target_rate)
        return res["frequency"]

    v0 = math.pi * target_rate / abs(coupling_per_eta(device, qubit)) / VOLT
    hi = min(1.5 * v0, v_max)
    lo = min(0.7 * v0, 0.5 * hi)
    def below_target(v):
        try:
            return rate(v) < target_rate
        except FitError:
            # at the ceiling an oscillation too slow to fit in the window means the target is out of reach
            if v >= v_max:
                return True
            raise

    while below_target(hi):
        if hi >= v_max:
            raise ValueError("target rate is unreachable below the amplitude ceiling")
        lo, hi = hi, min(hi * 1.5, v_max)
    while rate(lo) > target_rate:
        lo *= 0.7
    v = brentq(lambda x: rate(x) - target_rate, lo, hi, xtol=1e-9 * v0, rtol=1e-12, maxiter=100)
    got = rate(v)
    if abs(got - target_rate) > tol * target_rate:
        raise FitError(f"rate {got:.6e} Hz misses target {target_rate:.6e} Hz")
    return v * VOLT


# ---------------------------------------------------------------- two tones

def _transfer_point(args):
    device, freqs, amps, lams, duration, cfg = args
    pulses = [DrivePulse(q, EnvelopeSpec("square", amps[q], duration), freqs[q], 0.0, lams[q]) for q in range(2)]
    res = simulate(device, PulseSchedule.simultaneous(pulses), "gf0", cfg=cfg, labels=["fg0"])
    return float(res.populations["fg0"][-1])


@dataclass
class CrossStarkResult:
    thetas: np.ndarray
    shifts: np.ndarray          # optimal offset from the intercept, (n_theta, 2), rad/s
    shift_err: np.ndarray
    single_tone: np.ndarray     # single-tone Stark prediction at the same amplitudes
    single_tone_err: np.ndarray
    polys: tuple
    residual: np.ndarray        # largest |residual| of each quadratic fit, rad/s
    maps: list = field(default_factory=list, repr=False)


def transfer_map(device: DeviceParams, table: CalibrationTable, theta: float, span: float = 3 * MHZ,
                 n_grid: int = 13, workers: int = 1, cfg: IntegratorConfig | None = None):
    """Population moved into |fg0> from |gf0> over a grid of drive detunings.

    Returns ``(offsets, map, centre_freqs)`` with ``map[i, j]`` for offsets
    ``(offsets[i], offsets[j])`` around the single-tone predictions.
    """
    cfg = cfg or IntegratorConfig()
    lams = (math.sin(theta / 2), math.cos(theta / 2))
    amps = table.rabi_amp
    duration = 1.0 / table.target_rate
    centre = [table.stark_frequency(q, lams[q] * amps[q]) for q in range(2)]
    offsets = np.linspace(-span, span, n_grid)
    jobs = [(device, (centre[0] + d1, centre[1] + d2), amps, lams, duration, cfg) for d1 in offsets for d2 in offsets]
    values = np.array(parallel_map(_transfer_point, jobs, workers)).reshape(n_grid, n_grid)
    return offsets, values, centre


def calibrate_cross_stark(device: DeviceParams, theta_grid: Sequence[float] = DEFAULT_THETAS,
                          table: CalibrationTable | None = None, span: float = 3 * MHZ, n_grid: int = 13,
                          workers: int = 1, cfg: IntegratorConfig | None = None,
                          stark_curves: Sequence[StarkCurve] | None = None) -> CrossStarkResult:
    """Optimal two-tone frequencies per mixing angle and their quadratic fits.

    ``stark_curves``, when given, supply the uncertainty of the single-tone
    prediction each optimum is compared with.
    """
    thetas = np.asarray(theta_grid, dtype=float)
    if thetas.size < 3:
        raise ValueError("need at least three mixing angles for a quadratic")
    if np.any(thetas <= 0) or np.any(thetas > math.pi / 2 + 1e-12):
        raise ValueError("mixing angles must lie in (0, pi/2]")
    if table is None:
        table = spectral_calibration(device)
    shifts, errs, single, single_err, maps = [], [], [], [], []
    for th in thetas:
        offsets, m, centre = transfer_map(device, table, th, span, n_grid, workers, cfg)
        fit = fit_gaussian_2d(offsets, offsets, m)
        lams = (math.sin(th / 2), math.cos(th / 2))
        shifts.append([centre[0] + fit["center_x"] - table.stark_poly[0][1],
                       centre[1] + fit["center_y"] - table.stark_poly[1][1]])
        errs.append([fit.stderr("center_x"), fit.stderr("center_y")])
        volts = [lams[q] * table.rabi_amp[q] / VOLT for q in range(2)]
        single.append([table.stark_frequency(q, volts[q] * VOLT) - table.stark_poly[q][1] for q in range(2)])
        single_err.append([stark_curves[q].shift_stderr(volts[q]) if stark_curves else 0.0 for q in range(2)])
        maps.append((offsets, m, fit))
    shifts, errs, single = np.array(shifts), np.array(errs), np.array(single)
    polys, resid = [], []
    for q in range(2):
        f = fit_polynomial(thetas, shifts[:, q], (0, 1, 2))
        polys.append(tuple(float(c) for c in f.params))
        resid.append(np.max(np.abs(np.polyval(f.params[::-1], thetas) - shifts[:, q])))
    return CrossStarkResult(thetas, shifts, errs, single, np.array(single_err), tuple(polys), np.array(resid), maps)


# ---------------------------------------------------------------- spectral reference

def _line_gap(device: DeviceParams, qubit: int, freq: float, amplitude: float) -> float:
    h = single_tone_hamiltonian(device, qubit, freq, amplitude)
    e, v = np.linalg.eigh(h)
    _, basis = dressed_basis(device)
    a = basis[:, device.dims.index(_f0(qubit))]
    b = basis[:, device.dims.index((0, 0, 1))]
    weight = np.abs(v.conj().T @ a) ** 2 + np.abs(v.conj().T @ b) ** 2
    k = np.argsort(weight)[-2:]
    return float(abs(e[k[0]] - e[k[1]]))


def resonance(device: DeviceParams, qubit: int, amplitude: float) -> tuple[float, float]:
    """Drive frequency minimising the driven splitting, and that splitting (rad/s)."""
    w0 = dressed_transition(device, qubit)
    res = minimize_scalar(lambda f: _line_gap(device, qubit, w0 + f * MHZ, amplitude),
                          bounds=(-40.0, 5.0), method="bounded", options={"xatol": 1e-7})
    freq = w0 + res.x * MHZ
    return freq, _line_gap(device, qubit, freq, amplitude)


def spectral_calibration(device: DeviceParams, target_rate: float = DEFAULT_TARGET_RATE,
                         voltages: Sequence[float] = DEFAULT_AMPLITUDES,
                         thetas: Sequence[float] | None = DEFAULT_THETAS) -> CalibrationTable:
    """Calibration read directly off the driven spectrum (no simulated measurements).

    The resonance at each amplitude is where the splitting of the driven
    |f0>/|g1> pair is smallest, and the oscillation frequency is that
    splitting over 2 pi.  With ``thetas`` the two-tone curves are the
    single-tone resonances at each drive's operating amplitude.
    """
    stark, amps = [], []
    for q in range(2):
        centres = [resonance(device, q, v * VOLT)[0] for v in voltages]
        fit = fit_polynomial(np.asarray(voltages), np.asarray(centres), (0, 2))
        stark.append((fit["c2"], fit["c0"]))
        v0 = math.pi * target_rate / abs(coupling_per_eta(device, q)) / VOLT
        f = lambda v: resonance(device, q, v * VOLT)[1] / (2 * math.pi) - target_rate
        amps.append(brentq(f, 0.5 * v0, 2.0 * v0, xtol=1e-10) * VOLT)
    cross = None
    if thetas is not None:
        th = np.asarray(thetas, dtype=float)
        cross = []
        for q in range(2):
            lam = np.sin(th / 2) if q == 0 else np.cos(th / 2)
            shifts = [resonance(device, q, l * amps[q])[0] - stark[q][1] for l in lam]
            cross.append(tuple(fit_polynomial(th, shifts, (0, 1, 2)).params))
        cross = tuple(cross)
    return CalibrationTable(tuple(stark), tuple(amps), cross, target_rate, "spectral")


# ---------------------------------------------------------------- orchestration

@dataclass
class CalibrationReport:
    table: CalibrationTable
    stark: list
    cross: CrossStarkResult | None


def run_calibration(device: DeviceParams, amplitude_grid: Sequence[float] = DEFAULT_AMPLITUDES,
                    theta_grid: Sequence[float] | None = DEFAULT_THETAS, target_rate: float = DEFAULT_TARGET_RATE,
                    span: float = 3 * MHZ, n_grid: int = 13, workers: int = 1,
                    cfg: IntegratorConfig | None = None) -> CalibrationReport:
    """All four steps; ``theta_grid=None`` skips the two-tone maps."""
    curves = [calibrate_single_stark(device, q, amplitude_grid, workers=workers) for q in range(2)]
    amps = tuple(calibrate_rabi_rate(device, q, target_rate, curves[q]) for q in range(2))
    table = CalibrationTable(tuple((c.a, c.b) for c in curves), amps, None, target_rate, "protocol")
    cross = None
    if theta_grid is not None:
        cross = calibrate_cross_stark(device, theta_grid, table, span, n_grid, workers, cfg, curves)
        table = CalibrationTable(table.stark_poly, amps, cross.polys, target_rate, "protocol")
    return CalibrationReport(table, curves, cross)


class DeviceCalibrator(BaseEstimator):
    """Estimator-style wrapper: ``fit(device)`` runs the protocol.

    After fitting, ``table_`` holds the :class:`CalibrationTable` and
    ``predict(thetas)`` returns the two drive frequencies (rad/s) for each
    mixing angle at the calibrated amplitudes.
    """

    def __init__(self, amplitude_grid=DEFAULT_AMPLITUDES, theta_grid=DEFAULT_THETAS,
                 target_rate: float = DEFAULT_TARGET_RATE, span: float = 3 * MHZ, n_grid: int = 13,
                 workers: int = 1):
        self.amplitude_grid = amplitude_grid
        self.theta_grid = theta_grid
        self.target_rate = target_rate
        self.span = span
        self.n_grid = n_grid
        self.workers = workers

    def fit(self, device: DeviceParams, y=None):
        report = run_calibration(device, self.amplitude_grid, self.theta_grid, self.target_rate, self.span,
                                 self.n_grid, self.workers)
        self.report_ = report
        self.table_ = report.table
        return self

    def predict(self, thetas) -> np.ndarray:
        if not hasattr(self, "table_"):
            raise NotFittedError("DeviceCalibrator is not fitted yet")
        t = self.table_
        out = []
        for th in np.atleast_1d(np.asarray(thetas, dtype=float)):
            lams = (math.sin(th / 2), math.cos(th / 2))
            out.append([t.drive_frequency(q, th, lams[q] * t.rabi_amp[q]) for q in range(2)])
        return np.array(out)
