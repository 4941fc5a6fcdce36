"""Scenario configuration read from INI-style text files.

Sections and keys (all optional; defaults reproduce the reference device):

``[device]``
    omega_r, omega1, omega2, alpha1, alpha2, g1, g2 in GHz; t1_q1, t1_q2,
    t1_r in microseconds (``inf`` disables a channel); dims as ``4,4,3``.
``[pulse]``
    shape (``flat_top_gaussian`` or ``square``), flat_ns, sigma_ns,
    edge_sigmas, duration_ns (total length; for flat tops it replaces
    edge_sigmas).
``[noise]``
    enabled, max_shift_mhz (two values), grid_points (two values).
``[experiment]``
    name, theta, phase, theta_points, theta_min, theta_max, sweep_phases,
    phase_theta_min_pi, phase_theta_max_pi, phase_theta_points,
    phase_points, model (``full`` or ``effective``), shots, seed, repeats,
    samples, dissipation, frame, workers.  The explicit lists theta_range,
    phase_thetas and phases (radians) override the generated grids; they
    are what :meth:`ScenarioConfig.canonical_text` writes.
``[calibration]``
    file (path to a saved table, relative to the config file), source
    (``spectral``, ``protocol`` or ``bare``, used when no file is given), amplitudes_v,
    thetas, span_mhz, grid_points, target_rate_mhz.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .device import MHZ, NS, DeviceParams
from .pulse import EnvelopeSpec

EXPERIMENTS = ("calibrate", "bell", "theta_sweep", "phase_sweep", "table1", "timeseries")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(",", " ").split())


@dataclass(frozen=True)
class ChargeNoiseSpec:
    """Quasi-static drive detunings from charge dispersion.

    Each qubit's shift follows the arcsine law on ``[-max_shift, max_shift]``
    (rad/s).  The average uses ``grid_points`` cell-centred nodes per axis in
    the underlying uniform phase, ``shift = max_shift * sin(u)``, which makes
    all weights equal and keeps clear of the endpoint singularities.
    """

    max_shift: tuple[float, float] = (0.9 * MHZ, 1.5 * MHZ)
    grid_points: tuple[int, int] = (11, 11)
    enabled: bool = False

    def __post_init__(self):
        ms = tuple(float(x) for x in self.max_shift)
        gp = tuple(int(x) for x in self.grid_points)
        if len(ms) != 2 or len(gp) != 2:
            raise ValueError("charge noise needs two shifts and two grid sizes")
        if any(x < 0 for x in ms):
            raise ValueError("max_shift must be >= 0")
        if any(n < 1 for n in gp):
            raise ValueError("grid_points must be >= 1")
        object.__setattr__(self, "max_shift", ms)
        object.__setattr__(self, "grid_points", gp)

    def axis(self, qubit: int) -> np.ndarray:
        n, dmax = self.grid_points[qubit], self.max_shift[qubit]
        if dmax == 0:
            return np.zeros(1)
        u = ((np.arange(n) + 0.5) / n) * math.pi - math.pi / 2
        return dmax * np.sin(u)

    def nodes(self) -> list[tuple[tuple[float, float], float]]:
        """``((shift1, shift2), weight)`` pairs; weights sum to one."""
        if not self.enabled:
            return [((0.0, 0.0), 1.0)]
        if any(n < 3 for n, d in zip(self.grid_points, self.max_shift) if d > 0):
            warnings.warn("charge-noise grid has fewer than 3 points per axis", stacklevel=2)
        a, b = self.axis(0), self.axis(1)
        w = 1.0 / (a.size * b.size)
        return [((float(x), float(y)), w) for x in a for y in b]

    def refined(self, factor: int = 2) -> "ChargeNoiseSpec":
        return ChargeNoiseSpec(self.max_shift, tuple(factor * n for n in self.grid_points), self.enabled)


@dataclass(frozen=True)
class ScenarioConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    pulse: EnvelopeSpec = field(default_factory=lambda: EnvelopeSpec.flat_top(1.0, 206 * NS, 3.5 * NS))
    noise: ChargeNoiseSpec = field(default_factory=ChargeNoiseSpec)
    experiment: str = "table1"
    theta: float = math.pi / 4
    phase: float = 0.0
    theta_points: int = 30
    theta_range: tuple[float, float] = (0.0, math.pi / 2)
    sweep_phases: tuple[float, ...] = (0.0,)
    phase_thetas: tuple[float, ...] = tuple(np.linspace(0.19 * math.pi, 0.31 * math.pi, 5))
    phases: tuple[float, ...] = tuple(np.linspace(0, 2 * math.pi, 12, endpoint=False))
    model: str = "full"
    shots: int = 1000
    seed: int = 1234
    repeats: int = 1
    samples: int = 201
    dissipation: bool = True
    frame: str = "rwa"
    workers: int = 1
    calibration_file: str | None = None
    cal_source: str = "spectral"
    cal_amplitudes: tuple[float, ...] = (0.04, 0.08, 0.12, 0.16, 0.20)
    cal_thetas: tuple[float, ...] = (0.3, 0.6, 0.9, 1.2, math.pi / 2)
    cal_span: float = 3 * MHZ
    cal_grid: int = 13
    target_rate: float = 4.70e6
    source_text: str = field(default="", repr=False, compare=False)

    def __post_init__(self):
        name = self.experiment.replace("-", "_")
        if name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        object.__setattr__(self, "experiment", name)
        if self.model not in ("full", "effective"):
            raise ValueError("model must be 'full' or 'effective'")
        if self.frame not in ("rwa", "lab"):
            raise ValueError("frame must be 'rwa' or 'lab'")
        if self.theta_points < 1 or not self.phase_thetas or not self.phases or not self.sweep_phases:
            raise ValueError("grids must be nonempty")
        if self.shots < 0 or self.samples < 2 or self.workers < 1 or self.repeats < 1:
            raise ValueError("shots >= 0, samples >= 2, workers >= 1 and repeats >= 1 are required")
        if self.cal_source not in ("spectral", "protocol", "bare"):
            raise ValueError("calibration source must be 'spectral', 'protocol' or 'bare'")
        if self.calibration_file is not None and not os.path.exists(self.calibration_file):
            raise FileNotFoundError(self.calibration_file)

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(self.theta_range[0], self.theta_range[1], self.theta_points)

    def digest(self) -> str:
        """sha256 of the canonical configuration text."""
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def canonical_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["device"] = self.device.to_mapping()
        p = self.pulse
        cp["pulse"] = {"shape": p.shape, "duration_ns": repr(p.duration / NS), "sigma_ns": repr(p.sigma / NS),
                       "flat_ns": repr((p.flat_length or 0.0) / NS)}
        cp["noise"] = {"enabled": str(self.noise.enabled),
                       "max_shift_mhz": ",".join(repr(x / MHZ) for x in self.noise.max_shift),
                       "grid_points": ",".join(str(n) for n in self.noise.grid_points)}
        j = lambda xs: ",".join(repr(float(x)) for x in xs)
        cp["experiment"] = {
            "name": self.experiment, "theta": repr(self.theta), "phase": repr(self.phase),
            "theta_points": str(self.theta_points), "theta_range": j(self.theta_range),
            "sweep_phases": j(self.sweep_phases), "phase_thetas": j(self.phase_thetas), "phases": j(self.phases),
            "model": self.model, "shots": str(self.shots), "seed": str(self.seed), "repeats": str(self.repeats),
            "samples": str(self.samples), "dissipation": str(self.dissipation), "frame": self.frame,
        }
        cp["calibration"] = {
            "file": self.calibration_file or "", "source": self.cal_source,
            "amplitudes_v": j(self.cal_amplitudes), "thetas": j(self.cal_thetas),
            "span_mhz": repr(self.cal_span / MHZ), "grid_points": str(self.cal_grid),
            "target_rate_mhz": repr(self.target_rate / 1e6),
        }
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base_dir: str = ".", **overrides) -> "ScenarioConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.read_string(text)
        kw: dict = {}
        if cp.has_section("device"):
            kw["device"] = DeviceParams.from_mapping(dict(cp["device"]))
        if cp.has_section("pulse"):
            s = cp["pulse"]
            shape = s.get("shape", "flat_top_gaussian")
            if shape == "square":
                kw["pulse"] = EnvelopeSpec("square", 1.0, s.getfloat("duration_ns", 213.0) * NS)
            elif "duration_ns" in s:
                kw["pulse"] = EnvelopeSpec(shape, 1.0, s.getfloat("duration_ns") * NS, s.getfloat("sigma_ns", 3.5) * NS,
                                           s.getfloat("flat_ns", 206.0) * NS)
            else:
                kw["pulse"] = EnvelopeSpec.flat_top(1.0, s.getfloat("flat_ns", 206.0) * NS,
                                                    s.getfloat("sigma_ns", 3.5) * NS, s.getfloat("edge_sigmas", 2.0))
        if cp.has_section("noise"):
            s = cp["noise"]
            kw["noise"] = ChargeNoiseSpec(
                tuple(x * MHZ for x in _floats(s.get("max_shift_mhz", "0.9, 1.5"))),
                tuple(int(x) for x in _floats(s.get("grid_points", "11, 11"))),
                s.getboolean("enabled", False),
            )
        if cp.has_section("experiment"):
            s = cp["experiment"]
            if "name" in s:
                kw["experiment"] = s["name"]
            for key in ("theta", "phase"):
                if key in s:
                    kw[key] = s.getfloat(key)
            for key in ("theta_points", "shots", "seed", "repeats", "samples", "workers"):
                if key in s:
                    kw[key] = s.getint(key)
            if "theta_min" in s or "theta_max" in s:
                kw["theta_range"] = (s.getfloat("theta_min", 0.0), s.getfloat("theta_max", math.pi / 2))
            if "theta_range" in s:
                kw["theta_range"] = _floats(s["theta_range"])
            if "sweep_phases" in s:
                kw["sweep_phases"] = _floats(s["sweep_phases"])
            if "phase_thetas" in s:
                kw["phase_thetas"] = _floats(s["phase_thetas"])
            if "phases" in s:
                kw["phases"] = _floats(s["phases"])
            if any(k in s for k in ("phase_theta_min_pi", "phase_theta_max_pi", "phase_theta_points")):
                kw["phase_thetas"] = tuple(math.pi * np.linspace(s.getfloat("phase_theta_min_pi", 0.19),
                                                                 s.getfloat("phase_theta_max_pi", 0.31),
                                                                 s.getint("phase_theta_points", 5)))
            if "phase_points" in s:
                kw["phases"] = tuple(np.linspace(0, 2 * math.pi, s.getint("phase_points"), endpoint=False))
            for key in ("model", "frame"):
                if key in s:
                    kw[key] = s[key]
            if "dissipation" in s:
                kw["dissipation"] = s.getboolean("dissipation")
        if cp.has_section("calibration"):
            s = cp["calibration"]
            if s.get("file"):
                kw["calibration_file"] = os.path.join(base_dir, s["file"])
            if "source" in s:
                kw["cal_source"] = s["source"]
            if "amplitudes_v" in s:
                kw["cal_amplitudes"] = _floats(s["amplitudes_v"])
            if "thetas" in s:
                kw["cal_thetas"] = _floats(s["thetas"])
            if "span_mhz" in s:
                kw["cal_span"] = s.getfloat("span_mhz") * MHZ
            if "grid_points" in s:
                kw["cal_grid"] = s.getint("grid_points")
            if "target_rate_mhz" in s:
                kw["target_rate"] = s.getfloat("target_rate_mhz") * 1e6
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(source_text=text, **kw)

    @classmethod
    def load(cls, path, **overrides) -> "ScenarioConfig":
        with open(path) as fh:
            text = fh.read()
        return cls.from_text(text, os.path.dirname(os.path.abspath(path)), **overrides)


def parse_floats(values: Sequence[str]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)
