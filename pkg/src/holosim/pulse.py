"""Drive envelopes, single tones and pulse schedules.

Amplitudes are angular frequencies (rad/s), times are seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import erf

SHAPES = ("square", "flat_top_gaussian")


@dataclass(frozen=True)
class EnvelopeSpec:
    """Pulse envelope.

    A flat-top Gaussian rises over ``(duration - flat_length) / 2``. Each edge
    is a Gaussian of width ``sigma`` truncated at the edge length and shifted
    and rescaled so it meets zero at the pulse boundary and ``amplitude`` at
    the plateau.
    """

    shape: str = "square"
    amplitude: float = 0.0
    duration: float = 0.0
    sigma: float = 0.0
    flat_length: float | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown envelope shape {self.shape!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.shape == "flat_top_gaussian":
            flat = self.duration if self.flat_length is None else self.flat_length
            if flat < 0 or flat > self.duration * (1 + 1e-12):
                raise ValueError("flat_length must lie in [0, duration]")
            if self.sigma < 0:
                raise ValueError("sigma must be >= 0")
            object.__setattr__(self, "flat_length", min(float(flat), self.duration))

    @classmethod
    def flat_top(cls, amplitude: float, flat_length: float, sigma: float, edge_sigmas: float = 2.0):
        """Flat-top Gaussian whose edges are truncated at ``edge_sigmas * sigma``."""
        return cls("flat_top_gaussian", amplitude, flat_length + 2 * edge_sigmas * sigma, sigma, flat_length)

    @property
    def edge(self) -> float:
        if self.shape == "square":
            return 0.0
        return 0.5 * (self.duration - self.flat_length)

    def with_amplitude(self, amplitude: float) -> "EnvelopeSpec":
        return replace(self, amplitude=float(amplitude))

    def plateaus(self) -> list[tuple[float, float]]:
        """Intervals on which the envelope is constant (and nonzero)."""
        e = self.edge
        if self.duration - 2 * e <= 0:
            return []
        return [(e, self.duration - e)]

    def breakpoints(self) -> list[float]:
        e = self.edge
        pts = {0.0, self.duration}
        if e > 0:
            pts.update({e, self.duration - e})
        return sorted(pts)

    def unit_area(self) -> float:
        """Area per unit amplitude (seconds)."""
        if self.shape == "square":
            return self.duration
        return self.flat_length + 2 * _edge_area(self.edge, self.sigma)


def _edge_profile(x, edge: float, sigma: float):
    """Rescaled truncated Gaussian; x is the distance from the plateau."""
    x = np.asarray(x, dtype=float)
    if edge <= 0:
        return np.zeros_like(x)
    if sigma <= 0:
        return (x <= 0).astype(float)
    floor = math.exp(-0.5 * (edge / sigma) ** 2)
    return (np.exp(-0.5 * (x / sigma) ** 2) - floor) / (1.0 - floor)


def _edge_area(edge: float, sigma: float) -> float:
    if edge <= 0 or sigma <= 0:
        return 0.0
    floor = math.exp(-0.5 * (edge / sigma) ** 2)
    gauss = sigma * math.sqrt(math.pi / 2) * erf(edge / (sigma * math.sqrt(2)))
    return (gauss - floor * edge) / (1.0 - floor)


def envelope_value(spec: EnvelopeSpec, t):
    """Envelope at time(s) ``t``; zero outside ``[0, duration]``."""
    t = np.asarray(t, dtype=float)
    inside = (t >= 0) & (t <= spec.duration)
    if spec.shape == "square":
        out = np.where(inside, spec.amplitude, 0.0)
    else:
        e = spec.edge
        dist = np.maximum(e - t, 0.0) + np.maximum(t - (spec.duration - e), 0.0)
        out = np.where(inside, spec.amplitude * _edge_profile(dist, e, spec.sigma), 0.0)
    return float(out) if out.ndim == 0 else out


def envelope_area(spec: EnvelopeSpec) -> float:
    """Time integral of the envelope (rad when amplitude is in rad/s)."""
    return spec.amplitude * spec.unit_area()


def solve_amplitude_for_area(spec: EnvelopeSpec, target_area: float) -> EnvelopeSpec:
    """Return ``spec`` rescaled so that its area equals ``target_area``."""
    if not target_area > 0:
        raise ValueError("target_area must be > 0")
    unit = spec.unit_area()
    if unit <= 0:
        raise ValueError("envelope has zero area per unit amplitude")
    return spec.with_amplitude(target_area / unit)


@dataclass(frozen=True)
class DrivePulse:
    """One microwave tone on one qubit.

    The lab-frame drive is ``|scale| * eta(t) * cos(drive_freq * t + phase + arg(scale))``.
    """

    qubit: int
    envelope: EnvelopeSpec
    drive_freq: float
    phase: float = 0.0
    scale: complex = 1.0

    def __post_init__(self):
        if self.qubit not in (0, 1):
            raise ValueError(f"drive qubit must be 0 or 1, got {self.qubit}")
        if abs(self.scale) > 1 + 1e-12:
            raise ValueError("|scale| must be <= 1")

    @property
    def total_phase(self) -> float:
        return float(self.phase + np.angle(self.scale))

    def amplitude(self, t):
        """Slow envelope including the scale magnitude."""
        return abs(self.scale) * envelope_value(self.envelope, t)

    def value(self, t):
        """Real lab-frame drive signal."""
        t = np.asarray(t, dtype=float)
        return self.amplitude(t) * np.cos(self.drive_freq * t + self.total_phase)


@dataclass(frozen=True)
class PulseSchedule:
    """Time-ordered drive pulses ``(start, DrivePulse)`` inside ``[0, total_duration]``."""

    pulses: tuple[tuple[float, DrivePulse], ...] = ()
    total_duration: float = 0.0

    def __post_init__(self):
        items = tuple(sorted(((float(s), p) for s, p in self.pulses), key=lambda sp: sp[0]))
        total = self.total_duration
        if total <= 0:
            total = max((s + p.envelope.duration for s, p in items), default=0.0)
        if total <= 0:
            raise ValueError("schedule needs a positive total duration")
        for s, p in items:
            if s < 0 or s + p.envelope.duration > total * (1 + 1e-12):
                raise ValueError("pulse does not fit inside the schedule")
        object.__setattr__(self, "pulses", items)
        object.__setattr__(self, "total_duration", float(total))

    @classmethod
    def simultaneous(cls, drives: Sequence[DrivePulse], start: float = 0.0, total_duration: float = 0.0):
        return cls(tuple((start, d) for d in drives), total_duration)

    def breakpoints(self) -> list[float]:
        pts = {0.0, self.total_duration}
        for s, p in self.pulses:
            pts.update(s + b for b in p.envelope.breakpoints())
        return sorted(pts)

    def constant_windows(self) -> list[tuple[float, float]]:
        """Sub-intervals between breakpoints on which every envelope is constant."""
        out = []
        bps = self.breakpoints()
        for a, b in zip(bps[:-1], bps[1:]):
            if b - a <= 0:
                continue
            mid = 0.5 * (a + b)
            ok = True
            for s, p in self.pulses:
                lt = mid - s
                if 0 < lt < p.envelope.duration and not any(lo <= lt <= hi for lo, hi in p.envelope.plateaus()):
                    ok = False
                    break
            if ok:
                out.append((a, b))
        return out

    def active(self, t: float) -> list[tuple[float, DrivePulse]]:
        return [(s, p) for s, p in self.pulses if s <= t <= s + p.envelope.duration]
