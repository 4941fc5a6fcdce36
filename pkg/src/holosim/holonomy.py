"""Algebra of the resonator-mediated holonomic two-qubit operation.

The three-level generator acts on the ordered basis (fg0, gg1, gf0), couples
both outer states to the middle one with weights ``lambda1`` and ``lambda2``
and is its own cube.  Driving along ``coupling(t) * generator`` for a total
area of pi returns the outer subspace to itself and applies
``I - 2 generator^2`` there, which equals

    [[cos(theta),                    exp(1j * phi) * sin(theta)],
     [exp(-1j * phi) * sin(theta),  -cos(theta)               ]]

on (fg0, gf0) for the parametrisation of :func:`params_from_theta_phi`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .device import DeviceParams, bare_transition, coupling_per_eta
from .pulse import DrivePulse, EnvelopeSpec

_TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class HolonomyParams:
    """Drive weights and the equivalent rotation angles.

    ``lambda2`` is kept real and non-negative; only the ratio is physical.
    """

    lambda1: complex
    lambda2: complex
    theta: float
    phi: float

    def __post_init__(self):
        l1, l2 = complex(self.lambda1), complex(self.lambda2)
        if abs(abs(l1) ** 2 + abs(l2) ** 2 - 1) > 1e-12:
            raise ValueError("|lambda1|^2 + |lambda2|^2 must equal 1")
        if not -1e-12 <= self.theta <= math.pi + 1e-12:
            raise ValueError("theta must lie in [0, pi]")
        if abs(l2) > 1e-15:
            lhs = -np.exp(1j * self.phi) * math.tan(self.theta / 2)
            if abs(lhs - l1 / l2) > 1e-9 * max(1.0, abs(lhs)):
                raise ValueError("lambda ratio is inconsistent with (theta, phi)")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)
        object.__setattr__(self, "phi", float(self.phi) % _TWO_PI)

    @property
    def lambdas(self) -> tuple[complex, complex]:
        return self.lambda1, self.lambda2

    @classmethod
    def from_lambdas(cls, lambda1: complex, lambda2: complex) -> "HolonomyParams":
        l1, l2 = complex(lambda1), complex(lambda2)
        norm = math.sqrt(abs(l1) ** 2 + abs(l2) ** 2)
        if norm == 0:
            raise ValueError("lambdas cannot both vanish")
        l1, l2 = l1 / norm, l2 / norm
        if abs(l2) > 0:
            gauge = np.conj(l2) / abs(l2)
            l1, l2 = l1 * gauge, abs(l2)
        theta, phi = _angles(l1, l2)
        return cls(l1, complex(l2), theta, phi)


def _angles(l1: complex, l2: complex) -> tuple[float, float]:
    theta = 2 * math.atan2(abs(l1), abs(l2))
    if abs(l1) == 0:
        return theta, 0.0
    if abs(l2) == 0:
        return theta, float(np.angle(-l1)) % _TWO_PI
    return theta, float(np.angle(-l1 / l2)) % _TWO_PI


def params_from_theta_phi(theta: float, phi: float) -> HolonomyParams:
    """``lambda2 = cos(theta/2)``, ``lambda1 = -exp(i phi) sin(theta/2)``."""
    if not 0 <= theta <= math.pi:
        raise ValueError("theta must lie in [0, pi]")
    l2 = math.cos(theta / 2)
    if theta == math.pi:
        l2 = 0.0
    l1 = -np.exp(1j * phi) * math.sin(theta / 2)
    return HolonomyParams(complex(l1), complex(l2), float(theta), float(phi))


def theta_phi_from_params(params: HolonomyParams) -> tuple[float, float]:
    """Recover (theta, phi) from the lambda pair alone."""
    return _angles(params.lambda1, params.lambda2)


@dataclass(frozen=True, eq=False)
class HolonomicGate:
    """2x2 operation on (fg, gf)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("gate must be 2x2")
        if np.max(np.abs(m.conj().T @ m - np.eye(2))) > 1e-12:
            raise ValueError("gate is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def transfer(self) -> float:
        """Population moved from fg to gf."""
        return float(abs(self.matrix[1, 0]) ** 2)


def gate_matrix(params: HolonomyParams) -> HolonomicGate:
    t, p = params.theta, params.phi
    c, s = math.cos(t), math.sin(t)
    return HolonomicGate(np.array([[c, np.exp(1j * p) * s], [np.exp(-1j * p) * s, -c]]))


def lambda_matrix(params: HolonomyParams | Sequence[complex]) -> np.ndarray:
    """Generator on (fg0, gg1, gf0)."""
    l1, l2 = params.lambdas if isinstance(params, HolonomyParams) else params
    return np.array([[0, l1, 0], [np.conj(l1), 0, l2], [0, np.conj(l2), 0]], dtype=complex)


def closed_form_propagator(params: HolonomyParams | Sequence[complex], area: float) -> np.ndarray:
    """Exact propagator after a coupling area ``area`` on (fg0, gg1, gf0).

    Uses the cube identity of the generator: ``I + M^2 (cos(area) - 1) - 1j M sin(area)``.
    """
    m = lambda_matrix(params)
    return np.eye(3) + (m @ m) * (math.cos(area) - 1) - 1j * m * math.sin(area)


def numeric_propagator(params: HolonomyParams | Sequence[complex], area: float) -> np.ndarray:
    """Reference ``expm(-1j * area * M)`` from scipy's matrix exponential."""
    return expm(-1j * area * lambda_matrix(params))


def _outer_basis(alpha: complex, beta: complex) -> tuple[np.ndarray, np.ndarray]:
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    alpha, beta = alpha / norm, beta / norm
    v1 = np.array([alpha, 0, beta], dtype=complex)
    v2 = np.array([-np.conj(beta), 0, np.conj(alpha)], dtype=complex)
    return v1, v2


def verify_parallel_transport(params: HolonomyParams, area_grid: Sequence[float], alpha: complex = 1.0,
                              beta: complex = 0.0, detuning: float = 0.0) -> float:
    """Largest ``|<psi_j|H|psi_k>|`` along the path, in units of the coupling.

    ``(alpha, beta)`` fixes the first basis vector of the outer subspace; the
    second is its orthogonal complement.  A nonzero ``detuning`` (relative to
    the coupling) shifts fg0 and serves as a negative control.
    """
    h = lambda_matrix(params).copy()
    h[0, 0] += detuning
    w, v = np.linalg.eigh(h)
    vecs = _outer_basis(alpha, beta)
    worst = 0.0
    for area in area_grid:
        u = (v * np.exp(-1j * w * area)) @ v.conj().T
        psi = [u @ x for x in vecs]
        for pj in psi:
            for pk in psi:
                worst = max(worst, abs(pj.conj() @ h @ pk))
    return float(worst)


def verify_cyclicity(params: HolonomyParams, area: float = math.pi) -> tuple[bool, float]:
    """Whether the outer subspace returns to itself, and the leaked amplitude."""
    u = closed_form_propagator(params, area)
    leak = max(abs(u[1, 0]), abs(u[1, 2]))
    return bool(leak < 1e-12), float(leak)


def synthesize_drives(params: HolonomyParams, device: DeviceParams, total_duration: float | None = None,
                      envelope: EnvelopeSpec | None = None, calibration=None, max_amplitude: float = _TWO_PI * 0.5e9
                      ) -> tuple[DrivePulse, DrivePulse]:
    """Two tones implementing ``params`` with a closed loop (combined area pi).

    The envelope (unit amplitude, shared by both tones) defaults to a square
    pulse of ``total_duration``.  Without a calibration table the amplitude
    follows the second-order coupling formula and the frequency is the bare
    difference frequency; with one, both come from the table (its
    ``drive_frequency(qubit, theta, amplitude)`` and ``amplitude_for(qubit,
    coupling)``).  Drive 1 carries phase 0 and drive 2 carries ``phi``: the
    resonant process emits a drive photon, so the |f0> -> |g1> matrix element
    of each qubit picks up ``exp(+1j * phase)`` and the pair reproduces the
    generator up to a constant offset.
    """
    if envelope is None:
        if total_duration is None:
            raise ValueError("give total_duration or an envelope")
        envelope = EnvelopeSpec("square", 1.0, total_duration)
    unit = envelope.with_amplitude(1.0).unit_area()
    if unit <= 0:
        raise ValueError("envelope has no area")
    peak = math.pi / unit  # combined coupling at the plateau
    pulses = []
    for q, lam in enumerate(params.lambdas):
        if calibration is not None:
            eta = calibration.amplitude_for(q, peak)
            freq = calibration.drive_frequency(q, params.theta, abs(lam) * eta)
        else:
            eta = peak / abs(coupling_per_eta(device, q))
            freq = bare_transition(device, q)
        if abs(lam) * eta > max_amplitude:
            raise ValueError(f"drive {q + 1} amplitude exceeds the ceiling")
        phase = 0.0 if q == 0 else params.phi
        pulses.append(DrivePulse(q, envelope.with_amplitude(eta), freq, phase, abs(lam)))
    return pulses[0], pulses[1]
