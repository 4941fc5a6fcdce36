"""Device-level simulation: schedules to Hamiltonians, dressed-basis readout."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .device import DeviceParams, _undriven, collapse_operators, dressed_basis, ladder
from .dynamics import (DEFAULT_LABELS, EvolutionResult, IntegratorConfig, Term, TimeDependentHamiltonian,
                       evolve_lindblad, evolve_schrodinger)
from .pulse import PulseSchedule
from .quantum import DensityMatrix, QuantumState


def frame_frequencies(schedule: PulseSchedule | None) -> tuple[float, float, float]:
    """Rotating-frame frequencies (qubit 1, qubit 2, resonator).

    A driven qubit rotates at its (first) drive frequency; the resonator and
    undriven qubits follow the lowest-index driven qubit so that as many
    exchange couplings as possible stay static.
    """
    own = {}
    if schedule is not None:
        for _, p in schedule.pulses:
            own.setdefault(p.qubit, p.drive_freq)
    if not own:
        return (0.0, 0.0, 0.0)
    ref = own[min(own)]
    return (own.get(0, ref), own.get(1, ref), ref)


def lab_hamiltonian(params: DeviceParams, schedule: PulseSchedule | None) -> TimeDependentHamiltonian:
    """Full cosine drives; terms rotate at the carrier frequencies."""
    L = ladder(params.dims)
    terms = []
    if schedule is not None:
        for start, p in schedule.pulses:
            b = L.b[p.qubit]
            x = 0.5 * abs(p.scale) * np.exp(-1j * p.total_phase) * (b + b.conj().T)
            # carriers are referenced to absolute time, matching DrivePulse.value(t - start)
            x = x * np.exp(1j * p.drive_freq * start)
            terms.append(Term(x, p.drive_freq, p.envelope, start))
    return TimeDependentHamiltonian(_undriven(params), terms, frame=None, space=params.dims)


def rwa_hamiltonian(params: DeviceParams, schedule: PulseSchedule | None) -> TimeDependentHamiltonian:
    """Rotating frame with the drive counter-rotating terms dropped."""
    L = ladder(params.dims)
    nu = frame_frequencies(schedule)
    static = _undriven(params, nu)
    terms = []
    for i in range(2):
        if nu[i] != nu[2]:
            terms.append(Term(params.g[i] * (L.b[i].conj().T @ L.a), nu[2] - nu[i]))
    if schedule is not None:
        for start, p in schedule.pulses:
            x = 0.5 * abs(p.scale) * np.exp(-1j * p.total_phase) * L.b[p.qubit].conj().T
            detune = p.drive_freq - nu[p.qubit]
            x = x * np.exp(1j * p.drive_freq * start)
            terms.append(Term(x, detune, p.envelope, start))
    frame = sum(n * f for n, f in zip(L.n, nu))
    return TimeDependentHamiltonian(static, terms, frame=frame, space=params.dims)


def build_hamiltonian(params: DeviceParams, schedule: PulseSchedule | None, frame: str = "rwa"):
    if frame == "lab":
        return lab_hamiltonian(params, schedule)
    if frame in ("rwa", "rotating_rwa"):
        return rwa_hamiltonian(params, schedule)
    raise ValueError(f"unknown frame {frame!r}")


def dressed_state(params: DeviceParams, label) -> QuantumState:
    """Undriven eigenstate adiabatically connected to a bare label."""
    _, v = dressed_basis(params)
    return QuantumState(params.dims, v[:, params.dims.index(label)])


def dressed_superposition(params: DeviceParams, amplitudes: dict) -> QuantumState:
    _, v = dressed_basis(params)
    psi = np.zeros(params.dims.total, complex)
    for lab, c in amplitudes.items():
        psi += c * v[:, params.dims.index(lab)]
    return QuantumState(params.dims, psi / np.linalg.norm(psi))


def simulate(params: DeviceParams, schedule: PulseSchedule, initial, cfg: IntegratorConfig | None = None,
             dissipation: bool = False, times=None, labels: Sequence[str] | None = None) -> EvolutionResult:
    """Run a schedule from an initial state and read out in the dressed basis.

    ``initial`` is a label (dressed state), a :class:`QuantumState` or a
    :class:`DensityMatrix`.  With ``dissipation`` the collapse operators of
    ``params`` are used (infinite T1 values contribute nothing).
    """
    cfg = cfg or IntegratorConfig()
    H = build_hamiltonian(params, schedule, cfg.frame)
    _, basis = dressed_basis(params)
    if isinstance(initial, str) or isinstance(initial, tuple):
        initial = dressed_state(params, initial)
    labels = list(labels or DEFAULT_LABELS)
    times = np.array([0.0, schedule.total_duration]) if times is None else times
    if dissipation or isinstance(initial, DensityMatrix):
        rho0 = initial if isinstance(initial, DensityMatrix) else initial.density()
        ops = collapse_operators(params) if dissipation else []
        return evolve_lindblad(H, rho0, ops, schedule, cfg, times=times, labels=labels, basis=basis)
    return evolve_schrodinger(H, initial, schedule, cfg, times=times, labels=labels, basis=basis)


def to_dressed(params: DeviceParams, state) -> np.ndarray:
    """Express a lab-frame state (vector or matrix) in the dressed basis."""
    _, v = dressed_basis(params)
    x = state.amplitudes if isinstance(state, QuantumState) else getattr(state, "matrix", state)
    x = np.asarray(x)
    if x.ndim == 1:
        return v.conj().T @ x
    return v.conj().T @ x @ v
