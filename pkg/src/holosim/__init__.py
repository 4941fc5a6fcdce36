"""Pulse-level simulation of a resonator-mediated holonomic two-transmon operation."""
from .calibration.protocol import CalibrationTable, DeviceCalibrator, spectral_calibration
from .config import ChargeNoiseSpec, ScenarioConfig
from .device import DeviceParams, EffectiveParams, dressed_basis, effective_hamiltonian
from .dynamics import EvolutionResult, IntegratorConfig, evolve_lindblad, evolve_schrodinger
from .holonomy import HolonomicGate, HolonomyParams, gate_matrix, params_from_theta_phi, synthesize_drives
from .model import simulate
from .pulse import DrivePulse, EnvelopeSpec, PulseSchedule
from .quantum import DensityMatrix, HilbertSpace, Operator, QuantumState, fidelity, partial_trace
from .tomography import PauliVector, ShotRecord, StateTomography

__version__ = "0.1.0"

__all__ = [
    "CalibrationTable", "ChargeNoiseSpec", "DensityMatrix", "DeviceCalibrator", "DeviceParams", "DrivePulse",
    "EffectiveParams", "EnvelopeSpec", "EvolutionResult", "HilbertSpace", "HolonomicGate", "HolonomyParams",
    "IntegratorConfig", "Operator", "PauliVector", "PulseSchedule", "QuantumState", "ScenarioConfig", "ShotRecord",
    "StateTomography", "dressed_basis", "effective_hamiltonian", "evolve_lindblad", "evolve_schrodinger",
    "fidelity", "gate_matrix", "params_from_theta_phi", "partial_trace", "simulate", "spectral_calibration",
    "synthesize_drives",
]
