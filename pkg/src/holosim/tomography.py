"""Two-qubit state tomography on simulated states.

Qubit states live on ``HilbertSpace((2, 2))`` with ``|g> = 0`` and ``|e> = 1``;
``Z|g> = +|g>`` throughout.  Each of the nine settings rotates both qubits
into the X, Y or Z eigenbasis before a computational-basis readout, with bit
0 standing for eigenvalue +1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .device import DeviceParams, dressed_basis
from .quantum import DensityMatrix, HilbertSpace, QuantumState, fidelity, partial_trace

QUBITS = HilbertSpace((2, 2))

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_LABELS = ("XI", "YI", "ZI", "IX", "IY", "IZ",
                "XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ")
SETTINGS = tuple(itertools.product("XYZ", repeat=2))

_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
# rotation taking the eigenbasis of each Pauli onto the computational basis
_ROTATION = {"Z": np.eye(2, dtype=complex), "X": _HAD, "Y": _HAD @ np.diag([1, -1j])}


def pauli_operator(label: str) -> np.ndarray:
    return np.kron(PAULI[label[0]], PAULI[label[1]])


@dataclass(frozen=True, eq=False)
class ShotRecord:
    """Single-shot outcomes of one measurement setting, shape ``(shots, 2)``."""

    basis_setting: tuple[str, str]
    outcomes: np.ndarray
    shots: int

    def __post_init__(self):
        setting = tuple(self.basis_setting)
        if len(setting) != 2 or any(b not in "XYZ" for b in setting):
            raise ValueError(f"bad basis setting {self.basis_setting!r}")
        out = np.asarray(self.outcomes, dtype=np.int8).reshape(-1, 2)
        if self.shots <= 0 or out.shape[0] != self.shots:
            raise ValueError("outcomes must hold one row per shot and shots > 0")
        out.setflags(write=False)
        object.__setattr__(self, "basis_setting", setting)
        object.__setattr__(self, "outcomes", out)

    def signs(self) -> np.ndarray:
        return 1 - 2 * self.outcomes.astype(int)

    def counts(self) -> np.ndarray:
        """Occurrences of 00, 01, 10, 11."""
        return np.bincount(2 * self.outcomes[:, 0] + self.outcomes[:, 1], minlength=4)

    def to_rows(self) -> list[tuple]:
        return [("".join(self.basis_setting), int(a), int(b)) for a, b in self.outcomes]


@dataclass(frozen=True, eq=False)
class PauliVector:
    """Expectation values of the 15 non-identity two-qubit Paulis."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.shape != (15,):
            raise ValueError("a Pauli vector has 15 components")
        if np.any(np.abs(v) > 1 + 1e-9):
            raise ValueError("Pauli expectations must lie in [-1, 1]")
        v = np.clip(v, -1.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, label: str) -> float:
        return float(self.values[PAULI_LABELS.index(label)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PAULI_LABELS, self.values.tolist()))


def _as_matrix(rho) -> np.ndarray:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError("expected a two-qubit density matrix")
    return m


def setting_probabilities(rho, basis_setting: Sequence[str]) -> np.ndarray:
    """Born-rule probabilities of 00, 01, 10, 11 after the basis rotation."""
    u = np.kron(_ROTATION[basis_setting[0]], _ROTATION[basis_setting[1]])
    p = np.real(np.diag(u @ _as_matrix(rho) @ u.conj().T))
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_shots(rho, basis_setting: Sequence[str], shots: int, seed=None) -> ShotRecord:
    """Draw ``shots`` single-shot outcomes for one setting."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    k = rng.choice(4, size=int(shots), p=setting_probabilities(rho, basis_setting))
    return ShotRecord(tuple(basis_setting), np.stack([k >> 1, k & 1], axis=1), int(shots))


def sample_all(rho, shots: int, seed=None) -> list[ShotRecord]:
    """All nine settings, each with its own child seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(SETTINGS))
    return [sample_shots(rho, s, shots, c) for s, c in zip(SETTINGS, children)]


def pauli_vector(rho) -> PauliVector:
    m = _as_matrix(rho)
    return PauliVector([np.real(np.trace(m @ pauli_operator(l))) for l in PAULI_LABELS])


def empirical_pauli_vector(records: Sequence[ShotRecord]) -> PauliVector:
    """Shot averages; single-qubit terms pool every setting that measures them."""
    sums = {l: [] for l in PAULI_LABELS}
    seen = set()
    for r in records:
        a, b = r.basis_setting
        s = r.signs()
        seen.add((a, b))
        sums[a + b].append(s[:, 0] * s[:, 1])
        sums[a + "I"].append(s[:, 0])
        sums["I" + b].append(s[:, 1])
    missing = [s for s in SETTINGS if s not in seen]
    if missing:
        raise ValueError(f"incomplete tomography: missing settings {missing}")
    return PauliVector([np.mean(np.concatenate(sums[l])) for l in PAULI_LABELS])


def density_from_paulis(pv: PauliVector) -> np.ndarray:
    """Linear inversion ``(I + sum_P <P> P) / 4`` (not projected)."""
    m = np.eye(4, dtype=complex)
    for l, v in zip(PAULI_LABELS, pv.values):
        m = m + v * pauli_operator(l)
    return m / 4


def project_psd(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalise the trace."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("matrix has no positive part")
    return (v * (w / w.sum())) @ v.conj().T


def reconstruct_density_matrix(records: Sequence[ShotRecord]) -> DensityMatrix:
    return DensityMatrix(QUBITS, project_psd(density_from_paulis(empirical_pauli_vector(records))))


def trace_distance(a, b) -> float:
    w = np.linalg.eigvalsh(_as_matrix(a) - _as_matrix(b))
    return float(0.5 * np.sum(np.abs(w)))


@dataclass(frozen=True)
class PhaseEstimate:
    """Relative phase of the |ge> amplitude against |eg>; ``phase`` is None when flagged."""

    phase: float | None
    confident: bool
    populations: tuple[float, float]


def extract_relative_phase(rho, threshold: float = 0.1) -> PhaseEstimate:
    """``arg <ge|rho|eg>``, flagged when either population is below ``threshold``."""
    m = _as_matrix(rho)
    eg, ge = QUBITS.index((1, 0)), QUBITS.index((0, 1))
    pops = (float(m[eg, eg].real), float(m[ge, ge].real))
    if min(pops) < threshold:
        return PhaseEstimate(None, False, pops)
    return PhaseEstimate(float(np.angle(m[ge, eg])), True, pops)


def wrap_phase(x):
    """Map angles onto (-pi, pi]."""
    return -(np.mod(-np.asarray(x) + np.pi, 2 * np.pi) - np.pi)


def virtual_z(rho, qubit: int, angle: float) -> np.ndarray:
    """Apply ``diag(1, exp(1j * angle))`` to one qubit."""
    d = [np.ones(2, complex), np.ones(2, complex)]
    d[qubit] = np.array([1, np.exp(1j * angle)])
    u = np.kron(np.diag(d[0]), np.diag(d[1]))
    return u @ _as_matrix(rho) @ u.conj().T


def bell_state(theta: float = math.pi / 4, phase: float = 0.0) -> DensityMatrix:
    """``cos(theta)|eg> + exp(1j phase) sin(theta)|ge>`` as a density matrix."""
    v = np.zeros(4, complex)
    v[QUBITS.index((1, 0))] = math.cos(theta)
    v[QUBITS.index((0, 1))] = np.exp(1j * phase) * math.sin(theta)
    return QuantumState(QUBITS, v).density()


# ---------------------------------------------------------------- device states

def _x_pi_fe(dim: int) -> np.ndarray:
    """Ideal pi pulse on the e-f transition: ``-1j sigma_x`` on levels 1, 2."""
    u = np.eye(dim, dtype=complex)
    u[1:3, 1:3] = [[0, -1j], [-1j, 0]]
    return u


@dataclass(frozen=True)
class QubitState:
    rho: DensityMatrix
    leakage: float


def qubit_state(device: DeviceParams, state, time: float) -> QubitState:
    """Map a device state at ``time`` onto the two-qubit {g, e} space.

    The lab-frame state is written in the dressed basis, moved to the
    interaction picture of the undriven device, and given an ideal
    f -> e pi pulse on both qubits.  The resonator is traced out and the
    {g, e} block renormalised; the discarded weight is ``leakage``.
    """
    energies, basis = dressed_basis(device)
    x = state.amplitudes if isinstance(state, QuantumState) else getattr(state, "matrix", state)
    x = np.asarray(x, dtype=complex)
    rot = np.exp(1j * energies * time)
    if x.ndim == 1:
        v = rot * (basis.conj().T @ x)
        m = np.outer(v, v.conj())
    else:
        m = basis.conj().T @ x @ basis
        m = rot[:, None] * m * rot.conj()[None, :]
    dims = device.dims.dims
    u = np.kron(np.kron(_x_pi_fe(dims[0]), _x_pi_fe(dims[1])), np.eye(dims[2]))
    m = u @ m @ u.conj().T
    m = m / np.trace(m).real
    full = DensityMatrix(device.dims, 0.5 * (m + m.conj().T), atol=1e-6)
    red = partial_trace(full, [0, 1]).matrix.reshape(dims[0], dims[1], dims[0], dims[1])
    block = red[:2, :2, :2, :2].reshape(4, 4)
    kept = float(np.trace(block).real)
    if kept <= 0:
        raise ValueError("state has no weight in the qubit subspace")
    return QubitState(DensityMatrix(QUBITS, project_psd(block / kept)), 1.0 - kept)


class StateTomography(BaseEstimator):
    """Estimator wrapper: ``fit(rho)`` samples all settings and reconstructs.

    ``shots=None`` skips sampling and uses exact expectations.  After
    fitting, ``records_``, ``pauli_`` and ``rho_`` hold the data, the
    Pauli vector and the reconstructed :class:`DensityMatrix`;
    ``score(rho_true)`` returns the fidelity against a reference.
    """

    def __init__(self, shots: int | None = 1000, seed=None):
        self.shots = shots
        self.seed = seed

    def fit(self, rho, y=None):
        if self.shots is None:
            self.records_ = []
            self.pauli_ = pauli_vector(rho)
        else:
            self.records_ = sample_all(rho, self.shots, self.seed)
            self.pauli_ = empirical_pauli_vector(self.records_)
        self.rho_ = DensityMatrix(QUBITS, project_psd(density_from_paulis(self.pauli_)))
        return self

    def _check(self):
        if not hasattr(self, "rho_"):
            raise NotFittedError("StateTomography is not fitted yet")

    def predict(self, X=None) -> DensityMatrix:
        self._check()
        return self.rho_

    def score(self, rho_true, y=None) -> float:
        self._check()
        t = rho_true if isinstance(rho_true, DensityMatrix) else DensityMatrix(QUBITS, rho_true)
        return fidelity(t, self.rho_)
