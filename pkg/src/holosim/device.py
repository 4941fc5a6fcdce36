"""Two transmons coupled to a bus resonator.

Frequencies are angular (rad/s) and times in seconds internally; config files
use GHz and microseconds.  Subsystem order is (qubit 1, qubit 2, resonator).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .pulse import DrivePulse, EnvelopeSpec, PulseSchedule
from .quantum import HilbertSpace, Operator, lowering_operator

TWO_PI = 2 * math.pi
GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6
NS = 1e-9
US = 1e-6

#: Ordering of the three-level effective model used by ``effective_hamiltonian``.
EFFECTIVE_LABELS = ("fg0", "gf0", "gg1")
#: Ordering used by the holonomy algebra (the coupled state sits in the middle).
LAMBDA_LABELS = ("fg0", "gg1", "gf0")

__all__ = [
    "DeviceParams", "DrivePulse", "EffectiveParams", "hamiltonian", "effective_coupling",
    "effective_hamiltonian", "collapse_operators", "bare_transition", "dressed_basis",
    "dressed_transition", "to_lambda_order",
]


@dataclass(frozen=True)
class DeviceParams:
    omega_r: float = 6.272 * GHZ
    omega: tuple[float, float] = (4.896 * GHZ, 4.689 * GHZ)
    alpha: tuple[float, float] = (-0.330 * GHZ, -0.333 * GHZ)
    g: tuple[float, float] = (0.156 * GHZ, 0.196 * GHZ)
    t1_q: tuple[float, float] = (42 * US, 56 * US)
    t1_r: float = 7 * US
    dims: HilbertSpace = field(default_factory=HilbertSpace)

    def __post_init__(self):
        for name in ("omega", "alpha", "g", "t1_q"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 2:
                raise ValueError(f"{name} needs two entries")
            object.__setattr__(self, name, v)
        if not isinstance(self.dims, HilbertSpace):
            object.__setattr__(self, "dims", HilbertSpace(tuple(self.dims)))
        if self.dims.n_subsystems != 3:
            raise ValueError("device space must be (qubit, qubit, resonator)")
        if any(a >= 0 for a in self.alpha):
            raise ValueError("anharmonicities must be negative")
        if any(t <= 0 for t in (*self.t1_q, self.t1_r)):
            raise ValueError("T1 times must be positive")
        for i in range(2):
            if abs(self.detuning(i)) <= 5 * abs(self.g[i]):
                raise ValueError(f"qubit {i + 1} is not dispersive: |delta| <= 5 g")

    def detuning(self, qubit: int) -> float:
        return self.omega[qubit] - self.omega_r

    def with_t1(self, t1_q=None, t1_r=None) -> "DeviceParams":
        return replace(self, t1_q=self.t1_q if t1_q is None else tuple(t1_q),
                       t1_r=self.t1_r if t1_r is None else t1_r)

    def unitary(self) -> "DeviceParams":
        return self.with_t1((math.inf, math.inf), math.inf)

    @classmethod
    def from_mapping(cls, m: Mapping[str, str | float]) -> "DeviceParams":
        """Build from GHz / microsecond keys as found in a config file."""
        base = cls()
        get = lambda k, default: float(m[k]) if k in m else default
        dims = base.dims
        if "dims" in m:
            dims = HilbertSpace(tuple(int(x) for x in str(m["dims"]).replace(",", " ").split()))
        return cls(
            omega_r=get("omega_r", base.omega_r / GHZ) * GHZ,
            omega=(get("omega1", base.omega[0] / GHZ) * GHZ, get("omega2", base.omega[1] / GHZ) * GHZ),
            alpha=(get("alpha1", base.alpha[0] / GHZ) * GHZ, get("alpha2", base.alpha[1] / GHZ) * GHZ),
            g=(get("g1", base.g[0] / GHZ) * GHZ, get("g2", base.g[1] / GHZ) * GHZ),
            t1_q=(get("t1_q1", base.t1_q[0] / US) * US, get("t1_q2", base.t1_q[1] / US) * US),
            t1_r=get("t1_r", base.t1_r / US) * US,
            dims=dims,
        )

    def to_mapping(self) -> dict[str, str]:
        f = lambda x: repr(float(x))
        return {
            "omega_r": f(self.omega_r / GHZ), "omega1": f(self.omega[0] / GHZ), "omega2": f(self.omega[1] / GHZ),
            "alpha1": f(self.alpha[0] / GHZ), "alpha2": f(self.alpha[1] / GHZ),
            "g1": f(self.g[0] / GHZ), "g2": f(self.g[1] / GHZ),
            "t1_q1": f(self.t1_q[0] / US), "t1_q2": f(self.t1_q[1] / US), "t1_r": f(self.t1_r / US),
            "dims": ",".join(str(d) for d in self.dims.dims),
        }


@dataclass(frozen=True)
class Ladder:
    """Cached ladder and number operators as plain arrays."""

    b: tuple[np.ndarray, np.ndarray]
    a: np.ndarray
    n: tuple[np.ndarray, np.ndarray, np.ndarray]


@lru_cache(maxsize=8)
def ladder(space: HilbertSpace) -> Ladder:
    ops = [lowering_operator(space, k).matrix for k in range(3)]
    nums = tuple(np.real(np.diag(o.conj().T @ o)) for o in ops)
    return Ladder((ops[0], ops[1]), ops[2], nums)


def _undriven(params: DeviceParams, frame: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Static part of the Hamiltonian, optionally minus ``sum nu_k n_k``."""
    L = ladder(params.dims)
    diag = (params.omega_r - frame[2]) * L.n[2]
    for i in range(2):
        n = L.n[i]
        diag = diag + (params.omega[i] - frame[i]) * n + 0.5 * params.alpha[i] * n * (n - 1)
    h = np.diag(diag).astype(complex)
    for i in range(2):
        if frame[i] == frame[2]:
            x = params.g[i] * (L.b[i].conj().T @ L.a)
            h += x + x.conj().T
    return h


def _as_schedule(drives) -> PulseSchedule | None:
    if isinstance(drives, PulseSchedule):
        return drives
    drives = list(drives or [])
    if not drives:
        return None
    return PulseSchedule.simultaneous(drives)


def hamiltonian(params: DeviceParams, drives, t: float) -> Operator:
    """Lab-frame Hamiltonian with real cosine drives (no rotating-wave approximation).

    ``drives`` is a list of :class:`DrivePulse` starting at t=0, or a
    :class:`PulseSchedule`.
    """
    h = _undriven(params)
    sched = _as_schedule(drives)
    if sched is not None:
        L = ladder(params.dims)
        for start, p in sched.pulses:
            if p.qubit not in (0, 1):
                raise ValueError(f"invalid drive qubit {p.qubit}")
            b = L.b[p.qubit]
            h = h + float(p.value(t - start)) * (b + b.conj().T)
    return Operator(params.dims, h)


def effective_coupling(params: DeviceParams, qubit: int, lam: complex, eta: float) -> complex:
    """Drive-induced |f0> <-> |g1> coupling of one qubit to second order."""
    if qubit not in (0, 1):
        raise ValueError(f"invalid qubit {qubit}")
    d = params.detuning(qubit)
    al = params.alpha[qubit]
    if abs(d) < 1e-12 * abs(al) or abs(d + al) < 1e-12 * abs(al):
        raise ValueError("effective coupling is singular at this detuning")
    return params.g[qubit] * al * lam * eta / (math.sqrt(2) * d * (d + al))


def coupling_per_eta(params: DeviceParams, qubit: int) -> float:
    """Effective coupling per unit drive amplitude (negative for transmons)."""
    return float(np.real(effective_coupling(params, qubit, 1.0, 1.0)))


@dataclass(frozen=True)
class EffectiveParams:
    """Couplings to |gg1> and cross Stark shifts of the three-level model."""

    gtilde: tuple[complex, complex] = (0j, 0j)
    delta_fg0: float = 0.0
    delta_gf0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gtilde", tuple(complex(x) for x in self.gtilde))

    @classmethod
    def from_lambdas(cls, g: float, lambda1: complex, lambda2: complex, delta_fg0=0.0, delta_gf0=0.0):
        """Couplings ``g * lambda1`` and ``g * conj(lambda2)``.

        The conjugate places the phases so that the model coincides with the
        holonomy algebra, see :func:`to_lambda_order`.
        """
        return cls((g * lambda1, g * np.conj(lambda2)), delta_fg0, delta_gf0)

    def equal_rate_violation(self, lambda1: complex, lambda2: complex) -> float:
        """Relative mismatch between the couplings per unit scaling."""
        r1 = abs(self.gtilde[0] / lambda1)
        r2 = abs(self.gtilde[1] / lambda2)
        return abs(r1 - r2) / r1


def effective_hamiltonian(eff: EffectiveParams) -> Operator:
    """3x3 model on (fg0, gf0, gg1)."""
    g1, g2 = eff.gtilde
    h = np.array([
        [eff.delta_fg0, 0, g1],
        [0, eff.delta_gf0, g2],
        [np.conj(g1), np.conj(g2), 0],
    ], dtype=complex)
    return Operator(HilbertSpace((3,)), h)


_PERM = [EFFECTIVE_LABELS.index(x) for x in LAMBDA_LABELS]


def to_lambda_order(m: np.ndarray) -> np.ndarray:
    """Permute a matrix (or vector) from (fg0, gf0, gg1) to (fg0, gg1, gf0)."""
    m = np.asarray(m)
    if m.ndim == 1:
        return m[_PERM]
    return m[np.ix_(_PERM, _PERM)]


def from_lambda_order(m: np.ndarray) -> np.ndarray:
    inv = np.argsort(_PERM)
    m = np.asarray(m)
    if m.ndim == 1:
        return m[inv]
    return m[np.ix_(inv, inv)]


def collapse_operators(params: DeviceParams) -> list[Operator]:
    """Amplitude damping on each ladder at rate 1/T1 (infinite T1 gives zero)."""
    L = ladder(params.dims)
    rate = lambda t1: 0.0 if math.isinf(t1) else math.sqrt(1.0 / t1)
    return [
        Operator(params.dims, rate(params.t1_q[0]) * L.b[0]),
        Operator(params.dims, rate(params.t1_q[1]) * L.b[1]),
        Operator(params.dims, rate(params.t1_r) * L.a),
    ]


def bare_transition(params: DeviceParams, qubit: int) -> float:
    """Uncoupled |f0> -> |g1> difference frequency ``2 omega + alpha - omega_r``."""
    return 2 * params.omega[qubit] + params.alpha[qubit] - params.omega_r


@lru_cache(maxsize=16)
def dressed_basis(params: DeviceParams) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-energies and eigenvectors of the undriven Hamiltonian.

    Column ``k`` is the eigenvector assigned to bare basis state ``k`` by a
    maximum-overlap matching, with its phase fixed so the overlap is real
    and positive.
    """
    w, v = np.linalg.eigh(_undriven(params))
    overlap = np.abs(v) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    order = np.empty_like(cols)
    order[rows] = cols
    v = v[:, order]
    w = w[order]
    d = np.diag(v).copy()
    v = v * (np.conj(d) / np.abs(d))
    v.setflags(write=False)
    w.setflags(write=False)
    return w, v


def dressed_transition(params: DeviceParams, qubit: int) -> float:
    """Dressed |f0> -> |g1> transition of one qubit (rad/s)."""
    w, _ = dressed_basis(params)
    space = params.dims
    f0 = [0, 0, 0]
    f0[qubit] = 2
    return float(w[space.index(f0)] - w[space.index((0, 0, 1))])
