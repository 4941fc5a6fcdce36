"""Hilbert-space bookkeeping for qubit-qubit-resonator systems.

Composite states use a row-major tensor index: the first subsystem varies
slowest and the last (the resonator) fastest, so for dims ``(4, 4, 3)`` the
level tuple ``(l0, l1, l2)`` sits at ``l0 * 12 + l1 * 3 + l2``.

Transmon levels are written ``g, e, f, h`` (0..3); resonator levels as digits,
so ``"fg0"`` is ``(2, 0, 0)``.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LEVEL_LETTERS = "gefh"

DENSITY_ATOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of truncated subsystems."""

    dims: tuple[int, ...] = (4, 4, 3)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("a Hilbert space needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise ValueError(f"every subsystem dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def index(self, labels) -> int:
        """Row-major index of a level tuple (or label string)."""
        levels = parse_label(labels, self) if isinstance(labels, str) else tuple(labels)
        if len(levels) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} labels, got {len(levels)}")
        for lv, d in zip(levels, self.dims):
            if not 0 <= lv < d:
                raise ValueError(f"level {lv} out of range for subsystem of dim {d}")
        return int(np.ravel_multi_index(levels, self.dims))

    def levels(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def label(self, index: int) -> str:
        """Inverse of :func:`parse_label` for the conventional layout."""
        lv = self.levels(index)
        out = []
        for k, l in enumerate(lv):
            last = k == len(lv) - 1 and len(lv) > 1
            out.append(str(l) if last or l >= len(LEVEL_LETTERS) else LEVEL_LETTERS[l])
        return "".join(out)


def parse_label(label: str, space: HilbertSpace | None = None) -> tuple[int, ...]:
    """Turn ``"fg0"`` into ``(2, 0, 0)``.

    Letters map through ``g, e, f, h``; digits are taken literally, which is
    how resonator photon numbers are written.
    """
    levels = []
    for ch in label:
        if ch in LEVEL_LETTERS:
            levels.append(LEVEL_LETTERS.index(ch))
        elif ch.isdigit():
            levels.append(int(ch))
        else:
            raise ValueError(f"cannot parse level {ch!r} in label {label!r}")
    if space is not None and len(levels) != space.n_subsystems:
        raise ValueError(f"label {label!r} does not match dims {space.dims}")
    return tuple(levels)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator on a composite space."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.total
        if m.shape != (n, n):
            raise ValueError(f"operator shape {m.shape} does not match space of dim {n}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=atol * scale))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            if other.space != self.space:
                raise ValueError("operators live on different spaces")
            return other.matrix
        return np.asarray(other)

    def __add__(self, other):
        return Operator(self.space, self.matrix + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self.space, self.matrix - self._coerce(other))

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return Operator(self.space, self.matrix @ self._coerce(other))


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Normalised pure state."""

    space: HilbertSpace
    amplitudes: np.ndarray
    atol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        v = _frozen(np.ravel(self.amplitudes))
        if v.shape != (self.space.total,):
            raise ValueError(f"state length {v.size} does not match dim {self.space.total}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > self.atol:
            raise ValueError(f"state is not normalised (norm {norm:.12g})")
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.space, np.outer(v, v.conj()))

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator.

    ``atol`` bounds all three checks; evolved states are usually built with
    ``atol=1e-6``.
    """

    space: HilbertSpace
    matrix: np.ndarray
    atol: float = field(default=DENSITY_ATOL, repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.total
        if m.shape != (n, n):
            raise ValueError(f"density matrix shape {m.shape} does not match dim {n}")
        if np.max(np.abs(m - m.conj().T)) > self.atol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > self.atol:
            raise ValueError(f"density matrix trace is {tr:.12g}, expected 1")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -self.atol:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", m)

    def populations(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.matrix)), 0.0, None)

    def expect(self, op) -> complex:
        m = op.matrix if isinstance(op, Operator) else np.asarray(op)
        return complex(np.trace(self.matrix @ m))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def embed(space: HilbertSpace, subsystem: int, local: np.ndarray) -> Operator:
    """Tensor a single-subsystem matrix with identities elsewhere."""
    if not 0 <= subsystem < space.n_subsystems:
        raise IndexError(f"subsystem {subsystem} out of range for dims {space.dims}")
    local = np.asarray(local, dtype=complex)
    d = space.dims[subsystem]
    if local.shape != (d, d):
        raise ValueError(f"local operator must be {d}x{d}")
    out = np.ones((1, 1), dtype=complex)
    for k, dk in enumerate(space.dims):
        out = np.kron(out, local if k == subsystem else np.eye(dk))
    return Operator(space, out)


def lowering_operator(space: HilbertSpace, subsystem: int) -> Operator:
    """Truncated annihilation operator with <n-1|b|n> = sqrt(n)."""
    if not 0 <= subsystem < space.n_subsystems:
        raise IndexError(f"subsystem {subsystem} out of range for dims {space.dims}")
    d = space.dims[subsystem]
    return embed(space, subsystem, np.diag(np.sqrt(np.arange(1, d)), k=1))


def number_operator(space: HilbertSpace, subsystem: int) -> Operator:
    d = space.dims[subsystem]
    return embed(space, subsystem, np.diag(np.arange(d, dtype=float)))


def basis_state(space: HilbertSpace, labels) -> QuantumState:
    """Computational basis vector for a level tuple or label string."""
    v = np.zeros(space.total, dtype=complex)
    v[space.index(labels)] = 1.0
    return QuantumState(space, v)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduce onto the subsystems in ``keep`` (returned in ascending order)."""
    space = rho.space
    n = space.n_subsystems
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"subsystem indices {keep} out of range for dims {space.dims}")
    letters = string.ascii_letters
    row = list(letters[:n])
    col = [row[k] if k not in keep else letters[n + k] for k in range(n)]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    t = rho.matrix.reshape(space.dims + space.dims)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    sub = HilbertSpace(tuple(space.dims[k] for k in keep))
    m = red.reshape(sub.total, sub.total)
    return DensityMatrix(sub, m, atol=rho.atol)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix, clamping tiny negative eigenvalues."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho_t: DensityMatrix, rho_m: DensityMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho_t) rho_m sqrt(rho_t))``, unsquared.

    For a pure target this is ``sqrt(<psi|rho_m|psi>)``.
    """
    if rho_t.space.dims != rho_m.space.dims:
        raise ValueError("fidelity needs states on the same space")
    s = psd_sqrt(rho_t.matrix)
    inner = s @ rho_m.matrix @ s
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return min(max(f, 0.0), 1.0)


def ket(space: HilbertSpace, amplitudes: dict, normalize: bool = True) -> QuantumState:
    """Superposition from a ``{label: amplitude}`` mapping."""
    v = np.zeros(space.total, dtype=complex)
    for lab, amp in amplitudes.items():
        v[space.index(lab)] += amp
    if normalize:
        v = v / np.linalg.norm(v)
    return QuantumState(space, v)
