"""Schrodinger and Lindblad propagation for dense time-dependent Hamiltonians.

Hamiltonians are described as a static matrix plus rotating terms
``f(t) * (X exp(-i w t) + X^dag exp(i w t))``.  The fixed-step integrator uses
the fourth-order two-point Magnus step and exploits windows where every
envelope is flat:

* no rotating terms: exact exponentials from one eigendecomposition;
* one distinct rotation frequency: the Hamiltonian is periodic and the
  one-period propagator (or dissipative map) is built once and reused;
* otherwise plain stepping.

Dissipation is applied per chunk in the interaction picture of the coherent
propagator.  The chunk generator is the time average of the rotated
dissipator (trapezoid nodes at the Magnus grid) and is exponentiated by a
Taylor series, which keeps each chunk map trace preserving, and completely
positive up to second order in ``gamma * chunk``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .pulse import EnvelopeSpec, PulseSchedule, envelope_value
from .quantum import DensityMatrix, HilbertSpace, Operator, QuantumState

DEFAULT_LABELS = ("fg0", "gf0", "gg1", "gg0", "eg0", "ge0")
_C = math.sqrt(3) / 6
_EPS_T = 1e-15


class IntegrationError(RuntimeError):
    """Propagation failed or drifted outside its tolerances."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``method`` is ``"fixed"`` (Magnus, deterministic) or ``"adaptive"``
    (scipy DOP853 with ``rel_tol``/``abs_tol``).  ``max_step`` bounds the
    fixed step; in the lab frame it is further capped at one twentieth of the
    fastest carrier period.  ``chunk`` bounds the length of one dissipative
    chunk and ``dissipator_step`` the spacing of the quadrature nodes used to
    average the rotated dissipator inside a chunk.
    """

    method: str = "fixed"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = 20e-12
    frame: str = "rwa"
    chunk: float = 2.5e-9
    dissipator_step: float = 0.25e-9

    def __post_init__(self):
        method = {"magnus4": "fixed", "fixed4": "fixed", "rk": "adaptive"}.get(self.method, self.method)
        frame = {"rotating_rwa": "rwa", "rotating": "rwa"}.get(self.frame, self.frame)
        if method not in ("fixed", "adaptive"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if frame not in ("lab", "rwa"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0 and self.chunk > 0
                and self.dissipator_step > 0):
            raise ValueError("tolerances and step bounds must be positive")
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "frame", frame)


@dataclass(frozen=True, eq=False)
class Term:
    """``f(t) * (op exp(-i freq t) + h.c.)`` with ``f`` an optional envelope."""

    op: np.ndarray
    freq: float = 0.0
    envelope: EnvelopeSpec | None = None
    start: float = 0.0

    def coeff(self, t: float) -> float:
        if self.envelope is None:
            return 1.0
        return envelope_value(self.envelope, t - self.start)

    def breakpoints(self) -> list[float]:
        if self.envelope is None:
            return []
        return [self.start + b for b in self.envelope.breakpoints()]

    def state_on(self, a: float, b: float) -> str:
        """'off', 'const' or 'varying' on the open interval (a, b)."""
        if self.envelope is None:
            return "const"
        lo, hi = a - self.start, b - self.start
        if hi <= 0 or lo >= self.envelope.duration:
            return "off"
        for p0, p1 in self.envelope.plateaus():
            if lo >= p0 - 1e-18 and hi <= p1 + 1e-18:
                return "const"
        return "varying"


class TimeDependentHamiltonian:
    """Static matrix plus rotating terms, in a frame given by ``frame`` energies.

    ``frame`` holds the diagonal of the frame generator: a state ``psi`` of
    this Hamiltonian corresponds to ``exp(-i frame t) psi`` in the lab frame.
    """

    def __init__(self, static, terms: Sequence[Term] = (), frame=None, space: HilbertSpace | None = None):
        static = static.matrix if isinstance(static, Operator) else np.asarray(static, dtype=complex)
        if space is None:
            space = static.space if isinstance(static, Operator) else HilbertSpace((static.shape[0],))
        self.space = space
        self.static = np.array(static, dtype=complex)
        self.terms = tuple(terms)
        self.frame = None if frame is None else np.asarray(frame, dtype=float)

    @classmethod
    def constant(cls, h, space: HilbertSpace | None = None):
        if isinstance(h, Operator):
            return cls(h.matrix, space=h.space)
        return cls(h, space=space)

    @property
    def dim(self) -> int:
        return self.static.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for term in self.terms:
            c = term.coeff(t)
            if c == 0.0:
                continue
            if term.freq == 0.0:
                h += c * (term.op + term.op.conj().T)
            else:
                x = (c * np.exp(-1j * term.freq * t)) * term.op
                h += x + x.conj().T
        return h

    def breakpoints(self) -> list[float]:
        pts = set()
        for term in self.terms:
            pts.update(term.breakpoints())
        return sorted(pts)

    def max_frequency(self) -> float:
        return max((abs(t.freq) for t in self.terms), default=0.0)

    def classify(self, a: float, b: float) -> tuple[str, float]:
        """Return ('static'|'periodic'|'general', period) for (a, b)."""
        freqs = set()
        varying = False
        for term in self.terms:
            s = term.state_on(a, b)
            if s == "off":
                continue
            if s == "varying":
                varying = True
            if term.freq != 0.0:
                freqs.add(abs(term.freq))
        if varying:
            return "general", 0.0
        if not freqs:
            return "static", 0.0
        fs = sorted(freqs)
        if all(abs(f - fs[0]) <= 1e-12 * fs[0] for f in fs):
            return "periodic", 2 * math.pi / fs[0]
        return "general", 0.0

    def lab_phases(self, t: float) -> np.ndarray | None:
        if self.frame is None:
            return None
        return np.exp(-1j * self.frame * t)


def _as_hamiltonian(H) -> TimeDependentHamiltonian | Callable:
    if isinstance(H, TimeDependentHamiltonian):
        return H
    if isinstance(H, Operator):
        return TimeDependentHamiltonian.constant(H)
    if isinstance(H, np.ndarray):
        return TimeDependentHamiltonian.constant(H)
    if callable(H):
        return H
    raise TypeError("H must be a TimeDependentHamiltonian, Operator, matrix or callable")


def _expm_herm(a: np.ndarray, dt: float) -> np.ndarray:
    e, v = np.linalg.eigh(a)
    return (v * np.exp(-1j * e * dt)) @ v.conj().T


def magnus_step(H: Callable, t: float, dt: float) -> np.ndarray:
    """Fourth-order Magnus propagator over [t, t + dt]."""
    h1 = H(t + (0.5 - _C) * dt)
    h2 = H(t + (0.5 + _C) * dt)
    comm = h2 @ h1 - h1 @ h2
    return _expm_herm(0.5 * (h1 + h2) - 1j * (math.sqrt(3) / 12) * dt * comm, dt)


class _Segment:
    """One window of the fixed-step grid between Hamiltonian breakpoints."""

    def __init__(self, H, a: float, b: float, cfg: IntegratorConfig, max_step: float, static_rate: float = 0.0):
        self.H, self.a, self.b = H, a, b
        if isinstance(H, TimeDependentHamiltonian):
            self.kind, self.tau = H.classify(a, b)
        else:
            self.kind, self.tau = "general", 0.0
        length = b - a
        self._cache: dict[int, np.ndarray] = {}
        if self.kind == "static":
            hm = H(0.5 * (a + b))
            self.energies, self.vectors = np.linalg.eigh(hm)
            spread = float(self.energies[-1] - self.energies[0])
            h = cfg.chunk
            if spread > 0:
                h = min(h, max(max_step, 0.25 / spread))
            self.h = min(h, length)
            self.m = 1
        elif self.kind == "periodic":
            self.m = max(1, math.ceil(self.tau / max_step - 1e-9))
            self.h = self.tau / self.m
            if self.tau > length:
                # shorter than a period: treat as a plain stepped window
                self.kind = "general"
        if self.kind == "general":
            n = max(1, math.ceil(length / max_step - 1e-9))
            self.h = length / n
            self.m = n
        self.n_steps = int(math.floor(length / self.h + 1e-9))
        self._period_u = None

    def time(self, j: int) -> float:
        return self.a + j * self.h

    def step(self, j: int) -> np.ndarray:
        if self.kind == "static":
            u = self._cache.get(0)
            if u is None:
                u = (self.vectors * np.exp(-1j * self.energies * self.h)) @ self.vectors.conj().T
                self._cache[0] = u
            return u
        if self.kind == "periodic":
            k = j % self.m
            u = self._cache.get(k)
            if u is None:
                u = magnus_step(self.H, self.a + k * self.h, self.h)
                self._cache[k] = u
            return u
        return magnus_step(self.H, self.time(j), self.h)

    def partial(self, j: int, r: float) -> np.ndarray:
        """Propagator from grid node j over a partial step of length r."""
        if self.kind == "static":
            return (self.vectors * np.exp(-1j * self.energies * r)) @ self.vectors.conj().T
        t = self.time(j)
        if self.kind == "periodic":
            t = self.a + (j % self.m) * self.h
        return magnus_step(self.H, t, r)

    def period_unitary(self) -> np.ndarray:
        if self._period_u is None:
            u = np.eye(self.H.dim if hasattr(self.H, "dim") else self.step(0).shape[0], dtype=complex)
            for k in range(self.m):
                u = self.step(k) @ u
            self._period_u = u
        return self._period_u

    def locate(self, t: float) -> tuple[int, float]:
        j = int(math.floor((t - self.a) / self.h + 1e-9))
        j = min(max(j, 0), self.n_steps)
        r = t - self.time(j)
        if abs(r) < _EPS_T:
            r = 0.0
        return j, r


def _segments(H, t0: float, t1: float, cfg: IntegratorConfig, max_step: float) -> list[_Segment]:
    pts = {t0, t1}
    if isinstance(H, TimeDependentHamiltonian):
        pts.update(p for p in H.breakpoints() if t0 < p < t1)
    pts = sorted(pts)
    return [_Segment(H, a, b, cfg, max_step) for a, b in zip(pts[:-1], pts[1:]) if b - a > _EPS_T]


def _effective_max_step(H, cfg: IntegratorConfig) -> float:
    step = cfg.max_step
    if cfg.frame == "lab" and isinstance(H, TimeDependentHamiltonian):
        fmax = H.max_frequency() / (2 * math.pi)
        if fmax > 0:
            step = min(step, 1.0 / (20 * fmax))
    return step


def _bucket(times: np.ndarray, a: float, b: float, first: bool) -> np.ndarray:
    if first:
        return times[(times >= a - _EPS_T) & (times <= b + _EPS_T)]
    return times[(times > a + _EPS_T) & (times <= b + _EPS_T)]


# ---------------------------------------------------------------- Schrodinger

def _walk_pure(seg: _Segment, psi: np.ndarray, sample_times, sink):
    if seg.kind == "static":
        c = seg.vectors.conj().T @ psi
        for t in sample_times:
            sink(t, seg.vectors @ (np.exp(-1j * seg.energies * (t - seg.a)) * c))
        return seg.vectors @ (np.exp(-1j * seg.energies * (seg.b - seg.a)) * c)
    j = 0

    def advance(psi, j, target):
        while j < target:
            if seg.kind == "periodic" and j % seg.m == 0 and j + seg.m <= target:
                psi = seg.period_unitary() @ psi
                j += seg.m
            else:
                psi = seg.step(j) @ psi
                j += 1
        return psi, j

    for t in sample_times:
        jt, r = seg.locate(t)
        psi, j = advance(psi, j, jt)
        sink(t, seg.partial(j, r) @ psi if r > 0 else psi)
    jt, r = seg.locate(seg.b)
    psi, j = advance(psi, j, jt)
    return seg.partial(j, r) @ psi if r > 0 else psi


def _pure_adaptive(H, psi, t0, t1, sample_times, cfg, sink):
    def rhs(t, y):
        return -1j * (H(t) @ y)

    t_eval = np.asarray(sample_times, dtype=float)
    sol = solve_ivp(rhs, (t0, t1), psi, method="DOP853", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    max_step=cfg.max_step if cfg.frame == "lab" else np.inf,
                    t_eval=np.clip(t_eval, t0, t1) if t_eval.size else None, dense_output=False)
    if not sol.success:
        raise IntegrationError(f"adaptive integration failed: {sol.message}")
    for k, t in enumerate(t_eval):
        sink(t, sol.y[:, k])
    return sol.y[:, -1]


def _propagate(H, state, t0, t1, times, cfg, walk, adaptive):
    """Drive a walker over all segments, collecting samples in order."""
    out: list[tuple[float, np.ndarray]] = []
    sink = lambda t, s: out.append((t, s))
    max_step = _effective_max_step(H, cfg)
    if cfg.method == "adaptive":
        pts = {t0, t1}
        if isinstance(H, TimeDependentHamiltonian):
            pts.update(p for p in H.breakpoints() if t0 < p < t1)
        pts = sorted(pts)
        for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
            samples = _bucket(times, a, b, first=k == 0)
            grid = np.append(samples, b) if not samples.size or samples[-1] < b - _EPS_T else samples
            tmp = []
            state = adaptive(H, state, a, b, grid, cfg, lambda t, s: tmp.append((t, s)))
            state = tmp[-1][1]
            out.extend(tmp[: len(samples)])
        return out, state
    for k, seg in enumerate(_segments(H, t0, t1, cfg, max_step)):
        state = walk(seg, state, _bucket(times, seg.a, seg.b, first=k == 0), sink)
    return out, state


# ---------------------------------------------------------------- Lindblad

def _expm_dissipator(cm: "_ChunkMap", rho: np.ndarray, max_terms: int = 40) -> np.ndarray:
    acc = rho.copy()
    term = rho
    scale = max(1.0, float(np.max(np.abs(rho))))
    for n in range(1, max_terms):
        term = cm.dissipate(term) / n
        acc += term
        if np.max(np.abs(term)) < 1e-13 * scale:
            return acc
    raise IntegrationError("dissipative chunk too long for its series expansion")


class _ChunkMap:
    """Coherent propagator ``u`` plus the averaged rotated dissipator.

    The Kraus stack is stored in two layouts so that the jump term
    ``sum_k K X K^dag`` costs two matrix products and no copies.
    """

    def __init__(self, u: np.ndarray, kraus: np.ndarray):
        self.u = u
        n, d, _ = kraus.shape
        self.n = n
        self._left = np.ascontiguousarray(kraus.transpose(1, 0, 2)).reshape(d * n, d)
        self._right = np.ascontiguousarray(kraus.conj().transpose(0, 2, 1)).reshape(n * d, d)
        self.mbar = self._right.reshape(n, d, d).transpose(1, 0, 2).reshape(d, n * d) @ kraus.reshape(n * d, d) \
            if n else np.zeros((d, d), complex)

    def dissipate(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[0]
        jump = (self._left @ x).reshape(d, self.n * d) @ self._right
        return jump - 0.5 * (self.mbar @ x + x @ self.mbar)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.n:
            rho = _expm_dissipator(self, rho)
        return self.u @ rho @ self.u.conj().T


def _chunk_map(steps: Sequence[np.ndarray], widths: Sequence[float], collapse: np.ndarray, compress: bool,
               stride: int = 1) -> _ChunkMap:
    """Coherent product of ``steps`` with the averaged rotated dissipator."""
    d = steps[0].shape[0]
    us = [np.eye(d, dtype=complex)]
    for s in steps:
        us.append(s @ us[-1])
    if not collapse.shape[0]:
        return _ChunkMap(us[-1], np.zeros((0, d, d), complex))
    nodes = np.concatenate([[0.0], np.cumsum(widths)])
    pick = sorted(set(range(0, len(us), stride)) | {len(us) - 1})
    gaps = np.diff(nodes[pick])
    w = np.zeros(len(pick))
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    u = np.stack([us[k] for k in pick])[:, None]
    rotated = np.matmul(u.conj().transpose(0, 1, 3, 2), np.matmul(collapse[None], u))
    kraus = (np.sqrt(w)[:, None, None, None] * rotated).reshape(-1, d, d)
    if compress and kraus.shape[0] > 4:
        flat = kraus.reshape(kraus.shape[0], d * d)
        gram = flat.conj() @ flat.T
        lam, vec = np.linalg.eigh(gram)
        keep = lam > 1e-14 * lam[-1]
        kraus = (vec[:, keep].T @ flat).reshape(-1, d, d)
    return _ChunkMap(us[-1], kraus)


def _walk_mixed(seg: _Segment, rho, sample_times, sink, collapse: np.ndarray, chunk_len: float, node_step: float):
    stride = max(1, int(round(node_step / seg.h)))
    block = max(1, int(math.floor(chunk_len / seg.h + 1e-9)))
    cacheable = seg.kind == "static" or (seg.kind == "periodic" and seg.m * seg.h <= chunk_len * (1 + 1e-9))
    if seg.kind == "periodic":
        block = seg.m if cacheable else min(block, seg.m)
    cache: dict[int, _ChunkMap] = {}

    def build(j, n):
        return _chunk_map([seg.step(j + q) for q in range(n)], [seg.h] * n, collapse, compress=False, stride=stride)

    def advance(rho, j, target):
        while j < target:
            aligned = seg.kind == "static" or j % block == 0
            if cacheable and aligned and j + block <= target:
                if block not in cache:
                    cache[block] = _chunk_map([seg.step(j + q) for q in range(block)], [seg.h] * block,
                                              collapse, compress=True, stride=stride)
                rho = cache[block].apply(rho)
                j += block
            else:
                n = min(block - (j % block if seg.kind == "periodic" else 0), target - j)
                rho = build(j, n).apply(rho)
                j += n
        return rho, j

    def finish(rho, j, r):
        if r <= 0:
            return rho
        return _chunk_map([seg.partial(j, r)], [r], collapse, compress=False).apply(rho)

    j = 0
    for t in sample_times:
        jt, r = seg.locate(t)
        rho, j = advance(rho, j, jt)
        sink(t, finish(rho, j, r))
    jt, r = seg.locate(seg.b)
    rho, j = advance(rho, j, jt)
    return finish(rho, j, r)


def _mixed_adaptive(collapse):
    def run(H, rho, t0, t1, sample_times, cfg, sink):
        d = rho.shape[0]
        ld = [c.conj().T for c in collapse]
        m = sum((c.conj().T @ c for c in collapse), np.zeros((d, d), complex))

        def rhs(t, y):
            r = y.reshape(d, d)
            h = H(t)
            out = -1j * (h @ r - r @ h) - 0.5 * (m @ r + r @ m)
            for c, cd in zip(collapse, ld):
                out += c @ r @ cd
            return out.ravel()

        t_eval = np.clip(np.asarray(sample_times, dtype=float), t0, t1)
        sol = solve_ivp(rhs, (t0, t1), rho.ravel(), method="DOP853", rtol=cfg.rel_tol, atol=cfg.abs_tol,
                        max_step=cfg.max_step if cfg.frame == "lab" else np.inf, t_eval=t_eval)
        if not sol.success:
            raise IntegrationError(f"adaptive integration failed: {sol.message}")
        for k, t in enumerate(t_eval):
            sink(t, sol.y[:, k].reshape(d, d))
        return sol.y[:, -1].reshape(d, d)

    return run


# ---------------------------------------------------------------- results

@dataclass
class EvolutionResult:
    """Sampled evolution.

    ``states`` are lab-frame states; ``populations`` maps each label to its
    probability per sample, measured in ``basis`` (columns are the measured
    states, identity by default).
    """

    times: np.ndarray
    states: list
    populations: dict[str, np.ndarray]
    basis: np.ndarray | None = None
    label_index: dict[str, int] = field(default_factory=dict)

    @property
    def final_state(self):
        return self.states[-1]

    def population(self, label: str) -> np.ndarray:
        return population_timeseries(self, [label])[label]

    def to_csv(self, path, labels: Sequence[str] | None = None) -> None:
        labels = list(labels or self.populations)
        series = population_timeseries(self, labels)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ns"] + labels)
            for k, t in enumerate(self.times):
                w.writerow([f"{t * 1e9:.6f}"] + [f"{series[l][k]:.10f}" for l in labels])


def _label_map(space: HilbertSpace, labels) -> dict[str, int]:
    if isinstance(labels, Mapping):
        return {str(k): int(v) for k, v in labels.items()}
    if labels is None:
        if space.n_subsystems == 3 and min(space.dims[:2]) >= 3:
            labels = DEFAULT_LABELS
        else:
            labels = [space.label(i) for i in range(space.total)]
    return {lab: space.index(lab) for lab in labels}


def _measure(vec_or_mat, basis) -> np.ndarray:
    if vec_or_mat.ndim == 1:
        c = vec_or_mat if basis is None else basis.conj().T @ vec_or_mat
        return np.abs(c) ** 2
    m = vec_or_mat if basis is None else basis.conj().T @ vec_or_mat @ basis
    return np.clip(np.real(np.diag(m)), 0.0, None)


def population_timeseries(result: EvolutionResult, labels: Sequence[str]) -> dict[str, np.ndarray]:
    """Per-label probability series."""
    out = {}
    space = result.states[0].space if result.states else None
    for lab in labels:
        if lab in result.populations:
            out[lab] = np.clip(result.populations[lab], 0.0, 1.0)
            continue
        if space is None:
            raise KeyError(lab)
        idx = result.label_index.get(lab, None)
        if idx is None:
            idx = space.index(lab)
        vals = []
        for s in result.states:
            x = s.amplitudes if isinstance(s, QuantumState) else s.matrix
            vals.append(_measure(x, result.basis)[idx])
        out[lab] = np.clip(np.array(vals), 0.0, 1.0)
    return out


def _default_times(t1: float, times) -> np.ndarray:
    if times is None:
        return np.linspace(0.0, t1, 101)
    times = np.sort(np.asarray(times, dtype=float))
    if times.size and (times[0] < -_EPS_T or times[-1] > t1 * (1 + 1e-12) + _EPS_T):
        raise ValueError("sample times fall outside the schedule")
    return times


def _duration(schedule) -> float:
    if isinstance(schedule, PulseSchedule):
        return schedule.total_duration
    t = float(schedule)
    if not t > 0:
        raise ValueError("duration must be positive")
    return t


def _to_lab(H, t, x):
    ph = H.lab_phases(t) if isinstance(H, TimeDependentHamiltonian) else None
    if ph is None:
        return x
    if x.ndim == 1:
        return ph * x
    return ph[:, None] * x * ph.conj()[None, :]


def evolve_schrodinger(H, psi0: QuantumState, schedule, cfg: IntegratorConfig | None = None, times=None,
                       labels=None, basis: np.ndarray | None = None) -> EvolutionResult:
    """Propagate a pure state over ``[0, schedule.total_duration]``.

    ``schedule`` may also be a plain duration in seconds.
    """
    cfg = cfg or IntegratorConfig()
    H = _as_hamiltonian(H)
    t1 = _duration(schedule)
    times = _default_times(t1, times)
    samples, _ = _propagate(H, np.array(psi0.amplitudes), 0.0, t1, times, cfg, _walk_pure, _pure_adaptive)
    label_index = _label_map(psi0.space, labels)
    states, pops = [], {k: [] for k in label_index}
    for t, v in samples:
        drift = abs(np.linalg.norm(v) - 1.0)
        if drift > 1e-4:
            raise IntegrationError(f"norm drifted by {drift:.2e} at t = {t:.4e} s")
        v = _to_lab(H, t, v)
        states.append(QuantumState(psi0.space, v, atol=1e-4))
        p = _measure(v, basis)
        for k, i in label_index.items():
            pops[k].append(p[i])
    return EvolutionResult(np.array([t for t, _ in samples]), states,
                           {k: np.array(v) for k, v in pops.items()}, basis, label_index)


def evolve_lindblad(H, rho0: DensityMatrix, collapse: Sequence, schedule, cfg: IntegratorConfig | None = None,
                    times=None, labels=None, basis: np.ndarray | None = None) -> EvolutionResult:
    """Propagate a density matrix under the Lindblad equation.

    Collapse operators with zero norm are dropped.  Positivity and trace are
    checked at every sample and violations abort the run.
    """
    cfg = cfg or IntegratorConfig()
    H = _as_hamiltonian(H)
    t1 = _duration(schedule)
    times = _default_times(t1, times)
    ops = [c.matrix if isinstance(c, Operator) else np.asarray(c, dtype=complex) for c in collapse]
    ops = [c for c in ops if np.max(np.abs(c)) > 0]
    d = rho0.space.total
    stack = np.stack(ops) if ops else np.zeros((0, d, d), complex)
    gamma = float(np.linalg.norm(sum((c.conj().T @ c for c in ops), np.zeros((d, d))), 2)) if ops else 0.0
    chunk_len = cfg.chunk if gamma == 0 else min(cfg.chunk, 0.05 / gamma)
    # every step of the chunk contributes Kraus operators, keep chunks at least one step
    walk = lambda seg, rho, st, sink: _walk_mixed(seg, rho, st, sink, stack, max(chunk_len, seg.h),
                                                  cfg.dissipator_step)
    samples, _ = _propagate(H, np.array(rho0.matrix), 0.0, t1, times, cfg, walk, _mixed_adaptive(ops))
    label_index = _label_map(rho0.space, labels)
    states, pops = [], {k: [] for k in label_index}
    for t, m in samples:
        m = _to_lab(H, t, m)
        try:
            states.append(DensityMatrix(rho0.space, m, atol=1e-6))
        except ValueError as exc:
            raise IntegrationError(f"density matrix invalid at t = {t:.4e} s: {exc}") from None
        p = _measure(m, basis)
        for k, i in label_index.items():
            pops[k].append(p[i])
    return EvolutionResult(np.array([t for t, _ in samples]), states,
                           {k: np.array(v) for k, v in pops.items()}, basis, label_index)
