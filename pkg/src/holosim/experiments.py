"""End-to-end experiments on the simulated device.

Every runner returns a :class:`Report` holding plot-ready tables (header plus
rows) and a flat summary; :mod:`holosim.cli` writes them to CSV.  Independent
simulation points are collected into jobs, fanned out with
:func:`~holosim.calibration.protocol.parallel_map` and reassembled by their
grid coordinates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .calibration.protocol import (CalibrationTable, parallel_map, run_calibration, spectral_calibration)
from .config import ChargeNoiseSpec, ScenarioConfig
from .device import (MHZ, DeviceParams, EffectiveParams, bare_transition, dressed_basis, effective_hamiltonian,
                     ladder)
from .dynamics import DEFAULT_LABELS, IntegratorConfig
from .holonomy import gate_matrix, params_from_theta_phi, synthesize_drives
from .model import simulate
from .pulse import EnvelopeSpec, PulseSchedule
from .quantum import DensityMatrix, QuantumState, fidelity
from .tomography import (QUBITS, StateTomography, bell_state, extract_relative_phase, pauli_vector,
                         qubit_state, virtual_z, wrap_phase)


@dataclass
class Report:
    name: str
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    summary: dict[str, object] = field(default_factory=dict)
    data: object = None


# ---------------------------------------------------------------- building blocks

def calibration_for(config: ScenarioConfig) -> CalibrationTable | None:
    """Table named in the config, else one read off the driven spectrum.

    ``cal_source = "bare"`` returns None (second-order amplitudes at bare
    frequencies) and warns.
    """
    if config.calibration_file:
        return CalibrationTable.load(config.calibration_file)
    if config.cal_source == "bare":
        warnings.warn("no calibration: driving at bare frequencies", stacklevel=2)
        return None
    if config.cal_source == "protocol":
        return run_calibration(config.device, config.cal_amplitudes, config.cal_thetas, config.target_rate,
                               config.cal_span, config.cal_grid, config.workers).table
    return spectral_calibration(config.device, config.target_rate)


def gate_schedule(device: DeviceParams, envelope: EnvelopeSpec, table: CalibrationTable | None, theta: float,
                  phi: float, offsets: Sequence[float] = (0.0, 0.0)) -> PulseSchedule:
    """Two-tone closed-loop pulse for ``(theta, phi)``; ``offsets`` detune the drives (rad/s)."""
    pulses = synthesize_drives(params_from_theta_phi(theta, phi), device, envelope=envelope, calibration=table)
    pulses = [replace(p, drive_freq=p.drive_freq + d) for p, d in zip(pulses, offsets)]
    return PulseSchedule.simultaneous(pulses)


def expected_phase(theta: float, phi: float) -> float:
    """Relative phase of |ge> against |eg> the ideal operation gives from |fg>."""
    m = gate_matrix(params_from_theta_phi(theta, phi)).matrix
    if abs(m[0, 0]) < 1e-12:
        return float(np.angle(m[1, 0]))
    return float(np.angle(m[1, 0] / m[0, 0]))


def target_state(theta: float, phi: float) -> DensityMatrix:
    return bell_state(theta, expected_phase(theta, phi))


@dataclass
class GateRun:
    populations: dict[str, float]
    rho: np.ndarray          # qubit-space density matrix (noise averaged)
    leakage: float
    trace: float


def _point(job) -> GateRun:
    device, schedule, initial, cfg, dissipation, labels = job
    res = simulate(device, schedule, initial, cfg, dissipation=dissipation, labels=labels)
    pops = {k: float(v[-1]) for k, v in res.populations.items()}
    state = res.final_state
    if isinstance(state, QuantumState):
        trace = float(np.vdot(state.amplitudes, state.amplitudes).real)
    else:
        trace = float(np.trace(state.matrix).real)
    q = qubit_state(device, state, schedule.total_duration)
    return GateRun(pops, q.rho.matrix, q.leakage, trace)


def _average(runs: Sequence[GateRun], weights: Sequence[float]) -> GateRun:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    pops = {k: float(sum(wi * r.populations[k] for wi, r in zip(w, runs))) for k in runs[0].populations}
    rho = sum(wi * r.rho for wi, r in zip(w, runs))
    return GateRun(pops, rho, float(sum(wi * r.leakage for wi, r in zip(w, runs))),
                   float(sum(wi * r.trace for wi, r in zip(w, runs))))


def _jobs(device, envelope, table, theta, phi, noise: ChargeNoiseSpec, cfg, dissipation, initial, labels):
    nodes = noise.nodes()
    jobs = [(device, gate_schedule(device, envelope, table, theta, phi, off), initial, cfg, dissipation, labels)
            for off, _ in nodes]
    return jobs, [w for _, w in nodes]


def run_points(specs: Sequence[dict], workers: int = 1) -> list[GateRun]:
    """Evaluate several noise-averaged gate runs in one pool.

    Each spec holds the keyword arguments of :func:`run_gate` except
    ``workers``.
    """
    all_jobs, spans = [], []
    for s in specs:
        jobs, weights = _jobs(**s)
        spans.append((len(all_jobs), len(jobs), weights))
        all_jobs.extend(jobs)
    results = parallel_map(_point, all_jobs, workers)
    return [_average(results[a:a + n], w) for a, n, w in spans]


def run_gate(device: DeviceParams, envelope: EnvelopeSpec, table: CalibrationTable | None, theta: float,
             phi: float = 0.0, noise: ChargeNoiseSpec | None = None, cfg: IntegratorConfig | None = None,
             dissipation: bool = False, initial="fg0", labels=DEFAULT_LABELS, workers: int = 1) -> GateRun:
    """One operation, averaged over the charge-noise grid when enabled."""
    spec = dict(device=device, envelope=envelope, table=table, theta=theta, phi=phi,
                noise=noise or ChargeNoiseSpec(), cfg=cfg or IntegratorConfig(), dissipation=dissipation,
                initial=initial, labels=tuple(labels))
    return run_points([spec], workers)[0]


def run_charge_noise_average(config: ScenarioConfig, thetas: Sequence[float] | None = None,
                             table: CalibrationTable | None = None) -> dict[float, dict[str, float]]:
    """Noise-averaged final populations per mixing angle."""
    if not config.noise.enabled:
        raise ValueError("charge noise is not enabled in this scenario")
    table = table if table is not None else calibration_for(config)
    thetas = [math.pi / 2] if thetas is None else list(thetas)
    device = config.device if config.dissipation else config.device.unitary()
    specs = [dict(device=device, envelope=config.pulse, table=table, theta=th, phi=config.phase,
                  noise=config.noise, cfg=IntegratorConfig(frame=config.frame), dissipation=config.dissipation,
                  initial="fg0", labels=DEFAULT_LABELS) for th in thetas]
    return {th: r.populations for th, r in zip(thetas, run_points(specs, config.workers))}


def reference_phase(device: DeviceParams, envelope: EnvelopeSpec, table, theta: float,
                    cfg: IntegratorConfig | None = None) -> float:
    """Systematic single-qubit phase: noiseless, lossless run at ``phi = 0``."""
    run = run_gate(device.unitary(), envelope, table, theta, 0.0, cfg=cfg)
    est = extract_relative_phase(run.rho, threshold=1e-6)
    return 0.0 if est.phase is None else float(wrap_phase(est.phase - expected_phase(theta, 0.0)))


def corrected(rho: np.ndarray, ref: float) -> np.ndarray:
    """Remove the reference phase with a virtual Z on qubit 2."""
    return virtual_z(rho, 1, -ref)


def _qubit_dm(m: np.ndarray) -> DensityMatrix:
    return DensityMatrix(QUBITS, 0.5 * (m + m.conj().T), atol=1e-8)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def _rows(rows):
    return [[_fmt(x) for x in r] for r in rows]


def _cfg(config: ScenarioConfig) -> IntegratorConfig:
    return IntegratorConfig(frame=config.frame)


# ---------------------------------------------------------------- population table

TABLE1_LABELS = ("fg0", "gf0", "gg1", "gg0", "eg0", "ge0")


def table1_configurations(config: ScenarioConfig) -> list[tuple[str, DeviceParams, bool, ChargeNoiseSpec]]:
    d = config.device
    noise = ChargeNoiseSpec(config.noise.max_shift, config.noise.grid_points, True)
    return [
        ("unitary", d.unitary(), False, ChargeNoiseSpec()),
        ("finite_t1", d, True, ChargeNoiseSpec()),
        ("qubit_t1_only", d.with_t1(t1_r=math.inf), True, ChargeNoiseSpec()),
        ("finite_t1_charge_noise", d, True, noise),
    ]


def run_table1(config: ScenarioConfig, table: CalibrationTable | None = None,
               rows: Sequence[str] | None = None) -> Report:
    """Final populations after the swap (theta = pi/2) from |fg0> for the four configurations.

    Percentages are the probabilities rounded to 1e-4.
    """
    table = table if table is not None else calibration_for(config)
    confs = [c for c in table1_configurations(config) if rows is None or c[0] in rows]
    specs = [dict(device=dev, envelope=config.pulse, table=table, theta=math.pi / 2, phi=0.0, noise=noise,
                  cfg=_cfg(config), dissipation=diss, initial="fg0", labels=TABLE1_LABELS)
             for _, dev, diss, noise in confs]
    runs = run_points(specs, config.workers)
    out, raw = [], {}
    for (name, *_), r in zip(confs, runs):
        pct = [round(r.populations[l], 4) * 100 for l in TABLE1_LABELS]
        out.append([name] + [f"{p:.2f}" for p in pct] + [f"{100 * r.trace:.4f}"])
        raw[name] = r
    rep = Report("table1", {"table1": (["configuration", *TABLE1_LABELS, "trace"], out)}, data=raw)
    for name, r in raw.items():
        rep.summary[f"{name}_gf0_pct"] = round(r.populations["gf0"], 4) * 100
    return rep


# ---------------------------------------------------------------- Bell state

@dataclass
class BellResult:
    theta: float
    phase: float
    fidelity_exact: float
    fidelities: list[float]
    pauli_exact: dict
    pauli_measured: dict | None
    leakage: float
    rho: np.ndarray


def bell_experiment(config: ScenarioConfig, table: CalibrationTable | None = None,
                    noise: ChargeNoiseSpec | None = None, dissipation: bool | None = None) -> BellResult:
    """Entangle from |fg0> at ``config.theta``, map f -> e, tomograph."""
    table = table if table is not None else calibration_for(config)
    noise = config.noise if noise is None else noise
    diss = config.dissipation if dissipation is None else dissipation
    device = config.device if diss else config.device.unitary()
    ref = reference_phase(config.device, config.pulse, table, config.theta, _cfg(config))
    run = run_gate(device, config.pulse, table, config.theta, config.phase, noise, _cfg(config), diss,
                   workers=config.workers)
    rho = _qubit_dm(corrected(run.rho, ref))
    target = target_state(config.theta, config.phase)
    fids, measured = [], None
    if config.shots > 0:
        seeds = np.random.SeedSequence(config.seed).spawn(config.repeats)
        for s in seeds:
            est = StateTomography(config.shots, s).fit(rho)
            fids.append(est.score(target))
            measured = measured or est.pauli_.as_dict()
    return BellResult(config.theta, config.phase, fidelity(target, rho), fids, pauli_vector(rho).as_dict(),
                      measured, run.leakage, rho.matrix)


def run_bell(config: ScenarioConfig, table: CalibrationTable | None = None) -> Report:
    r = bell_experiment(config, table)
    rows = [[k, r.pauli_exact[k], "" if r.pauli_measured is None else r.pauli_measured[k],
             pauli_vector(target_state(r.theta, r.phase))[k]] for k in r.pauli_exact]
    fid_rows = [[i, f] for i, f in enumerate(r.fidelities)]
    rep = Report("bell", {"bell_pauli": (["pauli", "exact", "measured", "ideal"], _rows(rows)),
                          "bell_fidelity": (["repeat", "fidelity"], _rows(fid_rows))}, data=r)
    rep.summary.update(fidelity_exact=r.fidelity_exact, leakage=r.leakage)
    if r.fidelities:
        rep.summary.update(fidelity_mean=float(np.mean(r.fidelities)), fidelity_std=float(np.std(r.fidelities)))
    return rep


# ---------------------------------------------------------------- sweeps

def run_theta_sweep(config: ScenarioConfig, table: CalibrationTable | None = None) -> Report:
    """Transfer and fidelity versus mixing angle for the unitary, T1 and T1 + noise models."""
    table = table if table is not None else calibration_for(config)
    thetas = config.thetas
    variants = [("unitary", config.device.unitary(), False, ChargeNoiseSpec()),
                ("t1", config.device, True, ChargeNoiseSpec())]
    if config.noise.enabled:
        variants.append(("t1_charge", config.device, True, config.noise))
    keys, specs = [], []
    for th in thetas:
        for name, dev, diss, noise in variants:
            for ph in config.sweep_phases:
                keys.append((float(th), name, float(ph)))
                specs.append(dict(device=dev, envelope=config.pulse, table=table, theta=float(th), phi=float(ph),
                                  noise=noise, cfg=_cfg(config), dissipation=diss, initial="fg0",
                                  labels=DEFAULT_LABELS))
    # the phi = 0 unitary run doubles as the phase reference
    for th in thetas:
        keys.append((float(th), "reference", 0.0))
        specs.append(dict(device=config.device.unitary(), envelope=config.pulse, table=table, theta=float(th),
                          phi=0.0, noise=ChargeNoiseSpec(), cfg=_cfg(config), dissipation=False, initial="fg0",
                          labels=DEFAULT_LABELS))
    runs = dict(zip(keys, run_points(specs, config.workers)))
    rows = []
    for th in thetas:
        th = float(th)
        est = extract_relative_phase(runs[(th, "reference", 0.0)].rho, threshold=1e-6)
        ref = 0.0 if est.phase is None else float(wrap_phase(est.phase - expected_phase(th, 0.0)))
        row = [th, math.sin(th) ** 2]
        for name, *_ in variants:
            rs = [runs[(th, name, float(ph))] for ph in config.sweep_phases]
            fid = np.mean([fidelity(target_state(th, ph), _qubit_dm(corrected(r.rho, ref)))
                           for r, ph in zip(rs, config.sweep_phases)])
            row += [np.mean([r.populations["fg0"] for r in rs]), np.mean([r.populations["gf0"] for r in rs]),
                    np.mean([r.populations["gg1"] for r in rs]), fid]
        rows.append(row)
    header = ["theta", "ideal_transfer"]
    for name, *_ in variants:
        header += [f"{name}_fg0", f"{name}_gf0", f"{name}_gg1", f"{name}_fidelity"]
    rep = Report("theta_sweep", {"theta_sweep": (header, _rows(rows))}, data=rows)
    dev = [abs(r[header.index("unitary_gf0")] - r[1]) for r in rows]
    rep.summary["max_unitary_deviation"] = float(max(dev))
    return rep


def effective_qubit_state(theta: float, phi: float, coupling: float = 1.0) -> np.ndarray:
    """Qubit state produced by the three-level model (exact closed loop), after the f -> e map."""
    p = params_from_theta_phi(theta, phi)
    eff = EffectiveParams.from_lambdas(coupling, *p.lambdas)
    u = expm(-1j * (math.pi / coupling) * effective_hamiltonian(eff).matrix)
    psi = u[:, 0]                    # from fg0 in (fg0, gf0, gg1) order
    v = np.zeros(4, complex)
    v[QUBITS.index((1, 0))] = -1j * psi[0]
    v[QUBITS.index((0, 1))] = -1j * psi[1]
    rho = np.outer(v, v.conj())
    rho[0, 0] += abs(psi[2]) ** 2    # |gg1> leaves the qubits in |gg>
    return rho / np.trace(rho).real


def run_phase_sweep(config: ScenarioConfig, table: CalibrationTable | None = None) -> Report:
    """Measured minus set phase after subtracting the phi = 0 reference at each theta."""
    phases = sorted({0.0, *map(float, config.phases)})
    thetas = [float(t) for t in config.phase_thetas]
    states: dict[tuple[float, float], np.ndarray] = {}
    if config.model == "effective":
        for th in thetas:
            for ph in phases:
                states[(th, ph)] = effective_qubit_state(th, ph)
    else:
        table = table if table is not None else calibration_for(config)
        device = config.device if config.dissipation else config.device.unitary()
        specs = [dict(device=device, envelope=config.pulse, table=table, theta=th, phi=ph, noise=config.noise,
                      cfg=_cfg(config), dissipation=config.dissipation, initial="fg0", labels=("fg0", "gf0"))
                 for th in thetas for ph in phases]
        for (th, ph), r in zip([(t, p) for t in thetas for p in phases], run_points(specs, config.workers)):
            states[(th, ph)] = r.rho
    seeds = iter(np.random.SeedSequence(config.seed).spawn(len(states) * config.repeats))
    rows, errors = [], []
    for th in thetas:
        for rep_i in range(config.repeats if config.shots > 0 else 1):
            measured = {}
            for ph in phases:
                rho = states[(th, ph)]
                if config.shots > 0:
                    rho = StateTomography(config.shots, next(seeds)).fit(_qubit_dm(rho)).rho_
                measured[ph] = extract_relative_phase(rho)
            ref = measured[0.0]
            for ph in phases:
                m = measured[ph]
                flagged = not (m.confident and ref.confident)
                err = math.nan if flagged else float(wrap_phase(
                    (m.phase - ref.phase) - (expected_phase(th, ph) - expected_phase(th, 0.0))))
                rows.append([th, ph, rep_i, math.nan if m.phase is None else m.phase, err, int(flagged)])
                if not flagged and ph != 0.0:
                    errors.append(err)
    header = ["theta", "phi", "repeat", "measured_phase", "phase_error", "flagged"]
    rep = Report("phase_sweep", {"phase_sweep": (header, _rows(rows))}, data=rows)
    errors = np.asarray(errors)
    rep.summary.update(mean_error=float(np.mean(errors)) if errors.size else math.nan,
                       std_error=float(np.std(errors)) if errors.size else math.nan,
                       max_abs_error=float(np.max(np.abs(errors))) if errors.size else math.nan,
                       points=int(errors.size))
    return rep


# ---------------------------------------------------------------- time series

def resonator_occupancy(device: DeviceParams, states) -> np.ndarray:
    """Mean photon number counted in the dressed basis (labels of the undriven eigenstates)."""
    _, basis = dressed_basis(device)
    n = ladder(device.dims).n[2]      # photon-number label of each basis state
    out = []
    for s in states:
        if isinstance(s, QuantumState):
            p = np.abs(basis.conj().T @ s.amplitudes) ** 2
        else:
            p = np.real(np.einsum("ij,jk,ki->i", basis.conj().T, s.matrix, basis))
        out.append(float(n @ p))
    return np.array(out)


def run_timeseries(config: ScenarioConfig, table: CalibrationTable | None = None) -> Report:
    """Populations and resonator occupancy during the pulse at ``config.theta``."""
    table = table if table is not None else calibration_for(config)
    device = config.device if config.dissipation else config.device.unitary()
    sched = gate_schedule(device, config.pulse, table, config.theta, config.phase)
    times = np.linspace(0.0, sched.total_duration, config.samples)
    res = simulate(device, sched, "fg0", _cfg(config), dissipation=config.dissipation, times=times,
                   labels=DEFAULT_LABELS)
    occ = resonator_occupancy(device, res.states)
    header = ["time_ns", *DEFAULT_LABELS, "resonator_photons"]
    rows = [[t * 1e9, *(res.populations[l][k] for l in DEFAULT_LABELS), occ[k]] for k, t in enumerate(times)]
    rep = Report("timeseries", {"timeseries": (header, _rows(rows))}, data=res)
    rep.summary.update(peak_resonator_photons=float(occ.max()), peak_time_ns=float(times[occ.argmax()] * 1e9),
                       final_gf0=float(res.populations["gf0"][-1]))
    return rep


# ---------------------------------------------------------------- calibration

def run_calibrate(config: ScenarioConfig) -> Report:
    rep_c = run_calibration(config.device, config.cal_amplitudes, config.cal_thetas, config.target_rate,
                            config.cal_span, config.cal_grid, config.workers, _cfg(config))
    stark_rows = []
    for c in rep_c.stark:
        for v, f, e in zip(c.voltages, c.centers, c.center_err):
            stark_rows.append([c.qubit + 1, v, f / (2 * math.pi * 1e9), e / MHZ])
    cross = rep_c.cross
    cross_rows = []
    if cross is not None:
        for k, th in enumerate(cross.thetas):
            cross_rows.append([th, *(cross.shifts[k] / MHZ), *(cross.shift_err[k] / MHZ),
                               *(cross.single_tone[k] / MHZ), *(cross.single_tone_err[k] / MHZ)])
    rep = Report("calibrate", {
        "stark": (["qubit", "amplitude_v", "center_ghz", "center_err_mhz"], _rows(stark_rows)),
        "cross_stark": (["theta", "shift1_mhz", "shift2_mhz", "err1_mhz", "err2_mhz", "single1_mhz",
                         "single2_mhz", "single_err1_mhz", "single_err2_mhz"], _rows(cross_rows)),
    }, data=rep_c)
    t = rep_c.table
    for q in range(2):
        rep.summary[f"stark_a{q + 1}_ghz_per_v2"] = t.stark_poly[q][0] / (2 * math.pi * 1e9)
        rep.summary[f"stark_b{q + 1}_ghz"] = t.stark_poly[q][1] / (2 * math.pi * 1e9)
        rep.summary[f"rabi_amp{q + 1}_v"] = t.rabi_amp[q] / (2 * math.pi * 1e9)
    return rep


def calibration_round_trip(device: DeviceParams, table: CalibrationTable, envelope: EnvelopeSpec,
                           theta: float = math.pi / 2, cfg: IntegratorConfig | None = None) -> tuple[float, float]:
    """Transfer |fg0> -> |gf0> with the table's frequencies and with bare ones, same amplitudes."""
    freqs = (bare_transition(device, 0), bare_transition(device, 1))
    bare = CalibrationTable(tuple((0.0, f) for f in freqs), table.rabi_amp, None, table.target_rate, "bare")
    out = []
    for t in (table, bare):
        r = run_gate(device.unitary(), envelope, t, theta, cfg=cfg, labels=("gf0",))
        out.append(r.populations["gf0"])
    return out[0], out[1]


RUNNERS = {
    "calibrate": run_calibrate,
    "bell": run_bell,
    "theta_sweep": run_theta_sweep,
    "phase_sweep": run_phase_sweep,
    "table1": run_table1,
    "timeseries": run_timeseries,
}
