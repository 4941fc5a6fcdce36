import math
import warnings

import numpy as np
import pytest

from holosim.cli import main
from holosim.config import ChargeNoiseSpec, ScenarioConfig
from holosim.device import MHZ, NS
from holosim.experiments import (bell_experiment, gate_schedule, run_charge_noise_average, run_gate,
                                 run_phase_sweep, run_table1, target_state)
from holosim.model import simulate
from holosim.quantum import DensityMatrix, fidelity
from holosim.tomography import QUBITS


def test_noise_nodes():
    spec = ChargeNoiseSpec(enabled=True)
    nodes = spec.nodes()
    assert len(nodes) == 121
    assert sum(w for _, w in nodes) == pytest.approx(1.0)
    x = np.array([s[0] for s, _ in nodes])
    # the cell-centred arcsine grid reproduces the second moment max^2 / 2 exactly
    assert np.mean(x ** 2) == pytest.approx(0.5 * spec.max_shift[0] ** 2, rel=1e-12)
    assert np.all(np.abs(x) < spec.max_shift[0])
    assert ChargeNoiseSpec().nodes() == [((0.0, 0.0), 1.0)]
    assert len(ChargeNoiseSpec((0.0, 0.0), enabled=True).nodes()) == 1
    assert spec.refined().grid_points == (22, 22)
    with pytest.warns(UserWarning):
        ChargeNoiseSpec(grid_points=(2, 11), enabled=True).nodes()
    with pytest.raises(ValueError):
        ChargeNoiseSpec((-1.0, 0.0))
    with pytest.raises(ValueError):
        ChargeNoiseSpec(grid_points=(0, 3))


def test_zero_shift_noise_matches_noiseless(device, spectral_table):
    env = ScenarioConfig().pulse
    quiet = run_gate(device.unitary(), env, spectral_table, math.pi / 2)
    flat = run_gate(device.unitary(), env, spectral_table, math.pi / 2,
                    noise=ChargeNoiseSpec((0.0, 0.0), enabled=True))
    assert quiet.populations == flat.populations
    with pytest.raises(ValueError):
        run_charge_noise_average(ScenarioConfig())


def test_worst_case_offset_leaves_resonator_populated(device, spectral_table):
    sched = gate_schedule(device.unitary(), ScenarioConfig().pulse, spectral_table, math.pi / 2, 0.0,
                          (0.9 * MHZ, 0.0))
    pops = {k: v[-1] for k, v in simulate(device.unitary(), sched, "fg0").populations.items()}
    assert pops["gf0"] < 0.95
    assert pops["gg1"] > 0.02


def test_charge_noise_lowers_transfer(spectral_table):
    noise = ChargeNoiseSpec(grid_points=(3, 3), enabled=True)
    cfg = ScenarioConfig(noise=noise)
    thetas = [0.6, 1.2]
    noisy = run_charge_noise_average(cfg, thetas, spectral_table)
    for th in thetas:
        clean = run_gate(cfg.device, cfg.pulse, spectral_table, th, dissipation=True).populations
        assert noisy[th]["gf0"] < clean["gf0"]


def test_theta_zero_leaves_source(device, spectral_table):
    r = run_gate(device.unitary(), ScenarioConfig().pulse, spectral_table, 0.0)
    assert r.populations["gf0"] < 1e-6
    assert fidelity(target_state(0.0, 0.0), DensityMatrix(QUBITS, r.rho)) > 0.9999


def test_bell_fidelity_ordering(spectral_table):
    cfg = ScenarioConfig(shots=0)
    ideal = bell_experiment(cfg, spectral_table, dissipation=False)
    lossy = bell_experiment(cfg, spectral_table)
    noisy = bell_experiment(cfg, spectral_table, noise=ChargeNoiseSpec(grid_points=(3, 3), enabled=True))
    assert ideal.fidelity_exact > 0.999
    assert 0.98 < lossy.fidelity_exact < ideal.fidelity_exact
    assert noisy.fidelity_exact < lossy.fidelity_exact - 0.03


def test_effective_phase_sweep_exact():
    rep = run_phase_sweep(ScenarioConfig(experiment="phase_sweep", model="effective", shots=0))
    assert rep.summary["max_abs_error"] < 1e-9
    assert rep.summary["points"] == 5 * 11


def test_phase_sweep_reference_column_is_zero():
    rep = run_phase_sweep(ScenarioConfig(experiment="phase_sweep", model="effective", shots=1000, seed=5))
    header, rows = rep.tables["phase_sweep"]
    zero = [r for r in rows if float(r[1]) == 0.0]
    assert zero and all(float(r[header.index("phase_error")]) == 0.0 for r in zero)
    assert abs(rep.summary["mean_error"]) < 0.02


def test_table1_rows_sum_and_trace(spectral_table):
    rep = run_table1(ScenarioConfig(), spectral_table, rows=["unitary", "finite_t1"])
    header, rows = rep.tables["table1"]
    for r in rows:
        assert sum(float(x) for x in r[1:7]) <= 100.1
        assert float(r[7]) == pytest.approx(100.0, abs=0.01)


CONFIG = """
[device]
omega1 = 4.896
t1_q1 = 42

[pulse]
shape = flat_top_gaussian
flat_ns = 206
sigma_ns = 3.5

[noise]
enabled = true
max_shift_mhz = 0.9, 1.5
grid_points = 7, 9

[experiment]
name = phase-sweep
model = effective
shots = 200
seed = 77
phase_points = 4
phase_theta_points = 2
workers = 3
"""


def test_config_parsing(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(CONFIG)
    cfg = ScenarioConfig.load(path)
    assert cfg.experiment == "phase_sweep"
    assert cfg.noise.enabled and cfg.noise.grid_points == (7, 9)
    assert cfg.noise.max_shift == pytest.approx((0.9 * MHZ, 1.5 * MHZ))
    assert cfg.pulse.duration == pytest.approx(220 * NS)
    assert len(cfg.phases) == 4 and len(cfg.phase_thetas) == 2
    assert cfg.phase_thetas[0] == pytest.approx(0.19 * math.pi)
    # workers do not change results, so they stay out of the digest
    assert cfg.digest() == ScenarioConfig.load(path, workers=1).digest()
    assert cfg.digest() != ScenarioConfig.load(path, seed=78).digest()
    again = ScenarioConfig.from_text(cfg.canonical_text())
    assert again.canonical_text() == cfg.canonical_text()


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ScenarioConfig(experiment="dance")
    with pytest.raises(ValueError):
        ScenarioConfig(frame="sideways")
    with pytest.raises(ValueError):
        ScenarioConfig(phases=())
    with pytest.raises(FileNotFoundError):
        ScenarioConfig.from_text("[calibration]\nfile = nowhere.ini\n", str(tmp_path))


def test_bare_fallback_warns():
    from holosim.experiments import calibration_for
    with pytest.warns(UserWarning):
        assert calibration_for(ScenarioConfig(cal_source="bare")) is None


def test_cli_outputs_are_deterministic(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(CONFIG)
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["phase-sweep", "--config", str(cfg), "--out", str(out), "--seed", "3", "--workers", "1"]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == ["config.ini", "manifest.txt", "phase_sweep.csv", "phase_sweep_summary.csv"]
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
    manifest = (outs[0] / "manifest.txt").read_text()
    assert "config_sha256" in manifest and "seed = 3" in manifest
    assert (outs[0] / "phase_sweep.csv").read_text().splitlines()[0].startswith("theta,phi")
