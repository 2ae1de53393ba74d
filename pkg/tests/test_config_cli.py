import json
import os

import numpy as np
import pytest

from lindgauss import config as cfgmod
from lindgauss.cli import main as cli_main
from lindgauss.errors import ConfigError


SAMPLE = """
# damped harmonic scenario
model.hamiltonian = harmonic
model.lindblads = annihilation
model.hbar = 0.1
model.box = -2.5 2.5 -2.5 2.5
initial.mean = 1 0
output.times = linspace 0 0.4 2
mixture.particles = 60
langevin.points = 4000
dense.n = 64
dense.extent = -2.5 2.5
seed = 77
"""


def test_parse_emit_roundtrip():
    normalized = cfgmod.normalize_config(SAMPLE)
    assert cfgmod.normalize_config(normalized) == normalized
    # canonical form is sorted and repr-formatted
    assert "model.hbar = 0.1" in normalized


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        cfgmod.parse_config("nope.nope = 1")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError):
        cfgmod.parse_config("seed = 1\nseed = 2")


def test_presets_build_models():
    for name in ("harmonic", "damped_harmonic", "quartic", "cosine"):
        model = cfgmod.build_model(cfgmod.preset(name))
        assert model.hbar == 0.1


def test_unknown_preset():
    with pytest.raises(ConfigError):
        cfgmod.preset("pentagonal")


def test_gamma_scales_lindblads():
    cfg = cfgmod.preset("quartic")
    cfg["model.gamma"] = "4.0"
    model = cfgmod.build_model(cfg)
    omega_f = model.scaled_diffusion(np.zeros((1, 2)))[0]
    assert np.allclose(omega_f, 4.0 * np.eye(2))


def test_initial_cov_variants():
    cfg = cfgmod.preset("harmonic")
    mean, cov = cfgmod.initial_gaussian(cfg)
    assert np.allclose(cov, np.eye(2) * 0.05)
    cfg["initial.cov"] = "0.08 0.0 0.03125"
    _, cov2 = cfgmod.initial_gaussian(cfg)
    assert cov2[0, 0] == 0.08


def test_output_times_forms():
    cfg = {"output.times": "linspace 0 1 5"}
    assert np.allclose(cfgmod.output_times(cfg), np.linspace(0, 1, 5))
    cfg = {"output.times": "0 0.5 2.0"}
    assert np.allclose(cfgmod.output_times(cfg), [0, 0.5, 2.0])


def _write(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_cli_run_and_reproducibility(tmp_path):
    cfg_path = _write(tmp_path, SAMPLE)
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert cli_main(["run", cfg_path, "--out-dir", str(out1)]) == 0
    assert cli_main(["run", cfg_path, "--out-dir", str(out2)]) == 0
    csv1 = (out1 / "report.csv").read_bytes()
    csv2 = (out2 / "report.csv").read_bytes()
    assert csv1 == csv2  # byte-identical rerun
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["seed"] == 77
    # artifacts carry the normalized config
    head = csv1.decode().splitlines()
    assert any("model.hamiltonian = harmonic" in ln for ln in head)


def test_cli_config_error_exit_code(tmp_path):
    bad = _write(tmp_path, "bogus.key = 3\n", name="bad.cfg")
    assert cli_main(["run", bad]) == 2
    assert cli_main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_cli_solver_error_partial_manifest(tmp_path):
    # quartic with gamma = 0: no diffusion, the mixture cannot split
    text = """
model.hamiltonian = quartic
model.lindblads = position momentum
model.gamma = 0.0
model.hbar = 0.1
model.box = -2 2 -2 2
initial.mean = 1 0
solvers = mixture
output.times = linspace 0 0.2 2
mixture.particles = 20
seed = 5
"""
    cfg_path = _write(tmp_path, text, name="deg.cfg")
    out = tmp_path / "deg"
    code = cli_main(["run", cfg_path, "--out-dir", str(out)])
    assert code == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "error"
    assert "degenerate" in manifest["error"] or "squeezing" in manifest["error"]


def test_cli_validate(tmp_path, capsys):
    cfg_path = _write(tmp_path, SAMPLE)
    assert cli_main(["validate", cfg_path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["relative_diffusion_strength"] == pytest.approx(0.25, rel=1e-6)
    assert payload["anharmonicity_classical"] == pytest.approx(0.0, abs=1e-9)
    assert payload["characteristic_scales"]["t_harm"] == pytest.approx(1.0, rel=1e-9)


def test_cli_transform_gridstate(tmp_path):
    cfg_path = _write(tmp_path, SAMPLE)
    out = tmp_path / "run"
    assert cli_main(["run", cfg_path, "--out-dir", str(out)]) == 0
    snap = out / "snapshots" / "dense_001.grd"
    dest = tmp_path / "w.psf"
    assert cli_main(["transform", str(snap), "--out", str(dest), "--csv"]) == 0
    from lindgauss.grids import load_field

    field = load_field(dest)
    assert field.integral() == pytest.approx(1.0, abs=1e-6)
    assert (tmp_path / "w.psf.csv").exists()


def test_cli_transform_ensemble(tmp_path):
    cfg_path = _write(tmp_path, SAMPLE)
    out = tmp_path / "run"
    assert cli_main(["run", cfg_path, "--out-dir", str(out)]) == 0
    snap = out / "snapshots" / "mixture_001.txt"
    dest = tmp_path / "wm.psf"
    code = cli_main([
        "transform", str(snap), "--out", str(dest),
        "--n", "128", "--xmin", "-3", "--xmax", "3",
    ])
    assert code == 0
    from lindgauss.grids import load_field

    field = load_field(dest)
    assert 0.9 < field.integral() <= 1.001


def test_sweep_runs_and_is_idempotent(tmp_path):
    spec = """
model.hamiltonian = harmonic
model.lindblads = position momentum
model.hbar = 0.1
model.box = -2.5 2.5 -2.5 2.5
initial.mean = 1 0
solvers = dense langevin
output.times = linspace 0 1 6
langevin.points = 4000
dense.n = 64
dense.extent = -2.5 2.5
sweep.hbar = 0.1 0.05
seed = 9
"""
    spec_path = _write(tmp_path, spec, name="sweep.cfg")
    out = tmp_path / "sw"
    assert cli_main(["sweep", spec_path, "--out-dir", str(out)]) == 0
    body1 = (out / "sweep.csv").read_text()
    # second run reuses rows (idempotent per point and seed)
    assert cli_main(["sweep", spec_path, "--out-dir", str(out)]) == 0
    body2 = (out / "sweep.csv").read_text()
    assert body1 == body2
    from lindgauss.sweep import load_sweep_csv

    points = load_sweep_csv(str(out / "sweep.csv"))
    assert len(points) == 2
    assert all(p.status == "ok" for p in points)
    assert all(p.z_strength is not None for p in points)


def test_fit_gap_rate_recovers_slope():
    from lindgauss.sweep import fit_gap_rate

    times = np.linspace(0, 2, 21)
    gaps = 0.3 * times + 0.01
    slope, err, r2 = fit_gap_rate(times, gaps)
    assert slope == pytest.approx(0.3, rel=1e-9)
    assert r2 > 0.999


def test_power_law_fit():
    from lindgauss.sweep import power_law_fit

    x = np.array([0.1, 0.05, 0.025, 0.0125])
    y = 3.0 * x**0.5
    s, r2 = power_law_fit(x, y)
    assert s == pytest.approx(0.5, abs=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_sweep_partial_failure_exit_code(tmp_path):
    # gamma = 0 point has degenerate diffusion: that point fails, the sweep
    # continues, and the CLI reports partial completion
    spec = """
model.hamiltonian = harmonic
model.lindblads = position momentum
model.hbar = 0.1
model.box = -2.5 2.5 -2.5 2.5
initial.mean = 1 0
solvers = dense classical_grid
output.times = linspace 0 1 9
dense.n = 64
dense.extent = -2.5 2.5
sweep.gamma = 0.0 1.0
seed = 3
"""
    spec_path = _write(tmp_path, spec, name="partial.cfg")
    out = tmp_path / "partial"
    assert cli_main(["sweep", spec_path, "--out-dir", str(out)]) == 4
    from lindgauss.sweep import load_sweep_csv

    points = load_sweep_csv(str(out / "sweep.csv"))
    by_gamma = {p.gamma: p for p in points}
    assert by_gamma[0.0].status.startswith("error")
    assert by_gamma[1.0].status == "ok"


def test_mixture_file_initial_state(tmp_path):
    # a two-component mixture file seeds all three solvers consistently
    import numpy as np
    from lindgauss.mixture import ensemble_from_states, save_ensemble_text
    from lindgauss.symplectic import GaussianState
    from lindgauss.scenario import run_scenario

    hbar = 0.1
    states = [
        GaussianState(np.array([1.0, 0.0]), np.eye(2) * hbar / 2, 0.6),
        GaussianState(np.array([-0.8, 0.2]), np.eye(2) * hbar / 2, 0.4),
    ]
    ens = ensemble_from_states(states, hbar, seed=3)
    path = tmp_path / "mixture.txt"
    save_ensemble_text(ens, str(path))
    cfg = {
        "model.hamiltonian": "harmonic",
        "model.lindblads": "position momentum",
        "model.hbar": repr(hbar),
        "model.box": "-2.5 2.5 -2.5 2.5",
        "initial.mixture_file": str(path),
        "solvers": "mixture dense langevin",
        "output.times": "0 0.3",
        "mixture.particles": "4000",
        "langevin.points": "30000",
        "dense.n": "96",
        "dense.extent": "-2.5 2.5",
        "observables": "x x2",
        "seed": "12",
    }
    res = run_scenario(cfg, out_dir=None, persist_snapshots=False)
    assert res.error is None, res.error
    rec0 = res.reports[0].observables["x"]
    expected0 = 0.6 * 1.0 + 0.4 * (-0.8)
    assert abs(rec0.quantum - expected0) < 1e-6
    assert abs(rec0.mixture - expected0) < 1e-9
    assert abs(rec0.classical - expected0) < 3 * rec0.classical_se + 1e-3
    rec = res.reports[1].observables["x"]
    # all three stay consistent after evolution (mixture carries its own
    # particle-sampling noise ~ sqrt(hbar t / n))
    assert abs(rec.quantum - rec.mixture) < 1e-2
    assert abs(rec.quantum - rec.classical) < 3 * rec.classical_se + 2e-3
