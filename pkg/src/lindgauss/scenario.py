"""Scenario orchestration: evolve selected solvers from common initial data.

All solvers start from the same pure Gaussian: the grid solver from its
wavefunction, the classical cloud from the identical phase-space Gaussian
(the Wigner function of the initial state), and the mixture from replicated
particles.  Reports are emitted at the requested output times and every
artifact carries the normalized config and seed.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import config as cfgmod
from .errors import LindgaussError
from .grids import PhaseSpaceGrid, save_grid_state
from .harmonic import default_lambda_star
from .metrics import (
    ComparisonReport,
    ObservableRecord,
    l1_distance,
    reports_to_csv,
    reports_to_json,
)
from .mixture import (
    ParticleEnsemble,
    default_dt,
    evolve as mixture_evolve,
    mixture_density_matrix,
    mixture_expectation,
    mixture_wigner,
    save_ensemble_text,
)
from .reference import (
    ClassicalEnsemble,
    QuantizedModel,
    classical_ensemble_gaussian,
    classical_expectation,
    coherent_grid_state,
    default_quantum_dt,
    langevin_evolve,
    lindblad_evolve,
    smoothed_histogram,
    weyl_quantize,
    wigner_transform,
)
from .symplectic import check_covariance


@dataclass
class ScenarioResult:
    config: dict
    reports: list
    manifest: dict
    out_dir: str = None
    error: Exception = None


def replicated_ensemble(mean, cov, n, hbar, seed):
    means = np.tile(np.asarray(mean, float), (n, 1))
    covs = np.tile(np.asarray(cov, float), (n, 1, 1))
    return ParticleEnsemble(
        means=means, covs=covs, weights=np.full(n, 1.0 / n), hbar=hbar, rng_seed=seed
    )


def auto_dense_grid(cfg, mean, cov, model):
    spec = cfgmod.lookup(cfg, "dense.extent")
    n_spec = cfgmod.lookup(cfg, "dense.n")
    hbar = model.hbar
    if spec == ["auto"]:
        # cover the domain box plus Gaussian tails
        box = model.domain_box
        sx = np.sqrt(cov[0, 0])
        lo = min(box[0, 0], mean[0] - 6 * sx) - 3 * sx
        hi = max(box[0, 1], mean[0] + 6 * sx) + 3 * sx
    else:
        lo, hi = float(spec[0]), float(spec[1])
    if n_spec == "auto":
        # resolve the narrowest packets and keep the conjugate p-range above
        # the momentum support implied by the domain box
        length = hi - lo
        p_range = float(np.max(np.abs(model.domain_box[model.dim :]))) + 4.0 * np.sqrt(hbar / 2.0)
        dx = min(np.sqrt(hbar / 2.0) / 4.0, np.pi * hbar / (1.15 * p_range))
        n = int(np.ceil(length / dx / 32.0)) * 32
        n = max(64, min(n, 512))
    else:
        n = int(n_spec)
    return PhaseSpaceGrid.from_extent(lo, hi, n, hbar)


def _mixture_dt(cfg, model):
    spec = cfgmod.lookup(cfg, "mixture.dt")
    if spec != "auto":
        return float(spec)
    return default_dt(model, cfgmod.lookup(cfg, "mixture.dt_factor"))


def _langevin_dt(cfg, model):
    spec = cfgmod.lookup(cfg, "langevin.dt")
    if spec != "auto":
        return float(spec)
    t_harm = model.harmonic_time()
    if not np.isfinite(t_harm):
        t_harm = 1.0
    return t_harm / cfgmod.lookup(cfg, "langevin.dt_factor")


def _lambda_star(cfg, model):
    spec = cfgmod.lookup(cfg, "mixture.lambda_star")
    if spec != "auto":
        return float(spec)
    return default_lambda_star(model)


def run_scenario(cfg, out_dir=None, persist_snapshots=True, progress=None):
    """Evolve the configured solvers and collect comparison reports.

    Returns a ScenarioResult; on a solver failure the result carries the
    exception and the partial reports, and the manifest records the error.
    """
    cfg = dict(cfg)
    seed = cfgmod.lookup(cfg, "seed")
    model = cfgmod.build_model(cfg)
    mean, cov = cfgmod.initial_gaussian(cfg)
    check_covariance(cov, hbar=model.hbar, pure=True)
    times = cfgmod.output_times(cfg)
    observables = cfgmod.observables_map(cfg)
    solvers = cfgmod.lookup(cfg, "solvers")
    normalized = cfgmod.emit_config(cfg, for_artifact=True)
    manifest = {
        "config_hash": cfgmod.config_hash(cfg),
        "seed": seed,
        "solvers": solvers,
        "admissibility": model.admissibility_report(order=3),
        "status": "ok",
    }

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)
        with open(os.path.join(out_dir, "config.txt"), "w") as fh:
            fh.write(normalized)

    reports = []
    error = None
    try:
        states = _initial_states(cfg, model, mean, cov, seed, solvers)
        grid = states.get("grid")
        obs_mats = (
            {name: weyl_quantize(s, grid) for name, s in observables.items()}
            if "dense" in solvers
            else {}
        )
        dt_mix = _mixture_dt(cfg, model) if "mixture" in solvers else None
        lam = _lambda_star(cfg, model) if "mixture" in solvers else None
        dt_cl = _langevin_dt(cfg, model) if "langevin" in solvers else None
        dt_q = None
        if "dense" in solvers:
            spec = cfgmod.lookup(cfg, "dense.dt")
            dt_q = float(spec) if spec != "auto" else default_quantum_dt(states["ops"])
        manifest["steps"] = {
            "mixture_dt": dt_mix,
            "langevin_dt": dt_cl,
            "dense_dt": dt_q,
            "lambda_star": lam,
        }
        scheme = cfgmod.lookup(cfg, "langevin.scheme")
        frictionless = model.is_frictionless()
        for idx, t in enumerate(times):
            if progress:
                progress(idx, float(t))
            if "mixture" in solvers:
                states["mixture"] = mixture_evolve(
                    states["mixture"], model, t, dt_mix, lambda_star=lam,
                    frictionless=frictionless,
                )
            if "dense" in solvers:
                states["dense"], drift = lindblad_evolve(
                    states["dense"], states["ops"], t, dt=dt_q, t_start=states["t_dense"]
                )
                states["t_dense"] = t
                manifest.setdefault("trace_drift", []).append(drift)
            if "langevin" in solvers:
                states["langevin"] = langevin_evolve(
                    states["langevin"], model, t, dt_cl, scheme=scheme
                )
            if "classical_grid" in solvers:
                states["classical_grid"] = states["classical_solver"].evolve(
                    states["classical_grid"], t, t_start=states["t_classical"]
                )
                states["t_classical"] = t
            reports.append(
                _report_at(t, states, observables, obs_mats, solvers, model)
            )
            if out_dir and persist_snapshots:
                _persist_snapshots(out_dir, idx, states, solvers, normalized)
    except LindgaussError as exc:
        error = exc
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"

    names = list(observables)
    header = [ln for ln in normalized.splitlines()] + [f"seed = {seed}"]
    if out_dir:
        with open(os.path.join(out_dir, "report.csv"), "w") as fh:
            fh.write(reports_to_csv(reports, names, header_lines=header))
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(
                reports_to_json(
                    reports,
                    names,
                    meta={"config": normalized, "seed": seed,
                          "config_hash": manifest["config_hash"]},
                )
            )
        if "mixture" in solvers and reports and error is None:
            trace = states["mixture"].stats
            with open(os.path.join(out_dir, "nts_trace.csv"), "w") as fh:
                fh.write(f"# config_hash = {manifest['config_hash']}\n")
                fh.write(f"# seed = {seed}\n")
                fh.write(f"# floor = {_lambda_star(cfg, model)!r}\n")
                fh.write("time,min_nts_ratio,max_cov_norm,max_symplectic_defect\n")
                for row in zip(
                    trace.times, trace.min_nts_ratio, trace.max_cov_norm,
                    trace.max_symplectic_defect,
                ):
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
        _sanitize_manifest(manifest)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    return ScenarioResult(
        config=cfg, reports=reports, manifest=manifest, out_dir=out_dir, error=error
    )


def _initial_states(cfg, model, mean, cov, seed, solvers):
    states = {}
    mixture_file = cfgmod.lookup(cfg, "initial.mixture_file")
    base_mixture = None
    if mixture_file != "none":
        from .mixture import load_ensemble_text

        base_mixture = load_ensemble_text(mixture_file)
    if "dense" in solvers or "mixture" in solvers or "classical_grid" in solvers:
        grid = auto_dense_grid(cfg, mean, cov, model)
        states["grid"] = grid
    if "dense" in solvers:
        if base_mixture is not None:
            states["dense"] = mixture_density_matrix(base_mixture, states["grid"])
        else:
            states["dense"] = coherent_grid_state(mean, cov, model.hbar, states["grid"])
        states["ops"] = QuantizedModel.build(model, states["grid"])
        states["t_dense"] = 0.0
    if "mixture" in solvers:
        n = cfgmod.lookup(cfg, "mixture.particles")
        if base_mixture is not None:
            states["mixture"] = _resampled_mixture(base_mixture, n, model.hbar, seed)
        else:
            states["mixture"] = replicated_ensemble(mean, cov, n, model.hbar, seed)
    if "langevin" in solvers:
        n = cfgmod.lookup(cfg, "langevin.points")
        if base_mixture is not None:
            states["langevin"] = _sample_mixture_cloud(base_mixture, n, seed + 1)
        else:
            states["langevin"] = classical_ensemble_gaussian(mean, cov, n, seed=seed + 1)
    if "classical_grid" in solvers:
        from .reference import SpectralClassical, initial_gaussian_field

        states["classical_solver"] = SpectralClassical.build(model, states["grid"])
        states["classical_grid"] = initial_gaussian_field(mean, cov, states["grid"])
        states["t_classical"] = 0.0
    return states


def _resampled_mixture(base, n, hbar, seed):
    """Replicate the file's components up to ~n particles, keeping weights."""
    reps = max(1, n // base.n_particles)
    means = np.repeat(base.means, reps, axis=0)
    covs = np.repeat(base.covs, reps, axis=0)
    weights = np.repeat(base.weights / reps, reps)
    return ParticleEnsemble(
        means=means, covs=covs, weights=weights / weights.sum(), hbar=hbar, rng_seed=seed
    )


def _sample_mixture_cloud(base, n, seed):
    """Draw classical points from the mixture's phase-space density."""
    rng = np.random.default_rng([seed, 0x313])
    idx = rng.choice(base.n_particles, size=n, p=base.weights)
    z = rng.standard_normal((n, base.means.shape[1]))
    chol = np.linalg.cholesky(base.covs)
    pts = base.means[idx] + np.einsum("nab,nb->na", chol[idx], z)
    return ClassicalEnsemble(points=pts, rng_seed=seed)


def _report_at(t, states, observables, obs_mats, solvers, model):
    from .reference import grid_density_expectation

    rep = ComparisonReport(time=float(t))
    dense = states.get("dense")
    mix = states.get("mixture")
    cloud = states.get("langevin")
    cgrid = states.get("classical_grid")
    for name, symbol in observables.items():
        rec = ObservableRecord()
        if dense is not None:
            rec.quantum = float(np.real(np.trace(dense.rho @ obs_mats[name])))
        if mix is not None:
            rec.mixture = float(np.real(mixture_expectation(mix, symbol)))
        if cgrid is not None:
            # deterministic grid density wins the classical column
            rec.classical = grid_density_expectation(cgrid, symbol)
            rec.classical_se = 0.0
        elif cloud is not None:
            rec.classical, rec.classical_se = classical_expectation(cloud, symbol)
        rep.observables[name] = rec
    grid = states.get("grid")
    if dense is not None and mix is not None and model.dim == 1:
        from .metrics import trace_distance

        assembled = mixture_density_matrix(mix, grid)
        rep.trace_distance_qm = trace_distance(dense, assembled)
    classical_field = cgrid
    if classical_field is None and cloud is not None and grid is not None:
        classical_field = smoothed_histogram(cloud, grid)
    if classical_field is not None and model.dim == 1:
        if mix is not None:
            from .grids import PhaseSpaceField

            wmix = PhaseSpaceField(grid=grid, values=mixture_wigner(mix, grid))
            rep.l1_mixture_classical = l1_distance(wmix, classical_field)
        if dense is not None:
            rep.l1_quantum_classical = l1_distance(wigner_transform(dense), classical_field)
    return rep


def _persist_snapshots(out_dir, idx, states, solvers, normalized):
    snap = os.path.join(out_dir, "snapshots")
    manifest_path = os.path.join(snap, "MANIFEST.txt")
    if not os.path.exists(manifest_path):
        with open(manifest_path, "w") as fh:
            fh.write("# normalized config for every snapshot in this directory\n")
            fh.write(normalized)
    if "mixture" in solvers:
        save_ensemble_text(states["mixture"], os.path.join(snap, f"mixture_{idx:03d}.txt"))
    if "dense" in solvers:
        save_grid_state(states["dense"], os.path.join(snap, f"dense_{idx:03d}.grd"))
    if "langevin" in solvers:
        save_classical_text(
            states["langevin"], os.path.join(snap, f"classical_{idx:03d}.txt"),
            hbar=states.get("grid").hbar if states.get("grid") else None,
        )


def save_classical_text(ensemble, path, hbar=None):
    with open(path, "w") as fh:
        fh.write("# lindgauss classical cloud v1\n")
        fh.write(f"# time = {float(ensemble.time)!r}\n")
        fh.write(f"# seed = {ensemble.rng_seed}\n")
        if hbar is not None:
            fh.write(f"# hbar = {float(hbar)!r}\n")
        fh.write("# columns: phase-space coordinates per row\n")
        for row in ensemble.points:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_classical_text(path):
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "=" in line:
                    k, _, v = line[1:].partition("=")
                    header[k.strip()] = v.strip()
                continue
            rows.append([float(tok) for tok in line.split()])
    return ClassicalEnsemble(
        points=np.asarray(rows),
        time=float(header.get("time", "0.0")),
        rng_seed=int(header.get("seed", "0")),
    )


def _sanitize_manifest(manifest):
    adm = manifest.get("admissibility")
    if adm:
        adm["hamiltonian_seminorms"] = {
            str(k): v for k, v in adm.get("hamiltonian_seminorms", {}).items()
        }


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")
