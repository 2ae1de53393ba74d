"""Command-line interface: run, sweep, validate, transform.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 partial
sweep (some points failed).
"""

import argparse
import json
import sys

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, LindgaussError


def _load_config(path, overrides):
    with open(path) as fh:
        cfg = cfgmod.parse_config(fh.read())
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _cmd_run(args):
    cfg = _load_config(args.config, {"seed": args.seed, "out.dir": args.out_dir,
                                     "out.format": args.format})
    out_dir = cfgmod.lookup(cfg, "out.dir")
    from .scenario import run_scenario

    def progress(idx, t):
        print(f"[run] t = {t:g}", file=sys.stderr)

    result = run_scenario(cfg, out_dir=out_dir, progress=progress if args.verbose else None)
    if result.error is not None:
        print(f"solver error: {result.error}", file=sys.stderr)
        print(f"partial results and manifest in {out_dir}", file=sys.stderr)
        return 3
    print(f"wrote {out_dir}/report.csv ({len(result.reports)} time points)")
    return 0


def _cmd_sweep(args):
    cfg = _load_config(args.spec, {"seed": args.seed, "out.dir": args.out_dir})
    out_dir = cfgmod.lookup(cfg, "out.dir")
    from .sweep import run_sweep

    def progress(i, n, hbar, gamma):
        print(f"[sweep] point {i + 1}/{n}: hbar={hbar:g} gamma={gamma:g}", file=sys.stderr)

    points, fits = run_sweep(
        cfg, out_dir=out_dir, workers=args.workers,
        progress=progress if args.verbose else None,
    )
    failed = [p for p in points if p.status != "ok"]
    print(f"wrote {out_dir}/sweep.csv ({len(points)} points, {len(failed)} failed)")
    for key, fit in fits.get("hbar_exponents", {}).items():
        print(f"rate ~ hbar^{fit['exponent']:.3f} at gamma={key} (R2={fit['r_squared']:.3f})")
    for key, fit in fits.get("gamma_exponents", {}).items():
        print(f"rate ~ gamma^{fit['exponent']:.3f} at hbar={key} (R2={fit['r_squared']:.3f})")
    return 4 if failed else 0


def _cmd_validate(args):
    cfg = _load_config(args.config, {})
    model = cfgmod.build_model(cfg)
    report = model.admissibility_report()
    payload = {
        "admissibility": report,
        "relative_diffusion_strength": None,
        "anharmonicity_classical": model.anharmonicity_classical(),
        "characteristic_scales": {},
    }
    try:
        payload["relative_diffusion_strength"] = model.relative_diffusion_strength()
        b_q, b_qp, truncated = model.anharmonicity_quantum()
        payload["anharmonicity_quantum"] = {
            "b_q": b_q, "b_q_prime": b_qp, "truncated": truncated,
        }
    except LindgaussError as exc:
        payload["relative_diffusion_strength_error"] = str(exc)
    t_harm, s_anh, s_h, d_char = model.characteristic_scales()
    payload["characteristic_scales"] = {
        "t_harm": t_harm,
        "s_anharmonic": s_anh,
        "s_hamiltonian": s_h,
        "d_characteristic": None if d_char is None else np.asarray(d_char).tolist(),
    }
    print(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    return 0


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return str(obj)


def _cmd_transform(args):
    from .grids import PhaseSpaceGrid, field_to_csv, load_grid_state, save_field
    from .reference import classical_histogram, wigner_transform

    path = args.snapshot
    out = args.out or (path + ".wigner")
    if path.endswith(".grd"):
        state = load_grid_state(path)
        field = wigner_transform(state)
    elif path.endswith(".txt"):
        with open(path) as fh:
            head = fh.readline()
        if "ensemble" in head:
            from .mixture import load_ensemble_text, mixture_wigner
            from .grids import PhaseSpaceField

            ens = load_ensemble_text(path)
            grid = PhaseSpaceGrid.from_extent(args.xmin, args.xmax, args.n, ens.hbar)
            field = PhaseSpaceField(grid=grid, values=mixture_wigner(ens, grid))
        elif "classical" in head:
            from .scenario import load_classical_text

            hbar = args.hbar
            if hbar is None:
                with open(path) as fh:
                    for line in fh:
                        if line.startswith("# hbar"):
                            hbar = float(line.partition("=")[2])
                            break
                        if not line.startswith("#"):
                            break
            if hbar is None:
                raise ConfigError("classical clouds need --hbar for the grid pairing")
            cloud = load_classical_text(path)
            grid = PhaseSpaceGrid.from_extent(args.xmin, args.xmax, args.n, hbar)
            field = classical_histogram(cloud, grid)
        else:
            raise ConfigError(f"unrecognized snapshot header: {head.strip()!r}")
    else:
        raise ConfigError(f"unrecognized snapshot type: {path!r}")
    save_field(field, out)
    if args.csv:
        field_to_csv(field, out + ".csv")
    print(f"wrote {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lindgauss",
        description="Gaussian-mixture propagator and exact references for "
        "Markovian open systems",
    )
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--format", choices=["csv", "json"], default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an (hbar, gamma) sweep")
    p_sweep.add_argument("spec")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out-dir", default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate", help="admissibility and scale report")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_tr = sub.add_parser("transform", help="Wigner transform / histogram a snapshot")
    p_tr.add_argument("snapshot")
    p_tr.add_argument("--out", default=None)
    p_tr.add_argument("--n", type=int, default=256)
    p_tr.add_argument("--xmin", type=float, default=-4.0)
    p_tr.add_argument("--xmax", type=float, default=4.0)
    p_tr.add_argument("--hbar", type=float, default=None)
    p_tr.add_argument("--csv", action="store_true")
    p_tr.set_defaults(func=_cmd_transform)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LindgaussError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":
    sys.exit(main())
