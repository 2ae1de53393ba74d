"""Figure rendering from persisted simulator artifacts.

Rendering never recomputes physics: fitted values are read from the
artifacts (fits.json / sweep.csv) unless refit is requested explicitly.
Every render writes the image plus a `.annotations.txt` sidecar holding the
exact annotation text, and embeds the source config hash in the image
metadata, so identical inputs produce identical annotations.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import SchemaError, column, gap_columns, read_csv_table, read_field, read_fits


def _save(fig, out_path, meta, annotations):
    fig.savefig(out_path, dpi=150, metadata=_image_metadata(out_path, meta))
    plt.close(fig)
    with open(_annotation_path(out_path), "w") as fh:
        fh.write("\n".join(annotations) + "\n")
    return out_path


def _annotation_path(out_path):
    return out_path + ".annotations.txt"


def _image_metadata(out_path, meta):
    if out_path.endswith(".svg"):
        return {"Creator": f"lgfig config_hash={meta.get('config_hash', '')}"}
    return {"Software": "lgfig", "Source": f"config_hash={meta.get('config_hash', '')}"}


def render_gap_time(report_csv, out_path, logy=False):
    meta, columns, rows = read_csv_table(report_csv)
    names = gap_columns(columns)
    if not names:
        raise SchemaError("report carries no quantum-classical gap columns")
    times = column(columns, rows, "time")
    fig, ax = plt.subplots(figsize=(6, 4))
    annotations = [f"config_hash={meta.get('config_hash', '')}"]
    for name in names:
        gaps = column(columns, rows, f"{name}_gap_qc")
        pts = [(t, g) for t, g in zip(times, gaps) if g is not None]
        if not pts:
            continue
        ts, gs = zip(*pts)
        ax.plot(ts, gs, marker="o", ms=3, label=name)
        annotations.append(f"{name}: final_gap={gs[-1]!r}")
    ax.set_xlabel("time")
    ax.set_ylabel("|quantum - classical|")
    if logy:
        ax.set_yscale("log")
    ax.legend(frameon=False)
    ax.set_title("observable gap growth")
    return _save(fig, out_path, meta, annotations)


def render_scaling(sweep_csv, out_path, axis="hbar", fits_json=None, refit=False):
    meta, columns, rows = read_csv_table(sweep_csv)
    xs = column(columns, rows, axis)
    rates = column(columns, rows, "rate")
    errs = column(columns, rows, "rate_err")
    status = column(columns, rows, "status", kind=str)
    pts = [
        (x, r, e or 0.0)
        for x, r, e, s in zip(xs, rates, errs, status)
        if s == "ok" and r is not None and r > 0
    ]
    if len(pts) < 2:
        raise SchemaError("sweep has fewer than two usable points")
    pts.sort()
    xv = np.array([p[0] for p in pts])
    rv = np.array([p[1] for p in pts])
    ev = np.array([p[2] for p in pts])
    slope_label = None
    if refit:
        lx, ly = np.log(xv), np.log(rv)
        slope = float(np.polyfit(lx, ly, 1)[0])
        slope_label = f"fitted slope (refit): {slope:.4f}"
    elif fits_json and os.path.exists(fits_json):
        fits = read_fits(fits_json)
        section = fits.get(f"{axis}_exponents", {})
        if section:
            key, fit = sorted(section.items())[0]
            slope_label = (
                f"fitted slope: {fit['exponent']:.4f} (R2={fit['r_squared']:.3f}) at {key}"
            )
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.errorbar(xv, rv, yerr=ev, fmt="o", capsize=3, label="measured rate")
    ref = rv[-1] * (xv / xv[-1]) ** 0.5
    ax.plot(xv, ref, "--", lw=1, label="slope 1/2 guide")
    if axis == "gamma":
        ref2 = rv[0] * (xv / xv[0]) ** -1.5
        ax.plot(xv, ref2, ":", lw=1, label="slope -3/2 guide")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("gap growth rate")
    annotations = [f"config_hash={meta.get('config_hash', '')}"]
    if slope_label:
        ax.set_title(slope_label, fontsize=10)
        annotations.append(slope_label)
    for x, r in zip(xv, rv):
        annotations.append(f"{axis}={x!r}: rate={r!r}")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, out_path, meta, annotations)


def render_wigner_panel(field_paths, out_path, labels=None):
    if not field_paths:
        raise SchemaError("no phase-space fields given")
    fields = [read_field(p) for p in field_paths]
    vmax = max(np.abs(v).max() for _, _, v in fields)
    if vmax == 0:
        raise SchemaError("all fields are identically zero")
    k = len(fields)
    fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 3.2), squeeze=False)
    annotations = []
    for i, ((x, p, values), ax) in enumerate(zip(fields, axes[0])):
        im = ax.pcolormesh(
            x, p, values.T, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="nearest"
        )
        label = labels[i] if labels and i < len(labels) else os.path.basename(field_paths[i])
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("x")
        if i == 0:
            ax.set_ylabel("p")
        annotations.append(f"{label}: max={values.max()!r} min={values.min()!r}")
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.85)
    return _save(fig, out_path, {"config_hash": ""}, annotations)


def render_nts_trace(trace_csv, out_path):
    meta, columns, rows = read_csv_table(trace_csv)
    times = column(columns, rows, "time")
    ratios = column(columns, rows, "min_nts_ratio")
    floor = float(meta.get("floor", "0"))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(times, ratios, lw=1, label="min eigenvalue ratio")
    ax.axhline(floor, color="crimson", ls="--", lw=1, label=f"floor {floor:.4g}")
    ax.set_xlabel("time")
    ax.set_ylabel("min lambda_min[sigma] / (hbar/2)")
    ax.legend(frameon=False, fontsize=8)
    annotations = [
        f"config_hash={meta.get('config_hash', '')}",
        f"floor={floor!r}",
        f"min_ratio={min(r for r in ratios if r is not None)!r}",
    ]
    return _save(fig, out_path, meta, annotations)
