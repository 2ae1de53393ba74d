"""Readers for the simulator's persisted artifacts.

These parse the documented on-disk formats only (CSV with `# key = value`
comment headers, the fits JSON, and the little-endian phase-space field
container); nothing here imports the simulator.
"""

import json
import struct

import numpy as np


class SchemaError(Exception):
    """Input file does not match the documented artifact schema."""


def read_csv_table(path):
    """(header_meta, columns, rows) for a comment-headed CSV artifact."""
    meta = {}
    rows = []
    columns = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append(line.split(","))
    if columns is None or not rows:
        raise SchemaError(f"{path}: no tabular content")
    return meta, columns, rows


def column(columns, rows, name, kind=float):
    if name not in columns:
        raise SchemaError(f"missing column {name!r}")
    idx = columns.index(name)
    out = []
    for row in rows:
        cell = row[idx] if idx < len(row) else ""
        if cell == "":
            out.append(None)
        elif kind is float:
            out.append(float(cell))
        else:
            out.append(cell)
    return out


def gap_columns(columns):
    """Observable names that carry quantum-classical gap columns."""
    names = []
    for col in columns:
        if col.endswith("_gap_qc"):
            names.append(col[: -len("_gap_qc")])
    return names


def read_fits(path):
    with open(path) as fh:
        return json.load(fh)


_FIELD_MAGIC = b"LGPSGR1\x00"


def read_field(path):
    """(x, p, values) from the binary phase-space field container."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _FIELD_MAGIC:
        raise SchemaError(f"{path}: not a phase-space field container")
    magic, n, x0, dx, hbar, iscomplex = struct.unpack_from("<8sqdddq", raw)
    offset = struct.calcsize("<8sqdddq")
    dtype = np.complex128 if iscomplex else np.float64
    values = np.frombuffer(raw, dtype=dtype, offset=offset).reshape(n, n)
    dp = 2.0 * np.pi * hbar / (n * dx)
    x = x0 + dx * np.arange(n)
    p = -0.5 * n * dp + dp * np.arange(n)
    return x, p, np.real(values)
