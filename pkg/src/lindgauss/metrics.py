"""Distances and observable gaps between quantum, mixture, and classical states."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GridError
from .grids import PhaseSpaceField


def trace_distance(a, b):
    """Sum of absolute eigenvalues of the Hermitian difference of two states."""
    if not a.grid.same_as(b.grid):
        raise GridError("states live on different grids")
    diff = a.rho - b.rho
    diff = (diff + diff.conj().T) / 2.0
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def l1_distance(f1, f2):
    """Cell-weighted L1 distance between two phase-space fields."""
    if isinstance(f1, PhaseSpaceField) and isinstance(f2, PhaseSpaceField):
        if not f1.grid.same_as(f2.grid):
            raise GridError("fields live on different grids")
        return float(np.sum(np.abs(f1.values - f2.values)) * f1.grid.cell)
    raise DimensionError("l1_distance expects two PhaseSpaceFields")


def observable_gap(quantum_state, classical, observable):
    """|Tr[rho Op(A)] - int f A| between a grid state and a classical side.

    `classical` may be a point cloud (Monte-Carlo mean, returns the gap and
    the standard error) or a PhaseSpaceField density (error 0).
    """
    from .reference import (
        ClassicalEnsemble,
        classical_expectation,
        grid_density_expectation,
        weyl_quantize,
    )

    op = weyl_quantize(observable, quantum_state.grid)
    quantum = float(np.real(np.trace(quantum_state.rho @ op)))
    if isinstance(classical, ClassicalEnsemble):
        mean, se = classical_expectation(classical, observable)
    elif isinstance(classical, PhaseSpaceField):
        mean, se = grid_density_expectation(classical, observable), 0.0
    else:
        raise DimensionError("classical side must be a cloud or a grid density")
    return abs(quantum - mean), se


@dataclass
class ObservableRecord:
    quantum: float = None
    mixture: float = None
    classical: float = None
    classical_se: float = None
    mixture_se: float = None

    def gap_qc(self):
        if self.quantum is None or self.classical is None:
            return None
        return abs(self.quantum - self.classical)

    def gap_qm(self):
        if self.quantum is None or self.mixture is None:
            return None
        return abs(self.quantum - self.mixture)

    def gap_mc(self):
        if self.mixture is None or self.classical is None:
            return None
        return abs(self.mixture - self.classical)


@dataclass
class ComparisonReport:
    """Per-time snapshot of all pairwise discrepancies."""

    time: float
    observables: dict = field(default_factory=dict)  # name -> ObservableRecord
    trace_distance_qm: float = None
    l1_mixture_classical: float = None
    l1_quantum_classical: float = None
    error_estimates: dict = field(default_factory=dict)

    def row(self, names):
        out = [self.time]
        for name in names:
            rec = self.observables.get(name, ObservableRecord())
            out.extend(
                [
                    rec.quantum,
                    rec.mixture,
                    rec.classical,
                    rec.classical_se,
                    rec.gap_qc(),
                    rec.gap_qm(),
                    rec.gap_mc(),
                ]
            )
        out.extend(
            [self.trace_distance_qm, self.l1_mixture_classical, self.l1_quantum_classical]
        )
        return out

    @staticmethod
    def header(names):
        cols = ["time"]
        for name in names:
            cols.extend(
                [
                    f"{name}_quantum",
                    f"{name}_mixture",
                    f"{name}_classical",
                    f"{name}_classical_se",
                    f"{name}_gap_qc",
                    f"{name}_gap_qm",
                    f"{name}_gap_mc",
                ]
            )
        cols.extend(["trace_distance_qm", "l1_mixture_classical", "l1_quantum_classical"])
        return cols

    def to_dict(self):
        return {
            "time": self.time,
            "observables": {
                k: {
                    "quantum": v.quantum,
                    "mixture": v.mixture,
                    "classical": v.classical,
                    "classical_se": v.classical_se,
                    "mixture_se": v.mixture_se,
                }
                for k, v in self.observables.items()
            },
            "trace_distance_qm": self.trace_distance_qm,
            "l1_mixture_classical": self.l1_mixture_classical,
            "l1_quantum_classical": self.l1_quantum_classical,
            "error_estimates": self.error_estimates,
        }


def format_float(v):
    if v is None:
        return ""
    return repr(float(v))


def reports_to_csv(reports, names, header_lines=()):
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(ComparisonReport.header(names)))
    for rep in reports:
        lines.append(",".join(format_float(v) for v in rep.row(names)))
    return "\n".join(lines) + "\n"


def reports_to_json(reports, names, meta=None):
    payload = {
        "meta": meta or {},
        "observables": list(names),
        "reports": [rep.to_dict() for rep in reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
