"""1-D position grids, phase-space grids, and grid-state containers.

The momentum grid is always the Fourier conjugate of the position grid:
dp = 2 pi hbar / (N dx), so N dx dp = 2 pi hbar.  GridState stores the
density-matrix kernel including the dx weight, making trace = sum(diag).
Binary serialization is a fixed little-endian header plus row-major
float64 payload; CSV output is provided for small grids.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GridError

_GRID_MAGIC = b"LGGRID1\x00"
_FIELD_MAGIC = b"LGPSGR1\x00"


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform x-grid with its Fourier-conjugate p-grid (d = 1)."""

    n: int
    x0: float
    dx: float
    hbar: float

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise GridError("grid size must be even and >= 2")
        if self.dx <= 0 or self.hbar <= 0:
            raise GridError("dx and hbar must be positive")

    @classmethod
    def from_extent(cls, xmin, xmax, n, hbar):
        return cls(n=n, x0=float(xmin), dx=(float(xmax) - float(xmin)) / n, hbar=hbar)

    @property
    def dp(self):
        return 2.0 * np.pi * self.hbar / (self.n * self.dx)

    @property
    def p0(self):
        return -0.5 * self.n * self.dp

    def x(self):
        return self.x0 + self.dx * np.arange(self.n)

    def p(self):
        return self.p0 + self.dp * np.arange(self.n)

    def points(self):
        """(nx, np, 2) array of (x, p) pairs."""
        xx, pp = np.meshgrid(self.x(), self.p(), indexing="ij")
        return np.stack([xx, pp], axis=-1)

    @property
    def cell(self):
        return self.dx * self.dp

    def same_as(self, other):
        return (
            self.n == other.n
            and abs(self.x0 - other.x0) < 1e-12
            and abs(self.dx - other.dx) < 1e-12
            and abs(self.hbar - other.hbar) < 1e-15
        )


@dataclass(frozen=True)
class GridState:
    """Density matrix sampled on a position grid: rho[i, j] = <x_i|rho|x_j> dx."""

    grid: PhaseSpaceGrid
    rho: np.ndarray
    hbar: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.grid.n, self.grid.n):
            raise DimensionError("rho must be (n, n) for the grid")
        object.__setattr__(self, "rho", rho)

    def trace(self):
        return complex(np.trace(self.rho))

    def hermiticity_defect(self):
        return float(np.linalg.norm(self.rho - self.rho.conj().T))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2.0).min())

    def purity(self):
        return float(np.real(np.trace(self.rho @ self.rho)))

    def validate(self, tol_herm=1e-10, tol_trace=1e-8, eig_floor=-1e-6):
        if self.hermiticity_defect() > tol_herm:
            raise GridError("state is not Hermitian within tolerance")
        if abs(self.trace() - 1.0) > tol_trace:
            raise GridError(f"trace {self.trace():.9f} deviates from 1")
        if self.min_eigenvalue() < eig_floor:
            raise GridError(f"minimum eigenvalue {self.min_eigenvalue():.3e} below floor")
        return self


@dataclass(frozen=True)
class PhaseSpaceField:
    """Real or complex field sampled on a PhaseSpaceGrid (values[ix, ip])."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n, self.grid.n):
            raise DimensionError("values must be (n, n) for the grid")
        object.__setattr__(self, "values", values)

    def integral(self):
        return self.values.sum() * self.grid.cell


# -- binary containers -------------------------------------------------------


def save_grid_state(state, path):
    header = struct.pack(
        "<8sqddd", _GRID_MAGIC, state.grid.n, state.grid.x0, state.grid.dx, state.hbar
    )
    payload = np.ascontiguousarray(state.rho, dtype=np.complex128).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_grid_state(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, x0, dx, hbar = struct.unpack_from("<8sqddd", raw)
    if magic != _GRID_MAGIC:
        raise GridError("not a grid-state container")
    offset = struct.calcsize("<8sqddd")
    rho = np.frombuffer(raw, dtype=np.complex128, offset=offset).reshape(n, n)
    grid = PhaseSpaceGrid(n=n, x0=x0, dx=dx, hbar=hbar)
    return GridState(grid=grid, rho=rho.copy(), hbar=hbar)


def save_field(field, path):
    values = np.asarray(field.values)
    iscomplex = 1 if np.iscomplexobj(values) else 0
    header = struct.pack(
        "<8sqdddq",
        _FIELD_MAGIC,
        field.grid.n,
        field.grid.x0,
        field.grid.dx,
        field.grid.hbar,
        iscomplex,
    )
    dtype = np.complex128 if iscomplex else np.float64
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values, dtype=dtype).tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, n, x0, dx, hbar, iscomplex = struct.unpack_from("<8sqdddq", raw)
    if magic != _FIELD_MAGIC:
        raise GridError("not a phase-space field container")
    offset = struct.calcsize("<8sqdddq")
    dtype = np.complex128 if iscomplex else np.float64
    values = np.frombuffer(raw, dtype=dtype, offset=offset).reshape(n, n)
    grid = PhaseSpaceGrid(n=n, x0=x0, dx=dx, hbar=hbar)
    return PhaseSpaceField(grid=grid, values=values.copy())


def field_to_csv(field, path):
    """CSV for small grids: header comments then x, p, re, im rows."""
    grid = field.grid
    values = np.asarray(field.values)
    with open(path, "w") as fh:
        fh.write(f"# lindgauss phase-space field n={grid.n} x0={grid.x0!r} ")
        fh.write(f"dx={grid.dx!r} hbar={grid.hbar!r}\n")
        fh.write("x,p,re,im\n")
        xs, ps = grid.x(), grid.p()
        for i in range(grid.n):
            for j in range(grid.n):
                v = complex(values[i, j])
                fh.write(f"{xs[i]!r},{ps[j]!r},{v.real!r},{v.imag!r}\n")


def grid_state_to_csv(state, path):
    """CSV for small grids: row index, column index, re, im of the matrix."""
    grid = state.grid
    with open(path, "w") as fh:
        fh.write(f"# lindgauss grid state n={grid.n} x0={grid.x0!r} ")
        fh.write(f"dx={grid.dx!r} hbar={state.hbar!r}\n")
        fh.write("i,j,re,im\n")
        for i in range(grid.n):
            for j in range(grid.n):
                v = state.rho[i, j]
                fh.write(f"{i},{j},{v.real!r},{v.imag!r}\n")
