"""Ground-truth integrators: dense Lindblad on a grid and Langevin clouds.

The quantum reference quantizes symbols with the symmetric-ordering kernel
M[i, j] = dp/(2 pi hbar) sum_k E((x_i+x_j)/2, p_k) exp(i (x_i-x_j) p_k/hbar)
and integrates the master equation with RK4.  The classical reference is an
Euler-Maruyama (or Stratonovich-Heun) point cloud for the transport-
diffusion dynamics with mean drift u + div(D)/2.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, GridError, LindgaussError, SolverError
from .grids import GridState, PhaseSpaceField, PhaseSpaceGrid


# -- Weyl quantization and Wigner transform ----------------------------------


def _is_periodic_symbol(symbol):
    from .symbols import CosineSymbol, PolynomialSymbol, ScaledSymbol, SumSymbol

    if isinstance(symbol, (PolynomialSymbol, CosineSymbol)):
        return True
    if isinstance(symbol, ScaledSymbol):
        return _is_periodic_symbol(symbol.base)
    if isinstance(symbol, SumSymbol):
        return all(_is_periodic_symbol(p) for p in symbol.parts)
    return False


def weyl_quantize(symbol, grid, periodic=None):
    """Matrix of the symmetric-ordered operator for `symbol` on the grid.

    M[i, j] = dx dp/(2 pi hbar) sum_k E((x_i+x_j)/2, p_k) e^{i (x_i-x_j) p_k/hbar}.

    periodic=True sums over the conjugate p-grid, identifying kernel
    separations modulo N dx: polynomial symbols then become the exact
    periodic spectral matrices (e.g. p -> the spectral derivative).
    periodic=False sums over a half-step p-grid so every signed separation
    |i-j| < N is alias-free, which phase-space-localized symbols need.
    Default: periodic for polynomial/cosine symbols, line mode otherwise.
    Symbols with momentum content near the Nyquist edge alias either way
    (check with `aliasing_fraction`).
    """
    if periodic is None:
        periodic = _is_periodic_symbol(symbol)
    n = grid.n
    x = grid.x()
    # midpoints (x_i + x_j)/2 run over a half-step grid of 2n-1 values
    mids = (x[0] + x[-1]) / 2.0 + (np.arange(2 * n - 1) - (n - 1)) * (grid.dx / 2.0)
    if periodic:
        p = grid.p()
        dp_eff = grid.dp
    else:
        p = grid.p0 + (grid.dp / 2.0) * np.arange(2 * n)
        dp_eff = grid.dp / 2.0
    pts = np.stack([np.repeat(mids, p.size), np.tile(p, mids.size)], axis=-1)
    vals = np.asarray(symbol.value(pts), dtype=complex).reshape(mids.size, p.size)
    # sum_k vals[s, k] exp(i m dx p_k/hbar) = phase0(m) * DFT_m[vals]
    # since dx dp_eff/hbar = 2 pi / p.size in both modes
    fk = np.fft.ifft(vals, axis=1) * p.size  # sum_k vals exp(+2 pi i m k/p.size)
    i_idx = np.arange(n)[:, None]
    j_idx = np.arange(n)[None, :]
    s = i_idx + j_idx
    m_signed = i_idx - j_idx
    m_wrapped = m_signed % p.size
    phase0 = np.exp(1j * m_signed * grid.dx * p[0] / grid.hbar)
    mat = fk[s, m_wrapped] * phase0
    return mat * (dp_eff / (2.0 * np.pi * grid.hbar)) * grid.dx


def aliasing_fraction(symbol, grid):
    """Fraction of the symbol's p-spectrum mass in the outer quarter bands."""
    pts = grid.points().reshape(-1, 2)
    vals = np.asarray(symbol.value(pts)).reshape(grid.n, grid.n)
    spec = np.abs(np.fft.fft(vals, axis=1))
    edge = spec[:, grid.n // 4 : 3 * grid.n // 4].sum()
    total = spec.sum()
    return float(edge / total) if total > 0 else 0.0


def wigner_transform(state):
    """Wigner function of a GridState on the full conjugate grid.

    The kernel is spectrally upsampled to half-step resolution so offsets
    y = m dx can straddle grid points; output is real (imaginary residue is
    discarded after a magnitude check) and integrates to trace(rho).
    """
    grid = state.grid
    n = grid.n
    kernel = state.rho / grid.dx  # back to kernel values K(x_i, x_j)
    up = _spectral_upsample2(kernel)  # (2n, 2n) on half-step grid
    # W[i, j] = (2 pi hbar)^{-1} sum_m K(x_i + m dx/2 ... ) with y = m dx;
    # the offset range is kept symmetric so Hermitian kernels give real W
    m = np.arange(-n // 2 + 1, n // 2)
    ii = np.arange(n)
    # indices into the upsampled kernel: row 2i + m, col 2i - m (half steps)
    rows = 2 * ii[:, None] + m[None, :]
    cols = 2 * ii[:, None] - m[None, :]
    valid = (rows >= 0) & (rows < 2 * n) & (cols >= 0) & (cols < 2 * n)
    samples = np.zeros((n, m.size), dtype=complex)
    samples[valid] = up[rows[valid], cols[valid]]
    p = grid.p()
    phase = np.exp(-1j * np.outer(m * grid.dx, p) / grid.hbar)  # (n_m, n_p)
    w = samples @ phase  # (n_x, n_p)
    w *= grid.dx / (2.0 * np.pi * grid.hbar)
    resid = float(np.max(np.abs(w.imag)))
    scale = float(np.max(np.abs(w.real))) or 1.0
    if resid > 1e-6 * scale:
        # Hermitian states give real Wigner functions; a large residue means
        # the state itself is far from Hermitian.
        raise GridError(f"Wigner imaginary residue {resid:.3e} too large")
    return PhaseSpaceField(grid=grid, values=w.real)


def _spectral_upsample2(a):
    """Zero-padded FFT interpolation of a 2-D array onto a 2x finer grid.

    The Nyquist band is split across +/- bins so Hermitian inputs stay
    Hermitian after interpolation.
    """
    n = a.shape[0]
    fa = np.fft.fftshift(np.fft.fft2(a))
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    lo = n - n // 2
    padded[lo : lo + n, lo : lo + n] = fa
    padded[lo, :] *= 0.5
    padded[lo + n, :] = padded[lo, :]
    padded[:, lo] *= 0.5
    padded[:, lo + n] = padded[:, lo]
    return np.fft.ifft2(np.fft.ifftshift(padded)) * 4.0


def coherent_grid_state(mean, cov, hbar, grid):
    """GridState of a single pure Gaussian (for tests and initial data)."""
    from .mixture import pure_gaussian_wavefunction

    psi = pure_gaussian_wavefunction(np.asarray(mean, float), np.asarray(cov, float), hbar, grid.x())
    rho = np.outer(psi, psi.conj()) * grid.dx
    return GridState(grid=grid, rho=rho, hbar=hbar)


# -- dense Lindblad integration ----------------------------------------------


class _Op:
    """Grid operator stored dense or, when possible, as a diagonal."""

    def __init__(self, mat):
        diag = np.diag(mat).copy()
        off = mat - np.diag(diag)
        if np.max(np.abs(off)) < 1e-13 * max(1.0, np.max(np.abs(diag))):
            self.diag = diag
            self.mat = None
        else:
            self.diag = None
            self.mat = mat

    def dense(self):
        return np.diag(self.diag) if self.mat is None else self.mat

    def left(self, rho):
        if self.mat is None:
            return self.diag[:, None] * rho
        return self.mat @ rho

    def right(self, rho):
        if self.mat is None:
            return rho * self.diag[None, :]
        return rho @ self.mat

    def right_dagger(self, rho):
        if self.mat is None:
            return rho * np.conj(self.diag)[None, :]
        return rho @ self.mat.conj().T

    def dagger_self(self):
        """L^dagger L as an _Op."""
        if self.mat is None:
            return _Op(np.diag(np.abs(self.diag) ** 2))
        return _Op(self.mat.conj().T @ self.mat)


@dataclass(frozen=True)
class QuantizedModel:
    """Pre-quantized operators for one model on one grid."""

    grid: PhaseSpaceGrid
    h_op: object
    l_ops: tuple
    ll_ops: tuple
    hbar: float
    symbol_range: float

    @property
    def h_mat(self):
        return self.h_op.dense()

    @property
    def l_mats(self):
        return tuple(op.dense() for op in self.l_ops)

    @classmethod
    def build(cls, model, grid):
        h_mat = weyl_quantize(model.hamiltonian, grid)
        h_mat = (h_mat + h_mat.conj().T) / 2.0
        l_ops = tuple(_Op(weyl_quantize(lk, grid)) for lk in model.lindblads)
        ll_ops = tuple(op.dagger_self() for op in l_ops)
        # sampled symbol ranges drive the step-size bound
        pts = grid.points().reshape(-1, 2)
        h_vals = np.real(model.hamiltonian.value(pts))
        srange = float(h_vals.max() - h_vals.min())
        for lk in model.lindblads:
            srange += float(np.max(np.abs(lk.value(pts)) ** 2))
        return cls(
            grid=grid,
            h_op=_Op(h_mat),
            l_ops=l_ops,
            ll_ops=ll_ops,
            hbar=model.hbar,
            symbol_range=srange,
        )

    def generator_radius(self):
        """Spectral-radius estimate from the sampled symbol ranges.

        Semiclassically the commutator spectrum spans (Emax - Emin)/hbar and
        the dissipator adds max|L|^2/hbar per channel.
        """
        return self.symbol_range / self.hbar


def lindblad_rhs(rho, ops):
    hbar = ops.hbar
    out = (-1j / hbar) * (ops.h_op.left(rho) - ops.h_op.right(rho))
    for l_op, ll_op in zip(ops.l_ops, ops.ll_ops):
        lrho = l_op.left(rho)
        out += l_op.right_dagger(lrho) / hbar
        out -= 0.5 * (ll_op.left(rho) + ll_op.right(rho)) / hbar
    return out


def lindblad_step(state, ops, dt, max_trace_drift=1e-6):
    """One RK4 step of the master equation; Hermiticity re-enforced and
    trace renormalized (drift beyond max_trace_drift raises SolverError)."""
    rho = state.rho
    k1 = lindblad_rhs(rho, ops)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, ops)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, ops)
    k4 = lindblad_rhs(rho + dt * k3, ops)
    new = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    new = (new + new.conj().T) / 2.0
    tr = np.trace(new).real
    drift = abs(tr - np.trace(rho).real)
    if drift > max_trace_drift:
        raise SolverError(
            f"trace drift {drift:.3e} in one step; reduce dt (currently {dt:.3e})"
        )
    new = new / tr
    return replace(state, rho=new), drift


def lindblad_evolve(state, ops, t_final, dt=None, t_start=0.0):
    """Integrate to t_final; returns (state, total logged trace drift).

    A step whose trace drift trips the per-step bound is discarded and the
    step size is backed off (deterministically), so a slightly optimistic
    stability estimate self-corrects instead of aborting.
    """
    if dt is None:
        dt = default_quantum_dt(ops)
    t = t_start
    total_drift = 0.0
    backoffs = 0
    while t < t_final - 1e-12 * max(1.0, abs(t_final)):
        h = min(dt, t_final - t)
        try:
            state, drift = lindblad_step(state, ops, h)
        except SolverError:
            backoffs += 1
            if backoffs > 8:
                raise
            dt *= 0.6
            continue
        total_drift += drift
        t += h
    return state, total_drift


def default_quantum_dt(ops):
    """RK4 stability-limited step from the sampled generator radius."""
    radius = ops.generator_radius()
    if radius <= 0:
        return 1e-2
    return 2.2 / radius


def grid_observable_matrices(observables, grid):
    return {name: weyl_quantize(sym, grid) for name, sym in observables.items()}


def quantum_expectation(state, obs_matrix):
    return float(np.real(np.trace(state.rho @ obs_matrix)))


# -- classical Langevin cloud ------------------------------------------------


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Unweighted phase-space point cloud."""

    points: np.ndarray  # (n, 2d)
    time: float = 0.0
    rng_seed: int = 0
    step_counter: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] % 2 != 0:
            raise DimensionError("points must be (n, 2d)")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self):
        return self.points.shape[0]


def classical_ensemble_gaussian(mean, cov, n, seed=0):
    rng = np.random.default_rng([seed, 0x5EED])
    pts = rng.multivariate_normal(np.asarray(mean, float), np.asarray(cov, float), size=n)
    return ClassicalEnsemble(points=pts, rng_seed=seed)


def _diffusion_roots(model, pts):
    """Batched symmetric square roots of D(alpha) with PSD clipping.

    Constant-diffusion models (all Lindblads linear) reuse one factor.
    """
    if model.has_constant_diffusion:
        return np.broadcast_to(model.constant_diffusion_root, pts.shape + (pts.shape[-1],))
    d_mat = model.diffusion(pts)
    ev, vec = np.linalg.eigh(d_mat)
    if np.any(ev[..., 0] < -1e-10 * np.maximum(ev[..., -1], 1e-300)):
        worst = int(np.argmin(ev[..., 0]))
        raise SolverError(f"diffusion matrix not PSD at point {worst}")
    root = vec * np.sqrt(np.clip(ev, 0.0, None))[..., None, :]
    return root @ np.swapaxes(vec, -1, -2)


def langevin_step(ensemble, model, dt, scheme="ito"):
    """One step of the classical SDE cloud.

    "ito": Euler-Maruyama with the mean drift u + div(D)/2 (the spurious
    drift vanishes for constant D).  "stratonovich": Heun midpoint noise
    with the deterministic drift u; both target the same transport-diffusion
    dynamics.
    """
    if dt <= 0:
        raise LindgaussError("dt must be positive")
    pts = ensemble.points
    rng = np.random.default_rng([ensemble.rng_seed, 0x1A2B, ensemble.step_counter])
    z = rng.standard_normal(pts.shape)
    if scheme == "ito":
        # for constant D the spurious drift vanishes and mean drift = u
        drift = model.drift(pts) if model.has_constant_diffusion else model.mean_drift(pts)
        root = _diffusion_roots(model, pts)
        noise = np.sqrt(dt) * np.einsum("nab,nb->na", root, z)
        new = pts + drift * dt + noise
    elif scheme == "stratonovich":
        drift = model.drift(pts)
        root = _diffusion_roots(model, pts)
        noise = np.sqrt(dt) * np.einsum("nab,nb->na", root, z)
        pred = pts + drift * dt + noise
        root_mid = 0.5 * (root + _diffusion_roots(model, pred))
        drift_mid = 0.5 * (drift + model.drift(pred))
        new = pts + drift_mid * dt + np.sqrt(dt) * np.einsum(
            "nab,nb->na", root_mid, z
        )
    else:
        raise LindgaussError(f"unknown scheme {scheme!r}")
    return replace(
        ensemble, points=new, time=ensemble.time + dt, step_counter=ensemble.step_counter + 1
    )


def langevin_evolve(ensemble, model, t_final, dt, scheme="ito"):
    out = ensemble
    while out.time < t_final - 1e-12 * max(1.0, abs(t_final)):
        h = min(dt, t_final - out.time)
        out = langevin_step(out, model, h, scheme=scheme)
    return out


@dataclass(frozen=True)
class SpectralClassical:
    """Deterministic transport-diffusion integrator on a phase-space grid.

    Strang splitting: an exact k-space half-step for the (constant)
    diffusion wraps an RK4 advection step computed with spectral
    derivatives.  Used where Monte-Carlo noise would swamp a measurement;
    the Langevin cloud remains the stochastic reference.
    """

    grid: PhaseSpaceGrid
    u_field: np.ndarray  # (n, n, 2) drift at the nodes
    kx: np.ndarray
    kp: np.ndarray
    kk: np.ndarray  # D contracted with k outer k
    dt: float

    @classmethod
    def build(cls, model, grid, dt=None, safety=0.7):
        if not model.has_constant_diffusion:
            raise SolverError("spectral classical solver requires constant diffusion")
        pts = grid.points().reshape(-1, 2)
        u = model.drift(pts).reshape(grid.n, grid.n, 2)
        kx = 2.0 * np.pi * np.fft.fftfreq(grid.n, grid.dx)
        kp = 2.0 * np.pi * np.fft.fftfreq(grid.n, grid.dp)
        if dt is None:
            rate = float(np.max(np.abs(u[..., 0]))) * np.abs(kx).max()
            rate += float(np.max(np.abs(u[..., 1]))) * np.abs(kp).max()
            dt = safety * 2.8 / max(rate, 1e-12)
        d_mat = model.diffusion(pts[:1])[0]
        kk = (
            d_mat[0, 0] * kx[:, None] ** 2
            + 2.0 * d_mat[0, 1] * kx[:, None] * kp[None, :]
            + d_mat[1, 1] * kp[None, :] ** 2
        )
        return cls(grid=grid, u_field=u, kx=kx, kp=kp, kk=kk, dt=dt)

    def _advect_rhs(self, f):
        fx = self.u_field[..., 0] * f
        fp = self.u_field[..., 1] * f
        dx = np.fft.ifft(np.fft.fft(fx, axis=0) * (1j * self.kx)[:, None], axis=0)
        dp = np.fft.ifft(np.fft.fft(fp, axis=1) * (1j * self.kp)[None, :], axis=1)
        return -(dx + dp)

    def step(self, f, h):
        half = np.exp(-0.25 * self.kk * h)
        f = np.fft.ifft2(np.fft.fft2(f) * half)
        k1 = self._advect_rhs(f)
        k2 = self._advect_rhs(f + 0.5 * h * k1)
        k3 = self._advect_rhs(f + 0.5 * h * k2)
        k4 = self._advect_rhs(f + h * k3)
        f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return np.fft.ifft2(np.fft.fft2(f) * half)

    def evolve(self, field, t_final, t_start=0.0):
        """Advance a PhaseSpaceField to t_final (final fractional step)."""
        f = np.asarray(field.values, dtype=complex)
        t = t_start
        while t < t_final - 1e-12 * max(1.0, abs(t_final)):
            h = min(self.dt, t_final - t)
            f = self.step(f, h)
            t += h
        return PhaseSpaceField(grid=self.grid, values=np.real(f))


def grid_density_expectation(field, observable):
    """Cell-sum expectation of an observable against a grid density."""
    pts = field.grid.points().reshape(-1, 2)
    vals = np.real(observable.value(pts)).reshape(field.grid.n, field.grid.n)
    mass = float(np.real(np.sum(field.values)) * field.grid.cell)
    mean = float(np.real(np.sum(field.values * vals)) * field.grid.cell)
    if mass <= 0:
        raise SolverError("grid density has nonpositive mass")
    return mean / mass


def initial_gaussian_field(mean, cov, grid):
    """Gaussian phase-space density sampled on the grid."""
    from .symplectic import GaussianState, gaussian_density

    state = GaussianState(np.asarray(mean, float), np.asarray(cov, float))
    vals = gaussian_density(state, grid.points().reshape(-1, 2)).reshape(grid.n, grid.n)
    return PhaseSpaceField(grid=grid, values=vals)


def classical_expectation(ensemble, observable):
    """Monte-Carlo mean with standard error."""
    if ensemble.n_points == 0:
        raise LindgaussError("empty ensemble")
    vals = np.real(observable.value(ensemble.points))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return mean, se


def classical_histogram(ensemble, grid):
    """Cell-count density on the phase-space grid; mass <= 1 is captured."""
    x = ensemble.points[:, 0]
    p = ensemble.points[:, 1]
    x_edges = np.concatenate([grid.x() - grid.dx / 2.0, [grid.x()[-1] + grid.dx / 2.0]])
    p_edges = np.concatenate([grid.p() - grid.dp / 2.0, [grid.p()[-1] + grid.dp / 2.0]])
    counts, _, _ = np.histogram2d(x, p, bins=[x_edges, p_edges])
    density = counts / (ensemble.n_points * grid.cell)
    return PhaseSpaceField(grid=grid, values=density)


def smoothed_histogram(ensemble, grid, bandwidth=None):
    """Gaussian-kernel smoothed cloud density (bandwidth defaults to one cell)."""
    field = classical_histogram(ensemble, grid)
    if bandwidth is None:
        bandwidth = max(grid.dx, grid.dp)
    kx = np.fft.fftfreq(grid.n, grid.dx) * 2.0 * np.pi
    kp = np.fft.fftfreq(grid.n, grid.dp) * 2.0 * np.pi
    damp = np.exp(-0.5 * bandwidth**2 * (kx[:, None] ** 2 + kp[None, :] ** 2))
    sm = np.fft.ifft2(np.fft.fft2(field.values) * damp).real
    return PhaseSpaceField(grid=grid, values=sm)
