"""Weighted Gaussian-particle realization of the quasiclassical mixture.

Each particle is a pure Gaussian state (mean, covariance, fixed weight).
One step: build the local harmonic data at the particle mean, split the
covariance flow, advance the covariance with the purity-preserving part
(with symplectic re-projection) and realize the diffusive part as Gaussian
noise on the mean (Euler-Maruyama).  Weights never change.

Noise is drawn from a counter-based stream keyed by (seed, step index), so
runs are reproducible bit-for-bit and particle updates could be evaluated
in parallel without changing the result.
"""

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, LindgaussError, NonPsdDiffusionError, NtsConstraintError
from .harmonic import default_lambda_star, nts_split_batch
from .symplectic import (
    GaussianState,
    check_covariance,
    gaussian_density,
    project_pure,
    symmetrize,
    symplectic_defect,
)

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class StepStats:
    """Per-step diagnostics: NTS ratio floor, covariance norms, purity defect."""

    times: np.ndarray
    min_nts_ratio: np.ndarray   # min over particles of lambda_min[sigma]/(hbar/2)
    max_cov_norm: np.ndarray
    max_symplectic_defect: np.ndarray

    @staticmethod
    def empty():
        z = np.zeros(0)
        return StepStats(z, z, z, z)

    def extended(self, t, ratio, norm, defect):
        return StepStats(
            np.append(self.times, t),
            np.append(self.min_nts_ratio, ratio),
            np.append(self.max_cov_norm, norm),
            np.append(self.max_symplectic_defect, defect),
        )


@dataclass(frozen=True)
class ParticleEnsemble:
    """Immutable snapshot of the mixture: one Gaussian per row."""

    means: np.ndarray      # (n, 2d)
    covs: np.ndarray       # (n, 2d, 2d)
    weights: np.ndarray    # (n,)
    hbar: float
    time: float = 0.0
    rng_seed: int = 0
    step_counter: int = 0
    stats: StepStats = None

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        n = means.shape[0]
        if covs.shape[0] != n or weights.shape != (n,):
            raise DimensionError("means/covs/weights row counts differ")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise LindgaussError(f"weights must sum to 1 (got {weights.sum():.15f})")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "weights", weights)
        if self.stats is None:
            object.__setattr__(self, "stats", StepStats.empty())

    @property
    def n_particles(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1] // 2

    def states(self):
        return [
            GaussianState(self.means[i], self.covs[i], self.weights[i])
            for i in range(self.n_particles)
        ]

    def nts_ratio(self):
        """min over particles of lambda_min[sigma]/(hbar/2)."""
        lmin = np.linalg.eigvalsh(self.covs)[:, 0]
        return float(np.min(lmin) / (self.hbar / 2.0))


def ensemble_single(mean, cov, hbar, seed=0):
    """One-particle ensemble from an explicit Gaussian."""
    check_covariance(cov, hbar=hbar, pure=True)
    return ParticleEnsemble(
        means=np.asarray(mean, float)[None, :],
        covs=np.asarray(cov, float)[None, :, :],
        weights=np.array([1.0]),
        hbar=hbar,
        rng_seed=seed,
    )


def ensemble_from_states(states, hbar, seed=0):
    """Ensemble from explicit GaussianStates; weights are normalized."""
    w = np.array([s.weight for s in states], dtype=float)
    if w.sum() <= 0:
        raise LindgaussError("total weight must be positive")
    for s in states:
        check_covariance(s.cov, hbar=hbar, pure=True)
    return ParticleEnsemble(
        means=np.stack([s.mean for s in states]),
        covs=np.stack([s.cov for s in states]),
        weights=w / w.sum(),
        hbar=hbar,
        rng_seed=seed,
    )


def ensemble_sampled(mean, center_cov, particle_cov, n, hbar, seed=0):
    """Equal-weight particles with centers drawn from N(mean, center_cov).

    Represents a Gaussian mixture state with total covariance
    center_cov + particle_cov.
    """
    check_covariance(particle_cov, hbar=hbar, pure=True)
    rng = np.random.default_rng([seed, 0xC0FFEE])
    mean = np.asarray(mean, dtype=float)
    centers = rng.multivariate_normal(mean, np.asarray(center_cov, float), size=n)
    nn = centers.shape[0]
    return ParticleEnsemble(
        means=centers,
        covs=np.broadcast_to(np.asarray(particle_cov, float), (nn,) + particle_cov.shape).copy(),
        weights=np.full(nn, 1.0 / nn),
        hbar=hbar,
        rng_seed=seed,
    )


def _local_fields(model, pts):
    """Batched local harmonic data: u, h_ham, f_skew, Omega at each point."""
    u = model.drift(pts)
    a = model.drift_jacobian(pts)
    omega_mat = model.scaled_diffusion(pts)
    # batched Hamiltonian/skew split of the full flow Jacobian
    n2 = pts.shape[-1]
    from .symplectic import symplectic_form

    om = symplectic_form(n2 // 2)
    conj = np.einsum("ab,...cb,cd->...ad", om.T, a, om)
    h_ham = (a - conj) / 2.0
    f_skew = (a + conj) / 2.0
    return u, h_ham, f_skew, omega_mat


def step(ensemble, model, dt, lambda_star=None, frictionless=None):
    """Advance the mixture by one Euler-Maruyama step of size dt."""
    if dt <= 0:
        raise LindgaussError("dt must be positive")
    if lambda_star is None:
        lambda_star = default_lambda_star(model, frictionless=frictionless)
    if frictionless is None:
        frictionless = model.is_frictionless()
    hbar = ensemble.hbar
    pts = ensemble.means
    u, h_ham, f_skew, omega_mat = _local_fields(model, pts)
    s_zero, s_diff, margin = nts_split_batch(
        h_ham, f_skew, omega_mat, ensemble.covs, hbar, lambda_star, frictionless
    )
    if np.any(margin <= 0.0):
        i = int(np.argmin(margin))
        raise NtsConstraintError(
            f"particle {i} violates the squeezing-ratio constraint "
            f"(margin {margin[i]:.3e})",
            particle=i,
            margin=float(margin[i]),
        )
    # diffusive part must be PSD up to round-off; jittered Cholesky
    from .harmonic import sym_eig_bounds

    ev_min, _ = sym_eig_bounds(s_diff)
    total_norm = np.linalg.norm(s_zero + s_diff, axis=(-2, -1))
    bad = ev_min < -1e-10 * np.maximum(total_norm, 1e-300)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonPsdDiffusionError(
            f"diffusive split of particle {i} has eigenvalue {ev_min[i]:.3e}",
            particle=i,
            min_eig=float(ev_min[i]),
        )
    jitter = (
        np.maximum(0.0, -ev_min)
        + 1e-12 * np.trace(s_diff, axis1=-2, axis2=-1)
        + 1e-15 * hbar  # keeps the factorization alive when S_D = 0 exactly
    )
    s_diff_reg = s_diff + jitter[:, None, None] * np.eye(pts.shape[-1])
    chol = np.linalg.cholesky(s_diff_reg)
    rng = np.random.default_rng([ensemble.rng_seed, ensemble.step_counter])
    z = rng.standard_normal(pts.shape)
    noise = np.sqrt(dt) * np.einsum("nab,nb->na", chol, z)
    new_means = pts + u * dt + noise
    new_covs = ensemble.covs + s_zero * dt
    sigma_bar = project_pure(new_covs / (hbar / 2.0))
    new_covs = symmetrize(sigma_bar * (hbar / 2.0))
    lmin, _ = sym_eig_bounds(new_covs)
    stats = ensemble.stats.extended(
        ensemble.time + dt,
        float(np.min(lmin) / (hbar / 2.0)),
        float(np.max(np.linalg.norm(new_covs, axis=(-2, -1)))),
        float(np.max(symplectic_defect(new_covs, hbar))),
    )
    return replace(
        ensemble,
        means=new_means,
        covs=new_covs,
        time=ensemble.time + dt,
        step_counter=ensemble.step_counter + 1,
        stats=stats,
    )


def evolve(ensemble, model, t_final, dt, lambda_star=None, frictionless=None):
    """Repeated steps to t_final, with a final fractional step if needed."""
    if t_final < ensemble.time - 1e-15:
        raise LindgaussError("t_final lies before the ensemble time")
    if lambda_star is None:
        lambda_star = default_lambda_star(model, frictionless=frictionless)
    if frictionless is None:
        frictionless = model.is_frictionless()
    out = ensemble
    while out.time < t_final - 1e-12 * max(1.0, abs(t_final)):
        h = min(dt, t_final - out.time)
        out = step(out, model, h, lambda_star=lambda_star, frictionless=frictionless)
    return out


def default_dt(model, factor=200.0):
    """Default mixture step: t_harm / factor (capped at 0.05 t_harm)."""
    t_harm = model.harmonic_time()
    if not np.isfinite(t_harm):
        t_harm = 1.0
    return min(t_harm / factor, 0.05 * t_harm)


# -- observables -------------------------------------------------------------


def mixture_expectation(ensemble, observable, gh_order=20):
    """sum_i w_i E[obs] under each particle, by Gauss-Hermite quadrature.

    Quadrature runs in the eigenbasis of each covariance; exact for
    polynomial observables of degree <= 2*gh_order - 1.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(gh_order)
    n2 = ensemble.means.shape[1]
    evals, vecs = np.linalg.eigh(ensemble.covs)  # (n, 2d), (n, 2d, 2d)
    grids = np.meshgrid(*([nodes] * n2), indexing="ij")
    tnodes = np.stack([g.ravel() for g in grids], axis=-1)  # (m, 2d)
    wgrids = np.meshgrid(*([weights] * n2), indexing="ij")
    wnodes = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)  # (m,)
    scaled = np.sqrt(2.0 * evals)  # (n, 2d)
    # points (n, m, 2d): mean + V @ (scaled * t)
    offsets = np.einsum("nab,nmb->nma", vecs, tnodes[None, :, :] * scaled[:, None, :])
    pts = ensemble.means[:, None, :] + offsets
    vals = observable.value(pts.reshape(-1, n2)).reshape(pts.shape[:2])
    per_particle = (vals * wnodes[None, :]).sum(axis=1) / np.pi ** (n2 / 2.0)
    out = np.sum(ensemble.weights * per_particle)
    return complex(out) if np.iscomplexobj(vals) else float(np.real(out))


def mixture_moments(ensemble):
    """Ensemble mean vector and total (mix?) second-moment matrix.

    Returns (mean, cov_total) with cov_total = sum w (sigma + delta delta^T),
    the covariance of the represented state about the ensemble mean.
    """
    mean = np.einsum("n,na->a", ensemble.weights, ensemble.means)
    delta = ensemble.means - mean
    cov = np.einsum("n,nab->ab", ensemble.weights, ensemble.covs)
    cov = cov + np.einsum("n,na,nb->ab", ensemble.weights, delta, delta)
    return mean, cov


def mixture_wigner(ensemble, grid):
    """Phase-space density of the mixture on a PhaseSpaceGrid (d = 1).

    Returns the grid values; the captured-mass fraction is reported via the
    grid integral (mass outside the window is simply missing).
    """
    if ensemble.dim != 1:
        raise DimensionError("phase-space grids are 1-D only")
    pts = grid.points()  # (nx, np, 2)
    flat = pts.reshape(-1, 2)
    out = np.zeros(flat.shape[0])
    for i in range(ensemble.n_particles):
        st = GaussianState(ensemble.means[i], ensemble.covs[i])
        out += ensemble.weights[i] * gaussian_density(st, flat)
    return out.reshape(pts.shape[:2])


def pure_gaussian_wavefunction(mean, cov, hbar, xgrid):
    """1-D squeezed-coherent wavefunction with the given phase-space moments.

    psi(x) ~ exp(-(x-xbar)^2 (1 - 2i sigma_xp/hbar)/(4 sigma_xx) + i pbar x/hbar),
    normalized on the grid.
    """
    check_covariance(cov, hbar=hbar, pure=True)
    xbar, pbar = mean
    sxx = cov[0, 0]
    sxp = cov[0, 1]
    x = np.asarray(xgrid, dtype=float)
    psi = np.exp(
        -((x - xbar) ** 2) * (1.0 - 2.0j * sxp / hbar) / (4.0 * sxx)
        + 1j * pbar * x / hbar
    )
    dx = x[1] - x[0]
    norm = np.sqrt(np.sum(np.abs(psi) ** 2) * dx)
    return psi / norm


def mixture_density_matrix(ensemble, grid):
    """Assemble rho = sum w_i |psi_i><psi_i| on a 1-D position grid.

    Returns a GridState whose matrix includes the dx weight so that
    trace = sum of the diagonal.
    """
    from .grids import GridState

    if ensemble.dim != 1:
        raise DimensionError("density-matrix assembly is 1-D only")
    x = grid.x()
    rho = np.zeros((x.size, x.size), dtype=complex)
    for i in range(ensemble.n_particles):
        psi = pure_gaussian_wavefunction(
            ensemble.means[i], ensemble.covs[i], ensemble.hbar, x
        )
        rho += ensemble.weights[i] * np.outer(psi, np.conj(psi))
    rho *= grid.dx
    return GridState(grid=grid, rho=rho, hbar=ensemble.hbar)


# -- serialization -----------------------------------------------------------


def save_ensemble_text(ensemble, path_or_buf):
    """Columnar text snapshot: weight, mean coords, upper-triangular cov."""
    n2 = ensemble.means.shape[1]
    lines = [
        "# lindgauss ensemble v1",
        f"# hbar = {float(ensemble.hbar)!r}",
        f"# time = {float(ensemble.time)!r}",
        f"# seed = {ensemble.rng_seed}",
        f"# step_counter = {ensemble.step_counter}",
        f"# dim = {n2 // 2}",
        "# columns: weight mean[2d] cov_upper_triangular(row-major)",
    ]
    iu = np.triu_indices(n2)
    for i in range(ensemble.n_particles):
        fields = [ensemble.weights[i], *ensemble.means[i], *ensemble.covs[i][iu]]
        lines.append(" ".join(repr(float(v)) for v in fields))
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w") as fh:
            fh.write(text)
    else:
        path_or_buf.write(text)
    return text


def load_ensemble_text(path_or_buf):
    """Read back a snapshot written by save_ensemble_text (lossless)."""
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf) as fh:
            text = fh.read()
    elif isinstance(path_or_buf, io.TextIOBase):
        text = path_or_buf.read()
    else:
        text = str(path_or_buf)
    header = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "=" in line:
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            continue
        rows.append([float(tok) for tok in line.split()])
    d = int(header.get("dim", "1"))
    n2 = 2 * d
    iu = np.triu_indices(n2)
    means = np.zeros((len(rows), n2))
    covs = np.zeros((len(rows), n2, n2))
    weights = np.zeros(len(rows))
    for i, row in enumerate(rows):
        weights[i] = row[0]
        means[i] = row[1 : 1 + n2]
        tri = np.asarray(row[1 + n2 :])
        covs[i][iu] = tri
        covs[i] = covs[i] + covs[i].T - np.diag(np.diag(covs[i]))
    return ParticleEnsemble(
        means=means,
        covs=covs,
        weights=weights,
        hbar=float(header["hbar"]),
        time=float(header.get("time", "0.0")),
        rng_seed=int(header.get("seed", "0")),
        step_counter=int(header.get("step_counter", "0")),
    )
