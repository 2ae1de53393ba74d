"""Local harmonic data and the squeezing-safe covariance-flow split.

At a phase-space point the dynamics reduce to a damped harmonic model:
drift u, flow matrix A = h + F (h = omega grad^2 H Hamiltonian, F = grad G
the friction gradient), and constant diffusion D.  The covariance flow
S(sigma) = A sigma + sigma A^T + D is split into a purity-preserving part
S0 (sigma^{-1} S0 Hamiltonian) and a positive-semidefinite diffusive part
S_D; the split keeps every covariance above the floor (hbar/2) lambda_star
so squeezed Gaussians stay legitimate pure states.

All core routines are batched over a leading particle axis; the public
single-matrix API wraps the batch of one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NtsConstraintError
from .symplectic import hamiltonian_skew_split, symmetrize, symplectic_form


@dataclass(frozen=True)
class LocalHarmonicData:
    """Second-order expansion of the dynamics at a point."""

    center: np.ndarray
    drift: np.ndarray
    hamiltonian_part: np.ndarray   # h = omega grad^2 H at the center
    friction_part: np.ndarray      # F = grad G at the center
    diffusion: np.ndarray          # D at the center
    h_value: float = 0.0           # H(center), for diagnostics
    l_values: tuple = ()           # L_k(center), for diagnostics

    @property
    def flow_matrix(self):
        return self.hamiltonian_part + self.friction_part


@dataclass(frozen=True)
class CovarianceSplit:
    """s_total = s_zero + s_diff with s_diff PSD and s_zero purity-preserving."""

    s_total: np.ndarray
    s_zero: np.ndarray
    s_diff: np.ndarray


def taylor_local(model, alpha):
    """Local harmonic data of the model at phase-space point alpha."""
    alpha = np.asarray(alpha, dtype=float)
    pts = alpha[None, :]
    return LocalHarmonicData(
        center=alpha,
        drift=model.drift(pts)[0],
        hamiltonian_part=model.hessian_flow(pts)[0],
        friction_part=model.friction_gradient(pts)[0],
        diffusion=model.diffusion(pts)[0],
        h_value=float(model.hamiltonian.value(pts)[0].real),
        l_values=tuple(complex(lk.value(pts)[0]) for lk in model.lindblads),
    )


def covariance_rhs(data, sigma):
    """(h+F) sigma + sigma (h+F)^T + D."""
    sigma = np.asarray(sigma, dtype=float)
    a = data.flow_matrix
    if sigma.shape != a.shape:
        raise DimensionError(f"sigma shape {sigma.shape} does not match flow {a.shape}")
    return a @ sigma + sigma @ a.T + data.diffusion


def _batch(x):
    x = np.asarray(x, dtype=float)
    return x[None] if x.ndim == 2 else x


def sym_eig_bounds(mats):
    """(lambda_min, lambda_max) of symmetric matrices, batched.

    Closed form for 2x2 (the hot path); LAPACK otherwise.
    """
    mats = np.asarray(mats)
    if mats.shape[-1] == 2:
        a = mats[..., 0, 0]
        b = mats[..., 0, 1]
        c = mats[..., 1, 1]
        half_tr = (a + c) / 2.0
        rad = np.sqrt(np.maximum(((a - c) / 2.0) ** 2 + b * b, 0.0))
        return half_tr - rad, half_tr + rad
    ev = np.linalg.eigvalsh(mats)
    return ev[..., 0], ev[..., -1]


def spectral_norm(mats):
    """Largest singular value, batched; closed form for 2x2."""
    mats = np.asarray(mats)
    if mats.shape[-1] == 2:
        gram = np.swapaxes(mats, -1, -2) @ mats
        _, top = sym_eig_bounds(gram)
        return np.sqrt(top)
    return np.linalg.norm(mats, ord=2, axis=(-2, -1))


def inv_2x2_or_general(mats):
    mats = np.asarray(mats)
    if mats.shape[-1] == 2:
        a = mats[..., 0, 0]
        b = mats[..., 0, 1]
        c = mats[..., 1, 0]
        d = mats[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(mats)
        out[..., 0, 0] = d
        out[..., 0, 1] = -b
        out[..., 1, 0] = -c
        out[..., 1, 1] = a
        return out / det[..., None, None]
    return np.linalg.inv(mats)


def nts_split_batch(h_ham, f_skew, omega_mat, sigma, hbar, lam, frictionless):
    """Batched covariance-flow split; returns (s_zero, s_diff, margin).

    h_ham: Hamiltonian part of the flow (n, 2d, 2d); f_skew: skew-Hamiltonian
    part; omega_mat: scaled diffusion Omega = D/hbar; sigma: covariances.
    margin is the slack in the squeezing-ratio constraint at each entry
    (positive = admissible).
    """
    h_ham, f_skew, omega_mat, sigma = map(_batch, (h_ham, f_skew, omega_mat, sigma))
    n2 = sigma.shape[-1]
    om = symplectic_form(n2 // 2)
    sigma_bar = sigma / (hbar / 2.0)
    c_omega, norm_omega = sym_eig_bounds(omega_mat)
    norm_h = spectral_norm(h_ham)
    if frictionless:
        margin = c_omega - lam * norm_h
    else:
        margin = c_omega - (2.0 * lam * norm_h + lam * lam * norm_omega)
    sig_inv = inv_2x2_or_general(sigma_bar)
    if frictionless:
        if lam >= 1.0:
            y = np.zeros_like(sigma_bar)
        else:
            y = (c_omega / lam)[..., None, None] * (sig_inv - sigma_bar) / (1.0 / lam - lam)
    else:
        y = 0.5 * (omega_mat @ sig_inv - sigma_bar @ om.T @ omega_mat @ om)
    gen = h_ham + y
    s_zero = symmetrize(gen @ sigma + sigma @ np.swapaxes(gen, -1, -2))
    total = symmetrize(covariance_rhs_batch(h_ham + f_skew, hbar * omega_mat, sigma))
    s_diff = total - s_zero  # bitwise-exact recomposition
    return s_zero, s_diff, margin


def covariance_rhs_batch(flow, diffusion, sigma):
    flow, diffusion, sigma = map(_batch, (flow, diffusion, sigma))
    return flow @ sigma + sigma @ np.swapaxes(flow, -1, -2) + diffusion


def nts_decompose(data, sigma, hbar, lambda_star, frictionless=None):
    """Split the covariance flow at `data` acting on `sigma`.

    The flow matrix h + F is first re-split into Hamiltonian and
    skew-Hamiltonian components (the friction gradient of a nonlinear
    Lindblad carries a Hamiltonian piece that belongs with h).  Requires
    sigma/(hbar/2) symplectic and the squeezing-ratio constraint
    c_Omega > 2 lam |h| + lam^2 |Omega| (with friction) or
    c_Omega > lam |h| (frictionless); violations raise NtsConstraintError
    with the computed margin.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not 0.0 < lambda_star <= 1.0:
        raise NtsConstraintError(f"lambda_star must lie in (0, 1], got {lambda_star}")
    from .symplectic import check_covariance

    check_covariance(sigma, hbar=hbar, pure=True)
    a_total = data.flow_matrix
    h_ham, f_skew = hamiltonian_skew_split(a_total)
    if frictionless is None:
        frictionless = np.linalg.norm(f_skew) < 1e-12 * max(1.0, np.linalg.norm(a_total))
    omega_mat = data.diffusion / hbar
    if frictionless and lambda_star >= 1.0:
        n2 = sigma.shape[-1]
        if np.linalg.norm(sigma / (hbar / 2.0) - np.eye(n2)) > 1e-8:
            raise NtsConstraintError(
                "lambda_star = 1 admits only the unsqueezed covariance (hbar/2) I"
            )
    s_zero, s_diff, margin = nts_split_batch(
        h_ham, f_skew, omega_mat, sigma, hbar, lambda_star, frictionless
    )
    if margin[0] <= 0.0:
        raise NtsConstraintError(
            f"squeezing-ratio constraint violated (margin {margin[0]:.3e})",
            margin=float(margin[0]),
        )
    return CovarianceSplit(
        s_total=s_zero[0] + s_diff[0], s_zero=s_zero[0], s_diff=s_diff[0]
    )


def default_lambda_star(model, frictionless=None):
    """Default squeezing floor: half the relative diffusion strength."""
    return 0.5 * model.relative_diffusion_strength(frictionless=frictionless)
