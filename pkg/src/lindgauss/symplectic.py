"""Symplectic linear algebra and Gaussian phase-space states.

Conventions: phase-space vectors are ordered (x_1..x_d, p_1..p_d) and
indices are raised/lowered with the symplectic form omega = [[0, I], [-I, 0]],
so for a scalar field E the symplectic gradient is omega @ grad(E).
Covariance matrices carry units of action; a pure state has
sigma_bar = sigma/(hbar/2) symplectic (all Williamson eigenvalues 1).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidCovarianceError, MomentOrderError

TOL_SYM = 1e-10
TOL_SYMP = 1e-8


def symplectic_form(d):
    """Standard symplectic form omega = [[0, I_d], [-I_d, 0]]."""
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    omega = np.zeros((2 * d, 2 * d))
    omega[:d, d:] = np.eye(d)
    omega[d:, :d] = -np.eye(d)
    return omega


def _check_even_square(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
        raise DimensionError(f"expected an even-dimensional square matrix, got shape {m.shape}")
    return m


def hamiltonian_skew_split(m):
    """Split a matrix into Hamiltonian and skew-Hamiltonian parts.

    M = H + S with H*omega symmetric and S*omega antisymmetric; the split
    is unique and the recomposition is exact by construction.
    """
    m = _check_even_square(m)
    d = m.shape[0] // 2
    omega = symplectic_form(d)
    conj = omega.T @ m.T @ omega
    ham = (m - conj) / 2.0
    skew = (m + conj) / 2.0
    return ham, skew


def symmetrize(a):
    """Re-symmetrize a (nearly) symmetric matrix; also works on batches."""
    a = np.asarray(a)
    return (a + np.swapaxes(a, -1, -2)) / 2.0


def williamson_eigenvalues(sigma, hbar):
    """Symplectic (Williamson) eigenvalues of sigma/(hbar/2), ascending.

    Computed as the moduli of the eigenvalues of i*omega*sigma_bar, which
    come in +/- pairs; one representative per pair is returned.  A valid
    quantum covariance has all values >= 1; a pure state has all equal 1.
    """
    sigma = _check_even_square(np.asarray(sigma, dtype=float))
    d = sigma.shape[0] // 2
    if np.linalg.eigvalsh(sigma).min() <= 0:
        raise InvalidCovarianceError("covariance must be positive definite")
    sigma_bar = sigma / (hbar / 2.0)
    ev = np.linalg.eigvals(symplectic_form(d) @ sigma_bar)
    nu = np.sort(np.abs(ev))
    # eigenvalues are (+/- i nu_k); adjacent after sorting moduli
    return (nu[::2] + nu[1::2]) / 2.0


def check_covariance(sigma, hbar=None, pure=False, tol_sym=TOL_SYM, tol_symp=TOL_SYMP):
    """Validate a covariance matrix, raising InvalidCovarianceError on failure.

    With pure=True (requires hbar) additionally checks that sigma/(hbar/2)
    is symplectic within tol_symp.
    """
    sigma = _check_even_square(np.asarray(sigma, dtype=float))
    scale = np.linalg.norm(sigma)
    if np.linalg.norm(sigma - sigma.T) > tol_sym * max(scale, 1e-300):
        raise InvalidCovarianceError("covariance is not symmetric within tolerance")
    if np.linalg.eigvalsh(symmetrize(sigma)).min() <= 0:
        raise InvalidCovarianceError("covariance is not positive definite")
    if pure:
        if hbar is None:
            raise InvalidCovarianceError("purity check requires hbar")
        d = sigma.shape[0] // 2
        omega = symplectic_form(d)
        sigma_bar = sigma / (hbar / 2.0)
        defect = np.linalg.norm(sigma_bar @ omega @ sigma_bar - omega)
        if defect > tol_symp * max(1.0, np.linalg.norm(sigma_bar) ** 2):
            raise InvalidCovarianceError(
                f"sigma/(hbar/2) is not symplectic (defect {defect:.3e})"
            )
    return sigma


def symplectic_defect(sigma, hbar):
    """Frobenius norm of sigma_bar @ omega @ sigma_bar - omega."""
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[-1] // 2
    omega = symplectic_form(d)
    sigma_bar = sigma / (hbar / 2.0)
    return np.linalg.norm(sigma_bar @ omega @ sigma_bar - omega, axis=(-2, -1))


def project_pure(sigma_bar):
    """Project a near-pure scaled covariance back onto the symplectic manifold.

    d = 1: rescale by det^{-1/2} (exact, since sigma_bar @ omega @ sigma_bar
    = det(sigma_bar) * omega for symmetric 2x2).  d > 1: iterate
    sigma_bar <- (sigma_bar + omega^T sigma_bar^{-1} omega)/2, which drives
    every Williamson eigenvalue nu -> (nu + 1/nu)/2 -> 1 while keeping the
    symplectic eigenbasis fixed.  Batched over leading axes.
    """
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    n2 = sigma_bar.shape[-1]
    if n2 == 2:
        det = sigma_bar[..., 0, 0] * sigma_bar[..., 1, 1] - sigma_bar[..., 0, 1] * sigma_bar[..., 1, 0]
        return sigma_bar / np.sqrt(det)[..., None, None]
    omega = symplectic_form(n2 // 2)
    out = sigma_bar
    for _ in range(4):
        out = symmetrize((out + omega.T @ np.linalg.inv(out) @ omega) / 2.0)
    return out


@dataclass(frozen=True)
class GaussianState:
    """Weighted Gaussian phase-space state (mean alpha, covariance sigma)."""

    mean: np.ndarray
    cov: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size % 2 != 0:
            raise DimensionError(f"mean must be a vector of even length, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if self.weight < 0:
            raise InvalidCovarianceError("weight must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.size // 2


def gaussian_density(state, beta):
    """Normalized Gaussian density of `state` at phase-space point(s) beta.

    beta may have shape (2d,) or (..., 2d); the state's weight is not
    applied (mixtures weight the sum themselves).
    """
    beta = np.asarray(beta, dtype=float)
    n2 = state.mean.size
    if beta.shape[-1] != n2:
        raise DimensionError(f"beta last axis {beta.shape[-1]} != 2d = {n2}")
    cov = check_covariance(state.cov)
    d = n2 // 2
    delta = beta - state.mean
    sol = np.linalg.solve(cov, delta[..., None])[..., 0]
    quad = np.einsum("...a,...a->...", delta, sol)
    norm = (2.0 * np.pi) ** d * np.sqrt(np.linalg.det(cov))
    return np.exp(-quad / 2.0) / norm


def gaussian_convolve(s1, s2):
    """Convolution of two Gaussians: means add, covariances add, weights multiply."""
    if s1.mean.size != s2.mean.size:
        raise DimensionError("states live in different phase-space dimensions")
    return GaussianState(s1.mean + s2.mean, s1.cov + s2.cov, s1.weight * s2.weight)


def gaussian_quadratic_moments(sigma, mats):
    """Centered Gaussian expectation of a product of quadratic forms.

    Returns E[prod_j beta^T A_j beta] for beta ~ N(0, sigma) using the
    closed trace expansions (up to four factors):

        E[(b'Ab)]             = tr(sA)
        E[(b'Ab)(b'Bb)]       = tr(sA)tr(sB) + 2 tr(sAsB)
        6th and 8th order     = the corresponding Isserlis expansions.
    """
    sigma = np.asarray(sigma, dtype=float)
    mats = [symmetrize(np.asarray(m, dtype=float)) for m in mats]
    if not 1 <= len(mats) <= 4:
        raise MomentOrderError(f"supported: 1..4 quadratic factors, got {len(mats)}")
    s = sigma

    def t(*ms):
        prod = np.eye(s.shape[0])
        for m in ms:
            prod = prod @ s @ m
        return float(np.trace(prod))

    if len(mats) == 1:
        (a,) = mats
        return t(a)
    if len(mats) == 2:
        a, b = mats
        return t(a) * t(b) + 2.0 * t(a, b)
    if len(mats) == 3:
        a, b, c = mats
        return (
            t(a) * t(b) * t(c)
            + 2.0 * (t(a) * t(b, c) + t(b) * t(c, a) + t(c) * t(a, b))
            + 8.0 * t(a, b, c)
        )
    a, b, c, dd = mats
    singles = t(a) * t(b) * t(c) * t(dd)
    pair_single = 2.0 * (
        t(a) * t(b) * t(c, dd)
        + t(a) * t(dd) * t(b, c)
        + t(c) * t(dd) * t(a, b)
        + t(a) * t(c) * t(b, dd)
        + t(b) * t(dd) * t(a, c)
        + t(b) * t(c) * t(a, dd)
    )
    pair_pair = 4.0 * (t(a, b) * t(c, dd) + t(a, c) * t(b, dd) + t(a, dd) * t(b, c))
    triple = 8.0 * (
        t(a, b, c) * t(dd) + t(a, b, dd) * t(c) + t(a, c, dd) * t(b) + t(b, c, dd) * t(a)
    )
    quad = 16.0 * (t(a, b, c, dd) + t(a, c, b, dd) + t(a, b, dd, c))
    return singles + pair_single + pair_pair + triple + quad
