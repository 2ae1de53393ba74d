import numpy as np
import pytest
from scipy.linalg import expm

from lindgauss.errors import NtsConstraintError
from lindgauss.harmonic import (
    LocalHarmonicData,
    covariance_rhs,
    default_lambda_star,
    nts_decompose,
    nts_split_batch,
    taylor_local,
)
from lindgauss.model import DynamicsModel
from lindgauss.symbols import (
    hamiltonian_harmonic,
    hamiltonian_quartic,
    lindblad_annihilation,
    lindblad_momentum,
    lindblad_position,
)
from lindgauss.symplectic import (
    symplectic_form,
    williamson_eigenvalues,
)

OM = symplectic_form(1)
BOX = np.array([[-2.0, 2.0], [-2.0, 2.0]])


def make_model(h, ls, hbar=0.1):
    return DynamicsModel(hamiltonian=h, lindblads=tuple(ls), hbar=hbar, domain_box=BOX, n_probes=600)


def make_data(h_part, f_part, diffusion, center=None):
    center = np.zeros(2) if center is None else center
    return LocalHarmonicData(
        center=center,
        drift=np.zeros(2),
        hamiltonian_part=np.asarray(h_part, float),
        friction_part=np.asarray(f_part, float),
        diffusion=np.asarray(diffusion, float),
    )


# -- covariance_rhs ----------------------------------------------------------


def test_rhs_rotation_cancels_for_isotropic():
    hbar = 0.1
    data = make_data(OM, np.zeros((2, 2)), hbar * np.eye(2))
    out = covariance_rhs(data, np.eye(2) * hbar / 2.0)
    assert np.allclose(out, hbar * np.eye(2))


def test_rhs_pure_diffusion():
    d_mat = np.array([[0.3, 0.1], [0.1, 0.5]])
    data = make_data(np.zeros((2, 2)), np.zeros((2, 2)), d_mat)
    assert np.allclose(covariance_rhs(data, np.diag([1.0, 2.0])), d_mat)


def test_rhs_hyperbolic_squeezing():
    lam = 0.7
    data = make_data(np.diag([lam, -lam]), np.zeros((2, 2)), np.zeros((2, 2)))
    out = covariance_rhs(data, np.diag([2.0, 3.0]))
    assert np.allclose(out, np.diag([2 * lam * 2.0, -2 * lam * 3.0]))


# -- taylor_local ------------------------------------------------------------


def test_taylor_local_harmonic():
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()])
    data = taylor_local(model, np.array([0.7, -0.4]))
    assert np.allclose(data.hamiltonian_part, OM)
    assert np.allclose(data.friction_part, 0.0)
    assert np.allclose(data.diffusion, 0.1 * np.eye(2))


def test_taylor_local_quartic_hessian():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    data = taylor_local(model, np.array([1.0, 0.0]))
    assert np.allclose(data.hamiltonian_part, [[0.0, 1.0], [-3.0, 0.0]])


def test_taylor_local_damping_gradient():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    data = taylor_local(model, np.array([0.3, 0.8]))
    assert np.allclose(data.friction_part, -np.eye(2) / 2.0, atol=1e-12)
    assert data.l_values[0] == pytest.approx((0.3 + 0.8j) / np.sqrt(2))


# -- nts_decompose frozen cases ----------------------------------------------


def test_decompose_frictionless_identity():
    hbar = 0.1
    sigma = np.eye(2) * hbar / 2.0
    data = make_data(OM, np.zeros((2, 2)), hbar * np.eye(2))
    split = nts_decompose(data, sigma, hbar, lambda_star=0.5, frictionless=True)
    # sigma_bar = I: the counter-squeezing term vanishes, S0 = h s + s h^T = 0
    assert np.allclose(split.s_zero, OM @ sigma + sigma @ OM.T, atol=1e-14)
    assert np.allclose(split.s_diff, hbar * np.eye(2), atol=1e-14)


def test_decompose_frictionful_isotropic():
    hbar = 0.2
    sigma = np.eye(2) * hbar / 2.0
    # Omega = I, friction gradient F = -I/2 (Hamiltonian part of F is 0)
    f_skew, _ = np.zeros((2, 2)), None
    data = make_data(OM, -np.eye(2) / 2.0, hbar * np.eye(2))
    split = nts_decompose(data, sigma, hbar, lambda_star=0.25, frictionless=False)
    # Y = (1/2)[Omega sbar^{-1} - sbar om^T Omega om] = 0 at sbar = I, Omega = I
    assert np.allclose(split.s_zero, OM @ sigma + sigma @ OM.T, atol=1e-14)
    # S_D = D + F s + s F^T
    expected = hbar * np.eye(2) - np.eye(2) / 2.0 @ sigma - sigma @ np.eye(2).T / 2.0
    assert np.allclose(split.s_diff, expected, atol=1e-14)
    assert np.allclose(split.s_total, covariance_rhs(data, sigma), atol=1e-14)


def test_decompose_rejects_violated_constraint():
    hbar = 0.1
    sigma = np.eye(2) * hbar / 2.0
    data = make_data(10.0 * OM, np.zeros((2, 2)), hbar * 0.01 * np.eye(2))
    with pytest.raises(NtsConstraintError):
        nts_decompose(data, sigma, hbar, lambda_star=0.9, frictionless=True)


def test_decompose_rejects_nonpure_sigma():
    hbar = 0.1
    data = make_data(OM, np.zeros((2, 2)), hbar * np.eye(2))
    from lindgauss.errors import InvalidCovarianceError

    with pytest.raises(InvalidCovarianceError):
        nts_decompose(data, np.eye(2) * hbar, hbar, lambda_star=0.5)


def test_decompose_lambda_one_requires_coherent():
    hbar = 0.1
    data = make_data(0.2 * OM, np.zeros((2, 2)), hbar * np.eye(2))
    sigma = np.diag([2.0, 0.5]) * hbar / 2.0
    with pytest.raises(NtsConstraintError):
        nts_decompose(data, sigma, hbar, lambda_star=1.0, frictionless=True)
    split = nts_decompose(data, np.eye(2) * hbar / 2.0, hbar, 1.0, frictionless=True)
    assert np.allclose(split.s_zero + split.s_diff, split.s_total)


# -- randomized property suite -------------------------------------------------


def random_admissible_instance(rng, hbar=0.1, friction=True, at_floor=True):
    """Random (h, F, Omega, sigma, lambda*) meeting the split preconditions.

    Omega + i F omega is PSD by construction (built from random complex
    coefficient vectors); sigma has its smallest eigenvalue pinned at the
    floor when at_floor.
    """
    h_sym = rng.standard_normal((2, 2))
    h_ham = OM @ (h_sym + h_sym.T) / 2.0
    ells = rng.standard_normal((3, 2)) + (1j * rng.standard_normal((3, 2)) if friction else 0.0)
    m_low = sum(np.outer(l, np.conj(l)) for l in ells)
    omega_mat = -OM @ np.real(m_low) @ OM  # omega Re(M) omega^T
    f_skew = OM @ np.imag(m_low)
    ev = np.linalg.eigvalsh(omega_mat)
    c_om, n_om = ev[0], ev[-1]
    if c_om < 1e-3:
        omega_mat = omega_mat + (1e-3 - c_om) * np.eye(2)
        ev = np.linalg.eigvalsh(omega_mat)
        c_om, n_om = ev[0], ev[-1]
    n_h = np.linalg.norm(h_ham, 2)
    if friction:
        lam_max = (-n_h + np.sqrt(n_h**2 + c_om * n_om)) / n_om
    else:
        lam_max = c_om / n_h if n_h > 0 else 1.0
    # stay strictly inside (0, 1): the lambda* = 1 corner degenerates to the
    # coherent-only set where the counter-squeezing ansatz is defined as 0
    lam = min(0.95, 0.8 * lam_max)
    if lam <= 0:
        raise ValueError("degenerate instance")
    # sigma with min eigenvalue at the floor (or slightly above)
    lo = lam if at_floor else min(1.0, lam * 1.5)
    theta = rng.uniform(0, np.pi)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    sigma_bar = rot @ np.diag([lo, 1.0 / lo]) @ rot.T
    sigma = sigma_bar * hbar / 2.0
    return h_ham, f_skew, omega_mat, sigma, lam


def check_split_properties(h_ham, f_skew, omega_mat, sigma, hbar, lam, frictionless):
    s_zero, s_diff, margin = nts_split_batch(
        h_ham, f_skew, omega_mat, sigma, hbar, lam, frictionless
    )
    s_zero, s_diff = s_zero[0], s_diff[0]
    assert margin[0] > 0
    total = (h_ham + f_skew) @ sigma + sigma @ (h_ham + f_skew).T + hbar * omega_mat
    scale = np.linalg.norm(total) + 1e-30
    # (i) exact recomposition
    assert np.linalg.norm(s_zero + s_diff - total) <= 1e-12 * scale
    # (ii) diffusive part PSD up to round-off
    assert np.linalg.eigvalsh(s_diff)[0] >= -1e-10 * scale
    # (iii) purity: sigma^{-1} S0 is Hamiltonian
    m = np.linalg.solve(sigma, s_zero)
    defect = np.linalg.norm(m @ OM - (m @ OM).T)
    assert defect <= 1e-8 * max(np.linalg.norm(m), 1e-30)
    # (iv) NTS preservation at the floor
    evals, vecs = np.linalg.eigh(sigma)
    if evals[0] <= (hbar / 2.0) * lam * (1 + 1e-12):
        v = vecs[:, 0]
        assert v @ s_zero @ v > 0


@pytest.mark.parametrize("friction", [True, False])
def test_randomized_split_properties(friction):
    rng = np.random.default_rng(123 if friction else 321)
    hbar = 0.1
    for _ in range(200):
        h, f, om_m, sigma, lam = random_admissible_instance(rng, hbar, friction=friction)
        check_split_properties(h, f, om_m, sigma, hbar, lam, frictionless=not friction)


def test_purity_preserved_under_s_zero_flow():
    # integrate sigma' = S0(sigma) with RK4 from sigma_bar = I over t in [0,5]
    hbar = 0.1
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], hbar=hbar)
    data = taylor_local(model, np.array([0.9, 0.3]))
    lam = default_lambda_star(model)
    sigma = np.eye(2) * hbar / 2.0
    dt = 0.002
    h_ham = data.hamiltonian_part  # F = 0 for real Lindblads

    def rhs(sig):
        s_zero, _, _ = nts_split_batch(
            h_ham, np.zeros((2, 2)), data.diffusion / hbar, sig, hbar, lam, True
        )
        return s_zero[0]

    t = 0.0
    while t < 5.0:
        k1 = rhs(sigma)
        k2 = rhs(sigma + 0.5 * dt * k1)
        k3 = rhs(sigma + 0.5 * dt * k2)
        k4 = rhs(sigma + dt * k3)
        sigma = sigma + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        sigma = (sigma + sigma.T) / 2.0
        t += dt
    sigma_bar = sigma / (hbar / 2.0)
    assert abs(np.linalg.det(sigma_bar) - 1.0) < 1e-6
    assert np.allclose(williamson_eigenvalues(sigma, hbar), 1.0, atol=1e-5)


def test_nts_floor_under_full_split_flow():
    # deterministic surrogate for the floor statement: evolving sigma with
    # S0 keeps lambda_min above the floor even where the raw flow squeezes
    hbar = 0.05
    rng = np.random.default_rng(77)
    for _ in range(20):
        h, f, om_m, sigma, lam = random_admissible_instance(rng, hbar, friction=False, at_floor=True)
        dt = 1e-3
        for _ in range(400):
            s_zero, _, margin = nts_split_batch(
                h, np.zeros((2, 2)), om_m, sigma, hbar, lam, True
            )
            assert margin[0] > 0
            sigma = sigma + dt * s_zero[0]
            sigma = (sigma + sigma.T) / 2.0
            sigma = (hbar / 2.0) * (sigma / (hbar / 2.0)) / np.sqrt(
                np.linalg.det(sigma / (hbar / 2.0))
            )
        floor = (hbar / 2.0) * lam * (1 - 1e-6)
        assert np.linalg.eigvalsh(sigma)[0] >= floor


def test_default_lambda_star_is_half_z():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    assert default_lambda_star(model) == pytest.approx(
        0.5 * model.relative_diffusion_strength(), rel=1e-12
    )


def test_harmonic_oracle_lyapunov_flow():
    # with the full split, d sigma/dt (deterministic part) plus diffusion
    # realized as noise reproduces the Lyapunov equation in expectation:
    # check S0 + S_D equals the rhs exactly along a harmonic trajectory
    hbar = 0.1
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()], hbar=hbar)
    data = taylor_local(model, np.array([1.0, 0.0]))
    sigma = np.eye(2) * hbar / 2.0
    expected = covariance_rhs(data, sigma)
    split = nts_decompose(data, sigma, hbar, default_lambda_star(model))
    assert np.allclose(split.s_total, expected, atol=1e-14)
