import numpy as np
import pytest

from lindgauss.errors import LindgaussError
from lindgauss.model import DynamicsModel, canonical_unit_transform, transform_box
from lindgauss.symbols import (
    hamiltonian_cosine,
    hamiltonian_harmonic,
    hamiltonian_quartic,
    lindblad_annihilation,
    lindblad_momentum,
    lindblad_position,
)
from lindgauss.symplectic import symplectic_form

BOX2 = np.array([[-2.0, 2.0], [-2.0, 2.0]])


def make_model(h, ls, hbar=0.1, box=BOX2, **kw):
    kw.setdefault("n_probes", 600)
    return DynamicsModel(hamiltonian=h, lindblads=tuple(ls), hbar=hbar, domain_box=box, **kw)


def fd_friction(model, alpha, h=1e-5):
    # oracle: G^a = Im sum_k L_k (omega grad L_k^*)^a by finite differences
    om = symplectic_form(1)
    out = np.zeros(2)
    for lk in model.lindblads:
        grad = np.zeros(2, dtype=complex)
        for a in range(2):
            up = alpha.copy()
            up[a] += h
            dn = alpha.copy()
            dn[a] -= h
            grad[a] = (np.conj(lk.value(up[None])[0]) - np.conj(lk.value(dn[None])[0])) / (2 * h)
        out += np.imag(lk.value(alpha[None])[0] * (om @ grad))
    return out


def fd_diffusion(model, alpha, h=1e-5):
    om = symplectic_form(1)
    out = np.zeros((2, 2))
    for lk in model.lindblads:
        grad = np.zeros(2, dtype=complex)
        for a in range(2):
            up = alpha.copy()
            up[a] += h
            dn = alpha.copy()
            dn[a] -= h
            grad[a] = (lk.value(up[None])[0] - lk.value(dn[None])[0]) / (2 * h)
        raised = om @ grad
        out += model.hbar * np.real(np.outer(raised, np.conj(raised)))
    return out


def test_friction_real_lindblad_vanishes():
    model = make_model(hamiltonian_harmonic(), [lindblad_position()])
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    assert np.max(np.abs(model.friction(pts))) == 0.0


def test_friction_momentum_lindblad_vanishes():
    model = make_model(hamiltonian_harmonic(), [lindblad_momentum()])
    pts = np.random.default_rng(1).uniform(-1, 1, (20, 2))
    assert np.max(np.abs(model.friction(pts))) == 0.0


def test_friction_damping():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    alpha = np.array([0.7, -0.3])
    assert np.allclose(model.friction(alpha[None])[0], -alpha / 2.0, atol=1e-12)
    assert np.allclose(model.friction(alpha[None])[0], fd_friction(model, alpha), atol=1e-8)


def test_diffusion_position_lindblad():
    model = make_model(hamiltonian_harmonic(), [lindblad_position()], hbar=0.1)
    d_mat = model.diffusion(np.zeros((1, 2)))[0]
    assert np.allclose(d_mat, 0.1 * np.diag([0.0, 1.0]), atol=1e-14)
    assert np.allclose(d_mat, fd_diffusion(model, np.zeros(2)), atol=1e-8)


def test_diffusion_pair_is_isotropic():
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()], hbar=0.2)
    assert np.allclose(model.diffusion(np.zeros((1, 2)))[0], 0.2 * np.eye(2))


def test_diffusion_annihilation():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()], hbar=0.1)
    alpha = np.array([0.4, 0.1])
    d_mat = model.diffusion(alpha[None])[0]
    assert np.allclose(d_mat, 0.05 * np.eye(2), atol=1e-14)
    assert np.allclose(d_mat, fd_diffusion(model, alpha), atol=1e-8)


def test_scaled_diffusion_recovers_d():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], hbar=0.05)
    pts = np.random.default_rng(2).uniform(-1, 1, (30, 2))
    assert np.allclose(model.diffusion(pts), model.hbar * model.scaled_diffusion(pts), atol=1e-15)


def test_nts_condition_matrix_is_psd():
    # Omega + i F omega must be Hermitian PSD for Lindbladian data
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    pts = np.random.default_rng(3).uniform(-1, 1, (20, 2))
    om = symplectic_form(1)
    omega_f = model.scaled_diffusion(pts)
    fgrad = model.friction_gradient(pts)
    mat = omega_f + 1j * (fgrad @ om)
    assert np.max(np.abs(mat - np.conj(np.swapaxes(mat, -1, -2)))) < 1e-12
    assert np.min(np.linalg.eigvalsh(mat)) > -1e-12


def test_hessian_flow_is_hamiltonian_matrix():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    pts = np.random.default_rng(4).uniform(-1.5, 1.5, (20, 2))
    h = model.hessian_flow(pts)
    om = symplectic_form(1)
    assert np.max(np.abs(h @ om - np.swapaxes(h @ om, -1, -2))) < 1e-12


def test_drift_jacobian_consistency():
    model = make_model(hamiltonian_quartic(), [lindblad_annihilation()])
    alpha = np.array([0.5, -0.2])
    h = 1e-5
    jac = np.zeros((2, 2))
    for b in range(2):
        up = alpha.copy(); up[b] += h
        dn = alpha.copy(); dn[b] -= h
        jac[:, b] = (model.drift(up[None])[0] - model.drift(dn[None])[0]) / (2 * h)
    assert np.allclose(model.drift_jacobian(alpha[None])[0], jac, atol=1e-7)


def test_mean_drift_constant_diffusion():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    pts = np.random.default_rng(5).uniform(-1, 1, (10, 2))
    assert np.allclose(model.mean_drift(pts), model.drift(pts), atol=1e-14)


def test_relative_diffusion_strength_harmonic():
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()])
    assert model.relative_diffusion_strength() == pytest.approx(1.0)


@pytest.mark.parametrize("gamma,expected", [(4.0, 1.0), (0.01, 0.01)])
def test_relative_diffusion_strength_scaling(gamma, expected):
    ls = [lindblad_position().scaled(np.sqrt(gamma)), lindblad_momentum().scaled(np.sqrt(gamma))]
    model = make_model(hamiltonian_harmonic(), ls)
    assert model.relative_diffusion_strength() == pytest.approx(expected, rel=1e-9)


def test_relative_diffusion_strength_frictionful():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    # Omega = I/2: min(0.5 * 0.5 / 1, sqrt(1)) = 0.25
    assert model.relative_diffusion_strength() == pytest.approx(0.25, rel=1e-9)


def test_relative_diffusion_strength_quartic():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    assert model.relative_diffusion_strength() == pytest.approx(1.0 / 12.0, rel=1e-6)


def test_degenerate_diffusion_rejected():
    model = make_model(hamiltonian_harmonic(), [lindblad_position()])
    with pytest.raises(LindgaussError):
        model.relative_diffusion_strength()


def test_anharmonicity_classical_harmonic_zero():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    assert model.anharmonicity_classical() == pytest.approx(0.0, abs=1e-10)


def test_anharmonicity_classical_quartic():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    assert model.anharmonicity_classical() == pytest.approx(12.0, rel=1e-5)


def test_anharmonicity_classical_cosine():
    box = np.array([[-2.0, 2.0], [-2.0, 2.0]])
    model = make_model(hamiltonian_cosine(), [lindblad_position(), lindblad_momentum()], box=box)
    assert model.anharmonicity_classical() == pytest.approx(1.0, rel=1e-3)


def test_anharmonicity_quantum_harmonic_zero():
    model = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    b_q, b_qp, truncated = model.anharmonicity_quantum()
    assert b_q == pytest.approx(0.0, abs=1e-10)
    assert b_qp == pytest.approx(0.0, abs=1e-10)
    assert not truncated


def test_anharmonicity_quantum_quartic_sums_orders():
    hbar = 0.1
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], hbar=hbar)
    b_q, b_qp, truncated = model.anharmonicity_quantum()
    # sum_{j=3}^{6} hbar^{(j-3)/2} |H|_{C^j} with 12, 6, 0, 0
    assert b_q == pytest.approx(12.0 + np.sqrt(hbar) * 6.0, rel=1e-5)
    assert b_qp == 0.0
    assert not truncated


def test_anharmonicity_quantum_hbar_weighting():
    m1 = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], hbar=0.05)
    m2 = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], hbar=0.1)
    b1 = m1.anharmonicity_quantum()[0]
    b2 = m2.anharmonicity_quantum()[0]
    assert b2 == pytest.approx(12.0 + np.sqrt(0.1) * 6.0, rel=1e-5)
    assert b1 == pytest.approx(12.0 + np.sqrt(0.05) * 6.0, rel=1e-5)


def test_admissibility_single_position_lindblad_flags_degeneracy():
    model = make_model(hamiltonian_harmonic(), [lindblad_position()])
    report = model.admissibility_report()
    assert not report["checks"]["nondegenerate_diffusion"]
    assert not report["passed"]


def test_admissibility_pair_passes():
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()])
    report = model.admissibility_report()
    assert report["passed"]
    assert report["min_scaled_diffusion_eigenvalue"] == pytest.approx(1.0, rel=1e-9)


def test_admissibility_growth_with_box():
    # sampled sup of |d^2 H| grows with the box for a quartic Hamiltonian
    small = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    big_box = np.array([[-8.0, 8.0], [-8.0, 8.0]])
    big = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()], box=big_box)
    s2 = small.admissibility_report()["hamiltonian_seminorms"][2]
    b2 = big.admissibility_report()["hamiltonian_seminorms"][2]
    assert b2 > 10 * s2


def test_characteristic_scales_harmonic():
    model = make_model(hamiltonian_harmonic(), [lindblad_position(), lindblad_momentum()])
    t_harm, s_anh, s_h, d_char = model.characteristic_scales()
    assert t_harm == pytest.approx(1.0, rel=1e-9)
    assert np.isinf(s_anh)
    assert np.isinf(s_h)


def test_characteristic_scales_quartic():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    t_harm, s_anh, s_h, d_char = model.characteristic_scales()
    assert t_harm == pytest.approx(1.0 / 12.0, rel=1e-6)
    assert s_anh == pytest.approx(1.0, rel=1e-6)
    # s_H = (12 / (12 + sqrt(s_anh)*6))^2 = (2/3)^2
    assert s_h == pytest.approx(4.0 / 9.0, rel=1e-6)
    assert np.allclose(d_char, (s_h / t_harm) * np.eye(2))


def test_characteristic_scales_identity_rescaling():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    same = DynamicsModel(
        hamiltonian=model.hamiltonian,
        lindblads=model.lindblads,
        hbar=model.hbar,
        domain_box=model.domain_box,
        unit_transform=np.eye(2),
        n_probes=600,
    )
    assert model.characteristic_scales()[0] == pytest.approx(same.characteristic_scales()[0])


def test_canonical_unit_transform_balances_quartic():
    model = make_model(hamiltonian_quartic(), [lindblad_position(), lindblad_momentum()])
    z = canonical_unit_transform(model)
    # r^2 = 1/(sqrt(3) a) with a = 2; balanced Hessian blocks give
    # |H^Z|_C2 = sqrt(3) a
    assert z[0, 0] == pytest.approx((1.0 / (3 * 4.0)) ** 0.25, rel=1e-6)
    balanced = DynamicsModel(
        hamiltonian=model.hamiltonian,
        lindblads=model.lindblads,
        hbar=model.hbar,
        domain_box=model.domain_box,
        unit_transform=z,
        n_probes=600,
    )
    t_harm = balanced.characteristic_scales()[0]
    assert t_harm == pytest.approx(1.0 / (np.sqrt(3.0) * 2.0), rel=1e-3)


def test_symplectic_covariance_of_fields():
    # u_Z(alpha) = Z^{-1} u(Z alpha) and D_Z(alpha) = Z^{-1} D(Z alpha) Z^{-T}
    model = make_model(hamiltonian_quartic(), [lindblad_annihilation()])
    z = np.array([[1.3, 0.4], [0.0, 1.0 / 1.3]])  # symplectic (det = 1, triangular)
    transformed = model.transformed(z)
    zin = np.linalg.inv(z)
    rng = np.random.default_rng(8)
    alphas = rng.uniform(-0.8, 0.8, (20, 2))
    u_z = transformed.drift(alphas)
    u_ref = model.drift(alphas @ z.T) @ zin.T
    assert np.allclose(u_z, u_ref, atol=1e-10)
    d_z = transformed.diffusion(alphas)
    d_ref = np.einsum("ab,nbc,dc->nad", zin, model.diffusion(alphas @ z.T), zin)
    assert np.allclose(d_z, d_ref, atol=1e-10)


def test_gamma_scaling_of_derived_fields():
    gamma = 3.0
    base = make_model(hamiltonian_harmonic(), [lindblad_annihilation()])
    scaled = make_model(
        hamiltonian_harmonic(), [lindblad_annihilation().scaled(np.sqrt(gamma))]
    )
    pts = np.random.default_rng(9).uniform(-1, 1, (10, 2))
    assert np.allclose(scaled.diffusion(pts), gamma * base.diffusion(pts))
    assert np.allclose(scaled.friction(pts), gamma * base.friction(pts))


def test_derivative_consistency_probes():
    # analytic vs central-difference at 100 random probes for model symbols
    model = make_model(hamiltonian_cosine(), [lindblad_annihilation()])
    rng = np.random.default_rng(10)
    pts = rng.uniform(-1.5, 1.5, (100, 2))
    for sym in (model.hamiltonian, *model.lindblads):
        for order in [(1, 0), (0, 1), (2, 0), (0, 2)]:
            exact = sym.derivative(pts, order)
            h = 1e-4
            up = pts.copy()
            dn = pts.copy()
            a = order.index(max(order))
            up[:, a] += h
            dn[:, a] -= h
            rest = list(order)
            rest[a] -= 1
            if sum(rest) == 0:
                approx = (sym.value(up) - sym.value(dn)) / (2 * h)
            else:
                approx = (sym.derivative(up, tuple(rest)) - sym.derivative(dn, tuple(rest))) / (2 * h)
            assert np.all(np.abs(exact - approx) <= 1e-4 * (1 + np.abs(exact)))


def test_transform_box_is_bounding_box():
    box = np.array([[-1.0, 2.0], [-3.0, 1.0]])
    z = np.array([[2.0, 0.0], [0.0, 0.5]])
    out = transform_box(box, z)
    assert np.allclose(out, [[-2.0, 4.0], [-1.5, 0.5]])


def test_hamiltonian_must_be_real():
    from lindgauss.symbols import poly_1d

    with pytest.raises(LindgaussError):
        make_model(poly_1d({(2, 0): 1j}), [lindblad_position()])
