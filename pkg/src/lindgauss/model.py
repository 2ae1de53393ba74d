"""Dynamics model: problem data (H, L_k, hbar) and derived classical fields.

All field evaluators are batched over points of shape (..., 2d) and pure;
the model itself is immutable after construction.  Suprema/infima that are
formally over all of phase space are estimated on a user-declared bounded
box sampled with a lattice plus Halton probes.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import qmc

from .errors import DimensionError, LindgaussError
from .seminorms import ck_seminorm, ck_seminorm_field, weighted_seminorm_sum
from .symplectic import symplectic_form

FRICTIONLESS_TOL = 1e-12


@dataclass(frozen=True)
class DynamicsModel:
    """Problem data for one Markovian open system in uniform units."""

    hamiltonian: object
    lindblads: tuple
    hbar: float
    dim: int = 1
    unit_transform: np.ndarray = None
    domain_box: np.ndarray = None
    n_probes: int = 10_000
    probe_seed: int = 7

    def __post_init__(self):
        if self.hbar <= 0:
            raise LindgaussError("hbar must be positive")
        object.__setattr__(self, "lindblads", tuple(self.lindblads))
        n2 = 2 * self.dim
        z = np.eye(n2) if self.unit_transform is None else np.asarray(self.unit_transform, float)
        if z.shape != (n2, n2):
            raise DimensionError("unit transform must be 2d x 2d")
        omega = symplectic_form(self.dim)
        if np.linalg.norm(z.T @ omega @ z - omega) > 1e-10 * max(1.0, np.linalg.norm(z) ** 2):
            raise LindgaussError("unit transform is not symplectic to 1e-10")
        object.__setattr__(self, "unit_transform", z)
        box = self.domain_box
        if box is None:
            box = np.array([[-3.0, 3.0]] * n2)
        box = np.asarray(box, dtype=float)
        if box.shape != (n2, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise DimensionError("domain_box must be (2d, 2) with min < max per axis")
        object.__setattr__(self, "domain_box", box)
        # sanity: the Hamiltonian symbol must be real on the box
        pts = self._sample_box(97, seed=3)
        hv = np.asarray(self.hamiltonian.value(pts))
        if np.max(np.abs(hv.imag)) > 1e-10 * (1.0 + np.max(np.abs(hv.real))):
            raise LindgaussError("Hamiltonian symbol has a nonzero imaginary part")

    # -- probe sampling -----------------------------------------------------

    def _sample_box(self, n, seed):
        box = self.domain_box
        sampler = qmc.Halton(d=box.shape[0], seed=seed)
        u = sampler.random(n)
        return box[:, 0] + u * (box[:, 1] - box[:, 0])

    @cached_property
    def probes(self):
        """Lattice + quasi-random probe points covering the domain box."""
        box = self.domain_box
        n2 = box.shape[0]
        per_axis = max(2, int(round((self.n_probes / 2) ** (1.0 / n2))))
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
        lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n2)
        extra = self._sample_box(self.n_probes - lattice.shape[0], self.probe_seed) \
            if self.n_probes > lattice.shape[0] else np.empty((0, n2))
        return np.concatenate([lattice, extra], axis=0)

    @cached_property
    def seminorm_probes(self):
        """Smaller probe set for high-order tensor seminorms."""
        box = self.domain_box
        n2 = box.shape[0]
        per_axis = max(2, int(round(512 ** (1.0 / n2))))
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
        lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n2)
        return np.concatenate([lattice, self._sample_box(256, self.probe_seed + 1)], axis=0)

    @property
    def omega(self):
        return symplectic_form(self.dim)

    @property
    def has_constant_diffusion(self):
        """True when every Lindblad symbol is linear (D independent of alpha)."""
        return all(lk.is_linear for lk in self.lindblads)

    @property
    def has_real_lindblads(self):
        """Real Lindblad symbols produce no friction."""
        return all(lk.is_real for lk in self.lindblads)

    @cached_property
    def affine_drift(self):
        """(A, b) with u(alpha) = b + A alpha when the drift is affine, else None.

        Holds for Hamiltonians of degree <= 2 with linear Lindblads; lets
        the hot loops skip the generic symbol machinery.
        """
        h_poly = getattr(self.hamiltonian, "degree", None)
        if h_poly is None or h_poly > 2 or not self.has_constant_diffusion:
            return None
        center = self.domain_box.mean(axis=1)[None, :]
        a_mat = self.hessian_flow(center)[0] + self.friction_gradient(center)[0]
        u0 = (self.hamiltonian_drift(center) + self.friction(center))[0]
        b = u0 - a_mat @ center[0]
        return a_mat, b

    @cached_property
    def constant_diffusion_root(self):
        """Symmetric square root of the (constant) diffusion matrix."""
        center = self.domain_box.mean(axis=1)
        d_mat = self.diffusion(center[None, :])[0]
        ev, vec = np.linalg.eigh(d_mat)
        if ev[0] < -1e-10 * max(ev[-1], 1e-300):
            raise LindgaussError("diffusion matrix not PSD")
        return (vec * np.sqrt(np.clip(ev, 0.0, None))) @ vec.T

    # -- derived classical fields (batched) ---------------------------------

    def hamiltonian_drift(self, pts):
        """Symplectic gradient (dH)^a = omega grad H."""
        g = self.hamiltonian.grad(pts).real
        return g @ self.omega.T

    def friction(self, pts):
        """G^a = Im sum_k L_k (omega grad L_k^*)^a."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape, dtype=float)
        if self.has_real_lindblads:
            return out
        for lk in self.lindblads:
            val = lk.value(pts)
            grad_conj = np.conj(lk.grad(pts))
            out += np.imag(val[..., None] * (grad_conj @ self.omega.T))
        return out

    def scaled_diffusion(self, pts):
        """Omega^{ab} = Re sum_k (omega grad L_k)(omega grad L_k^*)^T."""
        pts = np.asarray(pts, dtype=float)
        n2 = pts.shape[-1]
        out = np.zeros(pts.shape[:-1] + (n2, n2), dtype=float)
        for lk in self.lindblads:
            raised = lk.grad(pts) @ self.omega.T
            out += np.real(np.einsum("...a,...b->...ab", raised, np.conj(raised)))
        return out

    def diffusion(self, pts):
        """D = hbar * Omega."""
        return self.hbar * self.scaled_diffusion(pts)

    def localization(self, pts):
        """hbar^{-2} D: decoherence-rate matrix for macroscopic superpositions."""
        return self.diffusion(pts) / self.hbar**2

    def hessian_flow(self, pts):
        """h = omega grad^2 H: Hamiltonian part of the local flow matrix."""
        hess = self.hamiltonian.hess(pts).real
        return np.einsum("ac,...cb->...ab", self.omega, hess)

    def friction_gradient(self, pts):
        """F^a_b = d_b G^a = omega Im sum_k [grad L* grad L^T + L grad^2 L*]."""
        pts = np.asarray(pts, dtype=float)
        n2 = pts.shape[-1]
        acc = np.zeros(pts.shape[:-1] + (n2, n2), dtype=float)
        if self.has_real_lindblads:
            return acc
        for lk in self.lindblads:
            val = lk.value(pts)
            grad = lk.grad(pts)
            hess_conj = np.conj(lk.hess(pts))
            acc += np.imag(
                np.einsum("...a,...b->...ab", np.conj(grad), grad)
                + val[..., None, None] * hess_conj
            )
        return np.einsum("ac,...cb->...ab", self.omega, acc)

    def drift(self, pts):
        """Deterministic drift u = (dH)^a + G^a (Gaussian centers flow along it)."""
        affine = self.affine_drift
        if affine is not None:
            a_mat, b = affine
            return pts @ a_mat.T + b
        return self.hamiltonian_drift(pts) + self.friction(pts)

    def drift_jacobian(self, pts):
        return self.hessian_flow(pts) + self.friction_gradient(pts)

    def mean_drift(self, pts):
        """u + (1/2) d_b D^{ab}: the Ito-form drift of the probability flow."""
        return self.drift(pts) + 0.5 * self.diffusion_divergence(pts)

    def diffusion_divergence(self, pts):
        """d_b D^{ab} = hbar Re sum_k [omega grad^2 L_k omega grad L_k^*]^a."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape, dtype=float)
        om = self.omega
        for lk in self.lindblads:
            hess = lk.hess(pts)
            grad_conj = np.conj(lk.grad(pts))
            out += np.real(np.einsum("ab,...bc,cd,...d->...a", om, hess, om, grad_conj))
        return self.hbar * out

    # -- scalar diagnostics --------------------------------------------------

    def is_frictionless(self, force=None):
        """True when max probe |G| is negligible; `force` overrides detection."""
        if force is not None:
            return bool(force)
        g = self.friction(self.probes)
        scale = 1.0 + float(np.max(np.abs(self.hamiltonian_drift(self.probes))))
        return float(np.max(np.abs(g))) < FRICTIONLESS_TOL * scale

    def _probe_eigen_stats(self):
        omega_f = self.scaled_diffusion(self.probes)
        ev = np.linalg.eigvalsh(omega_f)
        lmin, lmax = ev[..., 0], ev[..., -1]
        hess = self.hamiltonian.hess(self.probes).real
        hmax = np.linalg.eigvalsh(hess)[..., -1]
        return lmin, lmax, hmax

    def relative_diffusion_strength(self, frictionless=None):
        """Dimensionless diffusion-vs-squeezing strength on the domain box.

        Frictionless: min{ inf lmin[Omega]/lmax[hessH], 1 }.  With friction:
        min{ inf lmin[Omega]/(2 lmax[hessH]), inf sqrt(lmin/lmax [Omega]) }.
        Raises if Omega is degenerate at any probe.
        """
        lmin, lmax, hmax = self._probe_eigen_stats()
        floor = np.min(lmin)
        if floor <= 0:
            raise LindgaussError(
                f"scaled diffusion is degenerate on the box (min eigenvalue {floor:.3e})"
            )
        with np.errstate(divide="ignore"):
            ratio = np.where(hmax > 0, lmin / np.where(hmax > 0, hmax, 1.0), np.inf)
        if self.is_frictionless(frictionless):
            return float(min(np.min(ratio), 1.0))
        cond = np.sqrt(np.min(lmin / lmax))
        return float(min(0.5 * np.min(ratio), cond))

    def anharmonicity_classical(self):
        """|H|_C3 + |G|_C2 + |Omega|_C1 over the domain box (0 for harmonic data)."""
        probes = self.seminorm_probes
        rng = np.random.default_rng(11)
        b = ck_seminorm(self.hamiltonian, probes, 3, rng=rng)
        n2 = 2 * self.dim
        # grad^2 of the friction vector: tensor (pts, b, c, a)
        if any(not lk.is_linear for lk in self.lindblads):
            gpp = np.stack(
                [self._friction_component_hess(probes, a) for a in range(n2)], axis=-1
            )
            b += ck_seminorm_field(gpp, sym_slots=2, comp_slots=1, rng=rng)
            domega = self._scaled_diffusion_grad(probes)
            b += ck_seminorm_field(domega, sym_slots=1, comp_slots=2, rng=rng)
        return float(b)

    def _friction_component_hess(self, pts, a, step=None):
        # second derivatives of G^a by central differences of the exact field
        n2 = 2 * self.dim
        h = step or 1e-4 * max(1.0, float(np.max(np.abs(self.domain_box))))
        out = np.empty(pts.shape[:-1] + (n2, n2))
        for b in range(n2):
            for c in range(b, n2):
                pp = pts.copy(); pp[..., b] += h; pp[..., c] += h
                pm = pts.copy(); pm[..., b] += h; pm[..., c] -= h
                mp = pts.copy(); mp[..., b] -= h; mp[..., c] += h
                mm = pts.copy(); mm[..., b] -= h; mm[..., c] -= h
                val = (
                    self.friction(pp)[..., a]
                    - self.friction(pm)[..., a]
                    - self.friction(mp)[..., a]
                    + self.friction(mm)[..., a]
                ) / (4.0 * h * h)
                out[..., b, c] = val
                out[..., c, b] = val
        return out

    def _scaled_diffusion_grad(self, pts, step=None):
        n2 = 2 * self.dim
        h = step or 1e-5 * max(1.0, float(np.max(np.abs(self.domain_box))))
        out = np.empty(pts.shape[:-1] + (n2, n2, n2))
        for c in range(n2):
            up = pts.copy(); up[..., c] += h
            dn = pts.copy(); dn[..., c] -= h
            out[..., c, :, :] = (self.scaled_diffusion(up) - self.scaled_diffusion(dn)) / (2 * h)
        return out

    def anharmonicity_quantum(self, max_order=None, frictionless=None):
        """hbar-weighted high-order seminorm sums controlling the quantum error.

        Returns (b_q, b_q_prime, truncated): b_q sums |H|_{C^j} for
        j = 3..2d+4 plus the |L|_{C1}-weighted |L|_{C^j} sums; b_q_prime is
        the nonlocally weighted Lindblad sum with scale nu = sqrt(hbar/Z).
        truncated reports whether a symbol ran out of derivative order.
        """
        d = self.dim
        probes = self.seminorm_probes
        rng = np.random.default_rng(13)
        order_h = 2 * d + 4 if max_order is None else min(max_order, 2 * d + 4)
        b_q, top = weighted_seminorm_sum(self.hamiltonian, probes, 3, order_h, self.hbar, rng=rng)
        truncated = top < order_h
        order_l = 2 * d + 3 if max_order is None else min(max_order, 2 * d + 3)
        for lk in self.lindblads:
            c11 = ck_seminorm(lk, probes, 1, rng=rng)
            val, top = weighted_seminorm_sum(lk, probes, 2, order_l, self.hbar, rng=rng)
            truncated |= top < order_l
            b_q += c11 * val
        z = self.relative_diffusion_strength(frictionless=frictionless)
        nu = math.sqrt(self.hbar / z)
        b_qp = 0.0
        if any(not lk.is_linear for lk in self.lindblads):
            order_n = 2 * d + 6 if max_order is None else min(max_order, 2 * d + 6)
            order_c = 4 * d + 6 if max_order is None else min(max_order, 4 * d + 6)
            sub = probes[:: max(1, probes.shape[0] // 200)]
            for lk in self.lindblads:
                absl = np.abs(lk.value(sub))
                nval, top = self._nonlocal_seminorm(lk, sub, 3, order_n, nu, rng=rng)
                truncated |= top < order_n
                b_qp += float(np.max(absl * nval))
                val, top = weighted_seminorm_sum(lk, probes, 2, order_c, self.hbar, rng=rng)
                truncated |= top < order_c
                b_qp += nu * val**2
        return float(b_q), float(b_qp), truncated

    def _nonlocal_seminorm(self, symbol, pts, q, r, nu, rng=None):
        """N^{q,r}(alpha) = sum_j hbar^{(j-q)/2} sup_beta |grad^j(alpha+beta)|/(1+|beta|/nu)."""
        from .seminorms import directional_sups

        npts = pts.shape[0]
        total = np.zeros(npts)
        top = q - 1
        for j in range(q, r + 1):
            if symbol.max_order is not None and j > symbol.max_order:
                break
            sups = directional_sups(symbol, pts, j, rng=rng)  # (npts,)
            dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            weighted = sups[None, :] / (1.0 + dist / nu)
            total += self.hbar ** ((j - q) / 2.0) * np.max(weighted, axis=1)
            top = j
        return total, top

    def admissibility_report(self, order=None, bound_threshold=1e6, growth_threshold=1e6):
        """Sampled admissibility diagnostics with pass/fail verdicts.

        Checks (a) boundedness proxies for |d^n H| (2 <= |n|) and |d^n L|
        (1 <= |n|) up to `order`, (b) the nonlocal growth ratio
        sup |L(a)||d^n L(b)|/(1+|a-b|), and (c) inf lmin[Omega] > 0.
        """
        d = self.dim
        order = order or 2 * d + 4
        probes = self.seminorm_probes
        rng = np.random.default_rng(17)
        h_sups = {}
        for j in range(2, order + 1):
            if self.hamiltonian.max_order is not None and j > self.hamiltonian.max_order:
                break
            h_sups[j] = ck_seminorm(self.hamiltonian, probes, j, rng=rng)
        l_sups = {}
        for k, lk in enumerate(self.lindblads):
            for j in range(1, order + 1):
                if lk.max_order is not None and j > lk.max_order:
                    break
                l_sups[(k, j)] = ck_seminorm(lk, probes, j, rng=rng)
        sub = probes[:: max(1, probes.shape[0] // 128)]
        growth = 0.0
        from .seminorms import directional_sups

        for k, lk in enumerate(self.lindblads):
            absl = np.abs(lk.value(sub))
            for j in range(3, order + 1):
                if lk.max_order is not None and j > lk.max_order:
                    break
                sups = directional_sups(lk, sub, j, rng=rng)
                dist = np.linalg.norm(sub[:, None, :] - sub[None, :, :], axis=-1)
                ratio = absl[:, None] * sups[None, :] / (1.0 + dist)
                growth = max(growth, float(np.max(ratio)))
        lmin, _, _ = self._probe_eigen_stats()
        min_omega = float(np.min(lmin))
        checks = {
            "hamiltonian_bounded": max(h_sups.values(), default=0.0) < bound_threshold,
            "lindblad_bounded": max(l_sups.values(), default=0.0) < bound_threshold,
            "nonlocal_growth": growth < growth_threshold,
            "nondegenerate_diffusion": min_omega > 0.0,
        }
        return {
            "hamiltonian_seminorms": h_sups,
            "lindblad_seminorms": {f"L{k}_C{j}": v for (k, j), v in l_sups.items()},
            "nonlocal_growth_ratio": growth,
            "min_scaled_diffusion_eigenvalue": min_omega,
            "domain_box": self.domain_box.tolist(),
            "checks": checks,
            "passed": all(checks.values()),
        }

    def characteristic_scales(self):
        """(t_harm, s_anh, s_H, D_char) in the model's declared units.

        t_harm = 1/|H^Z|_C2; s_anh = (|H^Z|_C2/|H^Z|_C3)^2; s_H uses the
        s_anh-weighted order sum; D_char = (s_H/t_harm) Z Z^T.  Quadratic
        Hamiltonians give infinite actions by convention.
        """
        z = self.unit_transform
        if np.allclose(z, np.eye(2 * self.dim)):
            hz = self.hamiltonian
            probes = self.seminorm_probes
        else:
            from .symbols import TransformedSymbol

            hz = TransformedSymbol(self.hamiltonian, z)
            probes = lattice_probes(transform_box(self.domain_box, np.linalg.inv(z)), 512)
        rng = np.random.default_rng(19)
        c2 = ck_seminorm(hz, probes, 2, rng=rng)
        c3 = ck_seminorm(hz, probes, 3, rng=rng)
        t_harm = np.inf if c2 == 0 else 1.0 / c2
        if c3 == 0.0:
            return t_harm, np.inf, np.inf, None
        s_anh = (c2 / c3) ** 2
        high, _ = weighted_seminorm_sum(hz, probes, 3, 2 * self.dim + 4, s_anh, rng=rng)
        s_h = (c2 / high) ** 2
        d_char = (s_h / t_harm) * (z @ z.T)
        return float(t_harm), float(s_anh), float(s_h), d_char

    def harmonic_time(self):
        return self.characteristic_scales()[0]

    def transformed(self, zmat):
        """Model with symbols composed with Z and the box mapped accordingly."""
        from .symbols import TransformedSymbol

        zmat = np.asarray(zmat, dtype=float)
        zin = np.linalg.inv(zmat)
        return DynamicsModel(
            hamiltonian=TransformedSymbol(self.hamiltonian, zmat),
            lindblads=tuple(TransformedSymbol(lk, zmat) for lk in self.lindblads),
            hbar=self.hbar,
            dim=self.dim,
            unit_transform=None,
            domain_box=transform_box(self.domain_box, zin),
            n_probes=self.n_probes,
            probe_seed=self.probe_seed,
        )


def transform_box(box, zin):
    """Axis-aligned bounding box of Z^{-1} applied to a box's corners."""
    box = np.asarray(box, dtype=float)
    n2 = box.shape[0]
    corners = np.stack(
        np.meshgrid(*[box[a] for a in range(n2)], indexing="ij"), axis=-1
    ).reshape(-1, n2)
    mapped = corners @ np.asarray(zin, dtype=float).T
    return np.stack([mapped.min(axis=0), mapped.max(axis=0)], axis=1)


def lattice_probes(box, n):
    """Regular lattice of about n points over an axis-aligned box."""
    box = np.asarray(box, dtype=float)
    n2 = box.shape[0]
    per_axis = max(2, int(round(n ** (1.0 / n2))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n2)


def canonical_unit_transform(model):
    """Balanced unit choice Z0 = diag(r I, 1/r I) from the Hessian blocks.

    r = sqrt(r_x/r_p) with r_x^{-2} (r_p^{-2}) the largest sampled
    directional second derivative of H in position (momentum) directions.
    """
    d = model.dim
    hess = model.hamiltonian.hess(model.seminorm_probes).real
    xx = hess[..., :d, :d]
    pp = hess[..., d:, d:]
    sup_xx = float(np.max(np.abs(np.linalg.eigvalsh(xx))))
    sup_pp = float(np.max(np.abs(np.linalg.eigvalsh(pp))))
    if sup_xx == 0.0 or sup_pp == 0.0:
        return np.eye(2 * d)
    r = (sup_pp / sup_xx) ** 0.25  # r_x = sup_xx^{-1/2}, r = sqrt(r_x/r_p)
    return np.diag([r] * d + [1.0 / r] * d)
