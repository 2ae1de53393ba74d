"""Phase-space symbols (Hamiltonian and Lindblad functions) with derivatives.

A symbol is a smooth function on R^{2d} evaluated in batch: value() accepts
points of shape (..., 2d).  Derivatives are addressed by multi-index, a
tuple of 2d nonnegative integers; polynomial and cosine symbols provide
exact derivatives to any order, callable symbols fall back on central
finite differences up to `max_order`.

A small builder vocabulary covers the models used by the experiment
presets: polynomials by coefficient table, cosine wells, and linear
Lindblad symbols given by complex coefficient vectors.
"""

import math
from itertools import combinations_with_replacement

import numpy as np

from .errors import DerivativeOrderError, DimensionError

MACHINE_EPS = np.finfo(float).eps


def _as_points(pts, dim2):
    pts = np.asarray(pts, dtype=float)
    if pts.shape[-1] != dim2:
        raise DimensionError(f"points last axis {pts.shape[-1]} != {dim2}")
    return pts


class Symbol:
    """Base class; subclasses implement value() and derivative()."""

    dim = 1          # number of degrees of freedom d
    max_order = None  # None means exact derivatives of any order
    is_real = False
    is_linear = False

    @property
    def dim2(self):
        return 2 * self.dim

    def value(self, pts):
        raise NotImplementedError

    def derivative(self, pts, order):
        """Mixed partial d^order of the symbol at pts (batched)."""
        raise NotImplementedError

    def _require_order(self, n):
        if self.max_order is not None and n > self.max_order:
            raise DerivativeOrderError(
                f"derivative order {n} exceeds available order {self.max_order}"
            )

    def scaled(self, factor):
        return ScaledSymbol(self, factor)

    # -- convenience tensors (batched over leading axes of pts) ------------

    def grad(self, pts):
        pts = _as_points(pts, self.dim2)
        out = np.empty(pts.shape[:-1] + (self.dim2,), dtype=complex)
        for a in range(self.dim2):
            idx = [0] * self.dim2
            idx[a] = 1
            out[..., a] = self.derivative(pts, tuple(idx))
        return out

    def hess(self, pts):
        pts = _as_points(pts, self.dim2)
        n2 = self.dim2
        out = np.empty(pts.shape[:-1] + (n2, n2), dtype=complex)
        for a in range(n2):
            for b in range(a, n2):
                idx = [0] * n2
                idx[a] += 1
                idx[b] += 1
                val = self.derivative(pts, tuple(idx))
                out[..., a, b] = val
                out[..., b, a] = val
        return out

    def deriv_tensor(self, pts, k):
        """Full symmetric derivative tensor of order k, shape (..., [2d]*k)."""
        pts = _as_points(pts, self.dim2)
        n2 = self.dim2
        if k == 0:
            return self.value(pts)
        out = np.empty(pts.shape[:-1] + (n2,) * k, dtype=complex)
        for axes in combinations_with_replacement(range(n2), k):
            idx = [0] * n2
            for a in axes:
                idx[a] += 1
            val = self.derivative(pts, tuple(idx))
            # fill all distinct permutations of the index tuple
            seen = set()
            for perm in _unique_permutations(axes):
                if perm in seen:
                    continue
                seen.add(perm)
                out[(...,) + perm] = val
        return out


def _unique_permutations(axes):
    # small k, small alphabet: generate distinct orderings recursively
    if len(axes) <= 1:
        yield tuple(axes)
        return
    seen = set()
    for i, a in enumerate(axes):
        if a in seen:
            continue
        seen.add(a)
        rest = axes[:i] + axes[i + 1 :]
        for tail in _unique_permutations(rest):
            yield (a,) + tail


class PolynomialSymbol(Symbol):
    """Polynomial over phase space: sum_e coeff[e] * alpha^e.

    coeffs maps exponent multi-indices (length 2d) to complex coefficients.
    """

    def __init__(self, coeffs, dim=1):
        self.dim = dim
        self.coeffs = {
            tuple(int(i) for i in e): complex(c)
            for e, c in coeffs.items()
            if c != 0
        }
        for e in self.coeffs:
            if len(e) != self.dim2:
                raise DimensionError(f"exponent {e} does not have length {self.dim2}")
        self.is_real = all(abs(c.imag) == 0.0 for c in self.coeffs.values())
        self.degree = max((sum(e) for e in self.coeffs), default=0)
        self.is_linear = self.degree <= 1

    @staticmethod
    def _accumulate(pts, terms):
        out = None
        const = 0.0
        for e, c in terms:
            term = None
            for a, n in enumerate(e):
                if n:
                    f = pts[..., a] ** n if n > 1 else pts[..., a]
                    term = f if term is None else term * f
            if term is None:
                const += c
            else:
                out = c * term if out is None else out + c * term
        if out is None:
            return np.full(pts.shape[:-1], complex(const))
        return out + const if const != 0.0 else out + 0j

    def value(self, pts):
        pts = _as_points(pts, self.dim2)
        return self._accumulate(pts, self.coeffs.items())

    def derivative(self, pts, order):
        pts = _as_points(pts, self.dim2)
        terms = []
        for e, c in self.coeffs.items():
            if any(n < m for n, m in zip(e, order)):
                continue
            factor = 1.0
            for n, m in zip(e, order):
                factor *= math.perm(n, m)
            terms.append((tuple(n - m for n, m in zip(e, order)), c * factor))
        return self._accumulate(pts, terms)

    def scaled(self, factor):
        return PolynomialSymbol(
            {e: c * factor for e, c in self.coeffs.items()}, dim=self.dim
        )

    def conjugated(self):
        return PolynomialSymbol(
            {e: np.conj(c) for e, c in self.coeffs.items()}, dim=self.dim
        )

    def differentiated(self, order):
        out = {}
        for e, c in self.coeffs.items():
            if any(n < m for n, m in zip(e, order)):
                continue
            factor = 1.0
            for n, m in zip(e, order):
                factor *= math.perm(n, m)
            out[tuple(n - m for n, m in zip(e, order))] = (
                out.get(tuple(n - m for n, m in zip(e, order)), 0.0) + c * factor
            )
        return PolynomialSymbol(out, dim=self.dim)

    def multiplied(self, other):
        out = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return PolynomialSymbol(out, dim=self.dim)

    def plus(self, other, factor=1.0):
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0.0) + factor * c
        return PolynomialSymbol(out, dim=self.dim)


class CosineSymbol(Symbol):
    """amplitude * cos(wavevector . alpha + phase); exact derivatives."""

    def __init__(self, amplitude, wavevector, phase=0.0, dim=1):
        self.dim = dim
        self.amplitude = complex(amplitude)
        self.wavevector = np.asarray(wavevector, dtype=float)
        if self.wavevector.shape != (self.dim2,):
            raise DimensionError("wavevector must have length 2d")
        self.phase = float(phase)
        self.is_real = self.amplitude.imag == 0.0
        self.is_linear = False

    def value(self, pts):
        pts = _as_points(pts, self.dim2)
        return self.amplitude * np.cos(pts @ self.wavevector + self.phase)

    def derivative(self, pts, order):
        pts = _as_points(pts, self.dim2)
        n = sum(order)
        if n == 0:
            return self.value(pts)
        factor = np.prod([self.wavevector[a] ** m for a, m in enumerate(order)])
        arg = pts @ self.wavevector + self.phase + n * np.pi / 2.0
        return self.amplitude * factor * np.cos(arg)

    def scaled(self, factor):
        return CosineSymbol(self.amplitude * factor, self.wavevector, self.phase, dim=self.dim)


class SumSymbol(Symbol):
    """Sum of symbols (same dimension)."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise DimensionError("empty sum")
        self.dim = parts[0].dim
        if any(p.dim != self.dim for p in parts):
            raise DimensionError("summands live in different dimensions")
        self.parts = parts
        orders = [p.max_order for p in parts]
        self.max_order = None if all(o is None for o in orders) else min(
            o for o in orders if o is not None
        )
        self.is_real = all(p.is_real for p in parts)
        self.is_linear = all(p.is_linear for p in parts)

    def value(self, pts):
        return sum(p.value(pts) for p in self.parts)

    def derivative(self, pts, order):
        self._require_order(sum(order))
        return sum(p.derivative(pts, order) for p in self.parts)

    def scaled(self, factor):
        return SumSymbol([p.scaled(factor) for p in self.parts])


class ScaledSymbol(Symbol):
    def __init__(self, base, factor):
        self.base = base
        self.factor = complex(factor)
        self.dim = base.dim
        self.max_order = base.max_order
        self.is_real = base.is_real and self.factor.imag == 0.0
        self.is_linear = base.is_linear

    def value(self, pts):
        return self.factor * self.base.value(pts)

    def derivative(self, pts, order):
        return self.factor * self.base.derivative(pts, order)

    def scaled(self, factor):
        return ScaledSymbol(self.base, self.factor * factor)


class CallableSymbol(Symbol):
    """Arbitrary user function with central finite-difference derivatives.

    Derivatives are formed axis by axis with second-order central stencils;
    the step follows eps^{1/(n+2)} * scale for total order n.
    """

    def __init__(self, func, dim=1, max_order=4, scale=1.0, is_real=False):
        self.func = func
        self.dim = dim
        self.max_order = max_order
        self.scale = float(scale)
        self.is_real = is_real
        self.is_linear = False

    def value(self, pts):
        pts = _as_points(pts, self.dim2)
        return np.asarray(self.func(pts), dtype=complex)

    def derivative(self, pts, order):
        n = sum(order)
        self._require_order(n)
        pts = _as_points(pts, self.dim2)
        if n == 0:
            return self.value(pts)
        h = MACHINE_EPS ** (1.0 / (n + 2)) * self.scale

        def rec(points, remaining):
            for a, m in enumerate(remaining):
                if m > 0:
                    rest = list(remaining)
                    rest[a] -= 1
                    up = points.copy()
                    up[..., a] += h
                    dn = points.copy()
                    dn[..., a] -= h
                    return (rec(up, tuple(rest)) - rec(dn, tuple(rest))) / (2.0 * h)
            return np.asarray(self.func(points), dtype=complex)

        return rec(pts, tuple(order))


class TransformedSymbol(Symbol):
    """Composition with a linear map: value(alpha) = base(Z alpha)."""

    def __init__(self, base, zmat):
        self.base = base
        self.zmat = np.asarray(zmat, dtype=float)
        self.dim = base.dim
        if self.zmat.shape != (self.dim2, self.dim2):
            raise DimensionError("transform must be 2d x 2d")
        self.max_order = base.max_order
        self.is_real = base.is_real
        self.is_linear = base.is_linear

    def value(self, pts):
        pts = _as_points(pts, self.dim2)
        return self.base.value(pts @ self.zmat.T)

    def derivative(self, pts, order):
        k = sum(order)
        self._require_order(k)
        pts = _as_points(pts, self.dim2)
        if k == 0:
            return self.value(pts)
        # chain rule: contract the base derivative tensor with one Z per slot
        tensor = self.base.deriv_tensor(pts @ self.zmat.T, k)
        axes = []
        for a, m in enumerate(order):
            axes.extend([a] * m)
        for a in axes:
            tensor = np.tensordot(tensor, self.zmat[:, a], axes=([tensor.ndim - 1], [0]))
        return tensor


# ---------------------------------------------------------------------------
# builder vocabulary


def poly_1d(terms):
    """1-D polynomial from {(i, j): c} meaning c * x^i p^j."""
    return PolynomialSymbol({(i, j): c for (i, j), c in terms.items()}, dim=1)


def hamiltonian_harmonic(omega_freq=1.0):
    """H = omega (x^2 + p^2) / 2."""
    return poly_1d({(2, 0): omega_freq / 2.0, (0, 2): omega_freq / 2.0})


def hamiltonian_quartic(quartic=0.25, mass=1.0):
    """H = p^2/(2m) + quartic * x^4."""
    return poly_1d({(0, 2): 1.0 / (2.0 * mass), (4, 0): quartic})


def hamiltonian_double_well(barrier=0.5, quartic=0.25, mass=1.0):
    """H = p^2/(2m) - barrier x^2 + quartic x^4."""
    return poly_1d({(0, 2): 1.0 / (2.0 * mass), (2, 0): -barrier, (4, 0): quartic})


def hamiltonian_cosine(amplitude=1.0, wavenumber=1.0, mass=1.0):
    """H = p^2/(2m) + amplitude cos(wavenumber x)."""
    kin = poly_1d({(0, 2): 1.0 / (2.0 * mass)})
    cos = CosineSymbol(amplitude, [wavenumber, 0.0], dim=1)
    return SumSymbol([kin, cos])


def lindblad_linear(coeffs, const=0.0, dim=1):
    """L = const + sum_a coeffs[a] alpha^a with complex coefficients."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (2 * dim,):
        raise DimensionError("linear Lindblad needs 2d coefficients")
    table = {}
    if const != 0.0:
        table[(0,) * (2 * dim)] = complex(const)
    for a, c in enumerate(coeffs):
        if c != 0:
            e = [0] * (2 * dim)
            e[a] = 1
            table[tuple(e)] = c
    return PolynomialSymbol(table, dim=dim)


def lindblad_position(dim=1, axis=0):
    e = np.zeros(2 * dim, dtype=complex)
    e[axis] = 1.0
    return lindblad_linear(e, dim=dim)


def lindblad_momentum(dim=1, axis=0):
    e = np.zeros(2 * dim, dtype=complex)
    e[dim + axis] = 1.0
    return lindblad_linear(e, dim=dim)


def lindblad_annihilation(dim=1, axis=0):
    """L = (x + i p)/sqrt(2): linear damping toward the origin."""
    e = np.zeros(2 * dim, dtype=complex)
    e[axis] = 1.0 / np.sqrt(2.0)
    e[dim + axis] = 1j / np.sqrt(2.0)
    return lindblad_linear(e, dim=dim)


def observable_x():
    return poly_1d({(1, 0): 1.0})


def observable_p():
    return poly_1d({(0, 1): 1.0})


def observable_x2():
    return poly_1d({(2, 0): 1.0})


def observable_p2():
    return poly_1d({(0, 2): 1.0})


def observable_xp():
    return poly_1d({(1, 1): 1.0})


class ClippedSymbol(Symbol):
    """Smooth bounded version of a base symbol: R * tanh(base / R).

    Equals the base symbol up to O((base/R)^3) where the state lives and
    saturates at +/- R far out, so it is a legitimate bounded observable.
    """

    def __init__(self, base, radius):
        self.base = base
        self.radius = float(radius)
        self.dim = base.dim
        self.max_order = 2 if base.max_order is None else min(2, base.max_order)
        self.is_real = base.is_real
        self.is_linear = False

    def value(self, pts):
        return self.radius * np.tanh(self.base.value(pts) / self.radius)

    def derivative(self, pts, order):
        n = sum(order)
        self._require_order(n)
        if n == 0:
            return self.value(pts)
        # low orders via chain rule on tanh; enough for quadrature checks
        u = self.base.value(pts) / self.radius
        sech2 = 1.0 / np.cosh(u) ** 2
        if n == 1:
            return sech2 * self.base.derivative(pts, order)
        if n == 2:
            first = [0] * len(order)
            second = [0] * len(order)
            remaining = list(order)
            for a, m in enumerate(remaining):
                if m > 0:
                    first[a] = 1
                    remaining[a] -= 1
                    break
            for a, m in enumerate(remaining):
                if m > 0:
                    second[a] = 1
                    break
            du1 = self.base.derivative(pts, tuple(first))
            du2 = self.base.derivative(pts, tuple(second))
            d2u = self.base.derivative(pts, order)
            return sech2 * d2u - 2.0 * np.tanh(u) * sech2 * du1 * du2 / self.radius
        raise DerivativeOrderError("clipped observables provide derivatives to order 2")


def observable_by_name(name):
    """Observable lookup used by configs: x, p, x2, p2, xp, <base>_clip:<R>."""
    name = name.strip()
    if "_clip" in name:
        base_name, _, radius = name.partition("_clip")
        radius = float(radius.lstrip(":")) if radius else 3.0
        return ClippedSymbol(observable_by_name(base_name), radius)
    table = {
        "1": poly_1d({(0, 0): 1.0}),
        "x": observable_x,
        "p": observable_p,
        "x2": observable_x2,
        "p2": observable_p2,
        "xp": observable_xp,
    }
    entry = table.get(name)
    if entry is None:
        raise KeyError(f"unknown observable {name!r}")
    return entry() if callable(entry) else entry
