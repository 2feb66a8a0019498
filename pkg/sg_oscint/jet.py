"""Truncated multivariate Taylor arithmetic.

A Jet stores the Taylor coefficients c_γ = ∂^γ f(x₀)/γ! of a function in
`nvars` variables for all multi-indices with |γ| ≤ order, over a batch of
expansion points. Monomials are kept in graded order, so truncating to a
lower order is a prefix slice of the coefficient array.
"""
import functools
import itertools
import math
import numbers

import numpy as np


@functools.lru_cache(maxsize=None)
def monomial_basis(nvars, order):
    exponents = []
    for degree in range(order + 1):
        for combo in itertools.combinations_with_replacement(
            range(nvars), degree
        ):
            exponent = [0] * nvars
            for var in combo:
                exponent[var] += 1
            exponents.append(tuple(exponent))
    return tuple(exponents)


@functools.lru_cache(maxsize=None)
def monomial_index(nvars, order):
    return {
        exponent: idx
        for idx, exponent in enumerate(monomial_basis(nvars, order))
    }


def n_monomials(nvars, order):
    return math.comb(nvars + order, order)


@functools.lru_cache(maxsize=None)
def product_table(nvars, order):
    """Index pairs (i, j) grouped by the output monomial of x^i * x^j."""
    basis = monomial_basis(nvars, order)
    index = monomial_index(nvars, order)
    left, right, starts = [], [], []
    for gamma in basis:
        starts.append(len(left))
        for alpha in basis:
            beta = tuple(g - a for g, a in zip(gamma, alpha))
            if min(beta, default=0) < 0:
                continue
            left.append(index[alpha])
            right.append(index[beta])
    return np.array(left), np.array(right), np.array(starts)


@functools.lru_cache(maxsize=None)
def diff_table(nvars, order, var):
    """Source indices and factors for d/dx_var, mapping order -> order-1."""
    index = monomial_index(nvars, order)
    sources, factors = [], []
    for beta in monomial_basis(nvars, order - 1):
        raised = list(beta)
        raised[var] += 1
        sources.append(index[tuple(raised)])
        factors.append(raised[var])
    return np.array(sources), np.array(factors, dtype=float)


@functools.lru_cache(maxsize=None)
def embed_table(nvars, new_nvars, offset, order):
    index = monomial_index(new_nvars, order)
    targets = []
    for gamma in monomial_basis(nvars, order):
        exponent = [0] * new_nvars
        exponent[offset : offset + nvars] = gamma
        targets.append(index[tuple(exponent)])
    return np.array(targets)


@functools.lru_cache(maxsize=None)
def permute_table(nvars, order, perm):
    index = monomial_index(nvars, order)
    targets = []
    for gamma in monomial_basis(nvars, order):
        targets.append(index[tuple(gamma[old] for old in perm)])
    return np.array(targets)


@functools.lru_cache(maxsize=None)
def restrict_table(nvars, keep, order):
    index = monomial_index(nvars, order)
    sources = []
    for gamma in monomial_basis(len(keep), order):
        exponent = [0] * nvars
        for var, power in zip(keep, gamma):
            exponent[var] = power
        sources.append(index[tuple(exponent)])
    return np.array(sources)


def _expand(value, ndim):
    value = np.asarray(value)
    return value.reshape(value.shape + (1,) * (ndim - value.ndim))


class Jet:
    __array_priority__ = 1000

    def __init__(self, coeffs, nvars, order):
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    @classmethod
    def constant(cls, value, nvars, order, batch_shape=None):
        value = np.asarray(value)
        if batch_shape is not None:
            value = np.broadcast_to(value, batch_shape)
        coeffs = np.zeros(
            (n_monomials(nvars, order),) + value.shape,
            dtype=np.result_type(value, float),
        )
        coeffs[0] = value
        return cls(coeffs, nvars, order)

    @classmethod
    def variables(cls, point, order):
        """One jet per coordinate of point, shape (nvars, *batch)."""
        point = np.asarray(point, dtype=float)
        nvars = point.shape[0]
        index = monomial_index(nvars, order)
        jets = []
        for var in range(nvars):
            jet = cls.constant(point[var], nvars, order)
            if order > 0:
                unit = [0] * nvars
                unit[var] = 1
                jet.coeffs[index[tuple(unit)]] = 1.0
            jets.append(jet)
        return jets

    @property
    def value(self):
        return self.coeffs[0]

    @property
    def batch_shape(self):
        return self.coeffs.shape[1:]

    def copy(self):
        return Jet(self.coeffs.copy(), self.nvars, self.order)

    def truncate(self, order):
        if order > self.order:
            raise ValueError(
                f"Cannot raise jet order from {self.order} to {order}"
            )
        if order == self.order:
            return self
        size = n_monomials(self.nvars, order)
        return Jet(self.coeffs[:size], self.nvars, order)

    def _align(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError(
                    f"Jet variable count mismatch: {self.nvars} vs "
                    f"{other.nvars}"
                )
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        if isinstance(other, (numbers.Number, np.ndarray, np.generic)):
            return self, Jet.constant(other, self.nvars, self.order)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, (numbers.Number, np.ndarray, np.generic)):
            coeffs = self.coeffs.astype(
                np.result_type(self.coeffs, other), copy=True
            )
            coeffs[0] = coeffs[0] + other
            return Jet(coeffs, self.nvars, self.order)
        aligned = self._align(other)
        if aligned is NotImplemented:
            return NotImplemented
        a, b = aligned
        return Jet(a.coeffs + b.coeffs, a.nvars, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.nvars, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (numbers.Number, np.ndarray, np.generic)):
            scale = _expand(other, self.coeffs.ndim - 1)
            return Jet(self.coeffs * scale[None], self.nvars, self.order)
        aligned = self._align(other)
        if aligned is NotImplemented:
            return NotImplemented
        a, b = aligned
        left, right, starts = product_table(a.nvars, a.order)
        products = a.coeffs[left] * b.coeffs[right]
        coeffs = np.add.reduceat(products, starts, axis=0)
        return Jet(coeffs, a.nvars, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return (exponent * self.log()).exp()
        return self.power(exponent)

    def compose(self, derivatives):
        """f(self) from the derivatives f^(j)(value), j = 0..order."""
        base = self.value
        shift = self - base
        result = Jet.constant(derivatives[0], self.nvars, self.order)
        term = None
        for j in range(1, self.order + 1):
            term = shift if term is None else term * shift
            result = result + term * (derivatives[j] / math.factorial(j))
        return result

    def exp(self):
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self.compose([cycle[j % 4] for j in range(self.order + 1)])

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self.compose([cycle[j % 4] for j in range(self.order + 1)])

    def log(self):
        a = self.value
        derivatives = [np.log(a)] + [
            (-1) ** (j - 1) * math.factorial(j - 1) / a**j
            for j in range(1, self.order + 1)
        ]
        return self.compose(derivatives)

    def power(self, p):
        if float(p).is_integer() and p >= 0:
            result = Jet.constant(
                np.ones(self.batch_shape), self.nvars, self.order
            )
            for _ in range(int(p)):
                result = result * self
            return result
        a = self.value
        derivatives = []
        falling = 1.0
        for j in range(self.order + 1):
            derivatives.append(falling * a ** (p - j))
            falling *= p - j
        return self.compose(derivatives)

    def sqrt(self):
        return self.power(0.5)

    def reciprocal(self):
        return self.power(-1.0)

    def diff(self, var):
        if self.order == 0:
            raise ValueError("Cannot differentiate an order-0 jet")
        sources, factors = diff_table(self.nvars, self.order, var)
        coeffs = self.coeffs[sources] * _expand(
            factors, self.coeffs.ndim
        )
        return Jet(coeffs, self.nvars, self.order - 1)

    def derivative(self, gamma):
        """The partial derivative ∂^gamma at the expansion points."""
        idx = monomial_index(self.nvars, self.order)[tuple(gamma)]
        return self.coeffs[idx] * math.prod(math.factorial(g) for g in gamma)

    def embed(self, nvars, offset=0):
        """Re-express in a larger variable set, own variables at offset."""
        targets = embed_table(self.nvars, nvars, offset, self.order)
        coeffs = np.zeros(
            (n_monomials(nvars, self.order),) + self.batch_shape,
            dtype=self.coeffs.dtype,
        )
        coeffs[targets] = self.coeffs
        return Jet(coeffs, nvars, self.order)

    def permute(self, perm):
        """Reorder variables: new variable i is old variable perm[i]."""
        targets = permute_table(self.nvars, self.order, tuple(perm))
        coeffs = np.empty_like(self.coeffs)
        coeffs[targets] = self.coeffs
        return Jet(coeffs, self.nvars, self.order)

    def restrict(self, keep):
        """Jet in the kept variables, the others frozen at the base point."""
        sources = restrict_table(self.nvars, tuple(keep), self.order)
        return Jet(self.coeffs[sources], len(keep), self.order)

    @property
    def real(self):
        return Jet(self.coeffs.real, self.nvars, self.order)

    @property
    def imag(self):
        return Jet(self.coeffs.imag, self.nvars, self.order)

    def conj(self):
        return Jet(self.coeffs.conj(), self.nvars, self.order)

    def __repr__(self):
        return (
            f"Jet(nvars={self.nvars}, order={self.order}, "
            f"batch={self.batch_shape})"
        )


def where(mask, a, b):
    """Pointwise choice between two jets (or constants) over the batch."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        raise TypeError("where needs at least one Jet argument")
    template = a if isinstance(a, Jet) else b
    if not isinstance(a, Jet):
        a = Jet.constant(
            a, template.nvars, template.order, template.batch_shape
        )
    if not isinstance(b, Jet):
        b = Jet.constant(
            b, template.nvars, template.order, template.batch_shape
        )
    a, b = a._align(b)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.batch_shape)
    coeffs = np.where(mask[None], a.coeffs, b.coeffs)
    return Jet(coeffs, a.nvars, a.order)


def norm2(jets):
    """Sum of squares of a list of jets."""
    return sum(jet * jet for jet in jets)


def dot(left, right):
    return sum(a * b for a, b in zip(left, right))
