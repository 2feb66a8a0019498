import dataclasses
import math
from typing import Callable

import numpy as np
import pandas as pd

from .compactify import japanese_bracket, sample_neighborhood
from .errors import DimensionError
from .jet import Jet, monomial_basis
from .models import EllipticReport, Protocol, SeminormReport
from .parse import parse_expression
from .utils import (
    chunks,
    dyadic_radii,
    parallel_map,
    setup_config,
    setup_logger,
    sphere_directions,
)

config = setup_config()
logger = setup_logger(__name__, config)

ORDER_CAP = 8.0
CHUNK = 4096


def order_sum(first, second):
    """Order of a product; -inf absorbs everything."""
    return tuple(
        -math.inf if -math.inf in (a, b) else a + b
        for a, b in zip(first, second)
    )


def order_max(first, second):
    return tuple(max(a, b) for a, b in zip(first, second))


def finite_order(value, cap=ORDER_CAP):
    if value == -math.inf:
        return -cap
    if value == math.inf:
        return cap
    return float(value)


def _batch_points(x, xi):
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape[0] == 0:
        x = np.zeros((0,) + xi.shape[1:])
    if xi.shape[0] == 0:
        xi = np.zeros((0,) + x.shape[1:])
    return x, xi


def as_jet(value, nvars, order, batch_shape):
    if isinstance(value, Jet):
        return value
    return Jet.constant(value, nvars, order, batch_shape)


@dataclasses.dataclass
class SymbolFn:
    """Jet-evaluable function of (x, ξ) ∈ ℝ^d × ℝ^s with a declared order.

    The evaluator maps points x of shape (d, *batch), ξ of shape
    (s, *batch) and a jet order K to a Jet in the d + s variables (x, ξ).
    """

    dims: tuple
    order: tuple
    evaluator: Callable
    source: str = ""
    expression: object = None

    @classmethod
    def from_jet_fn(cls, fn, dims, order, source=""):
        d, s = dims

        def evaluator(x, xi, K):
            x, xi = _batch_points(x, xi)
            point = np.concatenate([x, xi], axis=0)
            jets = Jet.variables(point, K)
            result = fn(jets[:d], jets[d:])
            return as_jet(result, d + s, K, point.shape[1:])

        return cls(tuple(dims), tuple(order), evaluator, source)

    @property
    def nvars(self):
        return sum(self.dims)

    def jet(self, x, xi, order=0):
        return self.evaluator(x, xi, order)

    def __call__(self, x, xi):
        return self.jet(x, xi, 0).value

    def derivative(self, x, xi, alpha, beta):
        order = sum(alpha) + sum(beta)
        return self.jet(x, xi, order).derivative(tuple(alpha) + tuple(beta))

    def with_order(self, order):
        return dataclasses.replace(self, order=tuple(order))

    def swapped(self):
        """The same function with the roles of x and ξ exchanged."""
        d, s = self.dims
        perm = tuple(range(d, d + s)) + tuple(range(d))

        def evaluator(x, xi, K):
            x, xi = _batch_points(x, xi)
            return self.jet(xi, x, K).permute(perm)

        return SymbolFn(
            (s, d),
            tuple(reversed(self.order)),
            evaluator,
            f"swap[{self.source}]",
        )

    def _check_dims(self, other):
        if tuple(other.dims) != tuple(self.dims):
            raise DimensionError(
                f"Symbol dimensions differ: {self.dims} vs {other.dims}"
            )

    def __add__(self, other):
        if not isinstance(other, SymbolFn):
            return self.shift(other)
        self._check_dims(other)

        def evaluator(x, xi, K):
            return self.jet(x, xi, K) + other.jet(x, xi, K)

        return SymbolFn(
            self.dims,
            order_max(self.order, other.order),
            evaluator,
            f"({self.source}) + ({other.source})",
        )

    def __mul__(self, other):
        if not isinstance(other, SymbolFn):
            return self.scale(other)
        self._check_dims(other)

        def evaluator(x, xi, K):
            return self.jet(x, xi, K) * other.jet(x, xi, K)

        return SymbolFn(
            self.dims,
            order_sum(self.order, other.order),
            evaluator,
            f"({self.source}) * ({other.source})",
        )

    def scale(self, factor):
        def evaluator(x, xi, K):
            return self.jet(x, xi, K) * factor

        order = self.order if factor != 0 else (-math.inf, -math.inf)
        return SymbolFn(
            self.dims, order, evaluator, f"{factor!r} * ({self.source})"
        )

    def shift(self, constant):
        def evaluator(x, xi, K):
            return self.jet(x, xi, K) + constant

        order = order_max(self.order, (0.0, 0.0))
        return SymbolFn(
            self.dims, order, evaluator, f"({self.source}) + {constant!r}"
        )


def parse_symbol_expr(text, dims, order, assume_nonvanishing=False):
    expression = parse_expression(text, dims, assume_nonvanishing)
    symbol = SymbolFn.from_jet_fn(
        expression.evaluate, dims, order, source=text
    )
    return dataclasses.replace(symbol, expression=expression)


def print_symbol(symbol):
    if symbol.expression is None:
        raise ValueError(f"Symbol {symbol.source!r} has no expression")
    return symbol.expression.to_text()


def cutoff_symbol(cutoff, s=0):
    """An asymptotic cut-off in x as a symbol of order (0, 0)."""
    return SymbolFn.from_jet_fn(
        lambda x, xi: cutoff.jet(x),
        (cutoff.dim, s),
        (0.0, 0.0),
        source=f"cutoff(R={cutoff.radius})",
    )


@dataclasses.dataclass
class SchwartzFn:
    """Jet-evaluable rapidly decreasing function on ℝ^d."""

    dim: int
    evaluator: Callable
    source: str = ""

    @classmethod
    def from_jet_fn(cls, fn, dim, source=""):
        def evaluator(x, K):
            x = np.asarray(x, dtype=float)
            jets = Jet.variables(x, K)
            return as_jet(fn(jets), dim, K, x.shape[1:])

        return cls(dim, evaluator, source)

    @classmethod
    def from_expr(cls, text, dim):
        expression = parse_expression(text, (dim, 0))
        return cls.from_jet_fn(
            lambda x: expression.evaluate(x, []), dim, source=text
        )

    def jet(self, x, order=0):
        return self.evaluator(x, order)

    def __call__(self, x):
        return self.jet(x, 0).value

    def as_symbol(self, s=0):
        """f(x) viewed on ℝ^d × ℝ^s, order (-inf, 0)."""
        d = self.dim

        def evaluator(x, xi, K):
            x, xi = _batch_points(x, xi)
            return self.jet(x, K).embed(d + s, 0)

        return SymbolFn((d, s), (-math.inf, 0.0), evaluator, self.source)

    def as_covariable_symbol(self, d=0):
        """f(ξ) viewed on ℝ^d × ℝ^s, order (0, -inf)."""
        s = self.dim

        def evaluator(x, xi, K):
            x, xi = _batch_points(x, xi)
            return self.jet(xi, K).embed(d + s, d)

        return SymbolFn((d, s), (0.0, -math.inf), evaluator, self.source)

    def seminorm(self, p, protocol=None, threads=None):
        return schwartz_seminorm(self, p, protocol, threads)


def factor_samples(k, radii, count, seed=0):
    """{0} ∪ r·θ for r in radii and θ in the direction set, shape (k, n)."""
    if k == 0:
        return np.zeros((0, 1))
    directions = sphere_directions(k, count, seed)
    radii = np.asarray([r for r in radii if r > 0])
    points = radii[:, None, None] * directions[None]
    return np.concatenate(
        [np.zeros((1, k)), points.reshape(-1, k)], axis=0
    ).T


def product_points(xs, xis, keep=None):
    """All pairs of columns of xs (d, n) and xis (s, m)."""
    n, m = xs.shape[1], xis.shape[1]
    ix, jx = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    ix, jx = ix.ravel(), jx.ravel()
    if keep is not None:
        mask = keep(xs[:, ix], xis[:, jx])
        ix, jx = ix[mask], jx[mask]
    return xs[:, ix], xis[:, jx]


def grid_points(dims, protocol):
    d, s = dims
    radii = dyadic_radii(0, protocol.grid_hi)
    xs = factor_samples(d, radii, protocol.max_directions, protocol.seed)
    xis = factor_samples(s, radii, protocol.max_directions, protocol.seed)
    return product_points(xs, xis)


def evaluate_chunked(func, x, xi, threads=None, size=CHUNK):
    """Apply func to column chunks of (x, ξ) in the pool, concatenated."""
    total = max(x.shape[1], xi.shape[1])
    pieces = parallel_map(
        lambda part: func(x[:, part], xi[:, part]),
        list(chunks(total, size)),
        threads,
    )
    return np.concatenate(pieces, axis=-1)


def _log_weight(x, xi, m, mu):
    return -m * np.log(japanese_bracket(x)) - mu * np.log(
        japanese_bracket(xi)
    )


def seminorm_estimate(
    a, order=None, max_order=2, protocol=None, threads=None, grid=None
):
    """Sampled sups of |∂_x^α ∂_ξ^β a|⟨x⟩^{-m+|α|}⟨ξ⟩^{-μ+|β|}.

    Beyond R the samples sit on dyadic shells of max(|x|, |ξ|). A pair
    carries a growth flag when the sup on some outer shell exceeds the sup
    on the shell before it by more than the protocol tolerance.
    """
    protocol = protocol or Protocol()
    order = tuple(a.order if order is None else order)
    m, mu = (finite_order(o) for o in order)
    d, s = a.dims
    x, xi = grid if grid is not None else grid_points(a.dims, protocol)
    coeffs = evaluate_chunked(
        lambda xc, kc: a.jet(xc, kc, max_order).coeffs, x, xi, threads
    )
    jet = Jet(coeffs, d + s, max_order)
    scale = np.maximum(
        np.linalg.norm(x, axis=0), np.linalg.norm(xi, axis=0)
    )
    inner = scale <= protocol.radius
    level = np.rint(np.log2(np.maximum(scale, 1.0)))
    shells = [level == value for value in np.unique(level[~inner])]
    log_bx = np.log(japanese_bracket(x))
    log_bxi = np.log(japanese_bracket(xi))
    rows = []
    for gamma in monomial_basis(d + s, max_order):
        alpha, beta = gamma[:d], gamma[d:]
        with np.errstate(divide="ignore"):
            log_value = np.log(np.abs(jet.derivative(gamma)))
        scaled = np.exp(
            log_value
            + (sum(alpha) - m) * log_bx
            + (sum(beta) - mu) * log_bxi
        )
        inner_sup = float(scaled[inner].max()) if inner.any() else 0.0
        outer_sup = float(scaled[~inner].max()) if (~inner).any() else 0.0
        shell_sups = [float(scaled[shell].max()) for shell in shells]
        floor = 1e-12 * outer_sup
        growth = any(
            later > (1 + protocol.order_tol) * earlier + floor
            for earlier, later in zip(shell_sups, shell_sups[1:])
        )
        rows.append(
            {
                "alpha": alpha,
                "beta": beta,
                "estimate": max(inner_sup, outer_sup),
                "inner_sup": inner_sup,
                "outer_sup": outer_sup,
                "growth_flag": bool(growth),
            }
        )
    table = pd.DataFrame.from_records(rows)
    report = SeminormReport(
        order=order,
        table=table,
        grid={
            "points": int(x.shape[1]),
            "grid_hi": protocol.grid_hi,
            "directions": protocol.max_directions,
            "inner_radius": protocol.radius,
        },
    )
    logger.debug(
        f"Seminorms of {a.source or 'symbol'} at order {order}: "
        f"max {report.estimate:.4g}"
    )
    return report


def verify_order(a, order=None, protocol=None, threads=None):
    report = seminorm_estimate(a, order, 2, protocol, threads)
    verified = not report.table["growth_flag"].any()
    if not verified:
        logger.info(
            f"Order {report.order} rejected for {a.source or 'symbol'}: "
            f"growth at {report.growth_pairs}"
        )
    return verified, report


def _ratio_report(a, order, x, xi, protocol, threads, point=()):
    m, mu = (finite_order(o) for o in order)
    log_weight = _log_weight(x, xi, m, mu)
    values = evaluate_chunked(lambda xc, kc: a(xc, kc), x, xi, threads)
    with np.errstate(divide="ignore"):
        ratios = np.exp(np.log(np.abs(values)) + log_weight)
    min_ratio = float(ratios.min())
    label = protocol.label(min_ratio)
    return EllipticReport(
        elliptic=label == "above",
        label={
            "above": "elliptic",
            "margin": "margin",
            "below": "not-elliptic",
        }[label],
        min_ratio=min_ratio,
        order=tuple(order),
        protocol=protocol,
        point=point,
    )


def neighborhood_points(point, protocol):
    """Samples of a neighbourhood of a pair on ∂(B^d × B^s)."""
    px, pxi = point
    if px.is_finite and pxi.is_finite:
        raise ValueError(f"({px}, {pxi}) is not a boundary pair")
    radii = protocol.sweep_radii
    xs = sample_neighborhood(px, protocol.delta, radii).T
    xis = sample_neighborhood(pxi, protocol.delta, radii).T
    return product_points(xs, xis)


def elliptic_at(a, order, point, protocol=None, threads=None):
    protocol = protocol or Protocol()
    px, pxi = point
    if (px.dim, pxi.dim) != tuple(a.dims):
        raise DimensionError(
            f"Point dims {(px.dim, pxi.dim)} do not match symbol dims "
            f"{a.dims}"
        )
    x, xi = neighborhood_points(point, protocol)
    return _ratio_report(a, order, x, xi, protocol, threads, point)


def globally_elliptic(a, order, protocol=None, threads=None):
    protocol = protocol or Protocol()
    d, s = a.dims
    radii = dyadic_radii(0, protocol.sweep_hi)
    xs = factor_samples(d, radii, protocol.max_directions, protocol.seed)
    xis = factor_samples(s, radii, protocol.max_directions, protocol.seed)
    x, xi = product_points(
        xs,
        xis,
        keep=lambda x, xi: np.linalg.norm(x, axis=0)
        + np.linalg.norm(xi, axis=0)
        >= protocol.radius,
    )
    report = _ratio_report(a, order, x, xi, protocol, threads)
    logger.info(
        f"Global ellipticity of {a.source or 'symbol'} at order {order}: "
        f"{report.label} (min ratio {report.min_ratio:.3g})"
    )
    return report


def schwartz_seminorm(f, p, protocol=None, threads=None):
    """ρ_p(f) = Σ_{|α|+|β| ≤ p} sup |x^α ∂^β f| over a radial sample set."""
    protocol = protocol or Protocol()
    radii = np.unique(
        np.concatenate(
            [np.linspace(0, 16, 129), dyadic_radii(5, protocol.grid_hi)]
        )
    )
    x = factor_samples(f.dim, radii, protocol.max_directions, protocol.seed)
    empty = np.zeros((0, x.shape[1]))
    coeffs = evaluate_chunked(
        lambda xc, _kc: f.jet(xc, p).coeffs, x, empty, threads
    )
    jet = Jet(coeffs, f.dim, p)
    total = 0.0
    for beta in monomial_basis(f.dim, p):
        derivative = np.abs(jet.derivative(beta))
        for alpha in monomial_basis(f.dim, p - sum(beta)):
            weight = np.prod(
                [np.abs(x[i]) ** a for i, a in enumerate(alpha)], axis=0
            )
            total += float((weight * derivative).max())
    return total
