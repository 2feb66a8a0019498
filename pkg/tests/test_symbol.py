import math

import numpy as np
import pytest

from sg_oscint.compactify import CompactPoint
from sg_oscint.errors import DimensionError
from sg_oscint.models import Protocol
from sg_oscint.symbol import (
    SchwartzFn,
    elliptic_at,
    globally_elliptic,
    order_max,
    order_sum,
    parse_symbol_expr,
    schwartz_seminorm,
    seminorm_estimate,
    verify_order,
)

BRACKETS = "jb(x)*jb(k)"


def test_order_arithmetic():
    assert order_sum((1, -math.inf), (2, 3)) == (3, -math.inf)
    assert order_max((1, -math.inf), (0, 2)) == (1, 2)


def test_declared_order_verified():
    a = parse_symbol_expr(BRACKETS, (1, 1), (1, 1))
    verified, report = verify_order(a)
    assert verified
    assert not report.growth_pairs


def test_understated_order_flagged():
    a = parse_symbol_expr(BRACKETS, (1, 1), (0, 0))
    verified, report = verify_order(a)
    assert not verified
    assert report.table["growth_flag"].any()


def test_seminorm_monotone_under_refinement():
    a = parse_symbol_expr("cos(x1)*jb(k)^-1", (1, 1), (0, -1))
    coarse = seminorm_estimate(a, protocol=Protocol(grid_hi=8))
    fine = seminorm_estimate(a, protocol=Protocol(grid_hi=12))
    assert fine.estimate >= coarse.estimate


def test_symbol_algebra(rng):
    a = parse_symbol_expr("x1*k1^2", (1, 1), (1, 2))
    b = parse_symbol_expr("jb(k)", (1, 1), (0, 1))
    x = rng.normal(size=(1, 10))
    k = rng.normal(size=(1, 10))
    np.testing.assert_allclose((a + b)(x, k), a(x, k) + b(x, k))
    np.testing.assert_allclose((a * b)(x, k), a(x, k) * b(x, k))
    np.testing.assert_allclose(a.scale(3.0)(x, k), 3 * a(x, k))
    assert (a * b).order == (1, 3)
    assert (a + b).order == (1, 2)
    np.testing.assert_allclose(a.swapped()(k, x), a(x, k))


def test_symbol_derivative():
    a = parse_symbol_expr("x1^2*k1^3", (1, 1), (2, 3))
    x, k = np.array([[2.0]]), np.array([[1.5]])
    value = a.derivative(x, k, (1,), (2,))
    assert float(value[0]) == pytest.approx(2 * 2.0 * 6 * 1.5)


def test_mismatched_dims_rejected():
    a = parse_symbol_expr("x1", (1, 1), (1, 0))
    b = parse_symbol_expr("x1", (1, 2), (1, 0))
    with pytest.raises(DimensionError):
        _ = a + b


def test_schwartz_seminorms_increase_with_p():
    f = SchwartzFn.from_expr("exp(-norm2(x))", 1)
    rhos = [schwartz_seminorm(f, p) for p in range(3)]
    assert rhos[0] == pytest.approx(1.0)
    assert rhos[0] <= rhos[1] <= rhos[2]


def test_schwartz_as_symbol():
    f = SchwartzFn.from_expr("exp(-norm2(x))", 2)
    symbol = f.as_symbol(1)
    assert symbol.dims == (2, 1)
    assert symbol.order == (-math.inf, 0.0)
    x = np.array([[1.0], [0.5]])
    assert symbol(x, np.array([[7.0]]))[0] == pytest.approx(math.exp(-1.25))


def test_global_ellipticity():
    squared = parse_symbol_expr("jb(x)^2*jb(k)^2", (1, 1), (2, 2))
    assert globally_elliptic(squared, (2, 2)).elliptic
    decaying = parse_symbol_expr("jb(x)^2", (1, 1), (2, 2))
    report = globally_elliptic(decaying, (2, 2))
    assert not report.elliptic
    assert report.label == "not-elliptic"


def test_elliptic_at_boundary_pair():
    a = parse_symbol_expr("k1^2", (1, 1), (0, 2))
    covariable_boundary = (
        CompactPoint.finite([0.0]),
        CompactPoint.boundary([1.0]),
    )
    position_boundary = (
        CompactPoint.boundary([1.0]),
        CompactPoint.finite([0.0]),
    )
    assert elliptic_at(a, (0, 2), covariable_boundary).elliptic
    assert not elliptic_at(a, (0, 2), position_boundary).elliptic
    with pytest.raises(ValueError):
        elliptic_at(
            a, (0, 2), (CompactPoint.finite([0.0]), CompactPoint.finite([1.0]))
        )
