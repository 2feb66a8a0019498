import math

import numpy as np
import pytest

from sg_oscint.jet import Jet, dot, monomial_basis, norm2, where


def test_monomial_basis_is_graded():
    basis = monomial_basis(2, 2)
    assert basis[0] == (0, 0)
    assert len(basis) == 6
    assert [sum(gamma) for gamma in basis] == sorted(
        sum(gamma) for gamma in basis
    )


def test_polynomial_derivatives():
    x, y = Jet.variables(np.array([2.0, 3.0]), 3)
    f = x * x * y
    assert float(f.value) == pytest.approx(12.0)
    assert float(f.derivative((1, 0))) == pytest.approx(12.0)
    assert float(f.derivative((0, 1))) == pytest.approx(4.0)
    assert float(f.derivative((1, 1))) == pytest.approx(4.0)
    assert float(f.derivative((2, 0))) == pytest.approx(6.0)
    assert float(f.derivative((2, 1))) == pytest.approx(2.0)
    assert float(f.derivative((3, 0))) == pytest.approx(0.0)


def test_elementary_functions():
    (x,) = Jet.variables(np.array([0.3]), 4)
    f = (x * x).sin()
    t = 0.3
    assert float(f.derivative((1,))) == pytest.approx(2 * t * math.cos(t**2))
    assert float(f.derivative((2,))) == pytest.approx(
        2 * math.cos(t**2) - 4 * t**2 * math.sin(t**2)
    )
    assert float(x.exp().derivative((4,))) == pytest.approx(math.exp(t))
    assert float(x.log().derivative((2,))) == pytest.approx(-1 / t**2)
    assert float(x.reciprocal().derivative((2,))) == pytest.approx(
        2 / t**3
    )
    bracket = (1 + x * x).sqrt()
    assert float(bracket.derivative((1,))) == pytest.approx(
        t / math.sqrt(1 + t**2)
    )


def test_gradient_matches_central_differences(rng):
    points = rng.uniform(-3, 3, size=(2, 50))

    def f(x, y):
        return np.sqrt(1 + x**2 + y**2) * np.cos(x * y)

    x, y = Jet.variables(points, 1)
    jet = (1 + x * x + y * y).sqrt() * (x * y).cos()
    h = 1e-5
    dx = (f(points[0] + h, points[1]) - f(points[0] - h, points[1])) / (2 * h)
    dy = (f(points[0], points[1] + h) - f(points[0], points[1] - h)) / (2 * h)
    np.testing.assert_allclose(jet.value, f(*points), rtol=1e-12)
    np.testing.assert_allclose(jet.derivative((1, 0)), dx, atol=1e-7)
    np.testing.assert_allclose(jet.derivative((0, 1)), dy, atol=1e-7)


def test_permute_restrict_embed():
    x, y = Jet.variables(np.array([2.0, 3.0]), 2)
    f = x * x * y

    swapped = f.permute((1, 0))
    assert float(swapped.derivative((1, 0))) == pytest.approx(4.0)
    assert float(swapped.derivative((0, 2))) == pytest.approx(6.0)

    in_x = f.restrict((0,))
    assert float(in_x.derivative((1,))) == pytest.approx(12.0)
    assert float(in_x.derivative((2,))) == pytest.approx(6.0)

    wide = f.embed(3, 1)
    assert float(wide.derivative((0, 1, 1))) == pytest.approx(4.0)
    assert float(wide.derivative((1, 0, 0))) == pytest.approx(0.0)


def test_truncate_only_lowers_order():
    (x,) = Jet.variables(np.array([1.0]), 2)
    assert x.truncate(1).order == 1
    with pytest.raises(ValueError):
        x.truncate(3)


def test_mixed_variable_counts_rejected():
    (x,) = Jet.variables(np.array([1.0]), 1)
    y, _z = Jet.variables(np.array([1.0, 2.0]), 1)
    with pytest.raises(ValueError):
        _ = x + y


def test_where_selects_per_point():
    (x,) = Jet.variables(np.array([[1.0, 2.0]]), 1)
    chosen = where(np.array([True, False]), x, 0.0)
    np.testing.assert_allclose(chosen.value, [1.0, 0.0])
    np.testing.assert_allclose(chosen.derivative((1,)), [1.0, 0.0])


def test_norm2_and_dot():
    x, y = Jet.variables(np.array([2.0, 3.0]), 1)
    assert float(norm2([x, y]).value) == pytest.approx(13.0)
    assert float(norm2([x, y]).derivative((0, 1))) == pytest.approx(6.0)
    assert float(dot([x, y], [y, x]).value) == pytest.approx(12.0)
