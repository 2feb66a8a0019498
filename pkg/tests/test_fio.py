import math

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from sg_oscint.catalog import gauss
from sg_oscint.compactify import CompactPoint
from sg_oscint.errors import (
    AdmissibilityError,
    DimensionError,
    ExtensionError,
    OrderError,
    RegularizationError,
    ValidationError,
)
from sg_oscint.fio import (
    HalfOperator,
    IntermediateGrid,
    OscKernelOperator,
    apply_distribution,
    apply_half,
    apply_V_k,
    build_V,
    compose,
    fourier_operator,
    inverse_fourier_operator,
    kg_evolve,
    tensor,
    type_one,
)
from sg_oscint.models import WfProtocol
from sg_oscint.phase import PhaseFn
from sg_oscint.symbol import parse_symbol_expr
from sg_oscint.wavefront import CELL_COLUMNS, WfSet, from_schwartz

DERIVATIVE_STEP = 1e-3


def singular_at_origin():
    """WF with the single classical cell (0, +1)."""
    y, q = CompactPoint.finite([0.0]), CompactPoint.boundary([1.0])
    frame = pd.DataFrame(
        [
            {
                "y": y,
                "q": q,
                "y_kind": y.kind,
                "y_coords": y.coords,
                "q_kind": q.kind,
                "q_coords": q.coords,
                "label": "singular",
                "fitted_N": 1.0,
            }
        ],
        columns=CELL_COLUMNS,
    )
    return WfSet(frame, 1, WfProtocol().resolved(1), "u")


def antipodal_grid(label):
    x, xi = CompactPoint.finite([0.0]), CompactPoint.boundary([-1.0])
    return pd.DataFrame([{"x": x, "xi": xi, "x_kind": x.kind, "label": label}])


def kg_reference(x, t, mass=1.0):
    """(2π)⁻¹∫ e^{ixξ} f̂(ξ) sin(tω)/ω dξ for f = exp(−x²)."""
    xi = np.linspace(-40, 40, 20001)
    omega = np.sqrt(mass**2 + xi**2)
    spectrum = np.sqrt(np.pi) * np.exp(-(xi**2) / 4)
    spectrum = spectrum * np.sin(t * omega) / omega
    return np.array(
        [
            trapezoid(np.exp(1j * p * xi) * spectrum, xi) / (2 * np.pi)
            for p in x
        ]
    )


def test_grid_integrates_gaussian():
    grid = IntermediateGrid(1, 8.0, 513)
    values = np.exp(-grid.mesh[0] ** 2)
    assert grid.integrate(values[None])[0] == pytest.approx(np.sqrt(np.pi))
    plane = IntermediateGrid(2, 8.0, 129)
    values = np.exp(-np.sum(plane.mesh**2, axis=0))
    assert plane.integrate(values[None])[0] == pytest.approx(np.pi)


def test_tensor_orders_output_first():
    g = gauss(1)
    h = gauss(2)
    product = tensor(h, g)
    points = np.array([[0.5], [1.0], [-1.0]])
    expected = g(points[:1]) * h(points[1:])
    np.testing.assert_allclose(product(points), expected)


def test_fourier_operator_is_a_component():
    F = fourier_operator(1)
    assert F.flags["component"]
    assert not F.regular
    assert F.input_dim == F.output_dim == 1


def test_transpose_maps_flags():
    F = fourier_operator(1)
    F.flags = {
        "maps_to_schwartz": True,
        "extends_to_tempered": False,
        "component": True,
    }
    assert F.transpose().flags == {
        "extends_to_tempered": True,
        "maps_to_schwartz": False,
        "component": True,
    }


def test_half_operator_dims_checked():
    phase = PhaseFn.from_expr("x1*k1", (1, 1), (1, 1))
    amplitude = parse_symbol_expr("1", (2, 1), (0, 0))
    with pytest.raises(DimensionError):
        HalfOperator(phase, amplitude)


def test_compose_checks():
    with pytest.raises(DimensionError):
        compose(fourier_operator(2), fourier_operator(1))
    phase = PhaseFn.from_expr("jb(x)*jb(k)", (1, 1), (1, 1))
    amplitude = parse_symbol_expr("1", (1, 1), (0, 0))
    degenerate = HalfOperator(phase, amplitude, name="D")
    with pytest.raises(AdmissibilityError):
        compose(degenerate, fourier_operator(1))


def test_kernel_transpose_swaps_variables():
    phase = PhaseFn.from_expr("x1*k1 + 2*x2*k1", (2, 1), (1, 1))
    amplitude = parse_symbol_expr("jb(x)^-2", (2, 1), (-2, 0))
    op = OscKernelOperator(phase, amplitude, d_x=1)
    transposed = op.transpose()
    assert (transposed.d_x, transposed.d_y) == (1, 1)
    x = np.array([[0.3], [-1.2]])
    xi = np.array([[0.7]])
    assert transposed.phase(x[::-1], xi) == pytest.approx(op.phase(x, xi))
    with pytest.raises(DimensionError):
        OscKernelOperator(phase, amplitude, d_x=2)


def test_kg_evolve_validation():
    f = gauss(1)
    with pytest.raises(ValidationError):
        kg_evolve(f, -1.0)
    with pytest.raises(ValidationError):
        kg_evolve(f, 1.0, mass=0.0)
    with pytest.raises(DimensionError):
        kg_evolve(gauss(2), 1.0)


@pytest.mark.slow
def test_fourier_operator_matches_closed_form():
    image = apply_half(fourier_operator(1), gauss(1), certify=False)
    z = np.array([[0.0, 1.0, 2.5]])
    np.testing.assert_allclose(
        image(z), np.sqrt(np.pi) * np.exp(-z[0] ** 2 / 4), atol=1e-8
    )


@pytest.mark.slow
def test_inverse_after_forward_recovers_input():
    f = gauss(1)
    composite = compose(inverse_fourier_operator(1), fourier_operator(1))
    x = np.array([[0.0, 0.5, 1.5]])
    np.testing.assert_allclose(composite.apply(f)(x), f(x), atol=1e-6)


@pytest.mark.slow
def test_kg_initial_data():
    f = gauss(1)
    x = np.array([[-1.0, 0.0, 0.5, 2.0]])
    np.testing.assert_allclose(kg_evolve(f, 0.0)(x), 0.0, atol=1e-8)
    velocity = kg_evolve(f, DERIVATIVE_STEP)(x) / DERIVATIVE_STEP
    np.testing.assert_allclose(velocity, f(x), atol=1e-4)


@pytest.mark.slow
def test_kg_matches_spectral_solution():
    x = np.array([[-1.0, 0.0, 0.5, 2.0]])
    np.testing.assert_allclose(
        kg_evolve(gauss(1), 1.0)(x), kg_reference(x[0], 1.0), atol=1e-6
    )


@pytest.mark.slow
def test_kg_pde_residual():
    f, t, h = gauss(1), 1.0, 1e-2
    x = np.array([[-1.0 - h, -1.0, -1.0 + h, 0.5 - h, 0.5, 0.5 + h]])
    before, now, after = (kg_evolve(f, s)(x) for s in (t - h, t, t + h))
    u_tt = (after - 2 * now + before) / h**2
    left, centre, right = now[0::3], now[1::3], now[2::3]
    u_xx = (right - 2 * centre + left) / h**2
    residual = u_tt[1::3] - u_xx + centre
    assert np.abs(residual).max() < 1e-3 * np.abs(now).max()


def test_v_transpose_reproduces_exponential(rng):
    V = build_V(fourier_operator(1).phase)
    w = rng.uniform(-40.0, 40.0, size=(1, 300))
    z = rng.uniform(-40.0, 40.0, size=(1, 300))
    total, exp = V.transpose_exp(w, z)
    np.testing.assert_allclose(total, exp, atol=1e-10)


def test_v_powers_gain_covariable_decay(rng):
    V = build_V(fourier_operator(1).phase)
    one = parse_symbol_expr("1", (1, 1), (0, 0))
    w = rng.uniform(-10.0, 10.0, size=(1, 50))
    z = rng.uniform(-10.0, 10.0, size=(1, 50))
    for k in (1, 2):
        image = apply_V_k(V, one, k)
        assert image.order == (0.0, -2.0 * k)
        np.testing.assert_allclose(
            image(w, z), (1 + z[0] ** 2) ** -k, rtol=1e-10
        )
    with pytest.raises(ValueError):
        apply_V_k(V, one, -1)


def test_v_refused_for_non_components():
    with pytest.raises(RegularizationError):
        build_V(PhaseFn.from_expr("jb(x)*jb(k)", (1, 1), (1, 1)))
    with pytest.raises(OrderError):
        build_V(PhaseFn.from_expr("x1*k1*jb(k)", (1, 1), (1, 2)))


def test_kernel_operator_refusals():
    phase = PhaseFn.from_expr("x1*k1 - x2*k1", (2, 1), (1, 1))
    amplitude = parse_symbol_expr("1", (2, 1), (0, 0))
    op = OscKernelOperator(phase, amplitude, d_x=1)
    with pytest.raises(AdmissibilityError):
        op.pairing(gauss(1), gauss(1))
    with pytest.raises(DimensionError):
        op.pairing(gauss(2), gauss(1))
    with pytest.raises(DimensionError):
        op.apply(gauss(2), np.zeros((1, 1)))

    split = OscKernelOperator(
        PhaseFn.from_expr("x1*k1 + x2*k2", (2, 2), (1, 1)),
        parse_symbol_expr("1", (2, 2), (0, 0)),
        d_x=1,
    )
    with pytest.raises(RegularizationError):
        split.apply(gauss(1), np.zeros((1, 1)))


def test_extension_refused_when_antipode_in_sp():
    op = fourier_operator(1)
    u = from_schwartz(gauss(1))
    with pytest.raises(ExtensionError):
        apply_distribution(
            op, u, singular_at_origin(), antipodal_grid("member"), gauss(1)
        )
    with pytest.raises(DimensionError):
        apply_distribution(
            op, u, singular_at_origin(), antipodal_grid("member"), gauss(2)
        )


@pytest.mark.slow
def test_extension_pairs_through_the_transpose():
    value = apply_distribution(
        fourier_operator(1),
        from_schwartz(gauss(1)),
        singular_at_origin(),
        antipodal_grid("nonmember"),
        gauss(1),
    )
    assert value == pytest.approx(2 * np.pi / math.sqrt(5), abs=1e-6)


@pytest.mark.slow
def test_regularized_output_matches_transform():
    z = np.array([[0.0, 1.0, 2.5]])
    values = fourier_operator(1).apply_regularized(gauss(1), z, k=1)
    np.testing.assert_allclose(
        values, np.sqrt(np.pi) * np.exp(-z[0] ** 2 / 4), atol=1e-6
    )


@pytest.mark.slow
def test_kernel_operator_smoothed_convolution():
    op = OscKernelOperator(
        PhaseFn.from_expr("x1*k1 - x2*k1", (2, 1), (1, 1)),
        parse_symbol_expr("exp(-norm2(k))", (2, 1), (0, -math.inf)),
        d_x=1,
    )
    x = np.array([[0.0, 0.5, 1.5]])
    expected = 2 * np.pi / math.sqrt(5) * np.exp(-x[0] ** 2 / 5)
    np.testing.assert_allclose(op.apply(gauss(1), x), expected, atol=1e-6)


@pytest.mark.slow
def test_kernel_operator_pairing():
    op = OscKernelOperator(
        PhaseFn.from_expr("x1*k1 + x2*k2", (2, 2), (1, 1)),
        parse_symbol_expr("exp(-norm2(k))", (2, 2), (0, -math.inf)),
        d_x=1,
    )
    value = op.pairing(gauss(1), gauss(1))
    assert value.value == pytest.approx(4 * np.pi**2 / 5, abs=1e-5)


@pytest.mark.slow
def test_type_one_with_inverse_phase_recovers_input():
    operator = type_one(
        PhaseFn.from_expr("x1*k1", (1, 1), (1, 1)),
        parse_symbol_expr("1", (1, 1), (0, 0)),
    )
    assert operator.name == "ToF"
    x = np.array([[0.0, 0.5, 1.5]])
    np.testing.assert_allclose(
        operator.apply(gauss(1))(x), 2 * np.pi * gauss(1)(x), atol=1e-5
    )
