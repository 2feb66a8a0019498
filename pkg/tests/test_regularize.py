import numpy as np
import pytest

from sg_oscint.errors import RegularizationError
from sg_oscint.phase import PhaseFn
from sg_oscint.regularize import (
    RegularizerP,
    adjoint_residual,
    apply_P_r,
    apply_Q_k,
    apply_Qp_k,
    build_P,
    build_Q,
    build_Qp,
    verify_components,
    x_cone_localizer,
    xi_ball_localizer,
    xi_shell_localizer,
)
from sg_oscint.symbol import parse_symbol_expr, verify_order

IDENTITY_TOL = 1e-8


def random_points(rng, dims, spread=60.0, count=1000):
    d, s = dims
    x = rng.uniform(-spread, spread, size=(d, count))
    xi = rng.uniform(-spread, spread, size=(s, count))
    return x, xi


def test_transpose_identity_bracket_phase(bracket_phase, rng):
    P = build_P(bracket_phase)
    assert P.radius == pytest.approx(33.0)
    x, xi = random_points(rng, (1, 1))
    assert adjoint_residual(P, x, xi) < IDENTITY_TOL


def test_transpose_identity_kg(kg11, rng):
    P = build_P(kg11.phase())
    x, xi = random_points(rng, (2, 1))
    assert adjoint_residual(P, x, xi) < IDENTITY_TOL


def test_non_admissible_phase_refused():
    phi = PhaseFn.from_expr("jb(x)", (1, 1), (1, 1))
    with pytest.raises(RegularizationError):
        build_P(phi)


def test_regularized_symbol_loses_order(bracket_phase):
    P = build_P(bracket_phase)
    a = parse_symbol_expr("1/(jb(x)*jb(k))", (1, 1), (-1, -1))
    for r in (1, 2):
        image = apply_P_r(P, a, r=r)
        assert image.order == (-1 - r, -1 - r)
        verified, _report = verify_order(image)
        assert verified


def test_regularizer_is_identity_inside_cutoff(bracket_phase, rng):
    P = build_P(bracket_phase)
    a = parse_symbol_expr("exp(-norm2(x))*jb(k)", (1, 1), (-1, 1))
    image = apply_P_r(P, a, r=2)
    x, xi = random_points(rng, (1, 1), spread=20.0, count=200)
    np.testing.assert_allclose(image(x, xi), a(x, xi), atol=1e-12)


def test_q_transpose_identity_on_localizer_support(kg11, rng):
    phi = kg11.phase()
    at = np.array([0.0, 3.0])
    localizer = xi_shell_localizer(phi.dims)
    Q = build_Q(phi, localizer, at=at)
    xi = rng.uniform(0.6, 50.0, size=(1, 200)) * rng.choice([-1, 1], 200)
    x = np.broadcast_to(at[:, None], (2, 200))
    assert adjoint_residual(Q, x, xi) < IDENTITY_TOL

    a = kg11.amplitude()
    assert apply_Q_k(Q, a, 2).order == (-2.0, -3.0)


def test_q_refused_at_stationary_points(kg11):
    phi = kg11.phase()
    with pytest.raises(RegularizationError):
        build_Q(phi, xi_shell_localizer(phi.dims), at=np.zeros(2))


def test_shifted_regularizer_refuses_resonant_covariable(bracket_phase):
    localizer = xi_ball_localizer(bracket_phase.dims, 1.0)
    with pytest.raises(RegularizationError):
        build_Qp(bracket_phase, [0.0], localizer)
    with pytest.raises(RegularizationError):
        build_Qp(bracket_phase, [0.0, 1.0], localizer)


def test_regularizer_components_hold_their_orders(kg11):
    P = build_P(kg11.phase())
    symbols = P.component_symbols()
    assert [u.order for u in symbols["u"]] == [(-1.0, 0.0)]
    assert [v.order for v in symbols["v"]] == [(0.0, -1.0)] * 2
    assert symbols["w"].order == (-1.0, -1.0)
    assert len(P.component_reports) == 4
    for report in P.component_reports.values():
        assert not report.table["growth_flag"].any()


def test_component_check_refuses_overstated_phase_order(bracket_phase):
    P = build_P(bracket_phase, verify=False)
    assert P.component_reports == {}
    assert len(verify_components(P)) == 3
    overstated = RegularizerP(
        PhaseFn(bracket_phase.symbol, (2.0, 2.0)), P.radius
    )
    with pytest.raises(RegularizationError):
        verify_components(overstated)


def test_shifted_regularizer_transpose_identity(bracket_phase, rng):
    localizer = xi_ball_localizer(bracket_phase.dims, 1.0)
    Qp = build_Qp(bracket_phase, [10.0], localizer)
    x = rng.uniform(-60.0, 60.0, size=(1, 500))
    xi = rng.uniform(-1.0, 1.0, size=(1, 500))
    assert adjoint_residual(Qp, x, xi) < IDENTITY_TOL

    a = parse_symbol_expr("1/(jb(x)*jb(k))", (1, 1), (-1, -1))
    assert apply_Qp_k(Qp, a, 1).order == (-1.0, -2.0)
    assert apply_Qp_k(Qp, a, 0)(x, xi) == pytest.approx(a(x, xi))


def test_x_cone_localizer():
    localizer = x_cone_localizer((1, 1), [1.0], 0.5, 4.0)
    assert localizer.order == (0.0, 0.0)
    x = np.array([[10.0, 0.0, -10.0]])
    values = localizer(x, np.zeros((1, 3)))
    np.testing.assert_allclose(values, [1.0, 0.0, 0.0], atol=1e-12)
