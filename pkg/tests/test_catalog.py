import math

import numpy as np
import pytest
from scipy.special import hankel2, k0

from sg_oscint.catalog import (
    CATALOG,
    KG4,
    KG11,
    catalog_frame,
    delta_like,
    kg_ft_support_check,
    kg_mphi_cells,
    kg_mphi_oracle,
    kg_mphi_residual,
    kg_sp_inclusion_check,
    kg_sp_points,
    kg_spphi_cells,
    kg_spphi_oracle,
    kg_spphi_residual,
    kg_timelike_decay_check,
    kg_truncated_two_point,
    kg_two_point,
    light_cone_kind,
    oracle_comparison,
    resolve_amplitude,
    resolve_distribution,
    resolve_phase,
    resolve_testfn,
    shell_distance,
)
from sg_oscint.compactify import CompactPoint
from sg_oscint.errors import DimensionError, ValidationError
from sg_oscint.models import Protocol
from sg_oscint.oscint import OscIntegral, eval_pointwise
from sg_oscint.phase import mphi_grid, spphi_grid
from sg_oscint.wavefront import fourier_transform_quadrature

F = CompactPoint.finite
B = CompactPoint.boundary


@pytest.mark.parametrize("k", [[1.0], [0.0], [1.0, -2.0, 0.5]])
def test_sp_points_are_oracle_members(k):
    for point in kg_sp_points(k):
        assert kg_spphi_residual(point) < 1e-12
        assert kg_spphi_oracle(point) == "member"


def test_mphi_oracle_on_kg4():
    assert kg_mphi_oracle((F([0.0] * 4), B([1.0, 0.0, 0.0]))) == "member"
    away = (F([0.0, 1.0, 0.0, 0.0]), B([-1.0, 0.0, 0.0]))
    assert kg_mphi_residual(away) == pytest.approx(1 / math.sqrt(2))
    assert kg_mphi_oracle(away) == "nonmember"
    with pytest.raises(DimensionError):
        kg_mphi_residual((F([0.0]), B([1.0])))


def test_spphi_oracle_on_light_cone():
    light = B(np.array([1.0, 1.0]) / math.sqrt(2))
    incoming = B(np.array([-1.0, 1.0]) / math.sqrt(2))
    assert kg_spphi_oracle((light, incoming)) == "member"
    assert kg_spphi_oracle((light, light)) == "nonmember"
    assert kg_spphi_oracle((light, F([-1.0, 1.0]))) == "nonmember"


def test_two_point_closed_form():
    u = kg_two_point()
    x = np.array([[0.0, 2.0, -2.0], [1.0, 0.0, 0.0]])
    values = u(x)
    assert values[0] == pytest.approx(1j * k0(1.0) / (2 * np.pi))
    assert values[1] == pytest.approx(hankel2(0, 2.0) / 4)
    assert values[2] == pytest.approx(-np.conj(values[1]))


def test_truncated_two_point_matches_pointwise_integral():
    integral = OscIntegral(KG11.phase(), KG11.truncated_amplitude())
    x = np.array([0.0, 3.0])
    expected = eval_pointwise(integral, x)
    assert kg_truncated_two_point()(x[:, None])[0] == pytest.approx(
        expected, abs=1e-8
    )


def test_light_cone_kind():
    assert light_cone_kind(np.array([1.0, 0.0])) == "timelike"
    assert light_cone_kind(np.array([0.0, 1.0])) == "spacelike"
    assert light_cone_kind(np.array([1.0, -1.0]) / math.sqrt(2)) == "lightlike"


def test_shell_distance():
    assert shell_distance([-math.sqrt(2.0), 1.0]) == pytest.approx(0.0)
    assert shell_distance([0.0, 0.0]) == pytest.approx(1.0)


def test_delta_like_transform():
    u = delta_like([0.5])
    z = np.array([[0.0, 1.0, 3.0]])
    np.testing.assert_allclose(
        u.transform(z), fourier_transform_quadrature(u, z), atol=1e-8
    )


def test_catalog_listing():
    frame = catalog_frame()
    assert list(frame.columns) == ["id", "kind", "description"]
    assert set(frame["id"]) == set(CATALOG)
    assert {"kg4", "kg11", "gauss"} <= set(CATALOG)


def test_resolvers():
    assert resolve_phase("kg11").dims == (2, 1)
    assert resolve_phase("sep-power(2, 1)").order == (2.0, 1.0)
    assert resolve_phase("sum-bracket(1,1)").dims == (2, 1)
    assert resolve_phase("x1*k1", (1, 1), (1, 1)).order == (1.0, 1.0)
    with pytest.raises(ValidationError):
        resolve_phase("x1*k1")
    assert resolve_amplitude("kg4").order == (0.0, -1.0)
    with pytest.raises(ValidationError):
        resolve_amplitude("jb(k)")
    assert resolve_testfn("gauss", 2).dim == 2
    assert resolve_testfn("exp(-2*norm2(x))", 1).dim == 1
    assert resolve_distribution("fk", [1.0], [1.0], 2).dim == 1
    with pytest.raises(ValidationError):
        resolve_distribution("delta", [1.0], [1.0])


@pytest.mark.slow
def test_two_point_decays_by_finite_power_on_timelike_rays():
    passed, frame = kg_timelike_decay_check()
    assert passed
    assert set(frame["kind"]) >= {"timelike", "spacelike"}


@pytest.mark.slow
def test_mass_shell_wave_front():
    report, _frame = kg_ft_support_check()
    assert report["passed"]


@pytest.mark.slow
@pytest.mark.parametrize("spec", [KG11, KG4], ids=["kg11", "kg4"])
def test_sampled_sets_agree_with_oracles(spec):
    protocol = Protocol()
    phi = spec.phase()
    mphi = mphi_grid(phi, kg_mphi_cells(spec, protocol), protocol)
    compared = oracle_comparison(mphi, kg_mphi_residual)
    compared = compared.loc[compared["compared"]]
    assert len(compared) > 0
    assert compared["agrees"].all()

    grid = spphi_grid(phi, kg_spphi_cells(spec, protocol), mphi, protocol)
    frame = oracle_comparison(grid, kg_spphi_residual)
    compared = frame.loc[frame["compared"]]
    assert (compared["oracle"] == "member").any()
    assert compared["agrees"].all()


@pytest.mark.slow
def test_truncated_two_point_wave_front_inside_sp():
    report, frame = kg_sp_inclusion_check()
    assert report["outside_sp"] == []
    assert report["oracle_members"] > 0
    assert report["missed_members"] == []
    assert report["passed"]
    assert {"residual", "label"} <= set(frame.columns)
