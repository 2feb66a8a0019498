import math

import numpy as np
import pytest

from sg_oscint.compactify import CompactPoint
from sg_oscint.errors import (
    AdmissibilityError,
    DimensionError,
    OrderError,
    StandingAssumptionError,
)
from sg_oscint.models import Protocol
from sg_oscint.phase import (
    PhaseFn,
    boundary_cells,
    check_admissible,
    check_standing_assumption,
    enclosed_nonmembers,
    eta,
    mphi_classify,
    mphi_grid,
    mphi_projection,
    sp_angle_test,
    sp_min_ratio,
    spphi_classify,
    spphi_grid,
    validate_pair,
)

F = CompactPoint.finite
B = CompactPoint.boundary


def test_phase_order_must_be_positive():
    with pytest.raises(OrderError):
        PhaseFn.from_expr("x1*k1", (1, 1), (0, 1))


def test_bracket_phase_admissible(bracket_phase):
    report = check_admissible(bracket_phase)
    assert report.elliptic
    assert bracket_phase.is_admissible


def test_position_only_phase_not_admissible():
    phi = PhaseFn.from_expr("jb(x)", (1, 1), (1, 1))
    assert not check_admissible(phi).elliptic
    assert not phi.is_admissible


def test_kg_eta_at_origin(kg4, rng):
    phi = kg4.phase()
    xi = rng.normal(size=(3, 20))
    x = np.zeros((4, 20))
    np.testing.assert_allclose(
        eta(phi, x, xi), 1 + 2 * np.sum(xi**2, axis=0), rtol=1e-12
    )


def test_kg_phase_admissible(kg11):
    assert check_admissible(kg11.phase()).elliptic


def test_validate_pair():
    with pytest.raises(ValueError):
        validate_pair((F([0.0]), F([1.0])), (1, 1))
    with pytest.raises(DimensionError):
        validate_pair((F([0.0, 0.0]), B([1.0])), (1, 1))


def test_bracket_phase_mphi(bracket_phase):
    assert mphi_classify(bracket_phase, (B([1.0]), F([0.0]))).is_member
    sample = mphi_classify(bracket_phase, (F([0.0]), B([1.0])))
    assert sample.label == "nonmember"
    assert sample.min_ratio > 0.9


def test_kg_stationary_points_in_mphi(kg4):
    phi = kg4.phase()
    sample = mphi_classify(phi, (F([0.0, 0.0, 0.0, 0.0]), B([1.0, 0, 0])))
    assert sample.label == "member"
    away = mphi_classify(phi, (F([0.0, 1.0, 0.0, 0.0]), B([-1.0, 0, 0])))
    assert away.label == "nonmember"


def test_boundary_cells_cover_three_strata():
    protocol = Protocol()
    cells = boundary_cells((1, 1), (-1.0, 0.0, 1.0), (0.0,), protocol)
    kinds = {(x.kind, xi.kind) for x, xi in cells}
    assert kinds == {
        ("finite", "boundary"),
        ("boundary", "boundary"),
        ("boundary", "finite"),
    }
    assert len(cells) == 3 * 2 + 2 * 2 + 2 * 1


def test_mphi_grid_projection(bracket_phase):
    protocol = Protocol()
    lattice = (-1.0, 0.0, 1.0)
    cells = boundary_cells((1, 1), lattice, lattice, protocol)
    grid = mphi_grid(bracket_phase, cells, protocol)
    members = grid.loc[grid["label"] == "member"]
    assert set(members["xi_coords"]) == {(0.0,)}
    assert set(members["x_kind"]) == {"boundary"}
    projection = mphi_projection(grid)
    assert {str(p) for p in projection} == {"B(1)", "B(-1)"}
    assert enclosed_nonmembers(grid) == []


def test_sp_angle_test_on_kg(kg4):
    phi = kg4.phase()
    light = B(np.array([-1.0, 1.0, 0.0, 0.0]) / math.sqrt(2))
    assert not sp_angle_test(phi, (F([0.0] * 4), light), 0.2, 32.0)
    spatial = B([0.0, 1.0, 0.0, 0.0])
    assert sp_angle_test(phi, (F([5.0, 0.0, 0.0, 0.0]), spatial), 0.2, 32.0)


def test_mphi_refuses_non_admissible_phase():
    phi = PhaseFn.from_expr("jb(x)", (1, 1), (1, 1))
    with pytest.raises(AdmissibilityError):
        mphi_classify(phi, (B([1.0]), F([0.0])))
    assert not phi.is_admissible
    cells = boundary_cells((1, 1), (0.0,), (0.0,), Protocol())
    with pytest.raises(AdmissibilityError):
        mphi_grid(phi, cells)


def test_sp_min_ratio():
    protocol = Protocol()
    grads, bases = np.array([[2.0]]), np.array([1.0])
    assert sp_min_ratio(grads, bases, F([2.0]), protocol) == pytest.approx(
        0.0, abs=1e-12
    )
    assert sp_min_ratio(grads, bases, F([10.0]), protocol) > 0.5
    far = np.array([[100.0]])
    assert sp_min_ratio(far, bases, B([1.0]), protocol) == pytest.approx(
        0.0, abs=1e-12
    )
    assert sp_min_ratio(far, bases, B([-1.0]), protocol) > 0.5
    empty = sp_min_ratio(np.zeros((1, 0)), np.zeros(0), F([0.0]), protocol)
    assert empty == math.inf


def test_bracket_phase_spphi(bracket_phase):
    protocol = Protocol()
    lattice = (-1.0, 0.0, 1.0)
    mphi = mphi_grid(
        bracket_phase, boundary_cells((1, 1), lattice, lattice, protocol)
    )
    assert spphi_classify(bracket_phase, (B([1.0]), F([1.0])), mphi).is_member
    away = spphi_classify(bracket_phase, (B([1.0]), F([-1.0])), mphi)
    assert away.label == "nonmember"

    cells = boundary_cells((1, 1), lattice, lattice, protocol)
    grid = spphi_grid(bracket_phase, cells, mphi, protocol)
    members = grid.loc[grid["label"].isin(("member", "margin"))]
    assert set(zip(members["x_coords"], members["xi_coords"])) == {
        ((1.0,), (1.0,)),
        ((-1.0,), (-1.0,)),
    }
    assert len(grid) == len(cells)


def test_standing_assumption_refusal():
    phi = PhaseFn.from_expr("x1*k1", (1, 1), (1, 1))
    protocol = Protocol()
    regular = [(F([0.0]), B([1.0]))]
    assert check_standing_assumption(phi, regular, protocol) is None
    with pytest.raises(StandingAssumptionError):
        check_standing_assumption(phi, [(B([1.0]), F([0.0]))], protocol)
