import math

import numpy as np
import pytest

from sg_oscint.compactify import (
    BoundaryNeighborhood,
    CompactPoint,
    bump,
    cap_bump,
    japanese_bracket,
    make_asymptotic_cutoff,
    project,
    sample_neighborhood,
)
from sg_oscint.jet import Jet


def test_bracket_and_projection():
    x = np.array([[3.0, 0.0], [4.0, 0.0]])
    np.testing.assert_allclose(japanese_bracket(x), [math.sqrt(26), 1.0])
    assert np.all(np.linalg.norm(project(x), axis=0) < 1)


def test_bump_profile():
    assert float(bump(0.4)) == 1.0
    assert float(bump(1.2)) == 0.0
    assert float(bump(0.75)) == pytest.approx(0.5)
    values = bump(np.linspace(0.5, 1.0, 11))
    assert np.all(np.diff(values) <= 0)


def test_bump_jet_matches_finite_difference():
    (t,) = Jet.variables(np.array([0.7]), 1)
    h = 1e-6
    slope = (bump(0.7 + h) - bump(0.7 - h)) / (2 * h)
    assert float(bump(t).derivative((1,))) == pytest.approx(
        float(slope), rel=1e-5
    )


def test_boundary_points_must_be_unit():
    with pytest.raises(ValueError):
        CompactPoint.boundary([1.0, 1.0])
    with pytest.raises(ValueError):
        CompactPoint.finite([math.inf])
    with pytest.raises(ValueError):
        CompactPoint("interior", (0.0,))


def test_json_form():
    point = CompactPoint.from_json({"dir": [0.0, 1.0]})
    assert not point.is_finite
    assert point.to_json() == {"dir": [0.0, 1.0]}
    assert CompactPoint.from_json({"finite": [2.0]}).is_finite
    assert str(CompactPoint.finite([0.5, -1.0])) == "F(0.5,-1)"
    with pytest.raises(ValueError):
        CompactPoint.from_json({"point": [1.0]})


def test_far_finite_points_approach_the_boundary():
    far = CompactPoint.finite([1e6])
    assert far.distance(CompactPoint.boundary([1.0])) < 1e-5
    assert far.distance(CompactPoint.boundary([-1.0])) > 1.9


def test_neighborhood_contains():
    hood = BoundaryNeighborhood(center=(1.0, 0.0), angle=0.2, min_radius=10)
    assert hood.contains(CompactPoint.finite([100.0, 5.0]))
    assert not hood.contains(CompactPoint.finite([5.0, 0.0]))
    assert hood.contains(CompactPoint.boundary([1.0, 0.0]))
    assert not hood.contains(CompactPoint.boundary([0.0, 1.0]))


def test_sample_neighborhood_shapes():
    finite = sample_neighborhood(CompactPoint.finite([0.0, 0.0]), 0.1, [])
    assert finite.shape == (9, 2)
    cone = sample_neighborhood(
        CompactPoint.boundary([1.0, 0.0]), 0.1, [1.0, 2.0]
    )
    assert cone.shape == (10, 2)
    angles = np.arctan2(cone[:, 1], cone[:, 0])
    assert np.abs(angles).max() <= 0.1 + 1e-12


def test_asymptotic_cutoff():
    cutoff = make_asymptotic_cutoff(
        lambda theta: cap_bump(theta, [1.0, 0.0], 0.5), 4.0, 2
    )
    x = np.array([[100.0, 1.0, 0.0], [0.0, 0.0, 100.0]])
    np.testing.assert_allclose(cutoff(x), [1.0, 0.0, 0.0], atol=1e-12)
    with pytest.raises(ValueError):
        make_asymptotic_cutoff(lambda theta: 1.0, 0.0, 2)
