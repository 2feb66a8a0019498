import math

import numpy as np
import pandas as pd
import pytest

from sg_oscint.compactify import CompactPoint
from sg_oscint.errors import GridMismatchError
from sg_oscint.models import WfProtocol
from sg_oscint.synth import PrescribedWfSpec, make_fk, make_prescribed
from sg_oscint.wavefront import (
    CELL_COLUMNS,
    EvaluableDistribution,
    WfSet,
    css_scan,
    css_within_projection,
    csp_scan,
    decay_exponent,
    dyadic_shells,
    fio_extension_guard,
    fourier_symmetry_check,
    pairing_predicate,
    wf_scan,
    zero_distribution,
)

F = CompactPoint.finite
B = CompactPoint.boundary


def cell_set(cells):
    """Build a 1-d WfSet from (y, q, label) triples."""
    rows = [
        {
            "y": y,
            "q": q,
            "y_kind": y.kind,
            "y_coords": y.coords,
            "q_kind": q.kind,
            "q_coords": q.coords,
            "label": label,
            "fitted_N": 1.0 if label == "singular" else math.inf,
        }
        for y, q, label in cells
    ]
    frame = pd.DataFrame(rows, columns=CELL_COLUMNS)
    return WfSet(frame, 1, WfProtocol().resolved(1), "test")


def sp_frame(pairs, label="member"):
    return pd.DataFrame(
        [
            {"x": x, "xi": xi, "x_kind": x.kind, "label": label}
            for x, xi in pairs
        ]
    )


def one_sided(x):
    return np.where(x[0] > 0, 1 / (1 + x[0] ** 2), np.exp(-x[0] ** 2))


def test_dyadic_shells():
    assert dyadic_shells(1.0, 8.0) == [(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]
    assert dyadic_shells(1.0, 6.0)[-1] == (4.0, 6.0)


def test_decay_exponent():
    radii = np.array([1.0, 2.0, 4.0, 8.0])
    assert decay_exponent(radii**-3.0, radii, 1e-12) == pytest.approx(3.0)
    assert decay_exponent([1.0, 1e-3, 0.0], radii[:3], 1e-12) == math.inf
    assert math.isnan(decay_exponent([1.0], [1.0], 1e-12))
    assert math.isnan(decay_exponent([math.nan, 1.0], [1.0, 2.0], 1e-12))


def test_distribution_algebra():
    u = make_fk([1.0], [1.0], 1)
    x = np.linspace(-3, 3, 7)[None]
    np.testing.assert_allclose((u + u.scale(2.0))(x), 3 * u(x))
    np.testing.assert_allclose(
        u.dual().transform(x), 2 * np.pi * u(-x), rtol=1e-12
    )
    with pytest.raises(GridMismatchError):
        _ = u + zero_distribution(2)
    plain = EvaluableDistribution(1, lambda x: x[0])
    assert not plain.has_fourier
    with pytest.raises(ValueError):
        plain.dual()


def test_verify_growth():
    quadratic = EvaluableDistribution(1, lambda x: 1 + x[0] ** 2)
    assert not quadratic.verify_growth()
    assert EvaluableDistribution(
        1, lambda x: 1 + x[0] ** 2, growth=2.0
    ).verify_growth()
    assert make_fk([1.0], [1.0], 1).verify_growth()


def test_css_of_one_sided_power_decay():
    u = EvaluableDistribution(1, one_sided)
    assert [str(p) for p in css_scan(u)] == ["B(1)"]


def test_csp_of_one_sided_function():
    u = EvaluableDistribution(
        1, lambda x: np.where(x[0] > 0, 1 / (1 + x[0] ** 2), 0.0)
    )
    assert [str(p) for p in csp_scan(u)] == ["B(1)"]
    assert csp_scan(zero_distribution(1)) == []
    assert css_scan(zero_distribution(1)) == []


def test_wfset_queries():
    wf = cell_set(
        [
            (F([0.0]), B([1.0]), "singular"),
            (F([4.0]), B([1.0]), "margin"),
            (F([8.0]), B([1.0]), "singular"),
            (B([1.0]), B([-1.0]), "regular"),
        ]
    )
    assert len(wf.singular_cells()) == 2
    assert not wf.is_empty
    assert wf.label_of(F([4.0]), B([1.0])) == "margin"
    assert wf.label_of(F([2.0]), B([1.0])) is None
    neighbours = wf.neighbours((F([0.0]), B([1.0])))
    assert (F([4.0]), B([1.0])) in neighbours
    assert (F([8.0]), B([1.0])) not in neighbours
    assert wf.to_json()["counts"] == {"singular": 2, "margin": 1, "regular": 1}
    assert list(wf.to_frame()["y_coords"])[:2] == ["0", "4"]


def test_map_fourier_swaps_position_and_covariable():
    wf = cell_set(
        [(F([2.0]), B([1.0]), "singular"), (B([1.0]), F([0.5]), "margin")]
    )
    mapped = wf.map_fourier()
    assert mapped.label_of(B([1.0]), F([-2.0])) == "singular"
    assert mapped.label_of(F([0.5]), B([-1.0])) == "margin"


def test_pairing_predicate():
    one_sided_wf = cell_set([(F([0.0]), B([1.0]), "singular")])
    assert pairing_predicate(one_sided_wf)
    both = cell_set(
        [
            (F([0.0]), B([1.0]), "singular"),
            (F([0.0]), B([-1.0]), "singular"),
        ]
    )
    assert not pairing_predicate(both)


def test_fio_extension_guard():
    wf = cell_set([(F([0.0]), B([1.0]), "singular")])
    assert not fio_extension_guard(wf, sp_frame([(F([0.0]), B([-1.0]))]))
    outside = sp_frame([(F([0.0]), B([-1.0]))], label="nonmember")
    assert fio_extension_guard(wf, outside)
    assert fio_extension_guard(cell_set([]), sp_frame([]))
    with pytest.raises(GridMismatchError):
        fio_extension_guard(wf, sp_frame([(F([0.0]), B([1.0]))]))
    with pytest.raises(GridMismatchError):
        fio_extension_guard(wf, sp_frame([(F([5.0]), B([-1.0]))]))
    with pytest.raises(GridMismatchError):
        fio_extension_guard(
            wf, sp_frame([(F([0.0, 0.0]), B([-1.0, 0.0]))])
        )


def test_fio_extension_guard_needs_every_antipodal_cell():
    wf = cell_set(
        [
            (F([0.0]), B([1.0]), "singular"),
            (F([4.0]), B([1.0]), "singular"),
        ]
    )
    partial = sp_frame([(F([0.0]), B([-1.0]))], label="nonmember")
    with pytest.raises(GridMismatchError, match="4"):
        fio_extension_guard(wf, partial)
    full = sp_frame(
        [(F([0.0]), B([-1.0])), (F([4.0]), B([-1.0]))], label="nonmember"
    )
    assert fio_extension_guard(wf, full)


def test_css_within_projection():
    grid = pd.DataFrame(
        [
            {"x": B([1.0]), "label": "member"},
            {"x": B([-1.0]), "label": "nonmember"},
        ]
    )
    assert css_within_projection([B([1.0])], grid)
    assert not css_within_projection([B([-1.0])], grid)
    assert css_within_projection([], grid)


def within_one_cell(wf, targets):
    """Singular cells that are neither a target nor next to one."""
    allowed = set()
    for target in targets:
        allowed.update(wf.neighbours(target))
    return [cell for cell in wf.singular_cells() if cell not in allowed]


@pytest.mark.slow
def test_prescribed_asymptotic_cell_is_recovered():
    spec = PrescribedWfSpec(asymptotic=[([1.0], [1.0])])
    wf = wf_scan(make_prescribed(spec))
    target = (B([1.0]), B([1.0]))
    assert wf.label_of(*target) == "singular"
    assert within_one_cell(wf, [target]) == []
    assert not any(y.is_finite for y, _q in wf.singular_cells())


@pytest.mark.slow
def test_prescribed_classical_cell_is_recovered():
    spec = PrescribedWfSpec(classical=[([0.0], [1.0])])
    wf = wf_scan(make_prescribed(spec))
    assert wf.label_of(F([0.0]), B([1.0])) == "singular"
    assert all(y.is_finite for y, _q in wf.singular_cells())


@pytest.mark.slow
def test_prescribed_mixed_cells_are_recovered():
    spec = PrescribedWfSpec(
        asymptotic=[([1.0], [1.0])], classical=[([0.0], [1.0])]
    )
    wf = wf_scan(make_prescribed(spec))
    assert wf.label_of(B([1.0]), B([1.0])) == "singular"
    assert wf.label_of(F([0.0]), B([1.0])) == "singular"
    asymptotic = [(y, q) for y, q in wf.singular_cells() if not y.is_finite]
    assert asymptotic == [(B([1.0]), B([1.0]))]


@pytest.mark.slow
def test_two_asymptotic_cells_in_the_plane():
    spec = PrescribedWfSpec(
        asymptotic=[([1.0, 0.0], [1.0, 0.0]), ([0.0, 1.0], [0.0, -1.0])]
    )
    wf = wf_scan(make_prescribed(spec, dim=2))
    targets = [
        (B([1.0, 0.0]), B([1.0, 0.0])),
        (B([0.0, 1.0]), B([0.0, -1.0])),
    ]
    assert [wf.label_of(*target) for target in targets] == ["singular"] * 2
    assert within_one_cell(wf, targets) == []
    assert not any(y.is_finite for y, _q in wf.singular_cells())


@pytest.mark.slow
def test_zero_distribution_has_empty_wave_front():
    assert wf_scan(zero_distribution(1)).is_empty


@pytest.mark.slow
def test_fourier_symmetry_of_zero_distribution():
    report = fourier_symmetry_check(zero_distribution(1))
    assert report["consistent"]
    assert report["mapped_singular"] == report["dual_singular"] == []
