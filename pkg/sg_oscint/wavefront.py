"""Sampled cone supports and global wave front sets of evaluable functions.

Cells live on ∂(B^d × B^d): classical cells (finite y, boundary q) are
localized by Gaussian windows, asymptotic cells (boundary ω, q) with
asymptotic cut-offs ψ_R, and decay is read off per-shell maxima of the
windowed discrete transforms.
"""
import dataclasses
import itertools
import math
from typing import Callable

import numpy as np
import pandas as pd
from scipy.fft import fftfreq, fftn, ifftn
from scipy.integrate import trapezoid
from scipy.stats import linregress

from .compactify import (
    CompactPoint,
    angle_between,
    bump,
    cap_bump,
    cone_directions,
)
from .errors import GridMismatchError
from .models import WfProtocol
from .utils import parallel_map, setup_config, setup_logger, sphere_directions

config = setup_config()
logger = setup_logger(__name__, config)

CELL_COLUMNS = [
    "y",
    "q",
    "y_kind",
    "y_coords",
    "q_kind",
    "q_coords",
    "label",
    "fitted_N",
]
KEY_DIGITS = 9


@dataclasses.dataclass
class EvaluableDistribution:
    """Tempered distribution given by a pointwise evaluator on ℝ^d.

    The evaluator maps points of shape (d, N) to complex values (N,);
    `fourier`, when present, evaluates û(ξ) = ∫ e^{-ix·ξ} u(x) dx.
    """

    dim: int
    evaluator: Callable
    fourier: Callable | None = None
    growth: float = 0.0
    source: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(self.dim, -1)
        return np.asarray(self.evaluator(flat), dtype=complex).reshape(
            x.shape[1:]
        )

    @property
    def has_fourier(self):
        return self.fourier is not None

    def transform(self, xi):
        if self.fourier is None:
            raise ValueError(f"{self.source or 'u'} has no Fourier evaluator")
        xi = np.asarray(xi, dtype=float)
        flat = xi.reshape(self.dim, -1)
        return np.asarray(self.fourier(flat), dtype=complex).reshape(
            xi.shape[1:]
        )

    def dual(self):
        """û, whose own transform is (2π)^d u(−·)."""
        if self.fourier is None:
            raise ValueError(f"{self.source or 'u'} has no Fourier evaluator")
        factor = (2 * np.pi) ** self.dim
        evaluator = self.evaluator
        return EvaluableDistribution(
            self.dim,
            self.fourier,
            lambda z: factor * evaluator(-z),
            self.growth,
            f"F[{self.source}]",
        )

    def __add__(self, other):
        if other.dim != self.dim:
            raise GridMismatchError(
                f"Cannot add distributions on R^{self.dim} and R^{other.dim}"
            )
        fourier = None
        if self.has_fourier and other.has_fourier:

            def fourier(z):
                return self.fourier(z) + other.fourier(z)

        return EvaluableDistribution(
            self.dim,
            lambda x: self.evaluator(x) + other.evaluator(x),
            fourier,
            max(self.growth, other.growth),
            f"{self.source} + {other.source}",
        )

    def scale(self, factor):
        fourier = None
        if self.has_fourier:

            def fourier(z):
                return factor * self.fourier(z)

        return EvaluableDistribution(
            self.dim,
            lambda x: factor * self.evaluator(x),
            fourier,
            self.growth,
            f"{factor}*({self.source})",
        )

    def verify_growth(self, protocol=None):
        """Sampled decay exponent is at least −growth (with 1/2 slack)."""
        protocol = (protocol or WfProtocol()).resolved(self.dim)
        exponents = []
        for direction in sphere_directions(self.dim, protocol.directions):
            maxima, radii = ray_decay(self, direction, protocol)
            exponents.append(
                decay_exponent(
                    maxima, radii, protocol.floor, protocol.fit_shells
                )
            )
        return min(exponents) >= -self.growth - 0.5


def zero_distribution(dim):
    return EvaluableDistribution(
        dim,
        lambda x: np.zeros(x.shape[1], dtype=complex),
        lambda z: np.zeros(z.shape[1], dtype=complex),
        source="0",
    )


def from_schwartz(f):
    """A SchwartzFn as an evaluable distribution (no analytic transform)."""
    return EvaluableDistribution(f.dim, f, source=f.source)


def dyadic_shells(lo, hi):
    """[2^j, 2^{j+1}) shells covering [lo, hi), the last one clipped."""
    shells = []
    j = math.floor(math.log2(lo))
    while 2.0**j < hi:
        shells.append((2.0**j, min(2.0 ** (j + 1), hi)))
        j += 1
    return shells


def decay_exponent(values, radii, floor, fit_shells=3):
    """Power-law exponent N in values ~ radii^{-N} over the outer shells.

    Values are clipped to the floor; a last shell at the floor means the
    function is numerically zero there and the exponent is infinite.
    """
    values = np.asarray(values, dtype=float)
    radii = np.asarray(radii, dtype=float)
    keep = ~np.isnan(values)
    values, radii = values[keep], radii[keep]
    if len(values) < 2:
        return math.nan
    clipped = np.maximum(values, floor)
    if clipped[-1] <= floor:
        return math.inf
    tail = slice(-fit_shells, None)
    fit = linregress(np.log(radii[tail]), np.log(clipped[tail]))
    return float(-fit.slope)


def _norm(vectors):
    return np.sqrt(np.sum(vectors**2, axis=0))


def _mesh(center, half_width, points, d):
    spacing = 2 * half_width / points
    axis = -half_width + spacing * np.arange(points)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"))
    center = np.asarray(center, dtype=float).reshape((d,) + (1,) * d)
    return mesh + center, spacing


def _frequencies(d, points, spacing):
    axis = 2 * np.pi * fftfreq(points, spacing)
    return np.stack(np.meshgrid(*([axis] * d), indexing="ij"))


def _cone_mask(vectors, direction, half_angle):
    radius = _norm(vectors)
    cosine = np.tensordot(np.asarray(direction), vectors, axes=1) / np.where(
        radius > 0, radius, 1.0
    )
    return (radius > 0) & (cosine >= np.cos(half_angle) - 1e-12)


def shell_maxima(values, radius, mask, shells):
    maxima = []
    for lo, hi in shells:
        selected = mask & (radius >= lo) & (radius < hi)
        maxima.append(
            float(values[selected].max()) if selected.any() else math.nan
        )
    return maxima


def _half_angle(d, protocol):
    return np.pi / 4 if d == 1 else np.pi / protocol.directions


def _cap_angle(d, protocol):
    return np.pi / 2 if d == 1 else 2 * np.pi / protocol.directions


def box_taper(radius, box, taper):
    """≡1 for |x| ≤ taper·box, ≡0 at the box edge."""
    return bump(0.5 + 0.5 * (radius - taper * box) / ((1 - taper) * box))


def asymptotic_window(mesh, direction, cutoff, protocol):
    """ψ_R(x) = (1 − bump(|x|/R)) ψ(x/|x|) with a cap around direction."""
    d = mesh.shape[0]
    radius = _norm(mesh)
    theta = mesh / np.where(radius > 0, radius, 1.0)
    return (1.0 - bump(radius / cutoff)) * cap_bump(
        theta, direction, _cap_angle(d, protocol)
    )


def _combine(exponents, protocol):
    labels = [protocol.classify(n) for n in exponents]
    if "regular" in labels:
        label = "regular"
    elif all(label == "singular" for label in labels):
        label = "singular"
    else:
        label = "margin"
    finite = [n for n in exponents if not np.isnan(n)]
    return label, max(finite) if finite else math.nan


def _row(y, q, label, exponent):
    return {
        "y": y,
        "q": q,
        "y_kind": y.kind,
        "y_coords": y.coords,
        "q_kind": q.kind,
        "q_coords": q.coords,
        "label": label,
        "fitted_N": exponent,
    }


def _lattice(values, d):
    return [np.array(p) for p in itertools.product(values, repeat=d)]


def classical_cells(u, protocol, threads=None):
    """Finite positions y against boundary covariables q.

    Each position is localized by a Gaussian of width cell_spacing / 4.
    """
    d = u.dim
    half_width = protocol.local_points * protocol.local_spacing / 2
    directions = sphere_directions(d, protocol.directions)
    positions = _lattice(protocol.positions, d)

    def transform(y):
        mesh, spacing = _mesh(y, half_width, protocol.local_points, d)
        offset = _norm(mesh - y.reshape((d,) + (1,) * d))
        window = np.exp(-8.0 * (offset / protocol.cell_spacing) ** 2)
        return np.abs(fftn(window * u(mesh), workers=1)) * spacing**d

    spectra = parallel_map(transform, positions, threads)
    freqs = _frequencies(d, protocol.local_points, protocol.local_spacing)
    radius = _norm(freqs)
    top = 2.0 ** math.floor(math.log2(np.pi / protocol.local_spacing))
    shells = dyadic_shells(1.0, top)
    lower = [lo for lo, _hi in shells]
    scale = max(float(spectrum.max()) for spectrum in spectra)
    floor = protocol.floor * scale
    masks = [
        _cone_mask(freqs, q, _half_angle(d, protocol)) for q in directions
    ]
    rows = []
    for y, spectrum in zip(positions, spectra):
        for q, mask in zip(directions, masks):
            exponent = decay_exponent(
                shell_maxima(spectrum, radius, mask, shells),
                lower,
                floor,
                protocol.fit_shells,
            )
            rows.append(
                _row(
                    CompactPoint.finite(y),
                    CompactPoint.boundary(q),
                    protocol.classify(exponent),
                    exponent,
                )
            )
    return rows


def asymptotic_cells(u, protocol, threads=None):
    """Boundary positions ω against boundary and finite covariables."""
    d = u.dim
    directions = sphere_directions(d, protocol.directions)
    covariables = _lattice(protocol.finite_covariables, d)
    mesh, spacing = _mesh(np.zeros(d), protocol.box, protocol.points, d)
    radius = _norm(mesh)
    values = u(mesh) * box_taper(radius, protocol.box, protocol.taper)
    freqs = _frequencies(d, protocol.points, spacing)
    fradius = _norm(freqs)
    nyquist = np.pi / spacing
    if protocol.fit_max > nyquist:
        logger.error(
            f"Fit range {protocol.fit_max} exceeds the Nyquist frequency "
            f"{nyquist:.3g}; asymptotic cells become margin"
        )
        fshells = []
    else:
        fshells = dyadic_shells(1.0, protocol.fit_max)
    sshells = dyadic_shells(1.0, protocol.taper * protocol.box)
    f_lower = [lo for lo, _hi in fshells]
    s_lower = [lo for lo, _hi in sshells]
    f_floor = protocol.floor * float(
        np.abs(fftn(values, workers=1)).max() * spacing**d
    )
    s_floor = protocol.floor * float(np.abs(values).max())
    half = _half_angle(d, protocol)
    f_masks = [_cone_mask(freqs, q, half) for q in directions]
    s_masks = [_cone_mask(mesh, omega, half) for omega in directions]
    tasks = list(
        itertools.product(range(len(directions)), protocol.cutoff_radii)
    )

    def scan(task):
        index, cutoff = task
        window = asymptotic_window(mesh, directions[index], cutoff, protocol)
        spectrum = fftn(values * window, workers=1)
        magnitude = np.abs(spectrum) * spacing**d
        boundary = [
            decay_exponent(
                shell_maxima(magnitude, fradius, mask, fshells),
                f_lower,
                f_floor,
                protocol.fit_shells,
            )
            for mask in f_masks
        ]
        finite = []
        for z in covariables:
            band = bump(
                _norm(freqs - z.reshape((d,) + (1,) * d))
                / protocol.frequency_window
            )
            filtered = np.abs(ifftn(band * spectrum, workers=1))
            finite.append(
                decay_exponent(
                    shell_maxima(filtered, radius, s_masks[index], sshells),
                    s_lower,
                    s_floor,
                    protocol.fit_shells,
                )
            )
        return boundary, finite

    results = dict(zip(tasks, parallel_map(scan, tasks, threads)))
    rows = []
    for index, omega in enumerate(directions):
        y = CompactPoint.boundary(omega)
        per_radius = [results[(index, R)] for R in protocol.cutoff_radii]
        for j, q in enumerate(directions):
            label, exponent = _combine(
                [boundary[j] for boundary, _finite in per_radius], protocol
            )
            rows.append(_row(y, CompactPoint.boundary(q), label, exponent))
        for j, z in enumerate(covariables):
            label, exponent = _combine(
                [finite[j] for _boundary, finite in per_radius], protocol
            )
            rows.append(_row(y, CompactPoint.finite(z), label, exponent))
    return rows


def _key(point):
    return point.kind, tuple(round(c, KEY_DIGITS) + 0.0 for c in point.coords)


@dataclasses.dataclass
class WfSet:
    frame: pd.DataFrame
    dim: int
    protocol: WfProtocol
    source: str = ""

    def cells(self, labels=("singular",)):
        selected = self.frame.loc[self.frame["label"].isin(labels)]
        return list(zip(selected["y"], selected["q"]))

    def singular_cells(self):
        return self.cells(("singular",))

    @property
    def is_empty(self):
        return not self.singular_cells()

    def positions(self, labels=("singular",)):
        return sorted({y for y, _q in self.cells(labels)}, key=str)

    def label_of(self, y, q):
        keys = self._index()
        return keys.get((_key(y), _key(q)))

    def _index(self):
        return {
            (_key(y), _key(q)): label
            for y, q, label in zip(
                self.frame["y"], self.frame["q"], self.frame["label"]
            )
        }

    def _close(self, first, second):
        if first.kind != second.kind or first.dim != second.dim:
            return False
        if first.is_finite:
            step = max(
                self.protocol.cell_spacing,
                float(np.max(np.diff(self.protocol.finite_covariables))),
            )
            return bool(np.max(np.abs(first.array - second.array)) <= step)
        step = 0.0 if self.dim == 1 else 2 * np.pi / self.protocol.directions
        return angle_between(first.array, second.array) <= step + 1e-9

    def neighbours(self, cell, labels=("singular", "margin")):
        """Cells with the given labels within one grid cell of cell."""
        y, q = cell
        return [
            (other_y, other_q)
            for other_y, other_q in self.cells(labels)
            if self._close(y, other_y) and self._close(q, other_q)
        ]

    def far_from(self, pairs, labels=("singular",)):
        """Cells with the given labels more than one grid cell from pairs."""
        return [
            (y, q)
            for y, q in self.cells(labels)
            if not any(
                self._close(y, x) and self._close(q, xi) for x, xi in pairs
            )
        ]

    def map_fourier(self):
        """Relabel every cell (p, q) as (q, −p)."""
        rows = []
        for row in self.frame.itertuples():
            y = row.q
            q = (
                CompactPoint.finite(-row.y.array)
                if row.y.is_finite
                else CompactPoint.boundary(-row.y.array)
            )
            rows.append(_row(y, q, row.label, row.fitted_N))
        frame = pd.DataFrame(rows, columns=CELL_COLUMNS)
        return WfSet(frame, self.dim, self.protocol, f"F*({self.source})")

    def to_frame(self):
        frame = self.frame.drop(columns=["y", "q"]).copy()
        for column in ("y_coords", "q_coords"):
            frame[column] = frame[column].map(
                lambda coords: " ".join(f"{c:.9g}" for c in coords)
            )
        return frame

    def to_json(self):
        counts = self.frame["label"].value_counts().to_dict()
        return {
            "source": self.source,
            "dim": self.dim,
            "counts": {key: int(value) for key, value in counts.items()},
            "singular": [
                {"y": y.to_json(), "q": q.to_json()}
                for y, q in self.singular_cells()
            ],
            "protocol": self.protocol.to_json(),
        }


def wf_scan(u, protocol=None, threads=None):
    """Sampled global wave front set of an evaluable distribution."""
    protocol = (protocol or WfProtocol()).resolved(u.dim)
    rows = classical_cells(u, protocol, threads)
    rows += asymptotic_cells(u, protocol, threads)
    frame = pd.DataFrame(rows, columns=CELL_COLUMNS)
    wf = WfSet(frame, u.dim, protocol, u.source)
    logger.info(
        f"Wave front scan of {u.source or 'u'}: "
        f"{len(wf.singular_cells())} singular of {len(frame)} cells"
    )
    return wf


def ray_decay(u, direction, protocol):
    """Decay exponent of |u| on the δ-cone around direction, plus maxima."""
    d = u.dim
    rays = cone_directions(direction, _half_angle(d, protocol))
    shells = dyadic_shells(2.0**protocol.css_lo, 2.0 ** (protocol.css_hi + 1))
    maxima = []
    for lo, hi in shells:
        radii = np.linspace(lo, hi, protocol.shell_samples, endpoint=False)
        points = (radii[:, None, None] * rays[None]).reshape(-1, d).T
        maxima.append(float(np.abs(u(points)).max()))
    return maxima, [lo for lo, _hi in shells]


def css_frame(u, protocol=None):
    """Boundary directions with their fitted spatial decay exponents."""
    protocol = (protocol or WfProtocol()).resolved(u.dim)
    directions = sphere_directions(u.dim, protocol.directions)
    samples = [ray_decay(u, omega, protocol) for omega in directions]
    scale = max(max(maxima) for maxima, _radii in samples) or 1.0
    rows = []
    for omega, (maxima, radii) in zip(directions, samples):
        exponent = decay_exponent(
            maxima, radii, protocol.floor * scale, protocol.fit_shells
        )
        rows.append(
            {
                "direction": CompactPoint.boundary(omega),
                "max_abs": max(maxima),
                "fitted_N": exponent,
                "label": protocol.classify(exponent),
            }
        )
    return pd.DataFrame(rows)


def css_scan(u, protocol=None, include_finite=False, threads=None):
    """Cone singular support: boundary directions without rapid decay.

    With include_finite, finite positions of singular classical cells are
    added from the windowed transform scan.
    """
    protocol = (protocol or WfProtocol()).resolved(u.dim)
    frame = css_frame(u, protocol)
    points = list(frame.loc[frame["label"] == "singular", "direction"])
    if include_finite:
        rows = classical_cells(u, protocol, threads)
        finite = {row["y"] for row in rows if row["label"] == "singular"}
        points += sorted(finite, key=str)
    logger.debug(f"Css of {u.source or 'u'}: {[str(p) for p in points]}")
    return points


def csp_scan(u, protocol=None):
    """Boundary directions along which u is not numerically zero."""
    protocol = (protocol or WfProtocol()).resolved(u.dim)
    frame = css_frame(u, protocol)
    scale = float(frame["max_abs"].max())
    if scale == 0:
        return []
    return list(
        frame.loc[frame["max_abs"] > protocol.floor * scale, "direction"]
    )


def fourier_transform_quadrature(u, z, box=24.0, points=None):
    """Trapezoid-rule û(z) = ∫ e^{-ix·z} u(x) dx over [−box, box]^d."""
    d = u.dim
    points = points or {1: 4097, 2: 769}.get(d, 129)
    z = np.asarray(z, dtype=float).reshape(d, -1)
    axis = np.linspace(-box, box, points)
    mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"))
    values = u(mesh)
    results = []
    for column in z.T:
        phase = np.exp(-1j * np.tensordot(column, mesh, axes=1))
        integrand = values * phase
        for _ in range(d):
            integrand = trapezoid(integrand, axis, axis=0)
        results.append(complex(integrand))
    return np.array(results)


def _unmatched(cells, target):
    return [
        (y, q)
        for y, q in cells
        if target.label_of(y, q) is not None and not target.neighbours((y, q))
    ]


def fourier_symmetry_check(u, protocol=None, threads=None):
    """Compare WF(u) mapped by (p, q) ↦ (q, −p) against WF(û)."""
    protocol = (protocol or WfProtocol()).resolved(u.dim)
    protocol = dataclasses.replace(
        protocol, finite_covariables=tuple(protocol.positions)
    )
    forward = wf_scan(u, protocol, threads)
    backward = wf_scan(u.dual(), protocol, threads)
    mapped = forward.map_fourier()
    unmatched_forward = _unmatched(mapped.singular_cells(), backward)
    unmatched_backward = _unmatched(backward.singular_cells(), mapped)
    consistent = not unmatched_forward and not unmatched_backward
    logger.info(
        f"Fourier symmetry of {u.source or 'u'}: "
        f"{'consistent' if consistent else 'inconsistent'}"
    )
    return {
        "consistent": consistent,
        "mapped_singular": [
            {"y": y.to_json(), "q": q.to_json()}
            for y, q in mapped.singular_cells()
        ],
        "dual_singular": [
            {"y": y.to_json(), "q": q.to_json()}
            for y, q in backward.singular_cells()
        ],
        "unmatched_forward": [
            {"y": y.to_json(), "q": q.to_json()} for y, q in unmatched_forward
        ],
        "unmatched_backward": [
            {"y": y.to_json(), "q": q.to_json()}
            for y, q in unmatched_backward
        ],
        "protocol": protocol.to_json(),
    }


def classical_singular(wf):
    return [
        (y, q)
        for y, q in wf.singular_cells()
        if y.is_finite and not q.is_finite
    ]


def pairing_predicate(wf):
    """No classical singular cell (x, p) has its antipode (x, −p) singular."""
    singular = {(_key(y), _key(q)) for y, q in classical_singular(wf)}
    for y, q in classical_singular(wf):
        antipode = CompactPoint.boundary(-q.array)
        if (_key(y), _key(antipode)) in singular:
            logger.debug(f"Antipodal singular pair at {y}: {q} and {antipode}")
            return False
    return True


def fio_extension_guard(wf_T, sp_grid):
    """(x, p) ∈ WF(T) classical implies (x, −p) ∉ SP_φ on the grid.

    Every antipodal cell (x, −p) must be a cell of the SP grid.
    """
    classical = classical_singular(wf_T)
    if not classical:
        return True
    finite_rows = sp_grid.loc[sp_grid["x_kind"] == "finite"]
    if finite_rows.empty or finite_rows["x"].iloc[0].dim != wf_T.dim:
        raise GridMismatchError(
            f"SP grid has no finite positions in dimension {wf_T.dim}"
        )
    grid_cells = {
        (_key(x), _key(xi))
        for x, xi in zip(finite_rows["x"], finite_rows["xi"])
    }
    antipodes = [(y, CompactPoint.boundary(-q.array)) for y, q in classical]
    missing = [
        f"({y}, {p})"
        for y, p in antipodes
        if (_key(y), _key(p)) not in grid_cells
    ]
    if missing:
        raise GridMismatchError(
            f"SP grid lacks the antipodal cells {', '.join(missing)}"
        )
    members = finite_rows.loc[finite_rows["label"].isin(("member", "margin"))]
    member_keys = {
        (_key(x), _key(xi)) for x, xi in zip(members["x"], members["xi"])
    }
    for y, antipode in antipodes:
        if (_key(y), _key(antipode)) in member_keys:
            logger.info(f"Extension refused: ({y}, {antipode}) is in SP_phi")
            return False
    return True


def css_within_projection(css, mphi_grid):
    """Every Css point lies in π₁ of the member or margin cells of M_φ."""
    members = mphi_grid.loc[mphi_grid["label"].isin(("member", "margin"))]
    projection = {_key(x) for x in members["x"]}
    return all(_key(point) in projection for point in css)
