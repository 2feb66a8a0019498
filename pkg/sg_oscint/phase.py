import dataclasses
import itertools

import numpy as np
import pandas as pd

from .compactify import (
    CompactPoint,
    ball_points,
    cone_directions,
    japanese_bracket,
    sample_neighborhood,
)
from .errors import (
    AdmissibilityError,
    DimensionError,
    OrderError,
    StandingAssumptionError,
)
from .jet import Jet, norm2
from .models import Protocol, SetSample
from .symbol import (
    SymbolFn,
    _batch_points,
    elliptic_at,
    evaluate_chunked,
    globally_elliptic,
    grid_points,
    parse_symbol_expr,
    product_points,
)
from .utils import (
    parallel_map,
    setup_config,
    setup_logger,
    sphere_directions,
    tangent_basis,
)

config = setup_config()
logger = setup_logger(__name__, config)

REAL_TOL = 1e-12
M_LABELS = {"elliptic": "nonmember", "margin": "margin"}
SP_LABELS = {"below": "member", "margin": "margin", "above": "nonmember"}
FRAME_COLUMNS = [
    "x",
    "xi",
    "x_kind",
    "x_coords",
    "xi_kind",
    "xi_coords",
    "label",
    "min_ratio",
]


@dataclasses.dataclass
class PhaseFn:
    symbol: SymbolFn
    order: tuple
    admissibility: object = None

    def __post_init__(self):
        self.order = tuple(float(o) for o in self.order)
        if min(self.order) <= 0:
            raise OrderError(
                f"Phase order must be positive, got {self.order}"
            )

    @classmethod
    def from_expr(cls, text, dims, order):
        return cls(parse_symbol_expr(text, dims, order), order)

    @property
    def dims(self):
        return self.symbol.dims

    @property
    def source(self):
        return self.symbol.source

    @property
    def is_admissible(self):
        return self.admissibility is not None and self.admissibility.elliptic

    def jet(self, x, xi, order=0):
        return self.symbol.jet(x, xi, order)

    def __call__(self, x, xi):
        return self.symbol(x, xi)

    def gradients(self, x, xi):
        """(∇_xφ, ∇_ξφ) as real arrays of shape (d, ...) and (s, ...)."""
        d, s = self.dims
        phi = self.jet(x, xi, 1)
        grad = np.array([phi.coeffs[1 + i] for i in range(d + s)]).real
        return grad[:d], grad[d:]

    def derived(self, fn, order, name):
        """Symbol built from the gradient jets of φ."""
        d, s = self.dims

        def evaluator(x, xi, K):
            x, xi = _batch_points(x, xi)
            phi = self.jet(x, xi, K + 1)
            jets = Jet.variables(np.concatenate([x, xi]), K)
            grad_x = [phi.diff(i) for i in range(d)]
            grad_xi = [phi.diff(d + j) for j in range(s)]
            return fn(grad_x, grad_xi, jets[:d], jets[d:])

        source = f"{name}[{self.source}]"
        return SymbolFn(self.dims, order, evaluator, source)

    def eta_symbol(self):
        n, nu = self.order
        return self.derived(
            lambda gx, gk, x, k: (1 + norm2(x)) * norm2(gx)
            + (1 + norm2(k)) * norm2(gk),
            (2 * n, 2 * nu),
            "eta",
        )

    def grad_xi_sq_symbol(self):
        n, nu = self.order
        return self.derived(
            lambda gx, gk, x, k: norm2(gk),
            (2 * n, 2 * nu - 2),
            "grad_xi_sq",
        )

    def weighted_grad_x_symbol(self):
        n, nu = self.order
        return self.derived(
            lambda gx, gk, x, k: (1 + norm2(x)) * norm2(gx),
            (2 * n, 2 * nu),
            "weighted_grad_x_sq",
        )


def eta(phi, x, xi):
    x, xi = _batch_points(x, xi)
    grad_x, grad_xi = phi.gradients(x, xi)
    return japanese_bracket(x) ** 2 * np.sum(
        grad_x**2, axis=0
    ) + japanese_bracket(xi) ** 2 * np.sum(grad_xi**2, axis=0)


def check_real(phi, protocol):
    x, xi = grid_points(phi.dims, protocol)
    values = evaluate_chunked(lambda xc, kc: phi(xc, kc), x, xi)
    worst = float(np.abs(np.imag(values)).max())
    if worst > REAL_TOL:
        logger.error(f"Phase {phi.source} has imaginary part {worst:.3g}")
        raise AdmissibilityError(
            f"Phase {phi.source!r} is not real-valued "
            f"(imaginary part up to {worst:.3g})"
        )


def check_admissible(phi, protocol=None, threads=None):
    protocol = protocol or Protocol()
    check_real(phi, protocol)
    n, nu = phi.order
    report = globally_elliptic(
        phi.eta_symbol(), (2 * n, 2 * nu), protocol, threads
    )
    phi.admissibility = report
    logger.info(
        f"Phase {phi.source} admissible: {report.elliptic} "
        f"(min ratio {report.min_ratio:.3g}, {protocol})"
    )
    return report


def validate_pair(point, dims):
    px, pxi = point
    if (px.dim, pxi.dim) != tuple(dims):
        raise DimensionError(
            f"Pair dims {(px.dim, pxi.dim)} do not match {tuple(dims)}"
        )
    if px.is_finite and pxi.is_finite:
        raise ValueError(f"({px}, {pxi}) is not a boundary pair")


def require_admissible(phi, protocol, threads=None):
    """Run the admissibility check once and refuse a failing phase."""
    if phi.admissibility is None:
        check_admissible(phi, protocol, threads)
    if not phi.is_admissible:
        logger.error(f"M_phi requested for non-admissible {phi.source}")
        raise AdmissibilityError(
            f"Phase {phi.source!r} is not admissible "
            f"(min ratio {phi.admissibility.min_ratio:.3g})"
        )


def mphi_classify(phi, point, protocol=None, threads=None):
    """M_φ membership: |∇_ξφ|² fails to be elliptic at the pair."""
    protocol = protocol or Protocol()
    validate_pair(point, phi.dims)
    require_admissible(phi, protocol, threads)
    n, nu = phi.order
    symbol = phi.grad_xi_sq_symbol()
    report = elliptic_at(
        symbol, (2 * n, 2 * nu - 2), point, protocol, threads
    )
    label = M_LABELS.get(report.label, "member")
    return SetSample(point[0], point[1], label, report.min_ratio, protocol)


def lattice(k, values):
    return [
        CompactPoint.finite(coords)
        for coords in itertools.product(values, repeat=k)
    ]


def boundary_directions(k, protocol):
    return [
        CompactPoint.boundary(direction)
        for direction in sphere_directions(
            k, protocol.max_directions, protocol.seed
        )
    ]


def boundary_cells(dims, finite_x, finite_xi, protocol):
    """Cells of ∂(B^d × B^s): (F, B), (B, B) and (B, F) pairs."""
    d, s = dims
    x_dirs = boundary_directions(d, protocol)
    xi_dirs = boundary_directions(s, protocol)
    return (
        list(itertools.product(lattice(d, finite_x), xi_dirs))
        + list(itertools.product(x_dirs, xi_dirs))
        + list(itertools.product(x_dirs, lattice(s, finite_xi)))
    )


def samples_frame(samples):
    return pd.DataFrame.from_records(
        [
            {
                "x": sample.x,
                "xi": sample.xi,
                "x_kind": sample.x.kind,
                "x_coords": sample.x.coords,
                "xi_kind": sample.xi.kind,
                "xi_coords": sample.xi.coords,
                "label": sample.label,
                "min_ratio": sample.min_ratio,
            }
            for sample in samples
        ],
        columns=FRAME_COLUMNS,
    )


def mphi_grid(phi, cells, protocol=None, threads=None):
    protocol = protocol or Protocol()
    require_admissible(phi, protocol, threads)
    samples = parallel_map(
        lambda cell: mphi_classify(phi, cell, protocol, threads=1),
        cells,
        threads,
    )
    frame = samples_frame(samples)
    logger.info(
        f"M_phi grid for {phi.source}: "
        f"{frame['label'].value_counts().to_dict()}"
    )
    return frame


def mphi_projection(grid):
    """π₁ of the member and margin cells."""
    rows = grid.loc[grid["label"].isin(["member", "margin"])]
    seen = {}
    for point in rows["x"]:
        seen.setdefault((point.kind,) + point.coords, point)
    return list(seen.values())


def enclosed_nonmembers(grid, spacing=1.0):
    """Finite-position nonmembers whose lattice neighbours are all members."""
    finite = grid.loc[grid["x_kind"] == "finite"]
    offenders = []
    for _xi, group in finite.groupby("xi_coords"):
        labels = dict(zip(group["x_coords"], group["label"]))
        for coords, label in labels.items():
            if label != "nonmember":
                continue
            around = [
                tuple(c + step for c, step in zip(coords, steps))
                for steps in itertools.product(
                    (-spacing, 0.0, spacing), repeat=len(coords)
                )
                if any(steps)
            ]
            if all(labels.get(n) == "member" for n in around):
                offenders.append(coords)
    return offenders


def _same_point(a, b):
    return a.kind == b.kind and a.distance(b) < 1e-9


def fibre_cells(phi, y, grid, protocol):
    """M_φ member/margin cells over the position y.

    When y is not a position of the grid the fibre is classified afresh
    against the grid's covariable components.
    """
    if any(_same_point(point, y) for point in grid["x"]):
        rows = grid.loc[grid["label"].isin(["member", "margin"])]
        return [
            (row.x, row.xi)
            for row in rows.itertuples()
            if _same_point(row.x, y)
        ]
    covariables = {}
    for point in grid["xi"]:
        if y.is_finite and point.is_finite:
            continue
        covariables.setdefault((point.kind,) + point.coords, point)
    return [
        (y, xi)
        for xi in covariables.values()
        if mphi_classify(phi, (y, xi), protocol, threads=1).is_member
    ]


def fibre_samples(phi, fibre, protocol):
    """∇_xφ and ⟨x⟩^{n-1}⟨ξ⟩^ν over δ-neighbourhoods of the fibre cells."""
    n, nu = phi.order
    radii = protocol.sweep_radii
    grads, bases = [], []
    for px, pxi in fibre:
        xs = sample_neighborhood(px, protocol.delta, radii).T
        xis = sample_neighborhood(pxi, protocol.delta, radii).T
        x, xi = product_points(xs, xis)
        grad_x, _grad_xi = phi.gradients(x, xi)
        grads.append(grad_x)
        bases.append(
            japanese_bracket(x) ** (n - 1) * japanese_bracket(xi) ** nu
        )
    if not grads:
        return np.zeros((phi.dims[0], 0)), np.zeros(0)
    return np.concatenate(grads, axis=1), np.concatenate(bases)


def _cone_projection(g, q, delta, floor):
    """Nearest points to the columns of g in {|p| ≥ floor, ∠(p, q) ≤ δ}."""
    norms = np.linalg.norm(g, axis=0)
    unit = np.where(norms > 0, g / np.where(norms > 0, norms, 1.0), q[:, None])
    inside = q @ unit >= np.cos(delta)
    if q.shape[0] == 1:
        edge = np.broadcast_to(q[:, None], g.shape)
    else:
        tangent = unit - np.outer(q, q @ unit)
        tnorm = np.linalg.norm(tangent, axis=0)
        spare = tangent_basis(q)[0][:, None]
        tangent = np.where(
            tnorm > 1e-12, tangent / np.where(tnorm > 0, tnorm, 1.0), spare
        )
        edge = np.cos(delta) * q[:, None] + np.sin(delta) * tangent
    reach = np.maximum(np.sum(g * edge, axis=0), floor)
    return np.where(inside, unit * np.maximum(norms, floor), edge * reach)


def _ball_projection(g, q, delta):
    offset = g - q[:, None]
    dist = np.linalg.norm(offset, axis=0)
    factor = np.minimum(1.0, delta / np.where(dist > 0, dist, 1.0))
    return q[:, None] + offset * factor


def covariable_candidates(q, protocol):
    """Sampled p near q; boundary q only admits |p| ≥ R."""
    if q.is_finite:
        return ball_points(q.array, protocol.delta).T
    radii = [r for r in protocol.p_radii if r >= protocol.radius]
    radii = np.asarray(radii or [protocol.radius])
    directions = cone_directions(q.array, protocol.delta)
    points = radii[:, None, None] * directions[None]
    return points.reshape(-1, q.dim).T


def sp_min_ratio(grads, bases, q, protocol):
    """min |∇_xφ − p| / (⟨x⟩^{n-1}⟨ξ⟩^ν + |p|) over samples and p near q."""
    if grads.shape[1] == 0:
        return np.inf
    if q.is_finite:
        exact = _ball_projection(grads, q.array, protocol.delta)
    else:
        exact = _cone_projection(
            grads, q.array, protocol.delta, protocol.radius
        )
    best = np.linalg.norm(grads - exact, axis=0) / (
        bases + np.linalg.norm(exact, axis=0)
    )
    candidates = covariable_candidates(q, protocol)
    diff = grads[:, :, None] - candidates[:, None, :]
    ratios = np.linalg.norm(diff, axis=0) / (
        bases[:, None] + np.linalg.norm(candidates, axis=0)[None, :]
    )
    return float(min(best.min(), ratios.min()))


def spphi_classify(phi, point, mphi, protocol=None):
    """SP_φ membership of the pair (y, q) on ∂(B^d × B^d)."""
    protocol = protocol or Protocol()
    y, q = point
    validate_pair(point, (phi.dims[0], phi.dims[0]))
    fibre = fibre_cells(phi, y, mphi, protocol)
    grads, bases = fibre_samples(phi, fibre, protocol)
    ratio = sp_min_ratio(grads, bases, q, protocol)
    label = SP_LABELS[protocol.label(ratio)]
    return SetSample(y, q, label, ratio, protocol)


def spphi_grid(phi, cells, mphi, protocol=None, threads=None):
    """Classify SP_φ cells, sharing fibre samples between equal positions."""
    protocol = protocol or Protocol()
    d = phi.dims[0]
    by_position = {}
    for y, q in cells:
        validate_pair((y, q), (d, d))
        key = (y.kind,) + y.coords
        by_position.setdefault(key, (y, []))[1].append(q)

    def classify_position(entry):
        y, covariables = entry
        fibre = fibre_cells(phi, y, mphi, protocol)
        grads, bases = fibre_samples(phi, fibre, protocol)
        samples = []
        for q in covariables:
            ratio = sp_min_ratio(grads, bases, q, protocol)
            label = SP_LABELS[protocol.label(ratio)]
            samples.append(SetSample(y, q, label, ratio, protocol))
        return samples

    results = parallel_map(
        classify_position, list(by_position.values()), threads
    )
    frame = samples_frame(list(itertools.chain.from_iterable(results)))
    logger.info(
        f"SP_phi grid for {phi.source}: "
        f"{frame['label'].value_counts().to_dict()}"
    )
    return frame


def check_standing_assumption(phi, fibre, protocol):
    """⟨x⟩²|∇_xφ|² must be elliptic at every fibre cell."""
    weighted = phi.weighted_grad_x_symbol()
    n, nu = phi.order
    for cell in fibre:
        report = elliptic_at(weighted, (2 * n, 2 * nu), cell, protocol, 1)
        if not report.elliptic:
            logger.error(
                f"Standing assumption fails for {phi.source} at "
                f"({cell[0]}, {cell[1]}): min ratio {report.min_ratio:.3g}"
            )
            raise StandingAssumptionError(
                f"<x>^2|grad_x phi|^2 is not elliptic at "
                f"({cell[0]}, {cell[1]})"
            )


def local_fibre(phi, y, protocol):
    d, s = phi.dims
    covariables = boundary_directions(s, protocol)
    if not y.is_finite:
        covariables = covariables + lattice(s, (-1.0, 0.0, 1.0))
    return [
        (y, xi)
        for xi in covariables
        if mphi_classify(phi, (y, xi), protocol, threads=1).is_member
    ]


def sp_angle_test(phi, point, alpha, tau_min, protocol=None):
    """Sufficient test for (y, ω) ∉ SP_φ from the direction of ∇_xφ.

    For boundary ω the angle ∠(∇_xφ(x, τθ), ω) must stay ≥ α over the
    M_φ fibre for τ > tau_min, with x near a finite y or along a boundary
    y. For finite ω (boundary y) the test is the lower bound
    |∇_xφ − ω| ≥ c₀(⟨x⟩^{n-1}⟨ξ⟩^ν + |ω|) over the fibre.
    """
    protocol = protocol or Protocol()
    y, omega = point
    validate_pair(point, (phi.dims[0], phi.dims[0]))
    taus = np.array([r for r in protocol.sweep_radii if r > tau_min])
    if taus.size == 0:
        raise ValueError(f"No sweep radius exceeds {tau_min}")
    fibre = local_fibre(phi, y, protocol)
    if not fibre:
        logger.debug(f"Empty M_phi fibre over {y}; angle test vacuous")
        return True
    check_standing_assumption(phi, fibre, protocol)
    n, nu = phi.order
    for px, pxi in fibre:
        xs = sample_neighborhood(px, protocol.delta, taus).T
        xis = sample_neighborhood(pxi, protocol.delta, taus).T
        x, xi = product_points(xs, xis)
        grad_x, _grad_xi = phi.gradients(x, xi)
        if omega.is_finite:
            base = japanese_bracket(x) ** (n - 1)
            base = base * japanese_bracket(xi) ** nu
            gap = np.linalg.norm(grad_x - omega.array[:, None], axis=0)
            bound = protocol.c0 * (base + np.linalg.norm(omega.array))
            if np.any(gap < bound):
                return False
            continue
        norms = np.maximum(np.linalg.norm(grad_x, axis=0), 1e-300)
        cosines = omega.array @ grad_x / norms
        if np.arccos(np.clip(cosines, -1.0, 1.0)).min() < alpha:
            return False
    return True
