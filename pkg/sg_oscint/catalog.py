"""Built-in phases, amplitudes and test functions.

The Klein–Gordon two-point function Δ₊ comes with closed-form M_φ and
SP_φ membership and with distance-like residuals that vanish exactly on
those sets. Positions are x = (x₀, 𝐱) ∈ ℝ^{1+k}, covariables ξ ∈ ℝ^k,
with k = 3 for "kg4" and k = 1 for the reduced "kg11".
"""
import dataclasses
import math
import re

import numpy as np
import pandas as pd
from scipy.special import hankel1, hankel2, k0

from .compactify import CompactPoint, bracket_jet, japanese_bracket
from .errors import DimensionError, ValidationError
from .fio import _omega, phase_from_jet_fn
from .jet import dot, norm2
from .models import Protocol, WfProtocol
from .phase import (
    PhaseFn,
    boundary_cells,
    mphi_grid,
    spphi_grid,
    validate_pair,
)
from .symbol import SchwartzFn, SymbolFn, parse_symbol_expr
from .synth import make_fk, make_g
from .utils import chunks, setup_config, setup_logger, sphere_directions
from .wavefront import (
    EvaluableDistribution,
    classical_cells,
    decay_exponent,
    ray_decay,
    wf_scan,
)

config = setup_config()
logger = setup_logger(__name__, config)

ORACLE_TOL = 1e-9
ORACLE_LATTICE = (-1.0, 0.0, 1.0)
FT_WIDTHS = (0.2, 0.1, 0.05)
FT_PROTOCOL = WfProtocol(positions=(-1.0, 0.0, 4.0), cell_spacing=1.0)
LIGHT_CONE_FLOOR = 1e-6
CHUNK = 4096


@dataclasses.dataclass(frozen=True)
class KgSpec:
    """Klein–Gordon data: φ = −x₀ω(ξ) + 𝐱·ξ and a = c/ω(ξ)."""

    mass: float = 1.0
    reduced: bool = False

    def __post_init__(self):
        if self.mass <= 0:
            raise ValidationError(f"mass must be positive, got {self.mass}")

    @property
    def id(self):
        return "kg11" if self.reduced else "kg4"

    @property
    def dims(self):
        return (2, 1) if self.reduced else (4, 3)

    @property
    def constant(self):
        if self.reduced:
            return 1j / (4 * np.pi)
        return 1j / (4 * (2 * np.pi) ** 3)

    def omega(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sqrt(self.mass**2 + np.sum(xi**2, axis=0))

    def phase(self):
        mass = self.mass
        return phase_from_jet_fn(
            lambda x, xi: -x[0] * _omega(xi, mass) + dot(x[1:], xi),
            self.dims,
            (1.0, 1.0),
            self.id,
        )

    def amplitude(self):
        mass, constant = self.mass, self.constant
        return SymbolFn.from_jet_fn(
            lambda x, xi: _omega(xi, mass).reciprocal() * constant,
            self.dims,
            (0.0, -1.0),
            f"a[{self.id}]",
        )

    def truncated_amplitude(self, sigma=1.0):
        """a(ξ)·exp(−|ξ|²/2σ²), rapidly decreasing in ξ."""
        mass, constant = self.mass, self.constant
        return SymbolFn.from_jet_fn(
            lambda x, xi: _omega(xi, mass).reciprocal()
            * (-norm2(xi) / (2 * sigma**2)).exp()
            * constant,
            self.dims,
            (0.0, -math.inf),
            f"a[{self.id}]*gauss({sigma})",
        )

    def to_json(self):
        return {"id": self.id, "mass": self.mass, "dims": list(self.dims)}


KG4 = KgSpec()
KG11 = KgSpec(reduced=True)


def sep_power_phase(n, nu, dims=(1, 1)):
    """⟨x⟩^n⟨ξ⟩^ν, admissible of order (n, ν)."""
    return PhaseFn.from_expr(f"jb(x)^{n}*jb(k)^{nu}", dims, (n, nu))


def sum_bracket_phase(n, nu, d_x=1, d_y=1, s=1):
    """(⟨x⟩ + ⟨y⟩)^n⟨ξ⟩^ν on ℝ^{d_x + d_y} × ℝ^s."""
    return phase_from_jet_fn(
        lambda xy, xi: (
            bracket_jet(xy[:d_x]) + bracket_jet(xy[d_x:])
        ).power(n)
        * bracket_jet(xi).power(nu),
        (d_x + d_y, s),
        (n, nu),
        f"(jb(x)+jb(y))^{n}*jb(k)^{nu}",
    )


def gauss(dim=1):
    return SchwartzFn.from_expr("exp(-norm2(x))", dim)


def gauss_amplitude(dims=(1, 1)):
    return parse_symbol_expr(
        "exp(-norm2(x)-norm2(k))", dims, (-math.inf, -math.inf)
    )


def _split(point):
    coords = point.array
    return coords[0], coords[1:]


def _check_kg_pair(point, same_dims=False):
    x, xi = point
    k = x.dim - 1
    dims = (k + 1, k + 1) if same_dims else (k + 1, k)
    if k < 1:
        raise DimensionError(f"Position dimension {x.dim} is too small")
    validate_pair(point, dims)
    return k


def kg_mphi_residual(point, mass=1.0):
    """Distance-like residual of (x, ξ) to M_φ, zero exactly on the set."""
    _check_kg_pair(point)
    x, xi = point
    x0, xs = _split(x)
    if x.is_finite:
        gap = np.linalg.norm(xs - x0 * xi.array)
        return float(gap / japanese_bracket(x.array))
    if not xi.is_finite:
        return float(np.linalg.norm(xs - x0 * xi.array))
    velocity = xi.array / math.sqrt(mass**2 + float(xi.array @ xi.array))
    return float(np.linalg.norm(xs - x0 * velocity))


def _light_covariable(sign, direction):
    return np.concatenate([[-1.0], sign * direction]) / math.sqrt(2.0)


def _unit(v):
    norm = np.linalg.norm(v)
    if norm == 0:
        unit = np.zeros_like(v)
        unit[0] = 1.0
        return unit
    return v / norm


def _shell_covariable(y, mass):
    """p with ∇_xφ = p on the fibre over the timelike direction y."""
    y0, ys = y[0], y[1:]
    gap = math.sqrt(y0**2 - float(ys @ ys))
    time = -mass * abs(y0)
    return np.concatenate([[time], np.sign(y0) * mass * ys]) / gap


def kg_spphi_residual(point, mass=1.0):
    """Distance-like residual of (y, q) to SP_φ, zero exactly on the set."""
    _check_kg_pair(point, same_dims=True)
    y, q = point
    y0, ys = _split(y)
    if y.is_finite:
        qs = q.array[1:]
        bracket = japanese_bracket(y.array)
        origin = np.linalg.norm(y.array) / bracket + np.linalg.norm(
            q.array - _light_covariable(1.0, _unit(qs))
        )
        if not ys.any():
            return float(origin)
        cone = abs(abs(y0) - np.linalg.norm(ys)) / bracket + np.linalg.norm(
            q.array - _light_covariable(np.sign(y0), _unit(ys))
        )
        return float(min(origin, cone))
    if not q.is_finite:
        target = _light_covariable(np.sign(y0), _unit(ys))
        return float(
            abs(abs(y0) - np.linalg.norm(ys))
            + np.linalg.norm(q.array - target)
        )
    gap = abs(y0) - np.linalg.norm(ys)
    if light_cone_kind(y.array) != "timelike":
        # lightlike or spacelike: the fibre escapes to the boundary
        limit = _light_covariable(np.sign(y0) or 1.0, _unit(ys))
        return float(
            max(-gap, 0.0) + np.linalg.norm(q.ball_coords() - limit)
        )
    target = CompactPoint.finite(_shell_covariable(y.array, mass))
    return float(q.distance(target))


def kg_mphi_oracle(point, mass=1.0):
    residual = kg_mphi_residual(point, mass)
    return "member" if residual <= ORACLE_TOL else "nonmember"


def kg_spphi_oracle(point, mass=1.0):
    residual = kg_spphi_residual(point, mass)
    return "member" if residual <= ORACLE_TOL else "nonmember"


def kg_sp_points(k, mass=1.0):
    """Both SP_φ pairs ((±ω_k, ±𝐤)/√(ω_k² + |𝐤|²), (−ω_k, 𝐤))."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    omega = math.sqrt(mass**2 + float(k @ k))
    position = np.concatenate([[omega], k])
    covariable = CompactPoint.finite(np.concatenate([[-omega], k]))
    norm = np.linalg.norm(position)
    return [
        (CompactPoint.boundary(sign * position / norm), covariable)
        for sign in (1.0, -1.0)
    ]


def kg_mphi_cells(spec=KG4, protocol=None):
    protocol = protocol or Protocol()
    return boundary_cells(spec.dims, ORACLE_LATTICE, ORACLE_LATTICE, protocol)


def kg_spphi_cells(spec=KG4, protocol=None):
    protocol = protocol or Protocol()
    d = spec.dims[0]
    return boundary_cells((d, d), ORACLE_LATTICE, ORACLE_LATTICE, protocol)


def oracle_comparison(grid, residual, mass=1.0, margin=None):
    """Sampled labels against the oracle on cells away from set boundaries.

    A cell is compared when its residual is zero (oracle member) or
    exceeds the margin (3δ by default); member and margin labels both
    count as agreement with an oracle member.
    """
    margin = 3 * Protocol().delta if margin is None else margin
    residuals = [
        residual((x, xi), mass) for x, xi in zip(grid["x"], grid["xi"])
    ]
    frame = grid.copy()
    frame["residual"] = residuals
    frame["oracle"] = np.where(
        frame["residual"] <= ORACLE_TOL, "member", "nonmember"
    )
    frame["compared"] = (frame["residual"] <= ORACLE_TOL) | (
        frame["residual"] > margin
    )
    sampled_member = frame["label"].isin(("member", "margin"))
    frame["agrees"] = sampled_member == (frame["oracle"] == "member")
    compared = frame.loc[frame["compared"]]
    logger.info(
        f"Oracle comparison: {int(compared['agrees'].sum())} of "
        f"{len(compared)} compared cells agree"
    )
    return frame


def kg_two_point(mass=1.0):
    """Reduced Δ₊ in closed form.

    Timelike x gives ±H₀(mτ)/4 with the Hankel function of the second
    (x₀ > 0) or first (x₀ < 0) kind, spacelike x gives iK₀(mρ)/2π.
    The invariant length is floored on the light cone.
    """

    def evaluate(x):
        x0, x1 = x[0], x[1]
        interval = x0**2 - x1**2
        length = np.maximum(np.sqrt(np.abs(interval)), LIGHT_CONE_FLOOR)
        timelike = interval > 0
        values = np.empty(x.shape[1], dtype=complex)
        future = timelike & (x0 > 0)
        past = timelike & (x0 <= 0)
        values[future] = hankel2(0, mass * length[future]) / 4
        values[past] = -hankel1(0, mass * length[past]) / 4
        values[~timelike] = 1j * k0(mass * length[~timelike]) / (2 * np.pi)
        return values

    return EvaluableDistribution(2, evaluate, source=f"Delta+(m={mass})")


def kg_truncated_two_point(mass=1.0, sigma=1.0, nodes=801):
    """Reduced I_φ(a·exp(−ξ²/2σ²)) by the trapezoid rule in ξ."""
    spec = KgSpec(mass, reduced=True)
    xi = np.linspace(-8 * sigma, 8 * sigma, nodes)
    omega = spec.omega(xi[None])
    weights = np.full(nodes, xi[1] - xi[0])
    weights[[0, -1]] /= 2
    weights = weights * spec.constant * np.exp(-(xi**2) / (2 * sigma**2))
    weights = weights / omega

    def evaluate(x):
        values = np.empty(x.shape[1], dtype=complex)
        for part in chunks(x.shape[1], CHUNK):
            phase = -np.outer(x[0, part], omega) + np.outer(x[1, part], xi)
            values[part] = np.exp(1j * phase) @ weights
        return values

    return EvaluableDistribution(
        2, evaluate, source=f"I[kg11, gauss({sigma})](m={mass})"
    )


def mass_shell(width, mass=1.0):
    """Mollified reduced mass-shell measure iπ δ(k₀ + ω(k₁))/ω(k₁)."""

    def evaluate(k):
        omega = np.sqrt(mass**2 + k[1] ** 2)
        gauss = np.exp(-((k[0] + omega) ** 2) / (2 * width**2))
        return 1j * np.pi * gauss / (math.sqrt(2 * np.pi) * width * omega)

    return EvaluableDistribution(
        2, evaluate, source=f"shell(m={mass}, eps={width})"
    )


def shell_distance(k, mass=1.0):
    """Approximate Euclidean distance of k to {k₀ = −ω(k₁)}."""
    omega = math.sqrt(mass**2 + k[1] ** 2)
    return abs(k[0] + omega) / math.sqrt(1.0 + (k[1] / omega) ** 2)


def _shell_normals(k, mass):
    omega = math.sqrt(mass**2 + k[1] ** 2)
    normal = np.array([omega, k[1]]) / math.hypot(omega, k[1])
    return [normal, -normal]


def kg_ft_support_check(widths=FT_WIDTHS, mass=1.0, protocol=None):
    """Classical wave front cells of mollified mass shells.

    Oracle cells are shell positions with covariables normal to the shell.
    For each width the report gives the mean angular distance from oracle
    cells to the nearest singular-or-margin cell at the same position.
    """
    protocol = (protocol or FT_PROTOCOL).resolved(2)
    rows, distances = [], []
    shell_singular = far_regular = True
    for width in sorted(widths, reverse=True):
        cells = classical_cells(mass_shell(width, mass), protocol)
        frame = pd.DataFrame(cells)
        frame["width"] = width
        frame["shell_distance"] = [
            shell_distance(y.array, mass) for y in frame["y"]
        ]
        on_shell = frame.loc[frame["shell_distance"] <= ORACLE_TOL]
        gaps = []
        for coords, cell in on_shell.groupby("y_coords"):
            found = cell.loc[cell["label"].isin(("singular", "margin")), "q"]
            for normal in _shell_normals(np.array(coords), mass):
                angles = [
                    math.acos(float(np.clip(q.array @ normal, -1.0, 1.0)))
                    for q in found
                ]
                gaps.append(min(angles, default=np.pi))
        distances.append(float(np.mean(gaps)) if gaps else math.nan)
        far = frame["shell_distance"] > 2 * protocol.cell_spacing
        far_regular &= bool((frame.loc[far, "label"] == "regular").all())
        rows.append(frame)
        logger.debug(f"Shell width {width}: oracle distance {distances[-1]}")
    smallest = rows[-1]
    on_shell = smallest.loc[smallest["shell_distance"] <= ORACLE_TOL]
    for _coords, cell in on_shell.groupby("y_coords"):
        shell_singular &= bool((cell["label"] == "singular").any())
    monotone = all(b <= a + 1e-12 for a, b in zip(distances, distances[1:]))
    report = {
        "widths": sorted(widths, reverse=True),
        "distances": distances,
        "monotone": monotone,
        "shell_singular": shell_singular,
        "far_regular": far_regular,
        "passed": monotone and shell_singular and far_regular,
        "protocol": protocol.to_json(),
    }
    logger.info(
        f"Mass shell support check (m={mass}): "
        f"{'passed' if report['passed'] else 'failed'}, "
        f"distances {distances}"
    )
    return report, pd.concat(rows, ignore_index=True)


def light_cone_kind(direction, tol=1e-9):
    t, space = direction[0], np.linalg.norm(direction[1:])
    if abs(abs(t) - space) <= tol:
        return "lightlike"
    return "timelike" if abs(t) > space else "spacelike"


def kg_timelike_decay_check(mass=1.0, protocol=None):
    """Reduced Δ₊ decays only by a finite power along timelike rays."""
    protocol = (protocol or WfProtocol()).resolved(2)
    u = kg_two_point(mass)
    directions = sphere_directions(2, protocol.directions)
    samples = [ray_decay(u, direction, protocol) for direction in directions]
    scale = max(max(maxima) for maxima, _radii in samples)
    rows = []
    for direction, (maxima, radii) in zip(directions, samples):
        exponent = decay_exponent(
            maxima, radii, protocol.floor * scale, protocol.fit_shells
        )
        rows.append(
            {
                "direction": CompactPoint.boundary(direction),
                "kind": light_cone_kind(direction),
                "fitted_N": exponent,
                "label": protocol.classify(exponent),
            }
        )
    frame = pd.DataFrame(rows)
    timelike = frame.loc[frame["kind"] == "timelike", "fitted_N"]
    passed = bool(
        len(timelike)
        and np.isfinite(timelike).all()
        and (timelike < protocol.n_threshold).all()
    )
    logger.info(
        f"Timelike decay of Delta+ (m={mass}): exponents "
        f"{timelike.round(3).tolist()}, "
        f"{'finite' if passed else 'not finite'}"
    )
    return passed, frame


def kg_sp_inclusion_check(wf=None, sigma=1.0, mass=1.0, protocol=None,
                          threads=None):
    """WF of the truncated reduced Δ₊ against SP_φ of its phase.

    Every singular cell must lie within one grid cell of a sampled SP_φ
    member or margin cell. Oracle members with a finite covariable must
    be singular or margin; members with boundary covariables carry
    frequencies that the Gaussian in ξ removes and are not required.
    """
    protocol = protocol or Protocol()
    if wf is None:
        wf = wf_scan(kg_truncated_two_point(mass, sigma), threads=threads)
    spec = KgSpec(mass, reduced=True)
    phi = spec.phase()
    mphi = mphi_grid(phi, kg_mphi_cells(spec, protocol), protocol, threads)
    cells = list(zip(wf.frame["y"], wf.frame["q"]))
    sp = spphi_grid(phi, cells, mphi, protocol, threads)
    members = sp.loc[sp["label"].isin(("member", "margin"))]
    outside = wf.far_from(list(zip(members["x"], members["xi"])))
    frame = wf.frame.copy()
    frame["residual"] = [
        kg_spphi_residual(cell, mass) for cell in cells
    ]
    oracle = (frame["residual"] <= ORACLE_TOL) & frame["q_kind"].eq("finite")
    missed = frame.loc[oracle & ~frame["label"].isin(("singular", "margin"))]
    report = {
        "singular": len(wf.singular_cells()),
        "sp_members": len(members),
        "outside_sp": [f"({y}, {q})" for y, q in outside],
        "oracle_members": int(oracle.sum()),
        "missed_members": [
            f"({y}, {q})" for y, q in zip(missed["y"], missed["q"])
        ],
    }
    report["passed"] = not outside and missed.empty
    logger.info(
        f"WF inclusion in SP_phi (m={mass}, sigma={sigma}): "
        f"{len(outside)} singular cells outside, "
        f"{len(missed)} oracle members missed"
    )
    return report, frame


def delta_like(center, spacing=1 / 16):
    """Narrow unit-mass Gaussian at grid scale, standing in for δ_center."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.shape[0]
    norm = (2 * np.pi * spacing**2) ** (d / 2)

    def evaluate(x):
        shift = x - center[:, None]
        return np.exp(-np.sum(shift**2, axis=0) / (2 * spacing**2)) / norm

    def fourier(z):
        return np.exp(
            -1j * np.tensordot(center, z, axes=1)
            - 0.5 * spacing**2 * np.sum(z**2, axis=0)
        )

    return EvaluableDistribution(
        d, evaluate, fourier, source=f"delta~({center.tolist()})"
    )


@dataclasses.dataclass(frozen=True)
class CatalogEntry:
    id: str
    kind: str
    description: str


CATALOG = {
    entry.id: entry
    for entry in (
        CatalogEntry(
            "kg4",
            "phase+amplitude",
            "Klein-Gordon two-point function, d=4, s=3, "
            "phi=-x0*omega(k)+x.k, a=i/(4(2pi)^3 omega)",
        ),
        CatalogEntry(
            "kg11",
            "phase+amplitude",
            "Klein-Gordon two-point function, d=2, s=1, a=i/(4pi omega)",
        ),
        CatalogEntry(
            "sep-power(n,nu)", "phase", "jb(x)^n*jb(k)^nu of order (n,nu)"
        ),
        CatalogEntry(
            "sum-bracket(n,nu)",
            "kernel phase",
            "(jb(x)+jb(y))^n*jb(k)^nu on R^(1+1) x R",
        ),
        CatalogEntry("gauss", "test function", "exp(-|x|^2)"),
        CatalogEntry(
            "fk", "distribution", "Gaussian f_k(x; omega, eta) with transform"
        ),
        CatalogEntry(
            "g-train",
            "distribution",
            "g(x; omega, eta) = sum of f_k, WF = {(omega, eta)}",
        ),
    )
}
PARAMETRIZED = re.compile(
    r"^(?P<name>sep-power|sum-bracket)"
    r"\((?P<n>[-+0-9.e]+),(?P<nu>[-+0-9.e]+)\)$"
)


def catalog_frame():
    return pd.DataFrame([dataclasses.asdict(e) for e in CATALOG.values()])


def kg_spec(name, mass=1.0):
    if name == "kg4":
        return KgSpec(mass)
    if name == "kg11":
        return KgSpec(mass, reduced=True)
    return None


def resolve_phase(text, dims=None, order=None, mass=1.0):
    """Catalog id or expression to PhaseFn."""
    spec = kg_spec(text, mass)
    if spec is not None:
        return spec.phase()
    match = PARAMETRIZED.match(text.replace(" ", ""))
    if match:
        n, nu = float(match["n"]), float(match["nu"])
        if match["name"] == "sep-power":
            return sep_power_phase(n, nu, tuple(dims or (1, 1)))
        return sum_bracket_phase(n, nu)
    if dims is None or order is None:
        raise ValidationError(
            f"Phase expression {text!r} needs dims and order"
        )
    return PhaseFn.from_expr(text, tuple(dims), tuple(order))


def resolve_amplitude(text, dims=None, order=None, mass=1.0):
    spec = kg_spec(text, mass)
    if spec is not None:
        return spec.amplitude()
    if dims is None or order is None:
        raise ValidationError(
            f"Amplitude expression {text!r} needs dims and order"
        )
    return parse_symbol_expr(text, tuple(dims), tuple(order))


def resolve_testfn(text, dim):
    if text in ("gauss", "gaussian"):
        return gauss(dim)
    return SchwartzFn.from_expr(text, dim)


def resolve_distribution(name, omega, eta, k=None):
    if name == "fk":
        return make_fk(omega, eta, 0 if k is None else k)
    if name == "g-train":
        return make_g(omega, eta)
    raise ValidationError(f"Unknown catalog distribution {name!r}")
