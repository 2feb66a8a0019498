"""Fourier integral operators built on tempered oscillatory integrals.

Kernel operators carry a phase φ(x, y, ξ) on ℝ^{d_x + d_y} × ℝ^s. Half
operators carry a phase φ(w, z) whose first variable is integrated out
and whose second is the output variable, so A_{yξ} has (w, z) = (y, ξ)
and A_{ξx} has (w, z) = (ξ, x). Composites are evaluated on an
intermediate trapezoid grid.
"""
import dataclasses
import functools

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    AdmissibilityError,
    DimensionError,
    ExtensionError,
    OrderError,
    RegularizationError,
    ValidationError,
)
from .jet import dot, norm2
from .models import Protocol, QuadratureConfig, WfProtocol
from .oscint import OscIntegral, eval_pairing, eval_pointwise
from .phase import PhaseFn, check_admissible
from .symbol import (
    SchwartzFn,
    SymbolFn,
    _batch_points,
    globally_elliptic,
    order_sum,
)
from .utils import chunks, parallel_map, setup_config, setup_logger
from .wavefront import EvaluableDistribution, css_frame, fio_extension_guard

config = setup_config()
logger = setup_logger(__name__, config)

KERNEL_FLAGS = (
    "smooth",
    "schwartz",
    "compact_extension",
    "tempered_extension",
)
TRANSPOSED_FLAGS = {
    "smooth": "compact_extension",
    "schwartz": "tempered_extension",
    "compact_extension": "smooth",
    "tempered_extension": "schwartz",
    "maps_to_schwartz": "extends_to_tempered",
    "extends_to_tempered": "maps_to_schwartz",
    "component": "component",
}
GRID_POINTS = {1: 513, 2: 129}
OUTPUT_CHUNK = 64


def phase_from_jet_fn(fn, dims, order, source=""):
    return PhaseFn(SymbolFn.from_jet_fn(fn, dims, order, source), order)


def _permuted(symbol, perm, dims, order=None):
    """symbol with its variables reordered, new variable i = old perm[i]."""
    inverse = np.argsort(perm)
    d_old, _s_old = symbol.dims

    def evaluator(x, xi, K):
        x, xi = _batch_points(x, xi)
        point = np.concatenate([x, xi])[inverse]
        return symbol.jet(point[:d_old], point[d_old:], K).permute(perm)

    return SymbolFn(
        tuple(dims),
        tuple(order or symbol.order),
        evaluator,
        f"perm{tuple(perm)}[{symbol.source}]",
    )


def _frozen(symbol, fixed, slot, width):
    """symbol with `width` position variables frozen at `fixed`.

    slot 0 freezes the leading position variables, slot 1 the trailing
    ones.
    """
    d, s = symbol.dims
    fixed = np.asarray(fixed, dtype=float).reshape(width)
    keep = (
        tuple(range(width, d + s))
        if slot == 0
        else tuple(range(d - width)) + tuple(range(d, d + s))
    )

    def evaluator(x, xi, K):
        x, xi = _batch_points(x, xi)
        batch = np.broadcast_to(
            fixed.reshape((width,) + (1,) * (x.ndim - 1)),
            (width,) + x.shape[1:],
        )
        parts = [batch, x] if slot == 0 else [x, batch]
        jet = symbol.jet(np.concatenate(parts), xi, K)
        return jet.restrict(keep)

    return SymbolFn(
        (d - width, s),
        symbol.order,
        evaluator,
        f"{symbol.source}|{fixed.tolist()}",
    )


def tensor(f, g):
    """(g ⊗ f)(x, y) = g(x) f(y), output variable first."""
    n = g.dim + f.dim

    def evaluator(points, K):
        points = np.asarray(points, dtype=float)
        left = g.jet(points[: g.dim], K).embed(n, 0)
        right = f.jet(points[g.dim :], K).embed(n, g.dim)
        return left * right

    return SchwartzFn(n, evaluator, f"({g.source}) x ({f.source})")


def _bounded_samples(k):
    """The origin and the unit coordinate vectors of ℝ^k."""
    eye = np.eye(k)
    return [np.zeros(k)] + [sign * row for row in eye for sign in (1, -1)]


@dataclasses.dataclass
class OscKernelOperator:
    """Af(x) = ∬ e^{iφ(x,y,ξ)} a(x,y,ξ) f(y) dy dξ with kernel I_φ(a)."""

    phase: PhaseFn
    amplitude: SymbolFn
    d_x: int
    quadrature: QuadratureConfig = dataclasses.field(
        default_factory=QuadratureConfig
    )
    protocol: Protocol = dataclasses.field(default_factory=Protocol)
    name: str = "A"

    def __post_init__(self):
        if tuple(self.amplitude.dims) != tuple(self.phase.dims):
            raise DimensionError(
                f"Amplitude dims {self.amplitude.dims} differ from phase "
                f"dims {self.phase.dims}"
            )
        if not 0 < self.d_x < self.phase.dims[0]:
            raise DimensionError(
                f"d_x = {self.d_x} does not split position dimension "
                f"{self.phase.dims[0]}"
            )

    @property
    def d_y(self):
        return self.phase.dims[0] - self.d_x

    @property
    def s(self):
        return self.phase.dims[1]

    def kernel(self):
        if not self.phase.is_admissible:
            report = check_admissible(self.phase, self.protocol)
            if not report.elliptic:
                raise AdmissibilityError(
                    f"Kernel phase {self.phase.source} is not admissible "
                    f"in the joint variable (min ratio "
                    f"{report.min_ratio:.3g})"
                )
        return OscIntegral(
            self.phase,
            self.amplitude,
            quadrature=self.quadrature,
            protocol=self.protocol,
        )

    def _restricted(self, value, slot):
        width = self.d_x if slot == 0 else self.d_y
        phase = PhaseFn(
            _frozen(self.phase.symbol, value, slot, width), self.phase.order
        )
        amplitude = _frozen(self.amplitude, value, slot, width)
        return phase, amplitude

    def _weighted_eta(self, first):
        """⟨(x, y)⟩²|∇φ|² over x or y plus ⟨ξ⟩²|∇_ξφ|²."""
        n, nu = self.phase.order
        picked = slice(0, self.d_x) if first else slice(self.d_x, None)
        return self.phase.derived(
            lambda gx, gk, x, k: (1 + norm2(x)) * norm2(gx[picked])
            + (1 + norm2(k)) * norm2(gk),
            (2 * n, 2 * nu),
            "eta_x" if first else "eta_y",
        )

    def _bounded_condition(self, slot):
        width = self.d_x if slot == 0 else self.d_y
        for value in _bounded_samples(width):
            phase, _amplitude = self._restricted(value, slot)
            if not check_admissible(phase, self.protocol).elliptic:
                return False
        return True

    @functools.cached_property
    def flags(self):
        """The four mapping hypotheses of the kernel operator."""
        n, nu = self.phase.order
        flags = {
            "smooth": self._bounded_condition(0),
            "schwartz": globally_elliptic(
                self._weighted_eta(False), (2 * n, 2 * nu), self.protocol
            ).elliptic,
            "compact_extension": self._bounded_condition(1),
            "tempered_extension": globally_elliptic(
                self._weighted_eta(True), (2 * n, 2 * nu), self.protocol
            ).elliptic,
        }
        logger.info(f"Kernel operator {self.name} flags: {flags}")
        return flags

    def transpose(self):
        """ᵗA, the same kernel with the roles of x and y exchanged."""
        d_x, d_y, s = self.d_x, self.d_y, self.s
        perm = (
            tuple(range(d_x, d_x + d_y))
            + tuple(range(d_x))
            + tuple(range(d_x + d_y, d_x + d_y + s))
        )
        dims = (d_x + d_y, s)
        transposed = OscKernelOperator(
            PhaseFn(
                _permuted(self.phase.symbol, perm, dims), self.phase.order
            ),
            _permuted(self.amplitude, perm, dims),
            d_y,
            self.quadrature,
            self.protocol,
            f"t{self.name}",
        )
        if "flags" in self.__dict__:
            transposed.flags = {
                TRANSPOSED_FLAGS[key]: value
                for key, value in self.flags.items()
            }
        return transposed

    def apply(self, f, x, threads=None):
        """(Af)(x) at the columns of x, one regularized pairing each."""
        if f.dim != self.d_y:
            raise DimensionError(f"Input dim {f.dim} != d_y = {self.d_y}")
        x = np.asarray(x, dtype=float).reshape(self.d_x, -1)

        def at(column):
            phase, amplitude = self._restricted(column, 0)
            report = check_admissible(phase, self.protocol)
            if not report.elliptic:
                raise RegularizationError(
                    f"Phase of {self.name} is not admissible in (y, ξ) at "
                    f"x = {column.tolist()}"
                )
            integral = OscIntegral(
                phase,
                amplitude,
                quadrature=self.quadrature,
                protocol=self.protocol,
            )
            return eval_pairing(integral, f, threads=1).value

        return np.array(parallel_map(at, list(x.T), threads))

    def pairing(self, f, g, threads=None):
        """⟨Af, g⟩ = ⟨K, g ⊗ f⟩."""
        if (f.dim, g.dim) != (self.d_y, self.d_x):
            raise DimensionError(
                f"Test functions of dims {(f.dim, g.dim)} do not fit "
                f"(d_y, d_x) = {(self.d_y, self.d_x)}"
            )
        return eval_pairing(self.kernel(), tensor(f, g), threads)


@dataclasses.dataclass
class IntermediateGrid:
    """Uniform trapezoid grid on [−L, L]^d."""

    dim: int
    half_width: float
    points: int

    @property
    def axis(self):
        return np.linspace(-self.half_width, self.half_width, self.points)

    @property
    def mesh(self):
        axes = [self.axis] * self.dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"))
        return mesh.reshape(self.dim, -1)

    def integrate(self, values):
        """Trapezoid sums over the trailing flattened grid axis."""
        shape = values.shape[:-1] + (self.points,) * self.dim
        values = values.reshape(shape)
        for _ in range(self.dim):
            values = trapezoid(values, self.axis, axis=-1)
        return values


def default_grid(dim, quadrature):
    if dim not in GRID_POINTS:
        raise DimensionError(
            f"Intermediate grids support dimensions 1 and 2, got {dim}"
        )
    return IntermediateGrid(dim, quadrature.box, GRID_POINTS[dim])


@dataclasses.dataclass
class HalfOperator:
    """g ↦ ∫ e^{iφ(w,z)} a(w, z) g(w) dw."""

    phase: PhaseFn
    amplitude: SymbolFn
    quadrature: QuadratureConfig = dataclasses.field(
        default_factory=QuadratureConfig
    )
    protocol: Protocol = dataclasses.field(default_factory=Protocol)
    name: str = "A"

    def __post_init__(self):
        if tuple(self.amplitude.dims) != tuple(self.phase.dims):
            raise DimensionError(
                f"Amplitude dims {self.amplitude.dims} differ from phase "
                f"dims {self.phase.dims}"
            )

    @property
    def dims(self):
        return self.phase.dims

    @property
    def input_dim(self):
        return self.dims[0]

    @property
    def output_dim(self):
        return self.dims[1]

    @functools.cached_property
    def flags(self):
        n, nu = self.phase.order
        flags = {
            "maps_to_schwartz": globally_elliptic(
                self.phase.derived(
                    lambda gx, gk, x, k: norm2(gx),
                    (2 * n - 2, 2 * nu),
                    "grad_w_sq",
                ),
                (2 * n - 2, 2 * nu),
                self.protocol,
            ).elliptic,
            "extends_to_tempered": globally_elliptic(
                self.phase.derived(
                    lambda gx, gk, x, k: norm2(gk),
                    (2 * n, 2 * nu - 2),
                    "grad_z_sq",
                ),
                (2 * n, 2 * nu - 2),
                self.protocol,
            ).elliptic,
            "component": is_component(self.phase, self.protocol),
        }
        logger.info(f"Half operator {self.name} flags: {flags}")
        return flags

    @property
    def regular(self):
        flags = self.flags
        return flags["maps_to_schwartz"] and flags["extends_to_tempered"]

    def transpose(self):
        """ᵗA: integrate over z, output in w."""
        transposed = HalfOperator(
            PhaseFn(
                self.phase.symbol.swapped(), tuple(reversed(self.phase.order))
            ),
            self.amplitude.swapped(),
            self.quadrature,
            self.protocol,
            f"t{self.name}",
        )
        if "flags" in self.__dict__:
            transposed.flags = {
                TRANSPOSED_FLAGS[key]: value
                for key, value in self.flags.items()
            }
        return transposed

    def integral(self, g):
        """I_ψ(b) with ψ(z, w) = φ(w, z) and b = a g, output variable first."""
        phase = PhaseFn(
            self.phase.symbol.swapped(), tuple(reversed(self.phase.order))
        )
        amplitude = self.amplitude.swapped() * g.as_covariable_symbol(
            self.output_dim
        )
        return OscIntegral(
            phase,
            amplitude,
            quadrature=self.quadrature,
            protocol=self.protocol,
        )

    def apply_sampled(self, values, grid, z):
        """∫ e^{iφ(w,z)} a(w,z) g(w) dw by the trapezoid rule on the grid."""
        if grid.dim != self.input_dim:
            raise DimensionError(
                f"Grid dimension {grid.dim} != input dim {self.input_dim}"
            )
        z = np.asarray(z, dtype=float).reshape(self.output_dim, -1)
        w = grid.mesh
        results = []
        for part in chunks(z.shape[1], OUTPUT_CHUNK):
            block = z[:, part]
            count = block.shape[1]
            ws = np.repeat(w, count, axis=1)
            zs = np.tile(block, w.shape[1])
            phase = self.phase(ws, zs)
            amplitude = self.amplitude(ws, zs)
            integrand = (np.exp(1j * phase) * amplitude).reshape(-1, count).T
            results.append(grid.integrate(integrand * values[None, :]))
        return np.concatenate(results)

    def apply_regularized(self, g, z, k=1, threads=None):
        """Output at z with the amplitude a g replaced by V^k(a g)."""
        V = build_V(self.phase, self.protocol)
        lifted = self.amplitude * g.as_symbol(self.output_dim)
        regularized = apply_V_k(V, lifted, k)
        z = np.asarray(z, dtype=float).reshape(self.output_dim, -1)
        integral = OscIntegral(
            PhaseFn(
                self.phase.symbol.swapped(), tuple(reversed(self.phase.order))
            ),
            regularized.swapped(),
            quadrature=self.quadrature,
            protocol=self.protocol,
        )
        return np.array(
            parallel_map(
                lambda column: eval_pointwise(integral, column, threads=1),
                list(z.T),
                threads,
            )
        )


def is_component(phi, protocol=None):
    """⟨∇_wφ⟩ ≳ ⟨z⟩ and ⟨∇_zφ⟩ ≳ ⟨w⟩ for a real phase of order (1, 1)."""
    protocol = protocol or Protocol()
    if tuple(phi.order) != (1.0, 1.0):
        return False
    reports = component_reports(phi, protocol)
    return all(report.elliptic for report in reports)


def component_reports(phi, protocol):
    first = globally_elliptic(
        phi.derived(
            lambda gx, gk, x, k: 1 + norm2(gx), (0.0, 2.0), "bracket_grad_w"
        ),
        (0.0, 2.0),
        protocol,
    )
    second = globally_elliptic(
        phi.derived(
            lambda gx, gk, x, k: 1 + norm2(gk), (2.0, 0.0), "bracket_grad_z"
        ),
        (2.0, 0.0),
        protocol,
    )
    return first, second


def _laplacian(jet, variables):
    return sum(jet.diff(i).diff(i) for i in variables)


@dataclasses.dataclass
class RegularizerV:
    """V = (1 − Δ_w) ∘ D⁻¹ with D = ⟨∇_wφ⟩² − iΔ_wφ."""

    phi: PhaseFn

    @property
    def dims(self):
        return self.phi.dims

    def denominator(self, w, z, order):
        d, _s = self.dims
        phi = self.phi.jet(w, z, order + 2)
        grads = [phi.diff(i) for i in range(d)]
        return 1 + norm2(grads).truncate(order) - 1j * _laplacian(
            phi, range(d)
        )

    def step(self, g, inverse):
        d, _s = self.dims
        h = g * inverse
        return h.truncate(h.order - 2) - _laplacian(h, range(d))

    def transpose_exp(self, w, z):
        """(ᵗV e^{iφ}, e^{iφ}) at the points."""
        d, _s = self.dims
        exp = (1j * self.phi.jet(w, z, 2)).exp()
        total = exp.truncate(0) - _laplacian(exp, range(d))
        return (
            total.value / self.denominator(w, z, 0).value,
            exp.value,
        )


def build_V(phi, protocol=None):
    """V for a phase component, refused when the component bounds fail."""
    protocol = protocol or Protocol()
    if tuple(phi.order) != (1.0, 1.0):
        raise OrderError(
            f"Phase components have order (1, 1), got {phi.order}"
        )
    reports = component_reports(phi, protocol)
    if not all(report.elliptic for report in reports):
        ratios = [report.min_ratio for report in reports]
        logger.error(
            f"{phi.source} is not a phase component: min ratios {ratios}"
        )
        raise RegularizationError(
            f"{phi.source!r} is not a phase component "
            f"(min ratios {ratios}, c0 = {protocol.c0})"
        )
    logger.info(f"Built V for {phi.source}")
    return RegularizerV(phi)


def apply_V_k(V, a, k=1):
    """V^k a; each step gains ⟨z⟩^{-2}."""
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")

    def evaluator(w, z, K):
        top = K + 2 * k
        g = a.jet(w, z, top)
        if k == 0:
            return g
        inverse = V.denominator(w, z, top).reciprocal()
        for _ in range(k):
            g = V.step(g, inverse)
        return g

    order = order_sum(a.order, (0.0, -2.0 * k))
    return SymbolFn(V.dims, order, evaluator, f"V^{k}({a.source})")


def decay_sweep(u, protocol=None):
    """Per-direction decay exponents of |u| on dyadic shells."""
    protocol = protocol or WfProtocol(css_hi=5, shell_samples=16)
    frame = css_frame(u, protocol)
    rapid = bool((frame["label"] == "regular").all())
    return rapid, frame


def apply_half(op, f, k=0, localizer=None, certify=None, threads=None):
    """A f as an evaluable function, one ξ-integral per output point.

    With the maps-to-Schwartz flag set (or certify=True) the output is
    swept for rapid decay and a failure is logged.
    """
    if f.dim != op.input_dim:
        raise DimensionError(f"Input dim {f.dim} != {op.input_dim}")
    integral = op.integral(f)

    def evaluator(z):
        return np.array(
            parallel_map(
                lambda column: eval_pointwise(
                    integral, column, k, localizer, threads=1
                ),
                list(z.T),
                threads,
            ),
            dtype=complex,
        )

    image = EvaluableDistribution(
        op.output_dim, evaluator, source=f"{op.name}({f.source})"
    )
    if certify is None:
        certify = op.flags["maps_to_schwartz"]
    if certify:
        rapid, frame = decay_sweep(image)
        if rapid:
            logger.info(f"{image.source} passes the decay sweep")
        else:
            logger.warning(
                f"{image.source} fails the decay sweep: "
                f"{frame['fitted_N'].tolist()}"
            )
    return image


def _checked(op):
    if isinstance(op, CompositeOperator):
        return op
    flags = op.flags
    if not (op.regular or flags["component"]):
        logger.error(f"{op.name} is neither regular nor a component: {flags}")
        raise AdmissibilityError(
            f"{op.name} has a phase that is neither regular nor a phase "
            f"component: {flags}"
        )
    return op


@dataclasses.dataclass
class CompositeOperator:
    """outer ∘ inner, evaluated through an intermediate grid."""

    outer: object
    inner: object
    grid: IntermediateGrid

    @property
    def input_dim(self):
        return self.inner.input_dim

    @property
    def output_dim(self):
        return self.outer.output_dim

    @property
    def name(self):
        return f"{self.outer.name}o{self.inner.name}"

    def intermediate(self, f, threads=None):
        """inner(f) sampled on the grid."""
        if isinstance(self.inner, CompositeOperator):
            return self.inner.apply(f, threads)(self.grid.mesh)
        return apply_half(self.inner, f, certify=False, threads=threads)(
            self.grid.mesh
        )

    def apply_sampled(self, values, grid, z):
        middle = self.inner.apply_sampled(values, grid, self.grid.mesh)
        return self.outer.apply_sampled(middle, self.grid, z)

    def apply(self, f, threads=None):
        values = self.intermediate(f, threads)
        z_dim = self.output_dim
        return EvaluableDistribution(
            z_dim,
            lambda z: self.outer.apply_sampled(values, self.grid, z),
            source=f"{self.name}({f.source})",
        )


def compose(op2, op1, grid=None):
    """op2 ∘ op1 for regular or component half operators."""
    if op1.output_dim != op2.input_dim:
        raise DimensionError(
            f"Cannot compose: inner output dim {op1.output_dim} != outer "
            f"input dim {op2.input_dim}"
        )
    _checked(op1)
    _checked(op2)
    quadrature = getattr(op1, "quadrature", QuadratureConfig())
    grid = grid or default_grid(op1.output_dim, quadrature)
    return CompositeOperator(op2, op1, grid)


def fourier_operator(d=1, quadrature=None, protocol=None):
    """û(ξ) = ∫ e^{−iy·ξ} f(y) dy."""
    return HalfOperator(
        phase_from_jet_fn(
            lambda y, xi: -dot(y, xi), (d, d), (1.0, 1.0), "-y.xi"
        ),
        SymbolFn.from_jet_fn(lambda y, xi: 1.0, (d, d), (0.0, 0.0), "1"),
        quadrature or QuadratureConfig(),
        protocol or Protocol(),
        "F",
    )


def inverse_fourier_operator(d=1, quadrature=None, protocol=None):
    """f(x) = (2π)^{−d} ∫ e^{ix·ξ} û(ξ) dξ."""
    factor = (2 * np.pi) ** -d
    return HalfOperator(
        phase_from_jet_fn(
            lambda xi, x: dot(xi, x), (d, d), (1.0, 1.0), "xi.x"
        ),
        SymbolFn.from_jet_fn(
            lambda xi, x: factor, (d, d), (0.0, 0.0), f"{factor!r}"
        ),
        quadrature or QuadratureConfig(),
        protocol or Protocol(),
        "Finv",
    )


def type_one(phi, amplitude, quadrature=None, protocol=None, name="T"):
    """f ↦ ∫ e^{iφ(ξ,x)} a(ξ,x) f̂(ξ) dξ as outer ∘ F."""
    d = phi.dims[0]
    quadrature = quadrature or QuadratureConfig()
    protocol = protocol or Protocol()
    outer = HalfOperator(phi, amplitude, quadrature, protocol, name)
    return compose(outer, fourier_operator(d, quadrature, protocol))


def _omega(xi, mass):
    return (mass**2 + norm2(xi)).sqrt()


def kg_half_operators(t, c, mass, d=1, quadrature=None, protocol=None):
    """The two Type-I outer factors of the Klein–Gordon solution."""
    quadrature = quadrature or QuadratureConfig()
    protocol = protocol or Protocol()
    operators = []
    for sign in (1.0, -1.0):
        phase = phase_from_jet_fn(
            lambda xi, x, sign=sign: dot(x, xi)
            + sign * c * t * _omega(xi, mass),
            (d, d),
            (1.0, 1.0),
            f"x.xi {'+' if sign > 0 else '-'} {c * t}*omega",
        )
        amplitude = SymbolFn.from_jet_fn(
            lambda xi, x, sign=sign: _omega(xi, mass).reciprocal()
            * (sign / (2j * (2 * np.pi) ** d)),
            (d, d),
            (0.0, -1.0),
            f"{sign:+g}/(2i omega (2pi)^{d})",
        )
        operators.append(
            HalfOperator(phase, amplitude, quadrature, protocol, "KG")
        )
    return operators


def kg_evolve(f, t, c=1.0, mass=1.0, d=1, grid=None, quadrature=None,
              threads=None):
    """u(t, ·) for u_tt/c² − Δu + m²u = 0, u(0) = 0, u_t(0) = c f."""
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    if mass <= 0:
        raise ValidationError(f"mass must be positive, got {mass}")
    if c <= 0:
        raise ValidationError(f"c must be positive, got {c}")
    if f.dim != d:
        raise DimensionError(f"Initial datum dim {f.dim} != {d}")
    quadrature = quadrature or QuadratureConfig()
    grid = grid or default_grid(d, quadrature)
    transform = apply_half(
        fourier_operator(d, quadrature), f, certify=False, threads=threads
    )
    values = transform(grid.mesh)
    plus, minus = kg_half_operators(t, c, mass, d, quadrature)

    def evaluator(x):
        return plus.apply_sampled(values, grid, x) + minus.apply_sampled(
            values, grid, x
        )

    logger.info(
        f"Klein-Gordon evolution of {f.source} to t = {t} "
        f"(m = {mass}, c = {c}, grid {grid.points}^{d})"
    )
    return EvaluableDistribution(
        d, evaluator, source=f"KG[{f.source}](t={t})"
    )


def apply_distribution(op, u, wf_u, sp_grid, g, grid=None):
    """⟨A u, g⟩ := ⟨u, ᵗA g⟩ for an evaluable distribution input u.

    Refused unless the classical wave front cells of u avoid SP_φ of the
    transposed phase after reflection of the covariable.
    """
    if u.dim != op.input_dim or g.dim != op.output_dim:
        raise DimensionError(
            f"Dimensions of u ({u.dim}) and g ({g.dim}) do not fit "
            f"{op.name} with dims {op.dims}"
        )
    if not fio_extension_guard(wf_u, sp_grid):
        logger.error(f"Extension of {op.name} to {u.source} refused")
        raise ExtensionError(
            f"{u.source or 'u'} has a classical wave front cell (x, p) with "
            f"(x, -p) in SP_phi; {op.name} does not extend to it"
        )
    grid = grid or default_grid(op.input_dim, op.quadrature)
    dual = apply_half(op.transpose(), g, certify=False)
    mesh = grid.mesh
    values = u(mesh) * dual(mesh)
    return complex(grid.integrate(values[None, :])[0])
