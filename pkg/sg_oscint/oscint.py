"""Tempered oscillatory integrals ∬ e^{iφ} a f evaluated through P^r."""
import dataclasses
import math

import numpy as np
import pandas as pd
from scipy.integrate import cubature
from scipy.special import gamma

from .errors import DimensionError, OrderError, QuadratureError, TailBoundError
from .models import Protocol, QuadratureConfig
from .phase import PhaseFn
from .regularize import (
    apply_P_r,
    apply_Q_k,
    build_P,
    build_Q,
    xi_ball_localizer,
    xi_shell_localizer,
)
from .symbol import (
    SchwartzFn,
    SymbolFn,
    evaluate_chunked,
    factor_samples,
    order_sum,
    product_points,
    schwartz_seminorm,
    seminorm_estimate,
)
from .utils import dyadic_radii, setup_config, setup_logger, worker_pool

config = setup_config()
logger = setup_logger(__name__, config)

AUTO_EXTRA = 3
DECAY_CANDIDATES = (8.0, 16.0, 24.0, 32.0, 48.0, 64.0)


def choose_r(order, phase_order, dims):
    """Smallest r with m − rn < −d − 1 and μ − rν < −s − 1."""
    n, nu = phase_order
    if n <= 0 or nu <= 0:
        raise OrderError(f"Phase order must be positive, got {phase_order}")
    r = 0
    for value, step, dim in zip(order, (n, nu), dims):
        if value == -math.inf:
            continue
        r = max(r, math.floor((value + dim + 1) / step) + 1)
    return r


def shell_mass(k, radius, decay):
    """∫_{|z| > radius} |z|^{-decay} dz on ℝ^k."""
    if decay <= k:
        return math.inf
    area = 2 * math.pi ** (k / 2) / gamma(k / 2)
    return area * radius ** (k - decay) / (decay - k)


def bracket_mass(k, decay):
    """∫ ⟨z⟩^{-decay} dz on ℝ^k."""
    if decay <= k:
        return math.inf
    return (
        math.pi ** (k / 2) * gamma((decay - k) / 2) / gamma(decay / 2)
    )


def _decays(order_value):
    if order_value == -math.inf:
        return DECAY_CANDIDATES
    return (-order_value,)


def _envelope_points(dims, protocol, box, at=None):
    radii = np.unique(
        np.concatenate(
            [
                np.linspace(0, 2 * box, 65),
                dyadic_radii(0, protocol.grid_hi),
            ]
        )
    )
    d, s = dims
    count = protocol.max_directions
    xis = factor_samples(s, radii, count, protocol.seed)
    if at is not None:
        xs = np.asarray(at, dtype=float).reshape(d, 1)
    else:
        xs = factor_samples(d, radii, count, protocol.seed)
    return product_points(xs, xis)


def envelope_tail(g, order, box, protocol, threads=None, at=None):
    """Sampled-constant tail mass of g outside [−L, L]^{d+s}.

    The envelope C⟨x⟩^{-A}⟨ξ⟩^{-B} uses the decay exponents read off the
    order; an order of −∞ tries several exponents and keeps the smallest
    bound. The complement of the box lies in {|x| ≥ L} ∪ {|ξ| ≥ L}, so
    each half gets its own constant, taken over samples in that half.
    With `at`, x is fixed and only the ξ tail is bounded.
    """
    d, s = g.dims
    x, xi = _envelope_points(g.dims, protocol, box, at)
    values = np.abs(evaluate_chunked(lambda xc, kc: g(xc, kc), x, xi, threads))
    with np.errstate(divide="ignore"):
        log_values = np.log(values)
    log_x = np.log1p(np.sum(x**2, axis=0)) / 2
    log_xi = np.log1p(np.sum(xi**2, axis=0)) / 2
    outer_x = np.linalg.norm(x, axis=0) >= box
    outer_xi = np.linalg.norm(xi, axis=0) >= box

    def sup(mask, A, B):
        if not mask.any():
            return 0.0
        with np.errstate(over="ignore"):
            weighted = log_values + A * log_x + B * log_xi
            return float(np.exp(np.max(weighted[mask])))

    def term(constant, mass):
        return 0.0 if constant == 0.0 else constant * mass

    best = math.inf
    x_decays = (0.0,) if at is not None else _decays(order[0])
    for A in x_decays:
        for B in _decays(order[1]):
            if at is not None:
                tail = term(sup(outer_xi, A, B), shell_mass(s, box, B))
            else:
                tail = term(
                    sup(outer_xi, A, B),
                    bracket_mass(d, A) * shell_mass(s, box, B),
                ) + term(
                    sup(outer_x, A, B),
                    shell_mass(d, box, A) * bracket_mass(s, B),
                )
            best = min(best, tail)
    return best


def _rule(ndim):
    if ndim <= 2:
        return "gk21", 21**ndim
    if ndim <= 4:
        return "genz-malik", 2**ndim + 2 * ndim**2 + 2 * ndim + 1
    raise DimensionError(
        f"Full quadrature supports at most 4 variables, got {ndim}"
    )


def integrate_box(integrand, ndim, quadrature, threads=None):
    """Adaptive cubature of a complex integrand over [−L, L]^ndim.

    integrand maps points of shape (ndim, N) to complex values (N,).
    """
    rule, per_region = _rule(ndim)
    box = quadrature.box

    def split(points):
        values = integrand(np.asarray(points).T)
        return np.stack([values.real, values.imag], axis=-1)

    with worker_pool(threads) as pool:
        result = cubature(
            split,
            np.full(ndim, -box),
            np.full(ndim, box),
            rule=rule,
            rtol=quadrature.rtol,
            atol=quadrature.tol,
            max_subdivisions=quadrature.max_subdivisions,
            workers=pool.map,
        )
    diagnostics = {
        "rule": rule,
        "status": result.status,
        "subdivisions": int(result.subdivisions),
        "error": float(np.hypot(*result.error)),
        "nodes": per_region * len(result.regions),
    }
    if result.status != "converged":
        logger.error(f"Quadrature did not converge: {diagnostics}")
        raise QuadratureError(
            "Adaptive quadrature exhausted its subdivision budget",
            diagnostics,
        )
    return complex(result.estimate[0], result.estimate[1]), diagnostics


@dataclasses.dataclass
class QuadratureResult:
    value: complex
    r_used: int
    tail_bound: float
    nodes: int
    error: float
    box: float

    def __complex__(self):
        return self.value

    def to_json(self):
        return {
            "value_re": self.value.real,
            "value_im": self.value.imag,
            "r_used": self.r_used,
            "tail_bound": self.tail_bound,
            "nodes": self.nodes,
            "error": self.error,
            "box": self.box,
        }


@dataclasses.dataclass
class OscIntegral:
    """I_φ(a) with its regularization exponent and quadrature settings."""

    phi: PhaseFn
    a: SymbolFn
    r: object = "auto"
    quadrature: QuadratureConfig = dataclasses.field(
        default_factory=QuadratureConfig
    )
    protocol: Protocol = dataclasses.field(default_factory=Protocol)
    radius: float | None = None

    def __post_init__(self):
        if tuple(self.a.dims) != tuple(self.phi.dims):
            raise DimensionError(
                f"Amplitude dims {self.a.dims} differ from phase dims "
                f"{self.phi.dims}"
            )
        if self.r != "auto":
            if not isinstance(self.r, int) or self.r < 0:
                raise OrderError(f"r must be 'auto' or >= 0, got {self.r}")
            if self.r < self.base_r:
                raise OrderError(
                    f"r = {self.r} leaves the integrand non-integrable; "
                    f"need r >= {self.base_r}"
                )
        self._P = None

    @property
    def dims(self):
        return self.phi.dims

    @property
    def base_r(self):
        return choose_r(self.a.order, self.phi.order, self.dims)

    @property
    def candidate_rs(self):
        if self.r == "auto":
            return range(self.base_r, self.base_r + AUTO_EXTRA + 1)
        return (self.r,)

    def margin(self, r):
        """(m − rn + d + 1, μ − rν + s + 1); both negative when integrable."""
        (m, mu), (n, nu), (d, s) = self.a.order, self.phi.order, self.dims
        return (m - r * n + d + 1, mu - r * nu + s + 1)

    @property
    def P(self):
        if self._P is None:
            self._P = build_P(self.phi, self.radius, self.protocol)
        return self._P

    def amplitude(self, f, r):
        """P^r(a f) as a symbol."""
        if r == 0:
            return self.a * f.as_symbol(self.dims[1])
        return apply_P_r(self.P, self.a, f, r)

    def with_amplitude(self, a):
        return dataclasses.replace(self, a=a)


def tail_bound(integral, f, r=None, threads=None):
    """Tail mass of e^{iφ} P^r(a f) outside the quadrature box."""
    r = integral.base_r if r is None else r
    g = integral.amplitude(f, r)
    n, nu = integral.phi.order
    mu = order_sum(integral.a.order, (-r * n, -r * nu))[1]
    return envelope_tail(
        g, (-math.inf, mu), integral.quadrature.box, integral.protocol, threads
    )


def _phase_integrand(phi, g):
    def integrand(points):
        d, _s = phi.dims
        x, xi = points[:d], points[d:]
        return np.exp(1j * phi(x, xi)) * g(x, xi)

    return integrand


def eval_pairing(integral, f, threads=None):
    """⟨I_φ(a), f⟩ = ∬ e^{iφ} P^r(a f) dξ dx over the truncated box."""
    if f.dim != integral.dims[0]:
        raise DimensionError(
            f"Test function dim {f.dim} != d = {integral.dims[0]}"
        )
    budget = integral.quadrature.tail_factor * integral.quadrature.tol
    tail = math.inf
    for r in integral.candidate_rs:
        tail = tail_bound(integral, f, r, threads)
        logger.debug(f"Pairing tail bound at r = {r}: {tail:.3g}")
        if tail < budget:
            break
    else:
        logger.error(
            f"Tail bound {tail:.3g} above {budget:.3g} for {integral.a.source}"
        )
        raise TailBoundError(
            f"Certified tail {tail:.3g} exceeds {budget:.3g}; enlarge the "
            f"box or raise r",
            {"tail_bound": tail, "box": integral.quadrature.box, "r": r},
        )
    g = integral.amplitude(f, r)
    value, diagnostics = integrate_box(
        _phase_integrand(integral.phi, g),
        sum(integral.dims),
        integral.quadrature,
        threads,
    )
    logger.info(
        f"Pairing of {integral.a.source} with {f.source}: {value:.12g} "
        f"(r = {r}, tail {tail:.3g})"
    )
    return QuadratureResult(
        value, r, tail, diagnostics["nodes"], diagnostics["error"],
        integral.quadrature.box,
    )


def pointwise_amplitude(integral, x, k=0, localizer=None):
    """Q^k(ψ a) + (1 − ψ) a at the position x, with its ξ-order."""
    n, nu = integral.phi.order
    if k == 0 and localizer is None:
        return integral.a, integral.a.order[1]
    if localizer is None:
        localizer = xi_shell_localizer(integral.dims, 1.0)
        complement = xi_ball_localizer(integral.dims, 1.0)
    else:
        complement = localizer.scale(-1.0).shift(1.0)
    Q = build_Q(integral.phi, localizer, integral.protocol, at=x)
    regularized = apply_Q_k(Q, integral.a, k)
    return regularized + complement * integral.a, integral.a.order[1] - k * nu


def eval_pointwise(integral, x, k=0, localizer=None, threads=None):
    """[I_φ(a)](x) = ∫ e^{iφ(x,ξ)} (Q^k a)(x, ξ) dξ."""
    d, s = integral.dims
    x = np.asarray(x, dtype=float).reshape(d)
    g, mu = pointwise_amplitude(integral, x, k, localizer)
    if mu >= -s - 1:
        raise OrderError(
            f"Amplitude not ξ-integrable at x = {x.tolist()} with k = {k} "
            f"(ξ-order {mu})"
        )
    tail = envelope_tail(
        g, (0.0, mu), integral.quadrature.box, integral.protocol, threads, at=x
    )
    if tail >= integral.quadrature.tail_factor * integral.quadrature.tol:
        raise TailBoundError(
            f"ξ-tail {tail:.3g} too large at x = {x.tolist()}",
            {"tail_bound": tail, "box": integral.quadrature.box, "k": k},
        )

    def integrand(xi):
        xs = np.broadcast_to(x[:, None], (d, xi.shape[1]))
        return np.exp(1j * integral.phi(xs, xi)) * g(xs, xi)

    value, _diagnostics = integrate_box(
        integrand, s, integral.quadrature, threads
    )
    return value


def direct_quadrature(phi, a, f=None, quadrature=None, protocol=None,
                      threads=None):
    """∬ e^{iφ} a f over the box, for absolutely integrable a f."""
    quadrature = quadrature or QuadratureConfig()
    protocol = protocol or Protocol()
    d, s = phi.dims
    m, mu = a.order
    if (f is None and m >= -d - 1) or mu >= -s - 1:
        raise OrderError(
            f"Integrand of order {a.order} is not absolutely integrable"
        )
    g = a if f is None else a * f.as_symbol(s)
    order = (-math.inf, mu) if f is not None else (m, mu)
    tail = envelope_tail(g, order, quadrature.box, protocol, threads)
    value, diagnostics = integrate_box(
        _phase_integrand(phi, g), d + s, quadrature, threads
    )
    logger.debug(
        f"Direct quadrature {value:.12g} (tail {tail:.3g}, "
        f"{diagnostics['nodes']} nodes)"
    )
    return QuadratureResult(
        value, 0, tail, diagnostics["nodes"], diagnostics["error"],
        quadrature.box,
    )


def continuity_constant(integral, family, f, q=2, r=None, threads=None):
    """Fitted C in |⟨I_φ(a_j), f⟩| ≤ C ‖a_j‖_q ρ_r(f) over the family."""
    r = integral.base_r if r is None else r
    rho = schwartz_seminorm(f, r, integral.protocol, threads)
    rows = []
    for a in family:
        member = integral.with_amplitude(a)
        value = eval_pairing(member, f, threads).value
        norm = seminorm_estimate(
            a,
            a.order,
            max_order=q,
            protocol=integral.protocol,
            threads=threads,
        ).estimate
        rows.append(
            {
                "source": a.source,
                "abs_value": abs(value),
                "seminorm": norm,
                "rho": rho,
                "ratio": abs(value) / (norm * rho) if norm * rho else 0.0,
            }
        )
    table = pd.DataFrame(rows)
    return float(table["ratio"].max()), table


def as_schwartz(f, dim):
    if isinstance(f, SchwartzFn):
        return f
    return SchwartzFn.from_expr(f, dim)
