"""Integration-by-parts operators whose transposes fix e^{iφ}.

P = u·∇_ξ + v·∇_x + w regularizes in both variables, Q = b·∇_ξ + c in ξ on
the support of a localizer, and Qp = b·∇_x + c acts on the shifted phase
φ(x, ξ) − x·p. Every component is evaluated as a jet, so r-fold
applications are exact truncated-Taylor algebra.
"""
import dataclasses

import numpy as np

from .compactify import bump, cap_bump, make_asymptotic_cutoff, safe_norm
from .errors import RegularizationError
from .jet import Jet, dot, norm2, where
from .models import Protocol
from .phase import PhaseFn, check_admissible
from .symbol import (
    SymbolFn,
    _batch_points,
    cutoff_symbol,
    evaluate_chunked,
    grid_points,
    order_sum,
    verify_order,
)
from .utils import setup_config, setup_logger

config = setup_config()
logger = setup_logger(__name__, config)


def _variables(x, xi, order):
    x, xi = _batch_points(x, xi)
    jets = Jet.variables(np.concatenate([x, xi]), order)
    return x, xi, jets


def _gradients(phi_jet, d, s):
    return (
        [phi_jet.diff(i) for i in range(d)],
        [phi_jet.diff(d + j) for j in range(s)],
    )


@dataclasses.dataclass
class RegularizerP:
    phi: PhaseFn
    radius: float
    component_reports: dict = dataclasses.field(
        default_factory=dict, repr=False
    )

    @property
    def dims(self):
        return self.phi.dims

    def chi(self, jets):
        """Radial cut-off, ≡1 for ρ ≤ R and ≡0 for ρ ≥ R + 1."""
        rho, _small = safe_norm(jets, self.radius / 2)
        return bump((rho - self.radius + 1) / 2), rho

    def fields(self, x, xi, order):
        """u, v at the given jet order and w one order lower."""
        d, s = self.dims
        x, xi, jets = _variables(x, xi, order)
        grad_x, grad_xi = _gradients(self.phi.jet(x, xi, order + 1), d, s)
        chi, rho = self.chi(jets)
        inside = rho.value.real <= self.radius
        bx2 = 1 + norm2(jets[:d])
        bk2 = 1 + norm2(jets[d:])
        eta = bx2 * norm2(grad_x) + bk2 * norm2(grad_xi)
        factor = 1j * (1 - chi) * where(inside, 1.0, eta).reciprocal()
        u = [factor * bk2 * g for g in grad_xi]
        v = [factor * bx2 * g for g in grad_x]
        w = chi
        for j, uj in enumerate(u):
            w = w + uj.diff(d + j)
        for k, vk in enumerate(v):
            w = w + vk.diff(k)
        return u, v, w

    def step(self, g, u, v, w):
        d, _s = self.dims
        result = w * g
        for j, uj in enumerate(u):
            result = result + uj * g.diff(d + j)
        for k, vk in enumerate(v):
            result = result + vk * g.diff(k)
        return result

    def transpose_exp(self, x, xi):
        """(ᵗP e^{iφ}, e^{iφ}) at the points."""
        d, _s = self.dims
        u, v, w = self.fields(x, xi, 1)
        phase = self.phi.jet(x, xi, 1)
        exp = (1j * phase).exp()
        total = w * exp
        for j, uj in enumerate(u):
            total = total - (uj * exp).diff(d + j)
        for k, vk in enumerate(v):
            total = total - (vk * exp).diff(k)
        return total.value, exp.value

    def component_symbols(self):
        """u, v and w as symbols with the orders they belong to."""
        n, nu = self.phi.order

        def pick(name, index):
            def evaluator(x, xi, K):
                u, v, w = self.fields(x, xi, K + 1)
                if name == "w":
                    return w
                return {"u": u, "v": v}[name][index].truncate(K)

            return evaluator

        d, s = self.dims
        orders = {"u": (-n, -nu + 1), "v": (-n + 1, -nu), "w": (-n, -nu)}
        source = self.phi.source
        return {
            "u": [
                SymbolFn(
                    self.dims, orders["u"], pick("u", j), f"u{j}[{source}]"
                )
                for j in range(s)
            ],
            "v": [
                SymbolFn(
                    self.dims, orders["v"], pick("v", k), f"v{k}[{source}]"
                )
                for k in range(d)
            ],
            "w": SymbolFn(
                self.dims, orders["w"], pick("w", 0), f"w[{source}]"
            ),
        }


def build_P(phi, radius=None, protocol=None, threads=None, verify=True):
    protocol = protocol or Protocol()
    if phi.admissibility is None:
        check_admissible(phi, protocol, threads)
    if not phi.is_admissible:
        logger.error(f"Refusing to regularize non-admissible {phi.source}")
        raise RegularizationError(
            f"Phase {phi.source!r} is not admissible "
            f"(min ratio {phi.admissibility.min_ratio:.3g})"
        )
    admissible_radius = phi.admissibility.protocol.radius
    if radius is None:
        radius = admissible_radius + 1
    elif radius < admissible_radius:
        logger.warning(
            f"Cut-off radius {radius} is inside the sampled admissibility "
            f"radius {admissible_radius} of {phi.source}"
        )
    if radius <= 0:
        raise RegularizationError(f"Cut-off radius must be positive: {radius}")
    P = RegularizerP(phi, float(radius))
    if verify:
        verify_components(P, protocol, threads)
    logger.info(f"Built P for {phi.source} with R = {radius}")
    return P


def verify_components(P, protocol=None, threads=None):
    """Check u, v and w at their SG orders; refuse P if one grows."""
    symbols = P.component_symbols()
    named = [(a.source, a) for a in symbols["u"] + symbols["v"]]
    named.append((symbols["w"].source, symbols["w"]))
    failed = []
    for name, a in named:
        verified, report = verify_order(a, protocol=protocol, threads=threads)
        P.component_reports[name] = report
        if not verified:
            failed.append(f"{name} at {a.order}")
    if failed:
        logger.error(f"Components of P out of order: {failed}")
        raise RegularizationError(
            f"Regularizer components fail their orders: {', '.join(failed)}"
        )
    return P.component_reports


def apply_P_r(P, a, f=None, r=1):
    """P^r(a f) as a symbol of order (m - rn, μ - rν)."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    d, s = P.dims
    n, nu = P.phi.order
    if f is not None and f.dim != d:
        raise RegularizationError(
            f"Test function dimension {f.dim} does not match d = {d}"
        )

    def evaluator(x, xi, K):
        top = K + r
        x, xi = _batch_points(x, xi)
        g = a.jet(x, xi, top)
        if f is not None:
            g = g * f.jet(x, top).embed(d + s, 0)
        if r == 0:
            return g
        u, v, w = P.fields(x, xi, top)
        for _ in range(r):
            g = P.step(g, u, v, w)
        return g

    order = order_sum(a.order, (-r * n, -r * nu))
    source = f"P^{r}({a.source}" + (f" * {f.source})" if f else ")")
    return SymbolFn(P.dims, order, evaluator, source)


@dataclasses.dataclass
class RegularizerQ:
    phi: PhaseFn
    localizer: SymbolFn

    @property
    def dims(self):
        return self.phi.dims

    def fields(self, x, xi, order):
        d, s = self.dims
        x, xi = _batch_points(x, xi)
        _grad_x, grad_xi = _gradients(self.phi.jet(x, xi, order + 1), d, s)
        outside = np.abs(self.localizer(x, xi)) == 0
        size = where(outside, 1.0, norm2(grad_xi))
        b = [1j * g * size.reciprocal() for g in grad_xi]
        c = sum(bj.diff(d + j) for j, bj in enumerate(b))
        return b, c

    def step(self, g, b, c):
        d, _s = self.dims
        result = c * g
        for j, bj in enumerate(b):
            result = result + bj * g.diff(d + j)
        return result

    def transpose_exp(self, x, xi):
        d, _s = self.dims
        b, c = self.fields(x, xi, 1)
        exp = (1j * self.phi.jet(x, xi, 1)).exp()
        total = c * exp
        for j, bj in enumerate(b):
            total = total - (bj * exp).diff(d + j)
        return total.value, exp.value


def _support_points(localizer, protocol, at=None):
    if at is None:
        x, xi = grid_points(localizer.dims, protocol)
    else:
        d, s = localizer.dims
        _x, xi = grid_points((0, s), protocol)
        at = np.asarray(at, dtype=float)
        x = np.broadcast_to(at[:, None], (d, xi.shape[1]))
    values = evaluate_chunked(lambda xc, kc: localizer(xc, kc), x, xi)
    support = np.abs(values) > 0
    return x[:, support], xi[:, support]


def build_Q(phi, localizer, protocol=None, at=None):
    """Q on the support of the localizer, optionally at one position."""
    protocol = protocol or Protocol()
    n, nu = phi.order
    x, xi = _support_points(localizer, protocol, at)
    if x.shape[1]:
        _grad_x, grad_xi = phi.gradients(x, xi)
        weight = (1 + np.sum(x**2, axis=0)) ** n * (
            1 + np.sum(xi**2, axis=0)
        ) ** (nu - 1)
        ratio = float((np.sum(grad_xi**2, axis=0) / weight).min())
    else:
        ratio = np.inf
    if ratio < protocol.c0:
        logger.error(
            f"|grad_xi phi|^2 not elliptic on the localizer support of "
            f"{phi.source}: min ratio {ratio:.3g}"
        )
        raise RegularizationError(
            f"|grad_xi phi|^2 is not elliptic on the localizer support "
            f"(min ratio {ratio:.3g} < c0 = {protocol.c0})"
        )
    logger.info(f"Built Q for {phi.source} (min ratio {ratio:.3g})")
    return RegularizerQ(phi, localizer)


def apply_Q_k(Q, a, k=1):
    """Q^k(ψ a) for the localizer ψ of Q."""
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    n, nu = Q.phi.order

    def evaluator(x, xi, K):
        top = K + k
        g = Q.localizer.jet(x, xi, top) * a.jet(x, xi, top)
        if k == 0:
            return g
        b, c = Q.fields(x, xi, top)
        for _ in range(k):
            g = Q.step(g, b, c)
        return g

    order = order_sum(
        order_sum(a.order, Q.localizer.order), (-k * n, -k * nu)
    )
    return SymbolFn(Q.dims, order, evaluator, f"Q^{k}({a.source})")


@dataclasses.dataclass
class RegularizerQp:
    phi: PhaseFn
    p: np.ndarray
    localizer: SymbolFn

    @property
    def dims(self):
        return self.phi.dims

    def shifted(self, x, xi, order):
        """Jet of φ(x, ξ) − x·p."""
        d, _s = self.dims
        x, xi, jets = _variables(x, xi, order)
        return self.phi.jet(x, xi, order) - dot(jets[:d], self.p)

    def fields(self, x, xi, order):
        d, s = self.dims
        grad_x, _grad_xi = _gradients(self.shifted(x, xi, order + 1), d, s)
        psi = self.localizer.jet(x, xi, order)
        outside = np.abs(psi.value) == 0
        eta_p = where(outside, 1.0, norm2(grad_x))
        factor = 1j * psi * eta_p.reciprocal()
        b = [factor * g for g in grad_x]
        c = sum(bj.diff(k) for k, bj in enumerate(b))
        return b, c

    def step(self, g, b, c):
        result = c * g
        for k, bk in enumerate(b):
            result = result + bk * g.diff(k)
        return result

    def transpose_exp(self, x, xi):
        """(ᵗQ e^{i(φ−x·p)}, ψ e^{i(φ−x·p)}) at the points."""
        b, c = self.fields(x, xi, 1)
        exp = (1j * self.shifted(x, xi, 1)).exp()
        total = c * exp
        for k, bk in enumerate(b):
            total = total - (bk * exp).diff(k)
        psi = self.localizer(x, xi)
        return total.value, psi * exp.value


def build_Qp(phi, p, localizer, protocol=None):
    """Qp, refused unless |∇_xφ − p|² ≳ (⟨x⟩^{n-1}⟨ξ⟩^ν + |p|)² on supp ψ."""
    protocol = protocol or Protocol()
    p = np.asarray(p, dtype=float)
    d, _s = phi.dims
    if p.shape != (d,):
        raise RegularizationError(f"Covariable p must have shape ({d},)")
    n, nu = phi.order
    x, xi = _support_points(localizer, protocol)
    if x.shape[1]:
        grad_x, _grad_xi = phi.gradients(x, xi)
        eta_p = np.sum((grad_x - p[:, None]) ** 2, axis=0)
        scale = (1 + np.sum(x**2, axis=0)) ** ((n - 1) / 2) * (
            1 + np.sum(xi**2, axis=0)
        ) ** (nu / 2) + np.linalg.norm(p)
        ratio = float((eta_p / scale**2).min())
    else:
        ratio = np.inf
    if ratio < protocol.c0:
        logger.error(
            f"eta_p bound fails for {phi.source} at p = {p}: "
            f"min ratio {ratio:.3g}"
        )
        raise RegularizationError(
            f"|grad_x phi - p|^2 is not bounded below on the localizer "
            f"support (min ratio {ratio:.3g} < c0 = {protocol.c0})"
        )
    return RegularizerQp(phi, p, localizer)


def apply_Qp_k(Qp, a, k=1):
    """Q^k a for the shifted-phase operator."""
    n, nu = Qp.phi.order

    def evaluator(x, xi, K):
        g = a.jet(x, xi, K + k)
        if k == 0:
            return g
        b, c = Qp.fields(x, xi, K + k)
        for _ in range(k):
            g = Qp.step(g, b, c)
        return g

    order = order_sum(a.order, (-k * (n - 1), -k * nu))
    return SymbolFn(Qp.dims, order, evaluator, f"Qp^{k}({a.source})")


def adjoint_residual(regularizer, x, xi):
    """max |ᵗR e^{iφ} − target| / |e^{iφ}| over the points."""
    total, target = regularizer.transpose_exp(x, xi)
    return float(np.max(np.abs(total - target)))


def xi_shell_localizer(dims, radius=1.0):
    """1 − bump(|ξ|/radius): vanishes for |ξ| ≤ radius/2."""

    def fn(x, xi):
        r, _small = safe_norm(xi, radius / 4)
        return 1.0 - bump(r / radius)

    return SymbolFn.from_jet_fn(fn, dims, (0.0, 0.0), f"shell({radius})")


def xi_ball_localizer(dims, radius=1.0):
    """bump(|ξ|/radius), the complement of xi_shell_localizer."""

    def fn(x, xi):
        r, _small = safe_norm(xi, radius / 4)
        return bump(r / radius)

    return SymbolFn.from_jet_fn(
        fn, dims, (0.0, -np.inf), f"ball({radius})"
    )


def x_cone_localizer(dims, center, angle, radius):
    """Asymptotic cut-off in x around a direction, constant in ξ."""
    center = np.asarray(center, dtype=float)
    cutoff = make_asymptotic_cutoff(
        lambda theta: cap_bump(theta, center, angle), radius, dims[0]
    )
    return cutoff_symbol(cutoff, dims[1])

