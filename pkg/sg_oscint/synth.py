"""Tempered distributions with a prescribed global wave front set.

Every construction is a finite series with a closed-form Fourier
transform, so scans of u and of û run on the same footing.
"""
import dataclasses
import math

import numpy as np

from .errors import DimensionError, ValidationError
from .utils import setup_config, setup_logger
from .wavefront import EvaluableDistribution, zero_distribution

config = setup_config()
logger = setup_logger(__name__, config)

UNIT_TOL = 1e-9
K_MAX = 5
CLASSICAL_TERMS = 12
MAX_CLASSICAL_TERMS = 4096


def unit_vector(value, name="direction"):
    vector = np.atleast_1d(np.asarray(value, dtype=float))
    norm = np.linalg.norm(vector)
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValidationError(f"{name} {vector.tolist()} is not a unit vector")
    return vector / norm


def _columns(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != d:
        raise DimensionError(f"Expected points with {d} rows, got {x.shape}")
    return x


def gaussian_term(x, omega, eta, k):
    """f_k(x; ω, η) = exp(−½|x − k³ω|² + ik³x·η − (i/2)k⁶ω·η)."""
    shift = x - (k**3 * omega)[:, None]
    return np.exp(
        -0.5 * np.sum(shift**2, axis=0)
        + 1j * k**3 * np.tensordot(eta, x, axes=1)
        - 0.5j * k**6 * float(omega @ eta)
    )


def make_fk(omega, eta, k):
    """Single Gaussian f_k with its transform (2π)^{d/2} f_k(·; η, −ω)."""
    omega = unit_vector(omega, "omega")
    eta = unit_vector(eta, "eta")
    if omega.shape != eta.shape:
        raise DimensionError("omega and eta must have the same dimension")
    if k < 0:
        raise ValidationError(f"k must be nonnegative, got {k}")
    d = omega.shape[0]
    factor = (2 * np.pi) ** (d / 2)
    return EvaluableDistribution(
        d,
        lambda x: gaussian_term(_columns(x, d), omega, eta, k),
        lambda z: factor * gaussian_term(_columns(z, d), eta, -omega, k),
        source=f"f_{k}({omega.tolist()}, {eta.tolist()})",
    )


@dataclasses.dataclass
class GaussianTrain:
    """g(·; ω, η) = Σ_{k=0}^{K} f_k, singular only at (ω, η) at infinity."""

    omega: np.ndarray
    eta: np.ndarray
    k_max: int = K_MAX

    def __post_init__(self):
        self.omega = unit_vector(self.omega, "omega")
        self.eta = unit_vector(self.eta, "eta")
        if self.omega.shape != self.eta.shape:
            raise DimensionError("omega and eta must have the same dimension")
        if self.k_max < 1:
            raise ValidationError(
                f"k_max must be at least 1, got {self.k_max}"
            )

    @property
    def dim(self):
        return self.omega.shape[0]

    def evaluate(self, x):
        x = _columns(x, self.dim)
        return sum(
            gaussian_term(x, self.omega, self.eta, k)
            for k in range(self.k_max + 1)
        )

    def fourier(self, z):
        z = _columns(z, self.dim)
        factor = (2 * np.pi) ** (self.dim / 2)
        return factor * sum(
            gaussian_term(z, self.eta, -self.omega, k)
            for k in range(self.k_max + 1)
        )

    def truncation_error(self, box):
        """Bound on Σ_{k > K} sup_{|x| ≤ box} |f_k(x)|."""
        total = 0.0
        for k in range(self.k_max + 1, self.k_max + 64):
            distance = max(0.0, k**3 - box)
            total += math.exp(-0.5 * distance**2)
        return total

    def distribution(self):
        return EvaluableDistribution(
            self.dim,
            self.evaluate,
            self.fourier,
            source=f"g({self.omega.tolist()}, {self.eta.tolist()})",
        )


def make_g(omega, eta, k_max=K_MAX):
    return GaussianTrain(omega, eta, k_max).distribution()


@dataclasses.dataclass
class ClassicalSeries:
    """Σ_k k^{-2} φ(k(x − x_k)) e^{ik³x·η_k}, φ the unit-mass Gaussian.

    Pairs are cycled in order; term k is kept only when |x_k| ≤ log k.
    Left unset, the term count grows until every pair has an active term.
    """

    pairs: list
    terms: int | None = None

    def __post_init__(self):
        self.pairs = [
            (
                np.atleast_1d(np.asarray(x, dtype=float)),
                unit_vector(eta, "eta"),
            )
            for x, eta in self.pairs
        ]
        dims = {x.shape[0] for x, _eta in self.pairs}
        dims |= {eta.shape[0] for _x, eta in self.pairs}
        if len(dims) > 1:
            raise DimensionError(
                f"Mixed dimensions in classical pairs: {dims}"
            )
        first = [self.first_active(j) for j in range(len(self.pairs))]
        needed = max(first, default=1)
        if self.terms is None:
            self.terms = max(CLASSICAL_TERMS, needed)
        elif needed > self.terms:
            idle = [
                x.tolist()
                for (x, _eta), k in zip(self.pairs, first)
                if k > self.terms
            ]
            raise ValidationError(
                f"Classical positions {idle} have no term with |x| <= log k "
                f"among {self.terms} terms; {needed} are needed"
            )

    @property
    def dim(self):
        return self.pairs[0][0].shape[0]

    def first_active(self, index):
        """Smallest k ≡ index + 1 (mod #pairs) with |x_index| ≤ log k."""
        count = len(self.pairs)
        distance = float(np.linalg.norm(self.pairs[index][0]))
        if distance > math.log(MAX_CLASSICAL_TERMS):
            raise ValidationError(
                f"Classical position {self.pairs[index][0].tolist()} lies "
                f"beyond log {MAX_CLASSICAL_TERMS}"
            )
        low = max(1, math.ceil(math.exp(distance) - 1e-9))
        k = index + 1
        if low > k:
            k += count * math.ceil((low - k) / count)
        while distance > math.log(k):
            k += count
        return k

    def active_terms(self):
        for k in range(1, self.terms + 1):
            x_k, eta_k = self.pairs[(k - 1) % len(self.pairs)]
            if np.linalg.norm(x_k) <= math.log(k):
                yield k, x_k, eta_k

    def evaluate(self, x):
        d = self.dim
        x = _columns(x, d)
        total = np.zeros(x.shape[1], dtype=complex)
        for k, x_k, eta_k in self.active_terms():
            scaled = k * (x - x_k[:, None])
            bump = np.exp(-0.5 * np.sum(scaled**2, axis=0)) / (
                2 * np.pi
            ) ** (d / 2)
            total += k**-2.0 * bump * np.exp(
                1j * k**3 * np.tensordot(eta_k, x, axes=1)
            )
        return total

    def fourier(self, z):
        """Σ k^{-2-d} φ̂((ξ − k³η_k)/k) e^{ix_k·(k³η_k − ξ)}."""
        d = self.dim
        z = _columns(z, d)
        total = np.zeros(z.shape[1], dtype=complex)
        for k, x_k, eta_k in self.active_terms():
            center = (k**3 * eta_k)[:, None]
            envelope = np.exp(-0.5 * np.sum(((z - center) / k) ** 2, axis=0))
            phase = np.tensordot(x_k, center - z, axes=1)
            total += k ** (-2.0 - d) * envelope * np.exp(1j * phase)
        return total

    def truncation_error(self):
        return (2 * np.pi) ** (-self.dim / 2) / self.terms

    def distribution(self):
        return EvaluableDistribution(
            self.dim, self.evaluate, self.fourier, source="T_classical"
        )

    def inverse_distribution(self):
        """F^{-1} of the series, with the series as its transform."""
        d = self.dim
        factor = (2 * np.pi) ** -d
        return EvaluableDistribution(
            d,
            lambda x: factor * self.fourier(-_columns(x, d)),
            self.evaluate,
            source="T_exit",
        )


@dataclasses.dataclass
class PrescribedWfSpec:
    """Γ split into asymptotic pairs (ω, η), classical pairs (x, η) and
    exit pairs (ω, ξ₀)."""

    asymptotic: list = dataclasses.field(default_factory=list)
    classical: list = dataclasses.field(default_factory=list)
    exit: list = dataclasses.field(default_factory=list)
    weights: list | None = None

    @classmethod
    def from_json(cls, obj):
        return cls(
            asymptotic=[
                (item["omega"], item["eta"])
                for item in obj.get("asymptotic", [])
            ],
            classical=[
                (item["x"], item["eta"]) for item in obj.get("classical", [])
            ],
            exit=[(item["omega"], item["xi"]) for item in obj.get("exit", [])],
            weights=obj.get("weights"),
        )

    def asymptotic_weights(self):
        """2^{-l} for l = 0, 1, ... unless weights are given."""
        if self.weights is None:
            return [2.0**-l for l in range(len(self.asymptotic))]
        weights = [float(w) for w in self.weights]
        if len(weights) != len(self.asymptotic):
            raise ValidationError(
                "weights must match the number of asymptotic pairs"
            )
        if not all(math.isfinite(w) and w >= 0 for w in weights):
            raise ValidationError(f"Weights are not summable: {weights}")
        return weights

    @property
    def dim(self):
        for omega, _eta in self.asymptotic:
            return np.atleast_1d(omega).shape[0]
        for x, _eta in self.classical:
            return np.atleast_1d(x).shape[0]
        for omega, _xi in self.exit:
            return np.atleast_1d(omega).shape[0]
        return None

    @property
    def is_empty(self):
        return not (self.asymptotic or self.classical or self.exit)


def make_prescribed(spec, k_max=K_MAX, terms=None, dim=1):
    """T = T_e + T_ψ + T_ψe with WF(T) the cells of the spec."""
    d = spec.dim or dim
    if spec.is_empty:
        return zero_distribution(d)
    parts = []
    for weight, (omega, eta) in zip(
        spec.asymptotic_weights(), spec.asymptotic
    ):
        g = make_g(omega, eta, k_max)
        parts.append(g if weight == 1.0 else g.scale(weight))
    if spec.classical:
        parts.append(ClassicalSeries(spec.classical, terms).distribution())
    if spec.exit:
        dual_pairs = [(xi, -unit_vector(omega)) for omega, xi in spec.exit]
        parts.append(ClassicalSeries(dual_pairs, terms).inverse_distribution())
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    logger.info(
        f"Prescribed distribution with {len(spec.asymptotic)} asymptotic, "
        f"{len(spec.classical)} classical, {len(spec.exit)} exit pairs"
    )
    return dataclasses.replace(total, source="T")


def truncation_error(spec, box, k_max=K_MAX, terms=None):
    """Sup-norm bound on the omitted tails over |x| ≤ box."""
    total = 0.0
    for weight, (omega, eta) in zip(
        spec.asymptotic_weights(), spec.asymptotic
    ):
        total += weight * GaussianTrain(omega, eta, k_max).truncation_error(
            box
        )
    if spec.classical:
        total += ClassicalSeries(spec.classical, terms).truncation_error()
    if spec.exit:
        dual_pairs = [(xi, -unit_vector(omega)) for omega, xi in spec.exit]
        series = ClassicalSeries(dual_pairs, terms)
        total += (2 * np.pi) ** -series.dim / series.terms
    return total
