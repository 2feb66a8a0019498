import dataclasses
from typing import Callable

import numpy as np

from .errors import DimensionError
from .jet import Jet, norm2, where
from .utils import setup_config, setup_logger, tangent_basis

config = setup_config()
logger = setup_logger(__name__, config)

UNIT_TOL = 1e-9


def japanese_bracket(x):
    """⟨x⟩ = √(1+|x|²), coordinates along axis 0."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + np.sum(x**2, axis=0))


def project(x):
    x = np.asarray(x, dtype=float)
    return x / japanese_bracket(x)


def bracket_jet(jets, template=None):
    if not jets:
        return Jet.constant(
            np.ones(template.batch_shape), template.nvars, template.order
        )
    return (1.0 + norm2(jets)).sqrt()


def _flat(s):
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, np.exp(-1.0 / safe), 0.0)


def bump(t):
    """Smooth profile, ≡1 for t ≤ 1/2 and ≡0 for t ≥ 1."""
    if isinstance(t, Jet):
        return _bump_jet(t)
    t = np.asarray(t, dtype=float)
    rising = _flat(1.0 - t)
    return rising / (rising + _flat(t - 0.5))


def _bump_jet(t):
    value = t.value.real
    ones = value <= 0.5
    zeros = value >= 1.0
    middle = ~(ones | zeros)
    safe = where(middle, t, 0.75)
    rising = (-1.0 / (1.0 - safe)).exp()
    falling = (-1.0 / (safe - 0.5)).exp()
    profile = rising / (rising + falling)
    return where(ones, 1.0, where(zeros, 0.0, profile))


def safe_norm(jets, floor):
    """|x| as a jet; points with |x| < floor get the constant floor."""
    squared = norm2(jets)
    small = squared.value.real < floor**2
    return where(small, floor, where(small, 1.0, squared).sqrt()), small


def cap_bump(theta, center, angle):
    """Smooth cap on the sphere: 1 near center, 0 beyond `angle`."""
    center = np.asarray(center, dtype=float)
    cosine = sum(c * t for c, t in zip(center, theta))
    return bump((1.0 - cosine) / (1.0 - np.cos(angle)))


@dataclasses.dataclass(frozen=True)
class CompactPoint:
    kind: str
    coords: tuple

    def __post_init__(self):
        if self.kind not in ("finite", "boundary"):
            raise ValueError(f"Unknown point kind {self.kind}")
        coords = np.asarray(self.coords, dtype=float)
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"Non-finite coordinates {self.coords}")
        if self.kind == "boundary":
            norm = np.linalg.norm(coords)
            if abs(norm - 1.0) > UNIT_TOL:
                raise ValueError(
                    f"Boundary direction {self.coords} has norm {norm}"
                )
            coords = coords / norm
        object.__setattr__(self, "coords", tuple(coords.tolist()))

    @classmethod
    def finite(cls, coords):
        return cls("finite", tuple(np.ravel(coords)))

    @classmethod
    def boundary(cls, direction):
        return cls("boundary", tuple(np.ravel(direction)))

    @classmethod
    def from_json(cls, obj):
        if "finite" in obj:
            return cls.finite(obj["finite"])
        if "dir" in obj:
            return cls.boundary(obj["dir"])
        raise ValueError(f"Cannot read compact point from {obj}")

    def to_json(self):
        key = "finite" if self.is_finite else "dir"
        return {key: list(self.coords)}

    @property
    def is_finite(self):
        return self.kind == "finite"

    @property
    def dim(self):
        return len(self.coords)

    @property
    def array(self):
        return np.array(self.coords, dtype=float)

    def ball_coords(self):
        """The point's location in the closed unit ball."""
        if self.is_finite:
            return project(self.array)
        return self.array

    def distance(self, other):
        return float(np.linalg.norm(self.ball_coords() - other.ball_coords()))

    def __str__(self):
        coords = ",".join(f"{c:.4g}" for c in self.coords)
        return f"{'F' if self.is_finite else 'B'}({coords})"


@dataclasses.dataclass(frozen=True)
class AsymptoticCutoff:
    sphere_fn: Callable
    radius: float
    dim: int

    def jet(self, x_jets):
        r, _small = safe_norm(x_jets, self.radius / 4)
        radial = 1.0 - bump(r / self.radius)
        theta = [xj / r for xj in x_jets]
        angular = self.sphere_fn(theta)
        return radial * angular

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.jet(Jet.variables(x, 0)).value


def make_asymptotic_cutoff(sphere_fn, radius, dim):
    if radius <= 0:
        raise ValueError(f"Cut-off radius must be positive, got {radius}")
    return AsymptoticCutoff(sphere_fn=sphere_fn, radius=radius, dim=dim)


def angle_between(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cosine = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


@dataclasses.dataclass(frozen=True)
class BoundaryNeighborhood:
    center: tuple
    angle: float
    min_radius: float

    def contains(self, point: CompactPoint):
        if point.dim != len(self.center):
            raise DimensionError(
                f"Point of dimension {point.dim} tested against a "
                f"neighborhood in dimension {len(self.center)}"
            )
        if point.is_finite:
            if np.linalg.norm(point.array) <= self.min_radius:
                return False
        return angle_between(point.array, self.center) < self.angle


def cone_directions(center, delta):
    """Center of a spherical δ-cap together with rings at δ/2 and δ."""
    center = np.asarray(center, dtype=float)
    directions = [center]
    for t in tangent_basis(center):
        for angle in (delta / 2, delta):
            for sign in (1.0, -1.0):
                directions.append(
                    np.cos(angle) * center + sign * np.sin(angle) * t
                )
    return np.array(directions)


def ball_points(center, delta):
    center = np.asarray(center, dtype=float)
    points = [center]
    for axis in np.eye(center.shape[0]):
        for step in (delta / 2, delta):
            for sign in (1.0, -1.0):
                points.append(center + sign * step * axis)
    return np.array(points)


def sample_neighborhood(point: CompactPoint, delta, radii):
    """Deterministic samples of a neighborhood of point, shape (n, k).

    Finite points give a Euclidean δ-ball stencil, boundary points give
    the δ-cap directions scaled by every radius.
    """
    if point.dim == 0:
        return np.zeros((1, 0))
    if point.is_finite:
        return ball_points(point.array, delta)
    directions = cone_directions(point.array, delta)
    return (np.asarray(radii)[:, None, None] * directions[None]).reshape(
        -1, point.dim
    )
