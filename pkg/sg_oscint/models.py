import dataclasses

import numpy as np
import pandas as pd

from .errors import JobValidationError
from .utils import (
    dyadic_radii,
    get_seed,
    setup_config,
    setup_logger,
    to_jsonable,
)

config = setup_config()
logger = setup_logger(__name__, config)


def _with_overrides(cls, overrides, pointer):
    overrides = dict(overrides or {})
    names = {field.name for field in dataclasses.fields(cls)}
    for key in overrides:
        if key not in names:
            raise JobValidationError(
                f"Unknown protocol field {key!r}", f"{pointer}/{key}"
            )
    for key, value in overrides.items():
        if isinstance(value, list):
            overrides[key] = tuple(value)
    return cls(**overrides)


@dataclasses.dataclass(frozen=True)
class Protocol:
    """Sampling protocol for every asymptotic semi-decision."""

    c0: float = 1e-3
    radius: float = 32.0
    delta: float = 0.1
    sweep_lo: int = 5
    sweep_hi: int = 14
    max_directions: int = 16
    seed: int = dataclasses.field(default_factory=lambda: get_seed(config))
    order_tol: float = 0.25
    grid_hi: int = 14
    p_sweep_hi: int = 10

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError(f"c0 must be positive, got {self.c0}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not 0 < self.delta < np.pi / 2:
            raise ValueError(f"delta must lie in (0, pi/2), got {self.delta}")
        if self.sweep_lo > self.sweep_hi:
            raise ValueError("sweep_lo must not exceed sweep_hi")

    @classmethod
    def from_overrides(cls, overrides=None, pointer="/protocol"):
        return _with_overrides(cls, overrides, pointer)

    @property
    def sweep_radii(self):
        return dyadic_radii(self.sweep_lo, self.sweep_hi)

    @property
    def p_radii(self):
        return dyadic_radii(0, self.p_sweep_hi, include_zero=True)

    @property
    def margin_band(self):
        return self.c0 / 2, 2 * self.c0

    def label(self, min_ratio):
        """Three-way label of a sampled lower bound against c0."""
        low, high = self.margin_band
        if min_ratio < low:
            return "below"
        if min_ratio < high:
            return "margin"
        return "above"

    def to_json(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    box: float = 8.0
    tol: float = 1e-10
    rtol: float = 1e-10
    max_subdivisions: int = 20000
    tail_factor: float = 0.1

    @classmethod
    def from_overrides(cls, overrides=None, pointer="/quadrature"):
        return _with_overrides(cls, overrides, pointer)

    def doubled(self):
        return dataclasses.replace(self, box=2 * self.box)

    def to_json(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class WfProtocol:
    n_threshold: float = 6.0
    margin_threshold: float = 4.0
    floor: float = 1e-12
    fit_shells: int = 3
    positions: tuple = (-8.0, -4.0, 0.0, 4.0, 8.0)
    cell_spacing: float = 4.0
    local_points: int = 256
    local_spacing: float = 1 / 16
    directions: int = 8
    box: float | None = None
    points: int | None = None
    cutoff_radii: tuple | None = None
    fit_max: float | None = None
    finite_covariables: tuple = (-1.0, 0.0, 1.0)
    frequency_window: float = 1.0
    taper: float = 0.75
    css_lo: int = 0
    css_hi: int = 7
    shell_samples: int = 64

    def __post_init__(self):
        if self.margin_threshold > self.n_threshold:
            raise ValueError("margin_threshold must not exceed n_threshold")

    @classmethod
    def from_overrides(cls, overrides=None, pointer="/protocol"):
        return _with_overrides(cls, overrides, pointer)

    def resolved(self, d):
        """Fill the grid fields left open with the per-dimension defaults."""
        if d not in (1, 2):
            raise ValueError(f"Wave front scans support d = 1, 2, got {d}")
        defaults = {
            1: {
                "box": 256.0,
                "points": 2**15,
                "cutoff_radii": (16.0, 32.0),
                "fit_max": 128.0,
            },
            2: {
                "box": 40.0,
                "points": 2**10,
                "cutoff_radii": (4.0, 6.0),
                "fit_max": 32.0,
            },
        }[d]
        overrides = {
            key: value
            for key, value in defaults.items()
            if getattr(self, key) is None
        }
        return dataclasses.replace(self, **overrides)

    def classify(self, exponent):
        if np.isnan(exponent):
            return "margin"
        if exponent >= self.n_threshold:
            return "regular"
        if exponent >= self.margin_threshold:
            return "margin"
        return "singular"

    def to_json(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass
class SeminormReport:
    order: tuple
    table: pd.DataFrame
    grid: dict

    @property
    def estimate(self):
        return float(self.table["estimate"].max())

    @property
    def growth_pairs(self):
        flagged = self.table.loc[self.table["growth_flag"]]
        return list(zip(flagged["alpha"], flagged["beta"]))

    def lookup(self, alpha, beta):
        row = self.table.loc[
            (self.table["alpha"] == tuple(alpha))
            & (self.table["beta"] == tuple(beta))
        ]
        return float(row["estimate"].iloc[0])

    def to_json(self):
        return {
            "order": to_jsonable(self.order),
            "grid": to_jsonable(self.grid),
            "estimate": self.estimate,
            "pairs": [
                {
                    "alpha": list(row.alpha),
                    "beta": list(row.beta),
                    "estimate": to_jsonable(row.estimate),
                    "growth_flag": bool(row.growth_flag),
                }
                for row in self.table.itertuples()
            ],
        }


@dataclasses.dataclass
class EllipticReport:
    elliptic: bool
    label: str
    min_ratio: float
    order: tuple
    protocol: Protocol
    point: tuple = ()

    def __bool__(self):
        return self.elliptic

    def to_json(self):
        return {
            "elliptic": self.elliptic,
            "label": self.label,
            "min_ratio": to_jsonable(self.min_ratio),
            "order": to_jsonable(self.order),
            "point": [to_jsonable(p) for p in self.point],
            "protocol": self.protocol.to_json(),
        }


@dataclasses.dataclass
class SetSample:
    """Classification of one boundary pair against M_φ or SP_φ."""

    x: object
    xi: object
    label: str
    min_ratio: float
    protocol: Protocol

    @property
    def is_member(self):
        return self.label in ("member", "margin")

    def to_json(self):
        return {
            "x": self.x.to_json(),
            "xi": self.xi.to_json(),
            "label": self.label,
            "min_ratio": to_jsonable(self.min_ratio),
        }


MphiSample = SetSample
SPphiSample = SetSample
