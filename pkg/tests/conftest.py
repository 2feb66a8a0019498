import numpy as np
import pytest

from sg_oscint.catalog import KgSpec, gauss, gauss_amplitude, sep_power_phase
from sg_oscint.models import Protocol, QuadratureConfig


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def protocol():
    return Protocol()


@pytest.fixture
def quadrature():
    return QuadratureConfig()


@pytest.fixture
def bracket_phase():
    """⟨x⟩⟨ξ⟩ on ℝ × ℝ, admissible of order (1, 1)."""
    return sep_power_phase(1, 1)


@pytest.fixture
def kg4():
    return KgSpec()


@pytest.fixture
def kg11():
    return KgSpec(reduced=True)


@pytest.fixture
def gaussian():
    return gauss(1)


@pytest.fixture
def gaussian_amplitude():
    return gauss_amplitude((1, 1))
