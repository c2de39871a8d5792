import math

import numpy as np
import pytest

from densflow.errors import DomainError
from densflow.quadrature import (adaptive_simpson, cumulative_integral,
                                 integrate_from_zero, log_grid)


def test_adaptive_simpson_polynomial_exact():
    assert adaptive_simpson(lambda x: x**3, 0.0, 2.0) == pytest.approx(4.0, rel=1e-12)


def test_adaptive_simpson_oscillatory():
    val = adaptive_simpson(math.sin, 0.0, math.pi)
    assert val == pytest.approx(2.0, rel=1e-9)


def test_integrate_from_zero_power_singularity():
    # r^(-1/2) is integrable: int_0^1 = 2
    val = integrate_from_zero(lambda r: r**-0.5, 1.0)
    assert val == pytest.approx(2.0, rel=1e-7)


def test_integrate_from_zero_rejects_nonintegrable():
    with pytest.raises(DomainError):
        integrate_from_zero(lambda r: 1.0 / r, 1.0)


def test_cumulative_integral_matches_closed_form():
    grid = np.geomspace(0.1, 10.0, 50)
    vals = cumulative_integral(lambda r: 3.0 * r**2, grid)
    assert np.allclose(vals, grid**3, rtol=1e-9)


def test_log_grid_density():
    g = log_grid(1.0, 10.0, 256)
    assert g[0] == 1.0 and g[-1] == 10.0
    assert len(g) == 257
    with pytest.raises(DomainError):
        log_grid(0.0, 1.0)
