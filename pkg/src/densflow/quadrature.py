"""Quadrature helpers for radial integrals.

All integrands handled here are smooth away from r = 0.  Near the origin
they typically behave like a power r^k with k > -1 (integrable), so the
first cell is integrated analytically from a local power-law fit instead
of being fed to the adaptive rule.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

ABS_FLOOR = 1e-14
REL_TARGET = 1e-10
POINTS_PER_DECADE = 256


def log_grid(lo: float, hi: float, points_per_decade: int = POINTS_PER_DECADE) -> np.ndarray:
    """Logarithmically spaced grid with a fixed point density per decade."""
    if not (0 < lo < hi):
        raise DomainError(f"log_grid needs 0 < lo < hi, got ({lo}, {hi})")
    decades = math.log10(hi / lo)
    n = max(int(math.ceil(decades * points_per_decade)) + 1, 2)
    return np.geomspace(lo, hi, n)


def _simpson(f, a, fa, b, fb, fm):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, fa, b, fb, fm, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, m, fm, flm)
    right = _simpson(f, m, fm, b, fb, frm)
    err = left + right - whole
    if depth <= 0 or abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _adaptive(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) + _adaptive(
        f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1
    )


def adaptive_simpson(f, a: float, b: float, rel: float = REL_TARGET, floor: float = ABS_FLOOR) -> float:
    """Adaptive composite Simpson rule on [a, b].

    The tolerance is rel * |coarse estimate| with an absolute floor, so
    integrals that are genuinely tiny do not trigger endless refinement.
    """
    if b <= a:
        return 0.0
    fa = f(a)
    fb = f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(f, a, fa, b, fb, fm)
    tol = max(rel * abs(whole), floor)
    return _adaptive(f, a, fa, b, fb, fm, whole, tol, 48)


def fit_power_law_cell(f, r1: float, r2: float) -> tuple[float, float]:
    """Fit f(r) ~ c * r^k from samples at r1 < r2 (both > 0)."""
    f1 = f(r1)
    f2 = f(r2)
    if f1 <= 0.0 or f2 <= 0.0:
        return 0.0, 0.0
    k = math.log(f2 / f1) / math.log(r2 / r1)
    c = f2 / r2**k
    return c, k


def integrate_from_zero(f, b: float, rel: float = REL_TARGET, floor: float = ABS_FLOOR,
                        first_cell: float | None = None) -> float:
    """Integrate f on [0, b] where f may behave like a power of r near 0.

    The stretch [0, first_cell] is integrated analytically from a local
    power-law fit; a non-integrable fit (exponent <= -1) raises.
    """
    if b < 0:
        raise DomainError("upper limit must be nonnegative")
    if b == 0:
        return 0.0
    r0 = first_cell if first_cell is not None else min(1e-6, b * 1e-6)
    c, k = fit_power_law_cell(f, 0.5 * r0, r0)
    if c == 0.0:
        head = 0.0
    else:
        if k <= -1.0:
            raise DomainError(f"integrand ~ r^{k:.3f} near 0 is not integrable")
        head = c * r0 ** (k + 1.0) / (k + 1.0)
    return head + adaptive_simpson(f, r0, b, rel, floor)


def cumulative_integral(f, grid: np.ndarray, rel: float = REL_TARGET,
                        floor: float = ABS_FLOOR) -> np.ndarray:
    """Integral of f from 0 to each grid node (grid ascending, all > 0)."""
    out = np.empty(grid.shape[0])
    total = integrate_from_zero(f, float(grid[0]), rel, floor)
    out[0] = total
    for i in range(1, grid.shape[0]):
        total += adaptive_simpson(f, float(grid[i - 1]), float(grid[i]), rel, floor)
        out[i] = total
    return out
