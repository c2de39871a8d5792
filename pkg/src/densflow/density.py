"""The radial weight rho(r) and its structural assumptions.

rho multiplies u_t in the equation and is required to be positive,
globally bounded and nonincreasing.  Two kinds are supported: the
power-law family rho(r) = (1+r)^(-alpha) used throughout the worked
examples, and tabulated data loaded from CSV.  The capacity combination
psi(s) = s^p rho(s) drives both the subcritical classification and the
weighted embeddings, so it lives here too.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ParseError, RangeError
from .geometry import AssumptionReport, CheckResult, Exponents, ManifoldProfile
from .quadrature import adaptive_simpson, integrate_from_zero, log_grid

__all__ = [
    "DensityProfile",
    "rho",
    "psi",
    "verify_density_assumptions",
    "load_density_csv",
    "DEFAULT_DENSITY_CAPS",
]


class DensityProfile:
    """Immutable radial density; pure evaluation, safe to share."""

    def __init__(self, kind: str, alpha: float | None = None,
                 r_grid=None, rho_values=None):
        self.kind = kind
        if kind == "powerlaw":
            if alpha is None or alpha < 0:
                raise DomainError("power-law density needs alpha >= 0")
            self.alpha = float(alpha)
            self.alpha_est = float(alpha)
            self.r_max = math.inf
            return
        if kind != "tabulated":
            raise DomainError(f"unknown density kind {kind!r}")
        r = np.asarray(r_grid, dtype=float)
        v = np.asarray(rho_values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.shape[0] < 4:
            raise DomainError("tabulated density needs >= 4 (r, rho) samples")
        if r[0] < 0 or np.any(np.diff(r) <= 0):
            raise DomainError("tabulated radii must be nonnegative, strictly increasing")
        if np.any(v <= 0):
            raise DomainError("density values must be strictly positive")
        rises = np.diff(v) > 1e-12 * v[:-1]
        if np.any(rises):
            i = int(np.argmax(rises))
            raise DomainError(
                f"density increases between r={r[i]} and r={r[i + 1]}; "
                "the model requires a nonincreasing weight")
        self.alpha = None
        self._r = r
        self._rho = PchipInterpolator(r, v, extrapolate=False)
        self._values = v
        self.r_max = float(r[-1])
        self.alpha_est = self._estimate_alpha()

    @classmethod
    def power_law(cls, alpha: float) -> "DensityProfile":
        """rho(r) = (1+r)^(-alpha)."""
        return cls("powerlaw", alpha=alpha)

    @classmethod
    def tabulated(cls, r_grid, rho_values) -> "DensityProfile":
        return cls("tabulated", r_grid=r_grid, rho_values=rho_values)

    def _estimate_alpha(self) -> float:
        # negative slope of log rho vs log(1+r) over the last decade
        hi = self._r[-1]
        mask = self._r >= max((1.0 + hi) / 10.0 - 1.0, self._r[0])
        if mask.sum() < 2:
            mask = self._r >= self._r[-2]
        x = np.log1p(self._r[mask])
        y = np.log(self._values[mask])
        slope = np.polyfit(x, y, 1)[0]
        return float(-slope)

    def __call__(self, r):
        return self.rho(r)

    def rho(self, r):
        """Density value(s) at radius r >= 0 (vectorized)."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("radius must be nonnegative")
        if self.kind == "powerlaw":
            out = (1.0 + r) ** (-self.alpha)
        else:
            if np.any(r > self.r_max * (1.0 + 1e-12)):
                raise RangeError(f"radius beyond tabulated range {self.r_max}")
            out = self._rho(np.minimum(r, self.r_max))
        return float(out) if out.ndim == 0 else out

    def psi(self, exps: Exponents, s):
        """Capacity function psi(s) = s^p rho(s); psi(0) = 0."""
        s = np.asarray(s, dtype=float)
        out = s**exps.p_grad * self.rho(s)
        return float(out) if out.ndim == 0 else out


def rho(profile: DensityProfile, r):
    """Density value at radius r."""
    return profile.rho(r)


def psi(profile: DensityProfile, exps: Exponents, s):
    """Capacity function s^p rho(s)."""
    return profile.psi(exps, s)


DEFAULT_DENSITY_CAPS = {
    "reverse_doubling": 8.0,
    "weighted_volume": 16.0,
    "psi_quasi_monotone": 1.5,
    "decay_exponent": None,  # filled with p at call time
}


def quasi_monotonicity_constant(values: np.ndarray) -> float:
    """Smallest C >= 1 with values[i] <= C * values[j] for all i < j."""
    prefix_max = np.maximum.accumulate(values)
    return float(max(1.0, np.max(prefix_max / values)))


def max_pairwise_decay_exponent(r: np.ndarray, values: np.ndarray) -> float:
    """Largest decay exponent realized between any two grid radii.

    This is sup over r_i < r_j of log(rho_i/rho_j) / log(r_j/r_i), the
    infimum of exponents alpha for which the density provably decays no
    faster than r^(-alpha) on the sampled range.
    """
    lr = np.log(r)
    lv = np.log(values)
    dr = lr[None, :] - lr[:, None]  # log(r_j) - log(r_i)
    dv = lv[:, None] - lv[None, :]  # log(rho_i) - log(rho_j)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(dr > 1e-12, dv / dr, -np.inf)
    return float(np.max(slopes))


def verify_density_assumptions(profile: DensityProfile, geom: ManifoldProfile,
                               exps: Exponents, r_max: float,
                               r_min: float | None = None,
                               caps: dict | None = None,
                               points_per_decade: int = 256) -> AssumptionReport:
    """Audit the density assumptions on a logarithmic grid.

    Reports (a) the reverse-doubling constant sup rho(R)/rho(2R),
    (b) the constant in int_{B_R} rho dmu <= C V(R) rho(R),
    (c) the quasi-monotonicity constant of psi(s) = s^p rho(s), and
    (d) the largest decay exponent observed between grid radii, flagged
    against p (the subcritical requirement).  Constants for (c) and (d)
    are finite-range observations; the detail strings record the range.
    """
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    if profile.kind == "tabulated" and r_max > profile.r_max * (1.0 + 1e-12):
        raise RangeError(f"density tabulated only to {profile.r_max}")
    if geom.kind == "tabulated" and r_max > geom.r_max * (1.0 + 1e-12):
        raise RangeError(f"geometry tabulated only to {geom.r_max}")
    caps = {**DEFAULT_DENSITY_CAPS, **(caps or {})}
    if caps.get("decay_exponent") is None:
        caps["decay_exponent"] = exps.p_grad
    if r_min is None:
        r_min = r_max * 1e-4
    grid = log_grid(r_min, r_max, points_per_decade)
    rho_vals = profile.rho(grid)

    half = grid[grid <= r_max / 2.0]
    c_rev = float(np.max(profile.rho(half) / profile.rho(2.0 * half)))

    def weighted_shell(r):
        return profile.rho(r) * geom.sphere_area(r)

    lhs = np.empty(grid.shape[0])
    total = integrate_from_zero(weighted_shell, float(grid[0]))
    lhs[0] = total
    for i in range(1, grid.shape[0]):
        total += adaptive_simpson(weighted_shell, float(grid[i - 1]), float(grid[i]))
        lhs[i] = total
    vols = np.array([geom.volume(r) for r in grid])
    c_wv = float(np.max(lhs / (vols * rho_vals)))

    psi_vals = grid**exps.p_grad * rho_vals
    c_psi = quasi_monotonicity_constant(psi_vals)

    a_obs = max_pairwise_decay_exponent(grid, rho_vals)

    rng = f"range [{r_min:.3g}, {r_max:.3g}]"
    checks = {
        "reverse_doubling": CheckResult(
            "reverse_doubling", c_rev, caps["reverse_doubling"],
            c_rev <= caps["reverse_doubling"], f"sup rho(R)/rho(2R), {rng}"),
        "weighted_volume": CheckResult(
            "weighted_volume", c_wv, caps["weighted_volume"],
            c_wv <= caps["weighted_volume"],
            f"sup of int_BR rho dmu / (V(R) rho(R)), {rng}"),
        "psi_quasi_monotone": CheckResult(
            "psi_quasi_monotone", c_psi, caps["psi_quasi_monotone"],
            c_psi <= caps["psi_quasi_monotone"],
            f"sup psi(s)/psi(t) over s<t, {rng}"),
        "decay_exponent": CheckResult(
            "decay_exponent", a_obs, caps["decay_exponent"],
            a_obs < caps["decay_exponent"],
            f"max pairwise log-slope of rho, {rng}; pass means slower than r^-p"),
    }
    return AssumptionReport(checks)


def load_density_csv(path) -> DensityProfile:
    """Load a tabulated density from a two-column CSV with header ``r,rho``.

    Any increase beyond 1e-12 relative between consecutive samples is
    rejected rather than repaired.
    """
    radii, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["r", "rho"]:
            raise ParseError("expected header 'r,rho'", lineno=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                radii.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad row {row!r}: {exc}", lineno=lineno) from None
    return DensityProfile.tabulated(radii, values)
