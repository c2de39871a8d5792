"""Radial model-manifold descriptions.

A manifold enters the problem only through radial quantities: the sphere
area sigma(R), the ball volume V(R), the isoperimetric function g(v) and
the shape factor omega(v) = v^((N-1)/N) / g(v).  Euclidean space has all
of them in closed form; other radial manifolds are supplied as a table
of sphere areas and interpolated monotone-cubically.

The structural assumptions the analysis rests on (volume doubling,
iso-volume compatibility of g, and the Hardy-type volume integral bound)
are audited numerically on logarithmic grids by
``verify_geometry_assumptions``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, ParseError, RangeError
from .quadrature import adaptive_simpson, integrate_from_zero, log_grid

__all__ = [
    "Exponents",
    "ManifoldProfile",
    "CheckResult",
    "AssumptionReport",
    "volume",
    "inverse_volume",
    "sphere_area",
    "iso_g",
    "omega",
    "verify_geometry_assumptions",
    "load_manifold_csv",
    "unit_ball_volume",
]


def unit_ball_volume(n_dim: int) -> float:
    """Volume of the unit ball in dimension N."""
    return math.pi ** (n_dim / 2.0) / math.gamma(n_dim / 2.0 + 1.0)


@dataclass(frozen=True)
class Exponents:
    """The structural exponent triple (N, p, m) and the derived beta.

    Valid parameters are the degenerate range N > p > 1 and p + m > 3;
    beta = N*(p+m-3) + p is stored redundantly and always recomputable.
    """

    n_dim: int
    p_grad: float
    m_porous: float
    beta: float = field(init=False)

    def __post_init__(self):
        n, p, m = self.n_dim, self.p_grad, self.m_porous
        if not n > p:
            raise DomainError(f"requires N>p>1: N={n}, p={p}")
        if not p > 1:
            raise DomainError(f"requires N>p>1: p={p}")
        if not p + m > 3:
            raise DomainError(f"requires p+m>3: p={p}, m={m}")
        object.__setattr__(self, "beta", n * (p + m - 3.0) + p)

    @property
    def degeneracy(self) -> float:
        """p + m - 3, the combined degeneracy exponent."""
        return self.p_grad + self.m_porous - 3.0


class ManifoldProfile:
    """Radial geometry: sphere area, ball volume, g(v) and omega(v).

    Immutable after construction; all evaluation methods are pure, so a
    profile can be shared freely across concurrent evaluations.
    """

    def __init__(self, kind: str, n_dim: int, r_grid=None, sigma_values=None):
        if n_dim < 2:
            raise DomainError("n_dim must be >= 2")
        self.kind = kind
        self.n_dim = int(n_dim)
        self._omega_n = unit_ball_volume(self.n_dim)
        if kind == "euclidean":
            self.r_max = math.inf
            return
        if kind != "tabulated":
            raise DomainError(f"unknown manifold kind {kind!r}")
        r = np.asarray(r_grid, dtype=float)
        s = np.asarray(sigma_values, dtype=float)
        if r.ndim != 1 or r.shape != s.shape or r.shape[0] < 4:
            raise DomainError("tabulated profile needs >= 4 (r, sigma) samples")
        if np.any(np.diff(r) <= 0):
            raise DomainError("tabulated radii must be strictly increasing")
        if np.any(s < 0):
            raise DomainError("sphere areas must be nonnegative")
        if r[0] <= 0:
            r, s = r[1:], s[1:]
        self._r = r
        self._sigma = PchipInterpolator(r, s, extrapolate=False)
        # Sphere area below the first sample: power-law continuation of
        # the first cell (sigma ~ c r^k), the same rule the quadrature uses.
        if s[0] > 0 and s[1] > 0:
            self._head_k = math.log(s[1] / s[0]) / math.log(r[1] / r[0])
            self._head_c = s[0] / r[0] ** self._head_k
        else:
            self._head_k, self._head_c = 0.0, 0.0
        vol = np.empty(r.shape[0])
        vol[0] = self._head_c / (self._head_k + 1.0) * r[0] ** (self._head_k + 1.0)
        anti = self._sigma.antiderivative()
        vol[1:] = vol[0] + anti(r[1:]) - anti(r[0])
        if np.any(np.diff(vol) <= 0):
            raise DomainError("volume must be strictly increasing")
        self._vol_nodes = vol
        self._volume = PchipInterpolator(r, vol, extrapolate=False)
        self.r_max = float(r[-1])

    @classmethod
    def euclidean(cls, n_dim: int) -> "ManifoldProfile":
        return cls("euclidean", n_dim)

    @classmethod
    def tabulated(cls, r_grid, sigma_values, n_dim: int) -> "ManifoldProfile":
        return cls("tabulated", n_dim, r_grid, sigma_values)

    # -- evaluation --------------------------------------------------

    def sphere_area(self, r: float) -> float:
        if r < 0:
            raise DomainError("radius must be nonnegative")
        if self.kind == "euclidean":
            n = self.n_dim
            return n * self._omega_n * r ** (n - 1)
        if r == 0:
            return 0.0
        if r < self._r[0]:
            return self._head_c * r**self._head_k
        if r > self.r_max * (1.0 + 1e-12):
            raise RangeError(f"radius {r} beyond tabulated range {self.r_max}")
        return float(self._sigma(min(r, self.r_max)))

    def volume(self, r: float) -> float:
        if r < 0:
            raise DomainError("radius must be nonnegative")
        if self.kind == "euclidean":
            return self._omega_n * r**self.n_dim
        if r == 0:
            return 0.0
        if r < self._r[0]:
            return self._head_c / (self._head_k + 1.0) * r ** (self._head_k + 1.0)
        if r > self.r_max * (1.0 + 1e-12):
            raise RangeError(f"radius {r} beyond tabulated range {self.r_max}")
        return float(self._volume(min(r, self.r_max)))

    def inverse_volume(self, v: float) -> float:
        if v < 0:
            raise DomainError("volume must be nonnegative")
        if v == 0:
            return 0.0
        if self.kind == "euclidean":
            return (v / self._omega_n) ** (1.0 / self.n_dim)
        v_max = self._vol_nodes[-1]
        if v > v_max * (1.0 + 1e-12):
            raise RangeError(f"volume {v} beyond tabulated range {v_max}")
        v = min(v, v_max)
        if v <= self._vol_nodes[0]:
            # invert the power-law head
            c = self._head_c / (self._head_k + 1.0)
            return (v / c) ** (1.0 / (self._head_k + 1.0))
        return brentq(lambda r: self.volume(r) - v, self._r[0], self.r_max,
                      xtol=1e-300, rtol=1e-14)

    def iso_g(self, v: float) -> float:
        """Isoperimetric value g(v); boundary area of the ball of volume v.

        For tabulated profiles the supplied sphere areas are taken as the
        exact isoperimetric function.
        """
        if v <= 0:
            raise DomainError("volume must be positive")
        if self.kind == "euclidean":
            n = self.n_dim
            return n * self._omega_n ** (1.0 / n) * v ** ((n - 1.0) / n)
        return self.sphere_area(self.inverse_volume(v))

    def omega(self, v: float) -> float:
        if v <= 0:
            raise DomainError("volume must be positive")
        if self.kind == "euclidean":
            n = self.n_dim
            return 1.0 / (n * self._omega_n ** (1.0 / n))
        return v ** ((self.n_dim - 1.0) / self.n_dim) / self.iso_g(v)


# -- module-level operation wrappers ---------------------------------


def volume(profile: ManifoldProfile, r: float) -> float:
    """Ball volume V(R)."""
    return profile.volume(r)


def inverse_volume(profile: ManifoldProfile, v: float) -> float:
    """Radius R with V(R) = v."""
    return profile.inverse_volume(v)


def sphere_area(profile: ManifoldProfile, r: float) -> float:
    """Sphere area sigma(R)."""
    return profile.sphere_area(r)


def iso_g(profile: ManifoldProfile, v: float) -> float:
    """Isoperimetric function g(v)."""
    return profile.iso_g(v)


def omega(profile: ManifoldProfile, v: float) -> float:
    """Shape factor omega(v) = v^((N-1)/N) / g(v)."""
    return profile.omega(v)


# -- assumption audit -------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one empirical assumption check."""

    name: str
    constant: float
    cap: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "constant": self.constant,
            "cap": self.cap,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class AssumptionReport:
    """Collection of empirical constants, each flagged against its cap."""

    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name: str) -> CheckResult:
        return self.checks[name]

    def as_dict(self) -> dict:
        return {k: v.as_dict() for k, v in self.checks.items()}


DEFAULT_GEOMETRY_CAPS = {
    "volume_doubling": 64.0,
    "iso_volume": 1e-3,  # lower bound on the constant c
    "hardy_volume": 1e3,
}


def verify_geometry_assumptions(profile: ManifoldProfile, exps: Exponents,
                                r_max: float, r_min: float | None = None,
                                caps: dict | None = None,
                                points_per_decade: int = 256) -> AssumptionReport:
    """Audit volume doubling, iso-volume compatibility and the Hardy
    volume-integral bound on a logarithmic radius grid.

    For each condition the report carries the tightest constant observed
    on the grid: the supremum of V(2R)/V(R), the infimum of
    g(V(R))*R/V(R), and the supremum of the Hardy integral ratio.
    """
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    if profile.kind == "tabulated" and r_max > profile.r_max * (1.0 + 1e-12):
        raise RangeError(f"profile tabulated only to {profile.r_max}")
    caps = {**DEFAULT_GEOMETRY_CAPS, **(caps or {})}
    if r_min is None:
        r_min = r_max * 1e-4
        if profile.kind == "tabulated":
            r_min = max(r_min, float(profile._r[0]))
    grid = log_grid(r_min, r_max, points_per_decade)

    vols = np.array([profile.volume(r) for r in grid])

    half = grid[grid <= r_max / 2.0]
    doub = np.array([profile.volume(2.0 * r) for r in half]) / vols[: half.shape[0]]
    c_doub = float(np.max(doub))

    iso = np.array([profile.iso_g(v) for v in vols]) * grid / vols
    c_iso = float(np.min(iso))

    p = exps.p_grad

    def inv_p(tau):
        return profile.inverse_volume(tau) ** (-p)

    s_grid = vols
    lhs = np.empty(s_grid.shape[0])
    total = integrate_from_zero(inv_p, float(s_grid[0]), rel=1e-11)
    lhs[0] = total
    for i in range(1, s_grid.shape[0]):
        total += adaptive_simpson(inv_p, float(s_grid[i - 1]), float(s_grid[i]), rel=1e-11)
        lhs[i] = total
    rhs = s_grid * np.array([inv_p(s) for s in s_grid])
    c_hardy = float(np.max(lhs / rhs))

    checks = {
        "volume_doubling": CheckResult(
            "volume_doubling", c_doub, caps["volume_doubling"],
            c_doub <= caps["volume_doubling"],
            f"sup V(2R)/V(R) over R in [{r_min:.3g}, {r_max / 2:.3g}]"),
        "iso_volume": CheckResult(
            "iso_volume", c_iso, caps["iso_volume"],
            c_iso >= caps["iso_volume"],
            "inf g(V(R)) R / V(R); pass means the constant stays away from 0"),
        "hardy_volume": CheckResult(
            "hardy_volume", c_hardy, caps["hardy_volume"],
            c_hardy <= caps["hardy_volume"],
            "sup of int_0^s V^{-1}(tau)^{-p} dtau / (s V^{-1}(s)^{-p})"),
    }
    return AssumptionReport(checks)


def load_manifold_csv(path, n_dim: int) -> ManifoldProfile:
    """Load a tabulated profile from a two-column CSV with header ``r,sigma``."""
    radii, sigmas = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["r", "sigma"]:
            raise ParseError("expected header 'r,sigma'", lineno=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                radii.append(float(row[0]))
                sigmas.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"bad row {row!r}: {exc}", lineno=lineno) from None
    return ManifoldProfile.tabulated(radii, sigmas, n_dim)
