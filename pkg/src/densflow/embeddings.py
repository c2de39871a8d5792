"""Numerical verification bench for the functional inequalities.

Everything here evaluates both sides of an inequality on discrete radial
test functions and reports the ratio LHS / (RHS without its existential
constant).  Ratios are never asserted against literature values; the
bench only certifies finiteness, stability under grid refinement, and
(for the inequalities whose constants are fully explicit) ratio <= 1.

The gradient norm of a test function uses centered face differences
weighted by the sphere area at the face; integrals against the manifold
measure use exact shell weights at cell centers.  The r = 0 cell always
enters through its center radius, never r = 0 itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .density import DensityProfile
from .errors import BranchError, DegenerateInputError, DomainError, HypothesisError
from .geometry import Exponents, ManifoldProfile, unit_ball_volume
from .quadrature import log_grid
from .solver import RadialGrid

__all__ = [
    "RadialTestFunction",
    "GeneralEmbeddingProfile",
    "decreasing_rearrangement",
    "hardy_ratio",
    "embedding_ratio",
    "solve_profile_ode",
    "general_embedding_check",
    "euclidean_iso_G",
    "random_test_function",
    "tent_function",
    "EMBEDDING_KINDS",
]


@dataclass
class RadialTestFunction:
    """Nonnegative compactly supported radial function on a grid."""

    grid: RadialGrid
    values: np.ndarray
    geom: ManifoldProfile

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise DomainError("values must match the grid cell count")
        if np.any(self.values < 0):
            raise DomainError("test functions must be nonnegative")

    @property
    def support_cells(self) -> int:
        return int(np.count_nonzero(self.values > 0))

    def support_measure(self) -> float:
        return float(np.sum(self.grid.cell_weights[self.values > 0]))

    def lq_norm_q(self, q: float) -> float:
        """integral of |u|^q against the manifold measure."""
        return float(np.sum(self.values**q * self.grid.cell_weights))

    def weighted_lq_norm_q(self, q: float, dens: DensityProfile) -> float:
        rho_c = dens.rho(self.grid.centers)
        return float(np.sum(self.values**q * rho_c * self.grid.cell_weights))

    def grad_norm_p(self, p: float) -> float:
        """integral of |grad u|^p: face differences times face areas."""
        d = np.diff(self.values) / self.grid.dr
        return float(np.sum(np.abs(d) ** p * self.grid.face_areas) * self.grid.dr)

    def scaled(self, lam: float) -> "RadialTestFunction":
        return RadialTestFunction(self.grid, lam * self.values, self.geom)


def tent_function(grid: RadialGrid, geom: ManifoldProfile, r0: float = 1.0,
                  amplitude: float = 1.0) -> RadialTestFunction:
    """The profile A (1 - r/r0)_+ sampled at cell centers."""
    vals = amplitude * np.maximum(1.0 - grid.centers / r0, 0.0)
    return RadialTestFunction(grid, vals, geom)


def random_test_function(grid: RadialGrid, geom: ManifoldProfile, index: int,
                         seed: int = 42) -> RadialTestFunction:
    """Piecewise-linear random profile, reproducible per (seed, index).

    3-10 knots, values in [0, 1], compact support inside [0, R_max/2].
    """
    rng = np.random.default_rng([seed, index])
    n_knots = int(rng.integers(3, 11))
    end = float(rng.uniform(0.3, 1.0)) * grid.r_max / 2.0
    radii = np.sort(rng.uniform(0.0, end, n_knots))
    radii[-1] = end
    vals = rng.uniform(0.0, 1.0, n_knots)
    vals[-1] = 0.0
    knots_r = np.concatenate(([0.0], radii))
    knots_v = np.concatenate(([vals[0]], vals))
    out = np.interp(grid.centers, knots_r, knots_v, right=0.0)
    out[grid.centers > end] = 0.0
    return RadialTestFunction(grid, out, geom)


def decreasing_rearrangement(f: RadialTestFunction):
    """Step-function rearrangement: measures edges and nonincreasing values.

    Returns (edges, values) with edges[0] = 0; the rearranged function
    equals values[k] on [edges[k], edges[k+1]).  Equimeasurable with f by
    construction: sums of values^q over measure intervals equal the
    corresponding integrals of f^q.
    """
    order = np.argsort(-f.values, kind="stable")
    vals = f.values[order]
    keep = vals > 0
    vals = vals[keep]
    meas = f.grid.cell_weights[order][keep]
    edges = np.concatenate(([0.0], np.cumsum(meas)))
    return edges, vals


def rearrangement_lq(edges: np.ndarray, vals: np.ndarray, q: float) -> float:
    """integral of (u*)^q over measure, for equimeasurability checks."""
    return float(np.sum(vals**q * np.diff(edges)))


def hardy_ratio(f: RadialTestFunction, exps: Exponents) -> float:
    """Ratio of int |u|^p / r^p dmu to int |grad u|^p dmu."""
    if not np.any(f.values > 0):
        raise DegenerateInputError("hardy_ratio needs a nonzero function")
    p = exps.p_grad
    lhs = float(np.sum((f.values / f.grid.centers) ** p * f.grid.cell_weights))
    rhs = f.grad_norm_p(p)
    return lhs / rhs


EMBEDDING_KINDS = (
    "omega_lq",
    "omega_lp",
    "weighted_lp",
    "weighted_lp_euclidean",
    "supercritical_lp1",
)


def _tail_exponent_of(dens_pow, grid: np.ndarray) -> float:
    mask = grid >= grid[-1] / 10.0
    vals = dens_pow(grid[mask])
    return float(np.polyfit(np.log(grid[mask]), np.log(vals), 1)[0])


def embedding_ratio(f: RadialTestFunction, kind: str, exps: Exponents,
                    dens: DensityProfile | None = None, *, q: float | None = None,
                    r: float | None = None, R: float | None = None,
                    p1: float | None = None) -> float:
    """LHS over constant-free RHS for one of the bench inequalities.

    kinds:
      omega_lq:   int |u|^q dmu vs omega(E)^q E^(1+q/N-q/p) ||grad u||_p^q,
                  E = (int |u|^r)^(q/(q-r)) (int |u|^q)^(-r/(q-r))
      omega_lp:   q = p variant via the support measure,
                  H = p/(N(p-r))
      weighted_lp: int |u|^p rho dmu vs
                  (psi(R) + rho(R) omega(v)^p v^(p/N)) int |grad u|^p dmu
      weighted_lp_euclidean: Euclidean weighted variant with the
                  (rho(R)^(N/p-1) mu_rho(supp) + int_{B_R} rho^{N/p})^{p/N}
                  prefactor
      supercritical_lp1: int |u|^{p1} rho dmu vs (int |grad u|^p)^{p1/p};
                  requires rho tail decay alpha >= p and an integrable
                  rho^{p*/(p*-p1)} tail, else HypothesisError
    """
    if kind not in EMBEDDING_KINDS:
        raise DomainError(f"unknown embedding kind {kind!r}")
    n, p = exps.n_dim, exps.p_grad
    p_star = n * p / (n - p)
    gp = f.grad_norm_p(p)
    if gp == 0.0:
        raise DegenerateInputError("test function has zero gradient")

    if kind == "omega_lq":
        if q is None or r is None or not 0 < r < q <= p_star:
            raise DomainError(f"need 0 < r < q <= Np/(N-p) = {p_star}")
        eq = f.lq_norm_q(q)
        er = f.lq_norm_q(r)
        e_val = er ** (q / (q - r)) * eq ** (-r / (q - r))
        rhs = f.geom.omega(e_val) ** q * e_val ** (1.0 + q / n - q / p) * gp ** (q / p)
        return eq / rhs

    if kind == "omega_lp":
        if r is None or not 0 < r < p:
            raise DomainError("need 0 < r < p")
        h = p / (n * (p - r))
        v = f.support_measure()
        lhs = f.lq_norm_q(p)
        er = f.lq_norm_q(r)
        rhs = (f.geom.omega(v) ** (p / (1.0 + r * h))
               * er ** (p * h / (1.0 + r * h))
               * gp ** (1.0 / (1.0 + r * h)))
        return lhs / rhs

    if kind == "weighted_lp":
        if dens is None or R is None or R <= 0:
            raise DomainError("weighted_lp needs a density and R > 0")
        v = f.support_measure()
        lhs = f.weighted_lq_norm_q(p, dens)
        pref = dens.psi(exps, R) + dens.rho(R) * f.geom.omega(v) ** p * v ** (p / n)
        return lhs / (pref * gp)

    if kind == "weighted_lp_euclidean":
        if dens is None or R is None or R <= 0:
            raise DomainError("weighted_lp_euclidean needs a density and R > 0")
        supp = f.values > 0
        rho_c = dens.rho(f.grid.centers)
        w = f.grid.cell_weights
        mu_rho_supp = float(np.sum(rho_c[supp] * w[supp]))
        inner = supp & (f.grid.centers <= R)
        int_rho_np = float(np.sum(rho_c[inner] ** (n / p) * w[inner]))
        lhs = f.weighted_lq_norm_q(p, dens)
        pref = (dens.rho(R) ** (n / p - 1.0) * mu_rho_supp + int_rho_np) ** (p / n)
        return lhs / (pref * gp)

    # supercritical_lp1
    if dens is None or p1 is None:
        raise DomainError("supercritical_lp1 needs a density and p1")
    alpha = dens.alpha if dens.kind == "powerlaw" else dens.alpha_est
    if alpha < p:
        raise HypothesisError(
            f"s^alpha rho(s) eventually nonincreasing needs alpha >= p; alpha={alpha}")
    lo_bound = p * (n - alpha) / (n - p)
    if not lo_bound < p1 < p_star:
        raise DomainError(
            f"p1 must lie in ({lo_bound}, {p_star}) for alpha={alpha}")
    ex = p_star / (p_star - p1)
    tail_grid = log_grid(1.0, min(dens.r_max, 1e6), 64)
    tail = _tail_exponent_of(
        lambda s: dens.rho(s) ** ex * np.array([f.geom.sphere_area(x) for x in s]),
        tail_grid)
    if tail >= -1.0:
        raise HypothesisError(
            f"rho^(p*/(p*-p1)) is not integrable (tail exponent {tail:.3f})")
    lhs = f.weighted_lq_norm_q(p1, dens)
    return lhs / gp ** (p1 / p)


# -- the profile ODE and the general embedding ------------------------


def euclidean_iso_G(n_dim: int):
    """Sharp Euclidean profile nonlinearity, calibrated so that the
    isoperimetric inequality |boundary| >= g(volume) is an equality on
    balls and G is the inverse function of g."""
    omega_n = unit_ball_volume(n_dim)
    g0 = (n_dim * omega_n ** (1.0 / n_dim)) ** (-n_dim / (n_dim - 1.0))
    kappa = n_dim / (n_dim - 1.0)

    def G(s):
        return g0 * np.asarray(s, dtype=float) ** kappa

    G.power = kappa
    G.coefficient = g0
    return G


@dataclass
class GeneralEmbeddingProfile:
    """Tabulated maximal solution of G(A(s)) = A'(s)^(p/(p-1)), A(0)=0,
    together with the derived maps B(s) = G(A(s^(1/p))) and
    S(y) = Ginv(y)^p y^-(p-1)."""

    p: float
    G: object
    s: np.ndarray
    A: np.ndarray
    Aprime: np.ndarray
    c_ap: float
    head_coeff: float
    head_power: float
    _logs: np.ndarray = field(init=False, repr=False)
    _logA: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._logs = np.log(self.s)
        self._logA = np.log(self.A)

    def A_of(self, s):
        s = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s)
        out = np.empty(flat.shape)
        below = flat < self.s[0]
        above = flat > self.s[-1]
        mid = ~below & ~above
        out[below] = self.head_coeff * flat[below] ** self.head_power
        out[mid] = np.exp(np.interp(np.log(flat[mid]), self._logs, self._logA))
        if np.any(above):
            # continue with the log-log slope of the last decade
            tail = self._logs >= self._logs[-1] - math.log(10.0)
            slope = np.polyfit(self._logs[tail], self._logA[tail], 1)[0]
            out[above] = self.A[-1] * (flat[above] / self.s[-1]) ** slope
        return float(out[0]) if s.ndim == 0 else out

    def Aprime_of(self, s):
        a = self.A_of(s)
        return np.asarray(self.G(a)) ** ((self.p - 1.0) / self.p)

    def B_of(self, s):
        s = np.asarray(s, dtype=float)
        return self.G(self.A_of(s ** (1.0 / self.p)))

    def G_inv(self, y: float) -> float:
        if y < 0:
            raise DomainError("G_inv needs y >= 0")
        if y == 0.0:
            return 0.0

        def h(lx):
            return math.log(float(self.G(math.exp(lx)))) - math.log(y)

        lo, hi = -5.0, 5.0
        while h(lo) > 0.0:
            lo -= 20.0
            if lo < -680.0:
                raise DomainError("G_inv bracket expansion failed")
        while h(hi) < 0.0:
            hi += 20.0
            if hi > 680.0:
                raise DomainError("G_inv bracket expansion failed")
        return math.exp(brentq(h, lo, hi, xtol=1e-13, maxiter=300))

    def S_of(self, y: float) -> float:
        if y <= 0:
            raise DomainError("S needs y > 0")
        return self.G_inv(y) ** self.p * y ** -(self.p - 1.0)

    def B_inv(self, y: float) -> float:
        if y <= 0:
            raise DomainError("B_inv needs y > 0")

        def h(ls):
            return math.log(self.B_of(math.exp(ls))) - math.log(y)

        lo = math.log(self.s[0] ** self.p)
        hi = math.log(self.s[-1] ** self.p)
        flo, fhi = h(lo), h(hi)
        while flo > 0.0:
            lo -= 5.0
            flo = h(lo)
        while fhi < 0.0:
            hi += 5.0
            fhi = h(hi)
        return math.exp(brentq(h, lo, hi, xtol=1e-13, maxiter=300))

    def fitted_exponent_A(self) -> float:
        return float(np.polyfit(self._logs, self._logA, 1)[0])

    def fitted_exponent_B(self) -> float:
        b = self.B_of(self.s**self.p)
        return float(np.polyfit(np.log(self.s**self.p), np.log(b), 1)[0])

    def sandwich_report(self, rel_tol: float = 1e-6) -> dict:
        """Check A/s <= A' <= C A/s and C^-p s <= S(B(s)) <= s on the grid."""
        ratio = self.Aprime * self.s / self.A
        lower_ok = bool(np.all(ratio >= 1.0 - rel_tol))
        upper_ok = bool(np.all(ratio <= self.c_ap * (1.0 + rel_tol)))
        s_args = self.s**self.p
        sb = np.array([self.S_of(float(self.B_of(sa))) for sa in s_args])
        sof_lo = bool(np.all(sb >= self.c_ap**-self.p * s_args * (1.0 - rel_tol)))
        sof_hi = bool(np.all(sb <= s_args * (1.0 + rel_tol)))
        # convexity of B sampled by chords over consecutive grid triples
        b_vals = self.B_of(s_args)
        s1, s2, s3 = s_args[:-2], s_args[1:-1], s_args[2:]
        chord = b_vals[:-2] + (b_vals[2:] - b_vals[:-2]) * (s2 - s1) / (s3 - s1)
        convex_violations = int(np.sum(b_vals[1:-1] > chord * (1.0 + 1e-9)))
        return {
            "derivative_lower": lower_ok,
            "derivative_upper": upper_ok,
            "sofeef_lower": sof_lo,
            "sofeef_upper": sof_hi,
            "sofeef_values": sb / s_args,
            "b_logconvexity_violations": convex_violations,
        }


def solve_profile_ode(G, p: float, s_max: float = 1e6,
                      s0: float = 1e-6, points_per_decade: int = 64) -> GeneralEmbeddingProfile:
    """Integrate A' = G(A)^((p-1)/p) from the nontrivial branch at 0.

    The initial condition A(0) = 0 also carries the trivial branch
    A == 0; the maximal solution is selected by starting from the local
    power-law expansion A(s) ~ c s^lambda on [0, s0], with lambda matched
    to the behavior of G at zero.  If no positive-exponent expansion
    exists the nontrivial branch does not start and BranchError is raised.
    """
    if p <= 1:
        raise DomainError("p must exceed 1")
    g1 = float(G(1e-8))
    g2 = float(G(1e-6))
    if g1 <= 0 or g2 <= 0:
        raise BranchError("G vanishes near 0; only the trivial branch exists")
    kappa = math.log(g2 / g1) / math.log(1e2)
    coeff = g2 / (1e-6) ** kappa
    denom = p - kappa * (p - 1.0)
    if denom <= 0:
        raise BranchError(
            f"G grows like s^{kappa:.3f} at 0; no positive startup exponent "
            f"for p={p} (needs kappa < p/(p-1))")
    lam = p / denom
    c0 = (coeff ** ((p - 1.0) / p) / lam) ** lam
    a0 = c0 * s0**lam

    def rhs(s, y):
        return [float(np.asarray(G(max(y[0], 0.0))) ** ((p - 1.0) / p))]

    s_eval = log_grid(s0, s_max, points_per_decade)
    sol = solve_ivp(rhs, (s0, s_max), [a0], t_eval=s_eval, rtol=1e-12,
                    atol=a0 * 1e-12, method="RK45", max_step=np.inf)
    if not sol.success:
        raise BranchError(f"profile integration failed: {sol.message}")
    a_vals = sol.y[0]
    if np.any(a_vals <= 0) or np.any(np.diff(a_vals) <= 0):
        raise BranchError("integrator collapsed onto the trivial branch")
    aprime = np.asarray(G(a_vals)) ** ((p - 1.0) / p)
    c_ap = float(np.max(aprime * s_eval / a_vals))
    return GeneralEmbeddingProfile(p=p, G=G, s=s_eval, A=a_vals, Aprime=aprime,
                                   c_ap=c_ap, head_coeff=c0, head_power=lam)


def general_embedding_check(f: RadialTestFunction, prof: GeneralEmbeddingProfile,
                            exps: Exponents, dens: DensityProfile | None = None,
                            R: float | None = None) -> dict:
    """Evaluate the three general-embedding ratios for one test function.

    Returns {'gradient_profile', 'faber_krahn'} and, when a density and a
    radius R are supplied, 'weighted'.  The first two must be <= 1 when
    the profile was built from the sharp Euclidean G; the weighted ratio
    has an existential constant and is only required to be finite.
    """
    if f.geom.kind != "euclidean":
        raise HypothesisError("the general embedding bench assumes Euclidean geometry")
    p = exps.p_grad
    gp = f.grad_norm_p(p)
    if gp == 0.0:
        raise DegenerateInputError("test function has zero gradient")
    w = f.grid.cell_weights
    pos = f.values > 0

    g_of_a = np.zeros_like(f.values)
    g_of_a[pos] = np.asarray(prof.G(prof.A_of(f.values[pos])))
    int_ga = float(np.sum(g_of_a * w))
    out = {"gradient_profile": prof.S_of(int_ga) / gp}

    v = f.support_measure()
    b_arg = prof.c_ap**p * gp
    rhs_fk = v * prof.B_inv(float(prof.B_of(b_arg)) / v)
    out["faber_krahn"] = f.lq_norm_q(p) / rhs_fk

    if dens is not None and R is not None:
        rho_c = dens.rho(f.grid.centers)
        outer = pos & (f.grid.centers > R)
        mu_rho_outer = float(np.sum(rho_c[outer] * w[outer]))
        first = dens.psi(exps, R) * gp
        if mu_rho_outer > 0:
            second = mu_rho_outer * prof.B_inv(
                dens.rho(R) / mu_rho_outer * float(prof.B_of(b_arg)))
        else:
            second = 0.0
        out["weighted"] = f.weighted_lq_norm_q(p, dens) / (first + second)
    return out
