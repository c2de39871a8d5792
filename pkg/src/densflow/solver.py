"""Explicit conservative finite-volume integrator on a radial grid.

The flow solved is

    rho(r) u_t = sigma(r)^-1 d/dr( sigma(r) * u^(m-1) |u_r|^(p-2) u_r ),

the radial form of the weighted doubly nonlinear diffusion equation.
Cells are uniform in radius; cell weights are exact volume shells
V((i+1)dr) - V(i dr), so the discrete weighted mass

    sum_i rho(r_i) w_i u_i

is conserved to round-off by the telescoping flux form with zero-flux
boundaries at r = 0 (symmetry) and r = R_max (truncation).

Time stepping is explicit with a CFL-limited step and reject/halve on
negativity.  The hot loop exists twice: ``step`` is the plain-numpy
reference used by tests, and ``_advance_kernel`` is the numba-compiled
twin used by ``run``; both perform identical arithmetic in identical
order, which a test asserts bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .density import DensityProfile
from .errors import ConfigError, DomainError, StabilityError
from .geometry import Exponents, ManifoldProfile
from .quadrature import integrate_from_zero
from . import regime as _regime

__all__ = [
    "RadialGrid",
    "SolverState",
    "Sample",
    "RunRecord",
    "build_grid",
    "numerical_flux",
    "face_diffusivity",
    "stable_dt",
    "step",
    "observables",
    "initial_bump",
    "run",
    "advance_to",
    "DT_FLOOR",
    "BOUNDARY_GUARD_FRACTION",
]

DT_FLOOR = 1e-300
BOUNDARY_GUARD_FRACTION = 0.9
MAX_HALVINGS = 40


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial cells with exact volume-shell weights."""

    n_cells: int
    dr: float
    centers: np.ndarray      # (i + 1/2) dr
    cell_weights: np.ndarray  # V((i+1) dr) - V(i dr)
    face_areas: np.ndarray   # sigma((i+1) dr), interior faces only

    @property
    def r_max(self) -> float:
        return self.n_cells * self.dr


@dataclass
class SolverState:
    """Discrete solution plus time-stepping bookkeeping."""

    u: np.ndarray
    time: float = 0.0
    dt: float = 0.0
    steps: int = 0
    interface_near_boundary: bool = False


@dataclass(frozen=True)
class Sample:
    t: float
    sup: float
    mass: float
    interface: float
    flagged: bool = False


@dataclass
class RunRecord:
    """Persisted observables of one run."""

    config_digest: str
    samples: list
    final_u: np.ndarray | None = None
    grid: RadialGrid | None = None
    final_state_path: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def first_flagged_index(self) -> int | None:
        for i, s in enumerate(self.samples):
            if s.flagged:
                return i
        return None

    def unflagged(self) -> list:
        idx = self.first_flagged_index
        return self.samples if idx is None else self.samples[:idx]


def build_grid(geom: ManifoldProfile, r_max: float, n_cells: int) -> RadialGrid:
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    if n_cells < 16:
        raise ConfigError(f"n_cells={n_cells} too small; need >= 16")
    dr = r_max / n_cells
    edges = dr * np.arange(n_cells + 1)
    vols = np.array([geom.volume(r) for r in edges])
    weights = np.diff(vols)
    if np.any(weights <= 0):
        raise DomainError("grid produced non-positive cell weights")
    centers = dr * (np.arange(n_cells) + 0.5)
    areas = np.array([geom.sphere_area(r) for r in edges[1:-1]])
    return RadialGrid(n_cells=n_cells, dr=dr, centers=centers,
                      cell_weights=weights, face_areas=areas)


def face_diffusivity(u_left, u_right, dr: float, exps: Exponents,
                     eps_reg: float = 0.0):
    """Effective diffusivity ubar^(m-1) (D^2 + eps^2)^((p-2)/2) at a face."""
    u_left = np.asarray(u_left, dtype=float)
    u_right = np.asarray(u_right, dtype=float)
    d = (u_right - u_left) / dr
    ubar = 0.5 * (u_left + u_right)
    mexp = exps.m_porous - 1.0
    ph = 0.5 * (exps.p_grad - 2.0)
    safe = np.where(ubar > 0.0, ubar, 1.0)
    a = safe**mexp * (d * d + eps_reg * eps_reg) ** ph
    a = np.where(ubar > 0.0, a, 0.0)
    return a, d


def numerical_flux(u_left, u_right, dr: float, exps: Exponents,
                   eps_reg: float = 0.0):
    """Flux density ubar^(m-1) (|D|^2 + eps^2)^((p-2)/2) D at a face.

    Antisymmetric under swapping the arguments and zero whenever the two
    states agree (in particular on vacuum).
    """
    a, d = face_diffusivity(u_left, u_right, dr, exps, eps_reg)
    out = a * d
    return float(out) if np.ndim(out) == 0 else out


def stable_dt(state: SolverState, grid: RadialGrid, dens: DensityProfile,
              exps: Exponents, cfl: float = 0.45, eps_reg: float = 0.0,
              dt_max: float = math.inf) -> float:
    """CFL-limited explicit step for the current state."""
    if not 0 < cfl <= 1:
        raise DomainError("cfl must lie in (0, 1]")
    u = state.u
    a, _ = face_diffusivity(u[:-1], u[1:], grid.dr, exps, eps_reg)
    rho_c = dens.rho(grid.centers)
    rr = np.minimum(rho_c[:-1], rho_c[1:])
    dr2 = grid.dr * grid.dr
    with np.errstate(over="ignore"):
        per_face = rr * dr2 / (2.0 * a + DT_FLOOR)
        dt = cfl * float(np.min(per_face))
    return min(dt, dt_max)


def _apply_update(u, dt, dr, inv_rw, areas, exps, eps_reg):
    a, d = face_diffusivity(u[:-1], u[1:], dr, exps, eps_reg)
    flux = a * d
    af = areas * flux
    incr = np.empty_like(u)
    incr[0] = af[0]
    incr[1:-1] = af[1:] - af[:-1]
    incr[-1] = -af[-1]
    return u + (dt * inv_rw) * incr


def step(state: SolverState, grid: RadialGrid, dens: DensityProfile,
         exps: Exponents, cfl: float = 0.45, eps_reg: float = 0.0,
         dt_max: float = math.inf, t_cap: float | None = None,
         supp_threshold: float | None = None) -> SolverState:
    """One accepted explicit step; rejects and halves dt on negativity.

    Weighted mass is unchanged to round-off by construction.  The
    boundary flag is set once the numerical support enters the outer
    tenth of the domain.
    """
    u = state.u
    rho_c = dens.rho(grid.centers)
    inv_rw = 1.0 / (rho_c * grid.cell_weights)
    dt = stable_dt(state, grid, dens, exps, cfl, eps_reg, dt_max)
    if t_cap is not None:
        dt = min(dt, t_cap - state.time)
    if dt <= 0:
        raise StabilityError("no positive time step available")
    for _ in range(MAX_HALVINGS + 1):
        u_new = _apply_update(u, dt, grid.dr, inv_rw,
                              grid.face_areas, exps, eps_reg)
        if not np.any(u_new < 0.0):
            break
        dt *= 0.5
    else:
        raise StabilityError(
            f"step rejected after {MAX_HALVINGS} halvings at t={state.time}")
    flagged = state.interface_near_boundary
    if supp_threshold is not None and not flagged:
        wet = np.nonzero(u_new > supp_threshold)[0]
        if wet.size and grid.centers[wet[-1]] >= BOUNDARY_GUARD_FRACTION * grid.r_max:
            flagged = True
    new_time = state.time + dt
    if t_cap is not None and new_time >= t_cap:
        new_time = t_cap
    return SolverState(u=u_new, time=new_time, dt=dt, steps=state.steps + 1,
                       interface_near_boundary=flagged)


@njit(cache=True, nogil=True)
def _advance_kernel(u, t, t_target, dr, rr_dr2, inv_rw, areas, mexp, ph, eps2,
                    cfl, dt_max, supp_thresh, guard_idx, flagged):
    """Advance u in place until t_target; twin of ``step``'s arithmetic.

    rr_dr2 holds min(rho_i, rho_i+1) * dr^2 per face and inv_rw holds
    1 / (rho_i * w_i) per cell, both precomputed by the wrapper.  The
    classical p = 2 (ph = 0) and m = 2 (mexp = 1) exponents take
    pow-free vectorizable paths; the general path guards vacuum faces
    explicitly.  Returns (t, steps, flagged, ok, last_dt).
    """
    n = u.shape[0]
    a = np.empty(n - 1)
    af = np.empty(n - 1)
    buf = np.empty(n)
    cur = u
    nxt = buf
    swapped = False
    status_ok = True
    steps = 0
    last_dt = 0.0
    wet_last = -1
    for i in range(n - 1, -1, -1):
        if cur[i] > supp_thresh:
            wet_last = i
            break
    while t < t_target:
        if ph == 0.0:
            if mexp == 1.0:
                for i in range(n - 1):
                    a[i] = 0.5 * (cur[i] + cur[i + 1])
            else:
                for i in range(n - 1):
                    ubar = 0.5 * (cur[i] + cur[i + 1])
                    a[i] = ubar**mexp if ubar > 0.0 else 0.0
        else:
            for i in range(n - 1):
                d = (cur[i + 1] - cur[i]) / dr
                ubar = 0.5 * (cur[i] + cur[i + 1])
                if ubar > 0.0:
                    a[i] = ubar**mexp * (d * d + eps2) ** ph
                else:
                    a[i] = 0.0
        for i in range(n - 1):
            af[i] = areas[i] * (a[i] * ((cur[i + 1] - cur[i]) / dr))
        dt = dt_max
        for i in range(n - 1):
            cand = cfl * (rr_dr2[i] / (2.0 * a[i] + DT_FLOOR))
            if cand < dt:
                dt = cand
        rem = t_target - t
        if dt > rem:
            dt = rem
        if dt <= 0.0:
            status_ok = False
            break
        ok = False
        for _ in range(MAX_HALVINGS + 1):
            nxt[0] = cur[0] + (dt * inv_rw[0]) * af[0]
            for i in range(1, n - 1):
                nxt[i] = cur[i] + (dt * inv_rw[i]) * (af[i] - af[i - 1])
            nxt[n - 1] = cur[n - 1] + (dt * inv_rw[n - 1]) * (0.0 - af[n - 2])
            neg = False
            for i in range(n):
                if nxt[i] < 0.0:
                    neg = True
                    break
            if not neg:
                ok = True
                break
            dt *= 0.5
        if not ok:
            status_ok = False
            break
        tmp = cur
        cur = nxt
        nxt = tmp
        swapped = not swapped
        if t + dt >= t_target:
            t = t_target
        else:
            t = t + dt
        steps += 1
        last_dt = dt
        while wet_last + 1 < n and cur[wet_last + 1] > supp_thresh:
            wet_last += 1
        if wet_last >= guard_idx:
            flagged = True
    if swapped:
        for i in range(n):
            u[i] = cur[i]
    return t, steps, flagged, status_ok, last_dt


def advance_to(state: SolverState, grid: RadialGrid, dens: DensityProfile,
             exps: Exponents, t_target: float, cfl: float, eps_reg: float,
             dt_max: float, supp_thresh: float) -> SolverState:
    """Advance a state to t_target through the compiled kernel."""
    u = state.u.copy()
    rho_c = dens.rho(grid.centers)
    rr_dr2 = np.minimum(rho_c[:-1], rho_c[1:]) * (grid.dr * grid.dr)
    inv_rw = 1.0 / (rho_c * grid.cell_weights)
    guard_idx = int(math.ceil(BOUNDARY_GUARD_FRACTION * grid.n_cells - 0.5))
    t, steps, flagged, ok, last_dt = _advance_kernel(
        u, state.time, t_target, grid.dr, rr_dr2, inv_rw,
        grid.face_areas, exps.m_porous - 1.0, 0.5 * (exps.p_grad - 2.0),
        eps_reg * eps_reg, cfl, dt_max, supp_thresh, guard_idx,
        state.interface_near_boundary)
    if not ok:
        raise StabilityError(f"step rejected after {MAX_HALVINGS} halvings at t={t}")
    return SolverState(u=u, time=t, dt=last_dt if steps else state.dt,
                       steps=state.steps + steps,
                       interface_near_boundary=bool(flagged))


def observables(u: np.ndarray, grid: RadialGrid, dens: DensityProfile,
                eps_supp: float = 1e-6, ref_sup: float | None = None):
    """(sup norm, weighted mass, interface radius) of a discrete field.

    The interface is the outermost cell center whose value exceeds
    eps_supp times the reference amplitude (the initial sup of the run;
    defaults to the field's own sup).  The zero field reports (0, 0, 0).
    """
    if eps_supp <= 0:
        raise DomainError("eps_supp must be positive")
    sup = float(np.max(u)) if u.size else 0.0
    rho_c = dens.rho(grid.centers)
    mass = float(np.sum(rho_c * grid.cell_weights * u))
    if sup == 0.0:
        return 0.0, 0.0, 0.0
    thresh = eps_supp * (ref_sup if ref_sup is not None else sup)
    wet = np.nonzero(u > thresh)[0]
    interface = float(grid.centers[wet[-1]]) if wet.size else 0.0
    return sup, mass, interface


def initial_bump(grid: RadialGrid, amplitude: float, r0: float) -> np.ndarray:
    """C^1 compactly supported bump A (1 - (r/r0)^2)_+^2 sampled at centers."""
    x = np.maximum(1.0 - (grid.centers / r0) ** 2, 0.0)
    return amplitude * x * x


def bump_weighted_mass(geom: ManifoldProfile, dens: DensityProfile,
                       amplitude: float, r0: float) -> float:
    """Exact weighted mass of the initial bump, by quadrature."""

    def f(r):
        return amplitude * max(1.0 - (r / r0) ** 2, 0.0) ** 2 * dens.rho(r) * geom.sphere_area(r)

    return integrate_from_zero(f, r0)


def _sample_times(t_final: float, t0: float) -> list:
    """Geometric sample times t0 * 2^(k/4) up to and including t_final."""
    if t_final <= 0:
        return []
    times = []
    k = 0
    while True:
        t = t0 * 2.0 ** (k / 4.0)
        if t >= t_final:
            break
        times.append(t)
        k += 1
    times.append(t_final)
    return times


def run(geom: ManifoldProfile, dens: DensityProfile, exps: Exponents, *,
        n_cells: int, t_final: float, r_max: float | None = None,
        amplitude: float = 1.0, r0: float = 1.0, cfl: float = 0.45,
        eps_supp: float = 1e-6, eps_reg: float | None = None,
        dt_max: float = math.inf, sample_t0: float | None = None,
        gamma: float = 1.0, config_digest: str = "",
        use_kernel: bool = True, stop_on_flag: bool = True) -> RunRecord:
    """Integrate from the standard bump and record observables.

    Observables are sampled at t = 0 and on the geometric grid
    t0 * 2^(k/4).  With ``r_max=None`` the domain is sized to
    max(3 Z0(t_final), 10 r0), which requires the subcritical regime;
    outside it the caller must fix the domain explicitly.

    With ``stop_on_flag`` (default) integration ends at the first sample
    whose support has entered the outer tenth of the domain: flagged
    samples are excluded from every fit, and supercritical spreading
    makes the flagged phase arbitrarily expensive to integrate.
    """
    meta = {"gamma": gamma, "amplitude": amplitude, "r0": r0,
            "t_final": t_final, "cfl": cfl, "eps_supp": eps_supp}
    mass0 = bump_weighted_mass(geom, dens, amplitude, r0)
    if r_max is None:
        rep = _regime.classify_regime(geom, dens, exps)
        if rep.regime != _regime.SUBCRITICAL:
            raise ConfigError(
                f"automatic domain sizing needs the subcritical regime, got {rep.regime}")
        zf = _regime.z0(geom, dens, exps, max(t_final, 1e-12), mass0, gamma)
        r_max = max(3.0 * zf, 10.0 * r0)
    meta["r_max"] = r_max
    meta["n_cells"] = n_cells
    grid = build_grid(geom, r_max, n_cells)
    u0 = initial_bump(grid, amplitude, r0)
    if eps_reg is None:
        eps_reg = 0.0 if exps.p_grad >= 2.0 else 1e-8 * amplitude / r0
    supp_thresh = eps_supp * float(np.max(u0))
    state = SolverState(u=u0.copy())

    def take_sample(st):
        sup, mass, interface = observables(st.u, grid, dens, eps_supp,
                                           ref_sup=float(np.max(u0)))
        return Sample(t=st.time, sup=sup, mass=mass, interface=interface,
                      flagged=st.interface_near_boundary)

    samples = [take_sample(state)]
    if t_final > 0:
        t0 = sample_t0 if sample_t0 is not None else t_final * 1e-4
        for t_k in _sample_times(t_final, t0):
            if use_kernel:
                state = advance_to(state, grid, dens, exps, t_k, cfl, eps_reg,
                                   dt_max, supp_thresh)
            else:
                while state.time < t_k:
                    state = step(state, grid, dens, exps, cfl, eps_reg,
                                 dt_max, t_cap=t_k, supp_threshold=supp_thresh)
            samples.append(take_sample(state))
            if stop_on_flag and state.interface_near_boundary:
                break
    return RunRecord(config_digest=config_digest, samples=samples,
                     final_u=state.u, grid=grid, meta=meta)
