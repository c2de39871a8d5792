import math

import numpy as np
import pytest

from densflow.density import DensityProfile
from densflow.errors import ConfigError, DomainError
from densflow.geometry import Exponents, ManifoldProfile
from densflow import solver as sv

E322 = Exponents(3, 2.0, 2.0)
EUC3 = ManifoldProfile.euclidean(3)
D0 = DensityProfile.power_law(0.0)
D1 = DensityProfile.power_law(1.0)


class TestGrid:
    def test_weights_are_exact_shells(self):
        grid = sv.build_grid(EUC3, 1.0, 16)
        edges = np.arange(17) / 16.0
        expected = np.diff([EUC3.volume(r) for r in edges])
        assert np.allclose(grid.cell_weights, expected, rtol=1e-14)
        # the closed-form two-shell split at dr = 1/2 follows the same rule
        v_half = EUC3.volume(0.5)
        assert v_half == pytest.approx(4 * math.pi / 3 / 8, rel=1e-14)
        assert EUC3.volume(1.0) - v_half == pytest.approx(4 * math.pi / 3 * 7 / 8,
                                                          rel=1e-14)

    def test_weight_sum_telescopes(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            r_max = float(rng.uniform(0.5, 20.0))
            n = int(rng.integers(16, 400))
            grid = sv.build_grid(EUC3, r_max, n)
            assert grid.cell_weights.sum() == pytest.approx(EUC3.volume(r_max),
                                                            rel=1e-12)

    def test_face_area(self):
        grid = sv.build_grid(EUC3, 1.0, 16)
        assert grid.face_areas[7] == pytest.approx(math.pi, rel=1e-14)

    def test_small_grid_rejected(self):
        with pytest.raises(ConfigError):
            sv.build_grid(EUC3, 1.0, 8)


class TestFlux:
    def test_hand_value(self):
        e = Exponents(4, 3.0, 2.0)
        assert sv.numerical_flux(1.0, 0.0, 0.5, e, 0.0) == pytest.approx(-2.0)

    def test_antisymmetric(self):
        e = Exponents(3, 2.5, 1.5)
        f1 = sv.numerical_flux(0.7, 0.2, 0.1, e, 0.0)
        f2 = sv.numerical_flux(0.2, 0.7, 0.1, e, 0.0)
        assert f1 == pytest.approx(-f2, rel=1e-15)

    def test_zero_cases(self):
        assert sv.numerical_flux(0.5, 0.5, 0.1, E322, 0.0) == 0.0
        assert sv.numerical_flux(0.0, 0.0, 0.1, E322, 0.0) == 0.0
        assert sv.numerical_flux(0.0, 0.0, 0.1, Exponents(4, 3.0, 1.5), 0.0) == 0.0


class TestStableDt:
    def test_zero_field_capped(self):
        grid = sv.build_grid(EUC3, 1.0, 32)
        state = sv.SolverState(u=np.zeros(32))
        dt = sv.stable_dt(state, grid, D0, E322, cfl=0.45, dt_max=7.5)
        assert dt == 7.5

    def test_resolution_scaling_p2(self):
        u_fun = lambda r: np.maximum(1.0 - r**2, 0.0) ** 2
        g1 = sv.build_grid(EUC3, 2.0, 100)
        g2 = sv.build_grid(EUC3, 2.0, 200)
        dt1 = sv.stable_dt(sv.SolverState(u=u_fun(g1.centers)), g1, D0, E322)
        dt2 = sv.stable_dt(sv.SolverState(u=u_fun(g2.centers)), g2, D0, E322)
        assert dt1 / dt2 == pytest.approx(4.0, rel=0.02)

    def test_amplitude_scaling(self):
        grid = sv.build_grid(EUC3, 2.0, 100)
        u = np.maximum(1.0 - grid.centers**2, 0.0) ** 2
        dt1 = sv.stable_dt(sv.SolverState(u=u), grid, D0, E322)
        dt2 = sv.stable_dt(sv.SolverState(u=2.0 * u), grid, D0, E322)
        assert dt1 / dt2 == pytest.approx(2.0, rel=1e-12)


def _oracle_step(u, dt, dr, rho, weights, areas, p, m):
    """Scalar re-implementation of the conservative update (test oracle)."""
    n = len(u)
    flux = []
    for i in range(n - 1):
        d = (u[i + 1] - u[i]) / dr
        ubar = 0.5 * (u[i] + u[i + 1])
        a = ubar ** (m - 1.0) * (d * d) ** ((p - 2.0) / 2.0) if ubar > 0 else 0.0
        flux.append(a * d)
    out = []
    for i in range(n):
        right = areas[i] * flux[i] if i < n - 1 else 0.0
        left = areas[i - 1] * flux[i - 1] if i > 0 else 0.0
        out.append(u[i] + dt / (rho[i] * weights[i]) * (right - left))
    return np.array(out)


class TestStep:
    def test_uniform_field_steady(self):
        grid = sv.build_grid(EUC3, 1.0, 32)
        state = sv.SolverState(u=np.full(32, 0.7))
        new = sv.step(state, grid, D1, E322, dt_max=1e-3)
        assert np.array_equal(new.u, state.u)
        assert new.time > 0

    def test_single_step_mass_exact(self):
        grid = sv.build_grid(EUC3, 2.0, 64)
        u = np.zeros(64)
        u[0] = 1.0
        state = sv.SolverState(u=u)
        rho_c = D1.rho(grid.centers)
        m0 = float(np.sum(rho_c * grid.cell_weights * u))
        new = sv.step(state, grid, D1, E322)
        m1 = float(np.sum(rho_c * grid.cell_weights * new.u))
        assert abs(m1 - m0) <= 1e-14 * m0

    def test_against_independent_oracle_8_cells(self):
        # classical porous-medium exponents on 8 cells, hand-rolled update
        geom = ManifoldProfile.euclidean(3)
        r = np.arange(9) * 0.25
        grid = sv.RadialGrid(
            n_cells=8, dr=0.25,
            centers=0.25 * (np.arange(8) + 0.5),
            cell_weights=np.diff([geom.volume(x) for x in r]),
            face_areas=np.array([geom.sphere_area(x) for x in r[1:-1]]))
        u0 = np.maximum(1.0 - grid.centers, 0.0)
        state = sv.SolverState(u=u0.copy())
        dt = sv.stable_dt(state, grid, D0, E322)
        expected = _oracle_step(u0, dt, grid.dr, D0.rho(grid.centers),
                                grid.cell_weights, grid.face_areas, 2.0, 2.0)
        new = sv.step(state, grid, D0, E322)
        assert new.dt == dt
        assert np.allclose(new.u, expected, rtol=1e-13, atol=1e-16)

    def test_positivity_after_steps(self):
        grid = sv.build_grid(EUC3, 2.0, 64)
        state = sv.SolverState(u=sv.initial_bump(grid, 1.0, 1.0))
        for _ in range(50):
            state = sv.step(state, grid, D1, E322)
            assert np.all(state.u >= 0.0)


class TestKernelTwin:
    def test_bitwise_equality_classical_exponents(self):
        grid = sv.build_grid(EUC3, 2.0, 64)
        u0 = sv.initial_bump(grid, 1.0, 1.0)
        for dens in (D0, D1):
            fast = sv.advance_to(sv.SolverState(u=u0.copy()), grid, dens, E322,
                                 0.004, 0.45, 0.0, math.inf, 1e-6)
            slow = sv.SolverState(u=u0.copy())
            while slow.time < 0.004:
                slow = sv.step(slow, grid, dens, E322, t_cap=0.004,
                               supp_threshold=1e-6)
            assert fast.steps == slow.steps
            assert fast.time == slow.time
            assert np.array_equal(fast.u, slow.u)

    def test_general_exponents_agree_to_roundoff(self):
        # pow rounding may differ by an ulp between the two paths
        grid = sv.build_grid(EUC3, 2.0, 64)
        u0 = sv.initial_bump(grid, 1.0, 1.0)
        for (p, m) in ((3.0, 1.5), (2.5, 1.2), (1.8, 2.0)):
            n_dim = 4 if p >= 3 else 3
            e = Exponents(n_dim, p, m)
            eps = 0.0 if p >= 2 else 1e-8
            fast = sv.advance_to(sv.SolverState(u=u0.copy()), grid, D1, e,
                                 0.002, 0.45, eps, math.inf, 1e-6)
            slow = sv.SolverState(u=u0.copy())
            while slow.time < 0.002:
                slow = sv.step(slow, grid, D1, e, 0.45, eps, t_cap=0.002,
                               supp_threshold=1e-6)
            assert fast.steps == slow.steps
            assert np.allclose(fast.u, slow.u, rtol=1e-12, atol=1e-300)


class TestObservables:
    def test_zero_field(self):
        grid = sv.build_grid(EUC3, 1.0, 32)
        assert sv.observables(np.zeros(32), grid, D0) == (0.0, 0.0, 0.0)

    def test_bump_mass_closed_form(self):
        grid = sv.build_grid(EUC3, 1.5, 4000)
        u = sv.initial_bump(grid, 1.0, 1.0)
        _, mass, _ = sv.observables(u, grid, D0)
        assert mass == pytest.approx(32 * math.pi / 105, rel=1e-6)

    def test_interface_threshold(self):
        grid = sv.build_grid(EUC3, 1.0, 100)
        u = np.where(grid.centers <= 0.5, 1.0, 0.0)
        sup, _, iface = sv.observables(u, grid, D0, eps_supp=1e-6)
        assert sup == 1.0
        assert abs(iface - 0.5) <= grid.dr

    def test_eps_supp_gate(self):
        grid = sv.build_grid(EUC3, 1.0, 32)
        with pytest.raises(DomainError):
            sv.observables(np.ones(32), grid, D0, eps_supp=0.0)


class TestRun:
    def test_t_final_zero_single_sample(self):
        rec = sv.run(EUC3, D0, E322, n_cells=64, t_final=0.0, r_max=5.0,
                     amplitude=2.0, r0=1.0)
        assert len(rec.samples) == 1
        s = rec.samples[0]
        assert s.t == 0.0
        # sup sampled at cell centers: A (1 - (dr/2)^2)^2 for the first cell
        assert s.sup == pytest.approx(2.0, rel=5e-3)
        assert s.interface == pytest.approx(1.0, abs=2 * 5.0 / 64)

    def test_sup_nonincreasing(self):
        rec = sv.run(EUC3, D0, E322, n_cells=256, t_final=1.0, r_max=4.0)
        sups = [s.sup for s in rec.samples]
        for a, b in zip(sups, sups[1:]):
            assert b <= a * (1 + 1e-12)

    def test_scaling_covariance_exact_factor_two(self):
        # u -> 2u, t -> t/2 maps solutions to solutions when p+m-3 = 1;
        # with binary-exact factor 2 the discrete trajectories match too
        kw = dict(n_cells=256, r_max=6.0, r0=1.0, sample_t0=0.01)
        rec1 = sv.run(EUC3, D0, E322, amplitude=1.0, t_final=4.0, **kw)
        rec2 = sv.run(EUC3, D0, E322, amplitude=2.0, t_final=2.0, **kw)
        t1 = {round(math.log2(s.t), 6): s for s in rec1.samples if s.t > 0}
        for s in rec2.samples:
            if s.t <= 0:
                continue
            key = round(math.log2(2.0 * s.t), 6)
            if key in t1:
                assert s.sup == pytest.approx(2.0 * t1[key].sup, rel=0.01)

    def test_auto_domain_needs_subcritical(self):
        with pytest.raises(ConfigError):
            sv.run(EUC3, DensityProfile.power_law(2.8), E322, n_cells=64,
                   t_final=1.0)
