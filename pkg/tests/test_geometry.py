import math

import numpy as np
import pytest

from densflow.errors import DomainError, ParseError, RangeError
from densflow.geometry import (Exponents, ManifoldProfile, inverse_volume,
                               load_manifold_csv, omega, unit_ball_volume,
                               verify_geometry_assumptions, volume)

E322 = Exponents(3, 2.0, 2.0)


class TestExponents:
    def test_beta(self):
        assert E322.beta == 5.0
        assert Exponents(4, 2.0, 2.0).beta == 6.0

    def test_parameter_gates(self):
        with pytest.raises(DomainError):
            Exponents(3, 1.0, 3.0)      # p = 1
        with pytest.raises(DomainError):
            Exponents(2, 2.0, 2.0)      # N = p
        with pytest.raises(DomainError):
            Exponents(3, 2.0, 1.0)      # p + m = 3

    def test_beta_recomputable(self):
        e = Exponents(5, 3.5, 1.2)
        assert e.beta == pytest.approx(5 * (3.5 + 1.2 - 3.0) + 3.5, rel=1e-15)


class TestEuclidean:
    def test_unit_ball_volume_n3(self):
        geo = ManifoldProfile.euclidean(3)
        assert volume(geo, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-14)
        assert volume(geo, 0.0) == 0.0

    def test_negative_radius_rejected(self):
        geo = ManifoldProfile.euclidean(3)
        with pytest.raises(DomainError):
            volume(geo, -1.0)

    def test_inverse_volume_unit_ball(self):
        geo = ManifoldProfile.euclidean(3)
        assert inverse_volume(geo, 4 * math.pi / 3) == pytest.approx(1.0, rel=1e-14)
        assert inverse_volume(geo, 0.0) == 0.0

    def test_inverse_volume_n2(self):
        geo = ManifoldProfile.euclidean(2)
        assert inverse_volume(geo, 4 * math.pi) == pytest.approx(2.0, rel=1e-14)

    def test_omega_constant(self):
        geo = ManifoldProfile.euclidean(3)
        expected = 1.0 / (3.0 * (4 * math.pi / 3) ** (1.0 / 3.0))
        assert omega(geo, 1.0) == pytest.approx(expected, rel=1e-14)
        assert omega(geo, 100.0) == pytest.approx(expected, rel=1e-14)
        with pytest.raises(DomainError):
            omega(geo, 0.0)

    def test_inverse_volume_roundtrip(self):
        geo = ManifoldProfile.euclidean(3)
        rng = np.random.default_rng(42)
        for r in rng.uniform(0.01, 50.0, 100):
            assert inverse_volume(geo, volume(geo, r)) == pytest.approx(r, rel=1e-8)


@pytest.fixture(scope="module")
def tab3():
    r = np.linspace(0.0, 4.0, 2001)
    return ManifoldProfile.tabulated(r, 4 * math.pi * r**2, n_dim=3)


class TestTabulated:
    def test_quadrature_volume(self, tab3):
        assert volume(tab3, 2.0) == pytest.approx(32 * math.pi / 3, rel=1e-10)

    def test_inverse_roundtrip(self, tab3):
        rng = np.random.default_rng(7)
        for r in rng.uniform(0.05, 3.9, 100):
            assert inverse_volume(tab3, volume(tab3, r)) == pytest.approx(r, rel=1e-8)

    def test_range_error_beyond_table(self, tab3):
        with pytest.raises(RangeError):
            volume(tab3, 5.0)
        with pytest.raises(RangeError):
            inverse_volume(tab3, 1e9)

    def test_identity_isoperimetric_gives_unit_omega(self):
        # sigma(r) = r^2/9 integrates to V = (r/3)^3, so the induced
        # g(v) = sigma(V^{-1}(v)) equals v^(2/3) and omega is exactly 1
        r = np.linspace(0.0, 6.0, 2001)
        prof = ManifoldProfile.tabulated(r, r**2 / 9.0, n_dim=3)
        for vv in (0.01, 0.5, 1.0, 7.0):
            assert prof.omega(vv) == pytest.approx(1.0, rel=1e-7)


@pytest.fixture(scope="module")
def report():
    return verify_geometry_assumptions(ManifoldProfile.euclidean(3), E322, 1e3)


@pytest.fixture(scope="module")
def tube():
    # sphere area saturates at 4 pi beyond r = 1 (ball opening into a
    # cylinder); omega is Euclidean-constant then strictly increasing
    r = np.linspace(0.0, 8.0, 4001)
    sigma = 4 * math.pi * np.minimum(r, 1.0) ** 2
    return ManifoldProfile.tabulated(r, sigma, n_dim=3)


class TestAssumptionAudit:
    def test_doubling_constant_is_2_to_n(self, report):
        assert report["volume_doubling"].constant == pytest.approx(8.0, abs=1e-9)
        assert report["volume_doubling"].passed

    def test_iso_volume_constant_is_n(self, report):
        assert report["iso_volume"].constant == pytest.approx(3.0, rel=1e-9)
        assert report["iso_volume"].passed

    def test_hardy_volume_constant(self, report):
        # closed form N/(N-p) for the Euclidean power integral
        assert report["hardy_volume"].constant == pytest.approx(3.0, rel=1e-6)
        assert report["hardy_volume"].passed

    def test_all_passed(self, report):
        assert report.all_passed

    def test_omega_scaling_bound(self, tube):
        # omega(gamma v) <= gamma^((N-1)/N) omega(v)
        rng = np.random.default_rng(42)
        vmax = tube.volume(7.9)
        for v in rng.uniform(1e-3, vmax / 8.0, 100):
            for gam in (2.0, 4.0, 8.0):
                assert tube.omega(gam * v) <= gam ** (2.0 / 3.0) * tube.omega(v) * (1 + 1e-9)

    def test_omega_nondecreasing_on_grid(self, tube):
        # tolerance covers the interpolation wiggle of the tabulated ratio
        v = np.geomspace(1e-3, tube.volume(7.9), 400)
        om = np.array([tube.omega(x) for x in v])
        assert np.all(np.diff(om) >= -2e-5 * om[:-1])
        assert om[-1] > 1.5 * om[0]  # strictly grows once the tube dominates


def test_csv_loader(tmp_path):
    path = tmp_path / "geo.csv"
    r = np.linspace(0.0, 2.0, 200)
    with open(path, "w") as fh:
        fh.write("r,sigma\n")
        for ri, si in zip(r, 4 * math.pi * r**2):
            fh.write(f"{ri},{si}\n")
    prof = load_manifold_csv(path, 3)
    assert prof.volume(1.5) == pytest.approx(4 * math.pi / 3 * 1.5**3, rel=1e-6)


def test_csv_loader_bad_header(tmp_path):
    path = tmp_path / "geo.csv"
    path.write_text("radius,area\n1,2\n")
    with pytest.raises(ParseError) as exc:
        load_manifold_csv(path, 3)
    assert exc.value.lineno == 1
