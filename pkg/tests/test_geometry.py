import logging
import math

import numpy as np
import pytest

import geometry
from dielectric import Constant, PerfectConductor
from errors import DomainError
from geometry import (AxisymmetricProfile, CoefficientTable, Theta1Result, flat_disc, flat_field, force_gradient,
                      gradient_correction, paraboloid, pfa_free_energy, sphere, sphere_cap, theta1,
                      theta1_small_d_limit)
from kernel import provider_for
from lifshitz import FrequencyGrid, PlatePair, free_energy_pp
from numerics import QuadratureSpec
from oracles import BETA_PERFECT, THETA1_PERFECT
from solver_config import HBAR_C, K_B

CASIMIR = math.pi ** 2 * HBAR_C / 720.0


@pytest.fixture(scope='module')
def ideal():
    pair = PlatePair(PerfectConductor(), PerfectConductor(), FrequencyGrid.zero())
    provider = provider_for(PerfectConductor())
    return pair, provider


@pytest.fixture(scope='module')
def ideal_table(ideal):
    pair, provider = ideal
    # F_pp and delta go as H^-3 here, so one direct evaluation fixes the whole table
    return CoefficientTable(pair, provider, 100.0, 2100.0)


@pytest.fixture(scope='module')
def ideal_theta(ideal):
    pair, provider = ideal
    return theta1(pair, provider, 100.0, 0.25)


class TestProfiles:
    def test_sphere_series_matches_exact_height(self):
        radius = 1e5
        profile = sphere(10.0, radius)
        rho = 0.1 * radius
        exact = 10.0 + radius - math.sqrt(radius ** 2 - rho ** 2)
        assert float(profile.height(rho ** 2)) == pytest.approx(exact, rel=1e-9)

    def test_sphere_gradient_matches_exact_slope(self):
        radius = 1e5
        profile = sphere(10.0, radius)
        rho = 0.1 * radius
        exact = rho ** 2 / (radius ** 2 - rho ** 2)
        assert float(profile.gradient_squared(rho ** 2)) == pytest.approx(exact, rel=1e-6)

    def test_paraboloid(self):
        profile = paraboloid(5.0, 200.0)
        assert profile.c1 == 0.0
        assert float(profile.height(400.0)) == pytest.approx(6.0)
        assert float(profile.gradient_squared(400.0)) == pytest.approx(4.0 * 400.0 / (400.0 ** 2))

    def test_with_separation(self):
        moved = sphere(10.0, 1e4).with_separation(20.0)
        assert moved.d == 20.0 and moved.c1 == 0.25 and moved.higher == (0.125, 5.0 / 64.0)

    def test_invalid(self):
        with pytest.raises(DomainError):
            sphere(0.0, 1e4)
        with pytest.raises(DomainError):
            paraboloid(10.0, -1.0)
        with pytest.raises(DomainError):
            sphere_cap(10.0, 100.0, 200.0)

    def test_height_field_crossing_plate(self):
        field = flat_field(-1.0, 10.0, 10.0)
        with pytest.raises(DomainError):
            field.heights()


class TestCoefficientTable:
    def test_scale_free_table(self, ideal_table):
        assert len(ideal_table.nodes) == 1
        assert ideal_table.interpolation_error == 0.0
        assert float(ideal_table.free_energy(200.0)) == pytest.approx(-CASIMIR / 200.0 ** 3, rel=1e-6)
        assert float(ideal_table.delta(200.0)) == pytest.approx(float(ideal_table.delta(100.0)) / 8.0, rel=1e-12)

    def test_tail_law(self, ideal_table):
        amplitude, exponent = ideal_table.tail_exponent('free')
        assert exponent == 3.0
        assert amplitude == pytest.approx(-CASIMIR, rel=1e-6)

    def test_invalid_range(self, ideal):
        pair, provider = ideal
        with pytest.raises(DomainError):
            CoefficientTable(pair, provider, 200.0, 100.0)

    def test_interpolated_table_reproduces_power_laws(self):
        class PowerLawTable(CoefficientTable):
            def _direct(self, h):
                return -2.0 / h ** 3, 0.5 / h ** 2

        # finite temperature is not scale free, so the table interpolates
        pair = PlatePair(Constant(1.0), Constant(1.0), FrequencyGrid.finite(300.0))
        table = PowerLawTable(pair, None, 10.0, 1000.0, nodes=12)
        assert len(table.nodes) == 12
        assert table.interpolation_error < 1e-10
        assert float(table.free_energy(37.0)) == pytest.approx(-2.0 / 37.0 ** 3, rel=1e-10)
        amplitude, exponent = table.tail_exponent('delta')
        assert exponent == pytest.approx(2.0, rel=1e-10)
        assert amplitude == pytest.approx(0.5, rel=1e-8)

    def test_sign_changing_values_have_no_tail_law(self):
        class SignChangingTable(CoefficientTable):
            def _direct(self, h):
                return -1.0 / h ** 3, math.cos(h / 100.0)

        pair = PlatePair(Constant(1.0), Constant(1.0), FrequencyGrid.finite(300.0))
        table = SignChangingTable(pair, None, 10.0, 1000.0, nodes=12, checks=0)
        assert table.tail_exponent('delta') is None

    def test_interpolation_error_at_a_zero_of_delta(self):
        # delta vanishes (up to 1e-9) at the midpoint of nodes 5 and 6, where
        # a relative measure would divide by almost nothing
        nodes = np.geomspace(10.0, 200.0, 12)
        zero = math.sqrt(nodes[5] * nodes[6])

        class ZeroCrossingTable(CoefficientTable):
            def _direct(self, h):
                return -1.0 / h ** 3, (h - zero) / zero + 1e-9

        pair = PlatePair(Constant(1.0), Constant(1.0), FrequencyGrid.finite(300.0))
        table = ZeroCrossingTable(pair, None, 10.0, 200.0, nodes=12, checks=3)
        assert abs(float(table.delta(zero))) < 1e-2
        assert table.interpolation_error < 1e-2


class TestFunctionals:
    def test_paraboloid_pfa(self, ideal, ideal_table):
        pair, _ = ideal
        d, radius = 100.0, 1e5
        result = pfa_free_energy(pair, paraboloid(d, radius), table=ideal_table)
        assert result.value == pytest.approx(-math.pi * radius * CASIMIR / d ** 2, rel=1e-5)

    def test_paraboloid_gradient_correction(self, ideal, ideal_table):
        pair, provider = ideal
        d, radius = 100.0, 1e5
        result = gradient_correction(pair, provider, paraboloid(d, radius), table=ideal_table)
        expected = 2.0 * math.pi * d ** 2 * float(ideal_table.delta(d))
        assert result.value == pytest.approx(expected, rel=1e-5)

    def test_pfa_without_table(self, ideal):
        pair, _ = ideal
        result = pfa_free_energy(pair, paraboloid(50.0, 1e4))
        assert result.value == pytest.approx(-math.pi * 1e4 * CASIMIR / 50.0 ** 2, rel=1e-5)

    def test_flat_field_is_area_times_plate_energy(self, ideal):
        pair, _ = ideal
        field = flat_field(100.0, 300.0, 200.0)
        result = pfa_free_energy(pair, field)
        assert result.value == pytest.approx(300.0 * 200.0 * free_energy_pp(pair, 100.0).value, rel=1e-12)

    def test_flat_field_has_no_gradient_correction(self, ideal, ideal_table):
        pair, provider = ideal
        result = gradient_correction(pair, provider, flat_field(100.0, 300.0, 200.0), table=ideal_table)
        assert result.value == 0.0

    def test_flat_disc(self, ideal, ideal_table):
        pair, _ = ideal
        disc = flat_disc(100.0, 1000.0)
        result = pfa_free_energy(pair, disc, table=ideal_table)
        assert result.value == pytest.approx(math.pi * 1000.0 ** 2 * (-CASIMIR / 100.0 ** 3), rel=0.03)

    def test_energy_route_matches_force_gradient(self, ideal, ideal_table, ideal_theta):
        # -d^2E/dd^2 from PFA + gradient term against -2 pi R F_pp (1 + theta1 d / R), c1 = 0
        pair, provider = ideal
        radius, d, h = 1e5, 100.0, 2.0
        spec = QuadratureSpec(rel_tol=1e-11)

        def energy(separation):
            profile = paraboloid(separation, radius)
            return (pfa_free_energy(pair, profile, table=ideal_table, spec=spec).value
                    + gradient_correction(pair, provider, profile, table=ideal_table, spec=spec).value)

        samples = [energy(d + j * h) for j in (-2, -1, 0, 1, 2)]
        stencil = (-samples[4] + 16 * samples[3] - 30 * samples[2] + 16 * samples[1] - samples[0]) / (12 * h * h)
        paraboloid_theta = Theta1Result(d, ideal_theta.beta, (1.0 / 3.0) * 2.0 * ideal_theta.beta,
                                        ideal_theta.free_energy, ideal_theta.force, 0.0, 0.0, True)
        route = force_gradient(pair, provider, d, radius, c1=0.0, theta=paraboloid_theta)
        assert -stencil == pytest.approx(route, rel=1e-5)


class TestTheta1:
    def test_perfect_conductor(self, ideal_theta):
        assert ideal_theta.beta == pytest.approx(BETA_PERFECT, abs=1e-3)
        assert ideal_theta.theta1 == pytest.approx(THETA1_PERFECT, abs=1e-3)

    def test_recomposition(self, ideal_theta):
        prefactor = ideal_theta.free_energy / (ideal_theta.d * ideal_theta.force)
        assert prefactor == pytest.approx(1.0 / 3.0, rel=1e-5)
        assert ideal_theta.theta1 == pytest.approx(prefactor * (2.0 * ideal_theta.beta - 4.0 * 0.25), rel=1e-12)
        assert ideal_theta.diagnostics['gamma_check'] < 1e-5

    def test_non_interacting_plates(self):
        pair = PlatePair(Constant(1.0), Constant(1.0), FrequencyGrid.zero())
        with pytest.raises(DomainError):
            theta1(pair, provider_for(Constant(1.0)), 100.0)

    def test_invalid_separation(self, ideal):
        pair, provider = ideal
        with pytest.raises(DomainError):
            theta1(pair, provider, 0.0)

    def test_force_gradient_large_radius_limit(self, ideal, ideal_theta):
        pair, provider = ideal
        radius = 1e8
        value = force_gradient(pair, provider, 100.0, radius, theta=ideal_theta)
        assert value / (-2.0 * math.pi * radius * ideal_theta.force) == pytest.approx(1.0, abs=1e-6)

    def test_force_gradient_warns_outside_expansion(self, ideal, ideal_theta, caplog):
        pair, provider = ideal
        with caplog.at_level(logging.WARNING, logger='geometry'):
            force_gradient(pair, provider, 100.0, 500.0, theta=ideal_theta)
        assert 'd/R' in caplog.text

    def test_small_distance_extrapolation(self, ideal, monkeypatch):
        pair, provider = ideal

        class Fake:
            converged = True

            def __init__(self, d):
                self.theta1 = 0.5 + 0.1 * d - 0.01 * d * d

        monkeypatch.setattr(geometry, 'theta1', lambda pair, provider, d, c1: Fake(d))
        limit = theta1_small_d_limit(pair, provider, (20.0, 10.0, 5.0))
        assert limit.value == pytest.approx(0.5, abs=1e-12)
        assert limit.converged
        assert [d for d, _ in limit.samples] == [5.0, 10.0, 20.0]

    def test_lagrange_weights(self):
        np.testing.assert_allclose(geometry._lagrange_at_zero([5.0, 10.0, 20.0]), [8.0 / 3.0, -2.0, 1.0 / 3.0])

    def test_extrapolation_needs_two_points(self, ideal):
        pair, provider = ideal
        with pytest.raises(DomainError):
            theta1_small_d_limit(pair, provider, (10.0,))


@pytest.mark.slow
class TestGoldProfiles:
    def test_sphere_correction_is_small(self, gold):
        from lifshitz import build_grid

        pair = PlatePair(gold, gold, build_grid(300.0, 200.0))
        provider = provider_for(gold)
        profile = sphere(200.0, 1e5)
        table = geometry.coefficient_table(pair, provider, profile, nodes=12)
        pfa = pfa_free_energy(pair, profile, table=table)
        gradient = gradient_correction(pair, provider, profile, table=table)
        assert pfa.value < 0.0
        assert abs(gradient.value / pfa.value) < 0.01
        # measured against the largest |delta| on the nodes; delta changes sign in this range
        assert table.interpolation_error < 5e-3

    def test_paraboloid_correction_is_logarithmic_at_small_distance(self, gold):
        # delta ~ H^-2 makes the paraboloid term change by equal amounts per doubling of d
        pair = PlatePair(gold, gold, FrequencyGrid.zero())
        provider = provider_for(gold)
        table = CoefficientTable(pair, provider, 1.0, 84.0, nodes=16)
        values = [gradient_correction(pair, provider, paraboloid(d, 1e5), table=table).value for d in (1.0, 2.0, 4.0)]
        ratio = (values[0] - values[1]) / (values[1] - values[2])
        # a 1/d law would give 2
        assert ratio == pytest.approx(1.0, abs=0.3)


@pytest.mark.slow
class TestGoldTheta1:
    def test_classical_limit(self, gold):
        from lifshitz import build_grid
        from oracles import THETA1_CLASSICAL

        d = 10.0 * HBAR_C / (K_B * 300.0)
        pair = PlatePair(gold, gold, build_grid(300.0, d))
        result = theta1(pair, provider_for(gold), d, 0.25)
        assert result.theta1 == pytest.approx(THETA1_CLASSICAL, rel=0.02)

    def test_thermal_sensitivity_at_200nm(self, gold):
        from lifshitz import build_grid

        d = 200.0
        provider = provider_for(gold)
        warm = theta1(PlatePair(gold, gold, build_grid(300.0, d)), provider, d, 0.25)
        cold = theta1(PlatePair(gold, gold, FrequencyGrid.zero()), provider, d, 0.25)
        assert abs(warm.theta1 - cold.theta1) / abs(warm.theta1) == pytest.approx(0.20, abs=0.05)
        assert abs(warm.free_energy - cold.free_energy) / abs(cold.free_energy) < 0.03

    def test_room_temperature_curve_crosses_zero_once(self, gold):
        from lifshitz import build_grid

        provider = provider_for(gold)
        separations = np.geomspace(10.0, 10000.0, 13)
        values = np.array([theta1(PlatePair(gold, gold, build_grid(300.0, d)), provider, d, 0.25).theta1
                           for d in separations])
        assert np.all(np.abs(values) <= 1.0)
        assert np.max(np.abs(np.diff(values))) < 0.15
        assert np.count_nonzero(np.diff(np.sign(values))) == 1
