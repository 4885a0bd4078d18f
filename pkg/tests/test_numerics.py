import math

import numpy as np
import pytest

from errors import DomainError, IntegrandError
from numerics import (DiffSpec, QuadratureSpec, geometric_panel_rule, gauss_legendre, integrate,
                      richardson_second_difference, second_derivative_at, sum_until, uniform_panel_rule)


class TestIntegrate:
    def test_finite_interval(self):
        result = integrate(lambda x: x * x, 0.0, 1.0)
        assert result.value == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert result.converged

    def test_semi_infinite_exponential(self):
        result = integrate(lambda x: math.exp(-x), 0.0, math.inf)
        assert result.value == pytest.approx(1.0, rel=1e-10)

    def test_semi_infinite_with_decay_scale(self):
        spec = QuadratureSpec(rel_tol=1e-10, decay_scale=2.0)
        result = integrate(lambda x: x * math.exp(-x / 2.0), 0.0, math.inf, spec)
        assert result.value == pytest.approx(4.0, rel=1e-8)

    def test_empty_interval(self):
        result = integrate(math.sin, 2.0, 2.0)
        assert result.value == 0.0 and result.converged

    def test_reversed_interval_rejected(self):
        with pytest.raises(DomainError):
            integrate(math.sin, 1.0, 0.0)

    def test_nan_integrand_reports_abscissa(self):
        with pytest.raises(IntegrandError) as info:
            integrate(lambda x: float('nan'), 0.0, 1.0)
        assert 0.0 <= info.value.abscissa <= 1.0

    def test_invalid_spec(self):
        with pytest.raises(DomainError):
            QuadratureSpec(rel_tol=0.0)
        with pytest.raises(DomainError):
            QuadratureSpec(decay_scale=-1.0)


class TestRichardson:
    def test_cosine_curvature(self):
        result = second_derivative_at(np.cos, 0.0)
        assert result.value == pytest.approx(-1.0, abs=1e-9)
        assert len(result.steps) == DiffSpec().levels + 1

    def test_exponential_curvature(self):
        result = second_derivative_at(lambda x: math.exp(2.0 * x), 0.3, DiffSpec(step=0.05, levels=3))
        assert result.value == pytest.approx(4.0 * math.exp(0.6), rel=1e-8)

    def test_quadratic_is_exact(self):
        steps = [0.1, 0.05, 0.025]
        result = richardson_second_difference(0.0, [h * h for h in steps], [h * h for h in steps], steps)
        assert result.value == pytest.approx(2.0, rel=1e-12)
        assert result.converged

    def test_quartic_term_removed(self):
        # f(h) = h^2 + h^4: the h^2 error of the raw quotient is removed at level 1
        steps = [0.2, 0.1]
        samples = [h ** 2 + h ** 4 for h in steps]
        result = richardson_second_difference(0.0, samples, samples, steps)
        assert result.value == pytest.approx(2.0, rel=1e-12)

    def test_cubic_term_needs_every_order(self):
        # f(h) = h^2 + |h|^3: the quotient is 2 + 2h, so even orders leave a bias linear in h
        steps = [0.1, 0.05, 0.025, 0.0125]
        samples = [h ** 2 + abs(h) ** 3 for h in steps]
        even = richardson_second_difference(0.0, samples, samples, steps)
        every = richardson_second_difference(0.0, samples, samples, steps, orders=(1, 2, 3))
        assert abs(even.value - 2.0) > 1e-3
        assert every.value == pytest.approx(2.0, rel=1e-12)

    def test_too_few_orders(self):
        with pytest.raises(DomainError):
            richardson_second_difference(0.0, [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.1, 0.05, 0.025], orders=(1,))

    def test_mismatched_samples(self):
        with pytest.raises(DomainError):
            richardson_second_difference(0.0, [1.0], [1.0, 2.0], [0.1, 0.05])

    def test_invalid_diff_spec(self):
        with pytest.raises(DomainError):
            DiffSpec(levels=0)


class TestSumUntil:
    def test_geometric_series(self):
        result = sum_until((0.5 ** n for n in range(200)), rel_tol=1e-10)
        assert result.value == pytest.approx(2.0, rel=1e-9)
        assert result.converged
        assert result.terms_used < 200

    def test_cap_is_flagged(self):
        result = sum_until((1.0 / (n + 1) for n in range(10 ** 6)), rel_tol=1e-12, max_terms=50)
        assert not result.converged
        assert result.terms_used == 50

    def test_slow_tail_is_bounded(self):
        # 1/n^2: stopping on small terms alone leaves about 1/n_stop of the sum behind
        result = sum_until((1.0 / n ** 2 for n in range(1, 10 ** 5)), rel_tol=1e-4)
        assert result.converged
        assert result.value == pytest.approx(math.pi ** 2 / 6.0, rel=5e-4)

    def test_finite_iterable_is_complete(self):
        result = sum_until([1.0, 2.0, 3.0], rel_tol=1e-12)
        assert result.value == 6.0 and result.converged

    def test_array_terms(self):
        terms = (np.array([1.0, 2.0]) * 0.1 ** n for n in range(100))
        result = sum_until(terms, rel_tol=1e-12)
        np.testing.assert_allclose(result.value, [1.0 / 0.9, 2.0 / 0.9], rtol=1e-11)

    def test_empty(self):
        result = sum_until([])
        assert result.value == 0.0 and result.terms_used == 0


class TestFixedRules:
    def test_gauss_legendre_exact_for_polynomials(self):
        x, w = gauss_legendre(5, 0.0, 2.0)
        assert float(np.sum(w * x ** 9)) == pytest.approx(2.0 ** 10 / 10.0, rel=1e-13)

    def test_gauss_legendre_read_only(self):
        x, _ = gauss_legendre(4)
        with pytest.raises(ValueError):
            x[0] = 1.0

    def test_geometric_rule_moments(self):
        u, w = geometric_panel_rule()
        assert float(np.sum(w * np.exp(-u))) == pytest.approx(1.0, rel=1e-12)
        assert float(np.sum(w * u ** 3 * np.exp(-u))) == pytest.approx(6.0, rel=1e-9)

    def test_geometric_rule_layout(self):
        with pytest.raises(DomainError):
            geometric_panel_rule(10, 1.0, 0.1, 10.0)

    def test_uniform_rule_length(self):
        x, w = uniform_panel_rule(3.0, 0.5, 8)
        assert len(x) == 6 * 8
        assert float(np.sum(w)) == pytest.approx(3.0, rel=1e-14)
