import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.stats import norm

from memd.errors import ConfigError, EmptyClass, InvalidMoment
from memd.maxent import (
    FeatureFunctionSpec,
    MaxEntDensity,
    MomentVector,
    SupportSpec,
    empirical_moments,
    fit_exponential_halfline,
    fit_gaussian_realline,
    fit_marginal,
    fit_numeric,
    log_density,
)

ORDERS_1 = FeatureFunctionSpec((1,))
ORDERS_12 = FeatureFunctionSpec((1, 2))


def quad_moment(density: MaxEntDensity, order: int) -> float:
    """Independent oracle: adaptive quadrature of x^order * p(x)."""
    lo, hi = density.support.lower, density.support.upper
    value, _ = quad(
        lambda x: x**order * math.exp(log_density(density, x)), lo, hi, limit=300
    )
    return value


def quad_normalization(density: MaxEntDensity) -> float:
    lo, hi = density.support.lower, density.support.upper
    value, _ = quad(lambda x: math.exp(log_density(density, x)), lo, hi, limit=300)
    return value


class TestSupportSpec:
    def test_interval_requires_ordered_finite_bounds(self):
        with pytest.raises(ValueError):
            SupportSpec.interval(1.0, 1.0)
        with pytest.raises(ValueError):
            SupportSpec.interval(0.0, math.inf)

    def test_contains_is_vectorized(self):
        s = SupportSpec.halfline()
        np.testing.assert_array_equal(
            s.contains(np.array([-1.0, 0.0, 2.0])), [False, True, True]
        )


class TestFeatureFunctionSpec:
    @pytest.mark.parametrize("orders", [(), (0,), (2, 1), (1, 1)])
    def test_rejects_bad_orders(self, orders):
        with pytest.raises(ValueError):
            FeatureFunctionSpec(orders)

    def test_evaluate_stacks_powers(self):
        np.testing.assert_allclose(
            ORDERS_12.evaluate(np.array([2.0, 3.0])), [[2.0, 3.0], [4.0, 9.0]]
        )


class TestEmpiricalMoments:
    def test_mean_and_second_moment(self):
        mv = empirical_moments([1.0, 2.0, 3.0], ORDERS_12)
        assert mv.values == pytest.approx((2.0, 14.0 / 3.0))
        assert mv.sample_count == 3

    def test_single_point(self):
        mv = empirical_moments([5.0], ORDERS_1)
        assert mv.values == (5.0,)
        assert mv.sample_count == 1

    def test_all_zero(self):
        mv = empirical_moments([0.0, 0.0, 0.0], ORDERS_12)
        assert mv.values == (0.0, 0.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyClass):
            empirical_moments([], ORDERS_1)


class TestExponentialFit:
    def test_unit_mean_is_standard_exponential(self):
        d = fit_exponential_halfline(MomentVector((1.0,), 10))
        assert d.lambdas == (1.0,)
        assert d.log_normalizer == 0.0

    def test_half_mean_rate_two_and_quadrature_mean(self):
        d = fit_exponential_halfline(MomentVector((0.5,), 10))
        assert d.lambdas == (2.0,)
        assert quad_moment(d, 1) == pytest.approx(0.5, abs=1e-8)

    def test_smoothing_floor_engages_at_zero(self):
        d = fit_exponential_halfline(MomentVector((0.0,), 4), smoothing=1e-6)
        assert d.lambdas == (1e6,)
        assert d.moments.values == (1e-6,)

    def test_negative_mean_rejected(self):
        with pytest.raises(InvalidMoment):
            fit_exponential_halfline(MomentVector((-0.1,), 4))


class TestGaussianFit:
    def test_standard_normal_from_pm_one(self):
        mv = empirical_moments([-1.0, 1.0], ORDERS_12)
        d = fit_gaussian_realline(mv)
        assert d.lambdas == pytest.approx((0.0, 0.5))
        for x in (-2.0, -0.3, 0.0, 1.7):
            assert log_density(d, x) == pytest.approx(norm.logpdf(x), abs=1e-12)

    def test_shifted_normal_multipliers(self):
        d = fit_gaussian_realline(MomentVector((1.0, 2.0), 10))
        assert d.lambdas == pytest.approx((-1.0, 0.5))

    def test_variance_floor_on_constant_samples(self):
        mv = empirical_moments([3.0, 3.0, 3.0], ORDERS_12)
        d = fit_gaussian_realline(mv, variance_floor=1e-4)
        assert d.moments.values[1] - d.moments.values[0] ** 2 == pytest.approx(1e-4)

    def test_infeasible_second_moment_rejected(self):
        with pytest.raises(InvalidMoment):
            fit_gaussian_realline(MomentVector((2.0, 1.0), 10))


class TestNumericFit:
    def test_symmetric_unit_interval_gives_uniform(self):
        d = fit_numeric(MomentVector((0.5,), 10), ORDERS_1, SupportSpec.interval(0, 1))
        assert d.lambdas == (0.0,)
        assert quad_normalization(d) == pytest.approx(1.0, abs=1e-10)

    def test_mean_above_half_needs_negative_multiplier(self):
        d = fit_numeric(MomentVector((0.7,), 10), ORDERS_1, SupportSpec.interval(0, 1))
        assert d.lambdas[0] < 0
        assert quad_moment(d, 1) == pytest.approx(0.7, abs=1e-8)
        # independent oracle: root of g(lam) = E_lam[X] - 0.7 on the interval
        def truncated_mean(lam):
            z, _ = quad(lambda x: math.exp(-lam * x), 0, 1)
            m, _ = quad(lambda x: x * math.exp(-lam * x), 0, 1)
            return m / z

        lam_oracle = brentq(lambda lam: truncated_mean(lam) - 0.7, -50.0, 50.0, xtol=1e-12)
        assert d.lambdas[0] == pytest.approx(lam_oracle, abs=1e-7)

    def test_mean_outside_interval_rejected(self):
        with pytest.raises(InvalidMoment):
            fit_numeric(MomentVector((1.1,), 10), ORDERS_1, SupportSpec.interval(0, 1))

    def test_realline_without_second_order_rejected(self):
        with pytest.raises(ConfigError):
            fit_numeric(MomentVector((0.0,), 10), ORDERS_1, SupportSpec.real())

    def test_two_moments_on_unit_interval(self):
        d = fit_numeric(
            MomentVector((0.4, 0.2), 10), ORDERS_12, SupportSpec.interval(0, 1)
        )
        assert quad_moment(d, 1) == pytest.approx(0.4, abs=1e-8)
        assert quad_moment(d, 2) == pytest.approx(0.2, abs=1e-8)


class TestClosedFormNumericAgreement:
    @pytest.mark.parametrize("mean", [0.3, 0.5, 1.0])
    def test_exponential_matches_truncated_fit(self, mean):
        closed = fit_exponential_halfline(MomentVector((mean,), 10))
        truncated = fit_numeric(
            MomentVector((mean,), 10), ORDERS_1, SupportSpec.interval(0.0, 20.0)
        )
        assert truncated.lambdas[0] == pytest.approx(closed.lambdas[0], abs=1e-5)

    def test_exponential_matches_native_halfline_fit(self):
        closed = fit_exponential_halfline(MomentVector((0.5,), 10))
        numeric = fit_numeric(MomentVector((0.5,), 10), ORDERS_1, SupportSpec.halfline())
        assert numeric.lambdas[0] == pytest.approx(closed.lambdas[0], abs=1e-5)

    @pytest.mark.parametrize("m,var", [(0.0, 1.0), (1.0, 1.0), (-0.5, 2.0)])
    def test_gaussian_matches_wide_interval_fit(self, m, var):
        closed = fit_gaussian_realline(MomentVector((m, m * m + var), 10))
        truncated = fit_numeric(
            MomentVector((m, m * m + var), 10), ORDERS_12, SupportSpec.interval(-15, 15)
        )
        assert truncated.lambdas[0] == pytest.approx(closed.lambdas[0], abs=1e-5)
        assert truncated.lambdas[1] == pytest.approx(closed.lambdas[1], abs=1e-5)


class TestLogDensity:
    def test_standard_exponential_values(self):
        d = fit_exponential_halfline(MomentVector((1.0,), 10))
        assert log_density(d, 1.0) == pytest.approx(-1.0)
        assert log_density(d, -0.5) == -math.inf

    def test_standard_normal_at_zero(self):
        mv = empirical_moments([-1.0, 1.0], ORDERS_12)
        d = fit_gaussian_realline(mv)
        assert log_density(d, 0.0) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_array_input_preserves_shape(self):
        d = fit_exponential_halfline(MomentVector((1.0,), 10))
        out = log_density(d, np.array([-1.0, 0.0, 1.0]))
        assert out.shape == (3,)
        assert out[0] == -math.inf


@settings(max_examples=60, deadline=None)
@given(mean=st.floats(min_value=0.05, max_value=20.0))
def test_exponential_normalization_and_moments(mean):
    d = fit_exponential_halfline(MomentVector((mean,), 10))
    assert quad_normalization(d) == pytest.approx(1.0, abs=1e-6)
    assert quad_moment(d, 1) == pytest.approx(d.moments.values[0], abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(
    m=st.floats(min_value=-5.0, max_value=5.0),
    var=st.floats(min_value=0.05, max_value=9.0),
)
def test_gaussian_normalization_and_moments(m, var):
    d = fit_gaussian_realline(MomentVector((m, m * m + var), 10))
    assert quad_normalization(d) == pytest.approx(1.0, abs=1e-6)
    assert quad_moment(d, 1) == pytest.approx(m, abs=1e-7)
    assert quad_moment(d, 2) == pytest.approx(m * m + var, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(mean=st.floats(min_value=0.02, max_value=0.98))
def test_unit_interval_fit_matches_target(mean):
    d = fit_numeric(MomentVector((mean,), 10), ORDERS_1, SupportSpec.interval(0, 1))
    assert d.moments.values[0] == pytest.approx(mean, abs=1e-8)
    assert quad_normalization(d) == pytest.approx(1.0, abs=1e-6)


class TestFitMarginalRouting:
    def test_halfline_one_moment_uses_closed_form(self):
        d = fit_marginal(MomentVector((0.5,), 10), ORDERS_1, SupportSpec.halfline())
        assert d.fit_tol == 0.0
        assert d.lambdas == (2.0,)

    def test_real_two_moment_uses_closed_form(self):
        d = fit_marginal(MomentVector((0.0, 1.0), 10), ORDERS_12, SupportSpec.real())
        assert d.fit_tol == 0.0

    def test_real_one_moment_is_config_error(self):
        with pytest.raises(ConfigError):
            fit_marginal(MomentVector((0.0,), 10), ORDERS_1, SupportSpec.real())

    def test_unit_interval_conditions_degenerate_mean(self):
        # an all-zero column must still produce a usable density
        d = fit_marginal(
            MomentVector((0.0,), 10), ORDERS_1, SupportSpec.interval(0, 1)
        )
        assert d.moments.values[0] == pytest.approx(1e-4, rel=1e-4)
        assert d.lambdas[0] > 1e3
        assert quad_normalization(d) == pytest.approx(1.0, abs=1e-6)
