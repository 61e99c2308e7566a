import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvmss import (
    ThresholdError,
    builtin_system,
    critical_erasure_probability,
    critical_variance,
    growth_term,
    lyapunov_spectrum,
    necessary_condition,
)
from ltvmss.spectrum import spectrum_from_exponents

EX1 = spectrum_from_exponents([0.05, -0.1])
EX2 = spectrum_from_exponents([0.4578, 0.1191, 0.0544])
LN2 = spectrum_from_exponents([math.log(2.0)])


def bernoulli(p):
    return p, p * (1 - p)


class TestNecessaryCondition:
    def test_example1_stable_side(self):
        v = necessary_condition(EX1, *bernoulli(0.11), M=1)
        # oracle: p(1-p)(e^{0.1}-1)/p^2
        assert v.lhs == pytest.approx(0.89 * (math.e**0.1 - 1) / 0.11, rel=1e-12)
        assert v.lhs == pytest.approx(0.851, abs=1e-3)
        assert v.satisfied
        assert v.regime == "necessary-only"

    def test_example1_unstable_side(self):
        v = necessary_condition(EX1, *bernoulli(0.09), M=1)
        assert v.lhs == pytest.approx(1.063, abs=1e-3)
        assert not v.satisfied

    def test_stable_open_loop(self):
        v = necessary_condition(spectrum_from_exponents([-0.1, -0.5]), 0.3, 5.0, M=1)
        assert v.satisfied and v.open_loop_stable
        assert v.lhs <= 0

    def test_zero_mean(self):
        with pytest.raises(ThresholdError):
            necessary_condition(EX1, 0.0, 0.1, M=1)

    def test_equality_is_violated(self):
        sigma = critical_variance(LN2, 1.0, 1)
        v = necessary_condition(LN2, 1.0, sigma**2, M=1)
        assert v.at_boundary
        assert v.satisfied == (v.lhs < 1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 0.99), st.floats(0, 5), st.floats(0.1, 3))
    def test_margin_and_verdict(self, mu, s2, lam):
        v = necessary_condition(spectrum_from_exponents([lam, -1.0]), mu, s2, M=1)
        assert v.margin == 1.0 - v.lhs
        assert v.satisfied == (v.lhs < 1.0)

    def test_full_input_regime(self):
        spec = spectrum_from_exponents([0.4, 0.1])
        assert necessary_condition(spec, 1.0, 0.1, M=2).regime == "necessary-and-sufficient"
        assert growth_term(spec, 2) == pytest.approx(math.exp(0.8))
        assert growth_term(spec, 1) == pytest.approx(math.exp(1.0))


class TestCriticalVariance:
    def test_scalar(self):
        assert critical_variance(LN2, 1.0, 1) == pytest.approx(math.sqrt(1 / 3))

    def test_stable(self):
        assert critical_variance(spectrum_from_exponents([-0.2]), 1.0, 1) == math.inf

    def test_example2(self):
        # direct substitution with the exponent sum 0.6313
        expected = math.sqrt(1 / (math.exp(2 * 0.6313) - 1))
        assert critical_variance(EX2, 1.0, 1) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.6281, abs=1e-4)

    def test_zero_mean(self):
        with pytest.raises(ThresholdError):
            critical_variance(EX1, 0.0, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(0.1, 5.0), st.floats(0.01, 2.0))
    def test_condition_flips_at_sigma_star(self, lam, mu, frac):
        spec = spectrum_from_exponents([lam, -0.3])
        s = critical_variance(spec, mu, 1)
        assert necessary_condition(spec, mu, (s * (1 - 1e-6 * frac)) ** 2, 1).satisfied
        assert not necessary_condition(spec, mu, (s * (1 + 1e-6 * frac)) ** 2, 1).satisfied

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 2.0), st.floats(0.01, 1.0), st.floats(0.1, 5.0), st.floats(0.01, 1.0))
    def test_monotonicity(self, lam, dlam, mu, dmu):
        a = critical_variance(spectrum_from_exponents([lam]), mu, 1)
        assert critical_variance(spectrum_from_exponents([lam + dlam]), mu, 1) < a
        assert critical_variance(spectrum_from_exponents([lam]), mu + dmu, 1) > a
        assert critical_variance(spectrum_from_exponents([lam]), -mu, 1) == a

    @given(st.floats(0.01, 3.0), st.floats(0.1, 3.0))
    def test_single_state_regimes_coincide(self, lam, mu):
        spec = spectrum_from_exponents([lam])
        # N = M = 1: sum of positive exponents equals the top exponent
        assert growth_term(spec, 1) == np.exp(2.0 * spec.exponents[spec.exponents > 0].sum() / 1)
        assert necessary_condition(spec, mu, 0.3, 1).regime == "necessary-and-sufficient"


class TestCriticalProbability:
    def test_example1(self):
        assert critical_erasure_probability(EX1, 1) == pytest.approx(0.0952, abs=1e-4)

    def test_example2(self):
        assert critical_erasure_probability(EX2, 1) == pytest.approx(0.7170, abs=1e-3)

    def test_scalar(self):
        assert critical_erasure_probability(LN2, 1) == pytest.approx(0.75)

    def test_stable(self):
        assert critical_erasure_probability(spectrum_from_exponents([-0.1]), 1) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 3.0), st.floats(-3.0, -0.01))
    def test_bernoulli_consistency(self, lam, neg):
        spec = spectrum_from_exponents([lam, neg])
        p = critical_erasure_probability(spec, 1)
        assert necessary_condition(spec, *bernoulli(min(1.0, p + 1e-12)), 1).satisfied
        assert not necessary_condition(spec, *bernoulli(p - 1e-12), 1).satisfied

    def test_computed_spectra(self):
        ex1 = lyapunov_spectrum(builtin_system("example1"), 10_000)
        ex2 = lyapunov_spectrum(builtin_system("example2"))
        assert critical_erasure_probability(ex1, 1) == pytest.approx(0.0952, abs=1e-4)
        assert critical_erasure_probability(ex2, 1) == pytest.approx(0.7170, abs=1e-3)
        np.testing.assert_allclose(growth_term(ex2, 1), 1 / (1 - critical_erasure_probability(ex2, 1)))
