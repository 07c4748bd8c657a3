import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoscon.chaos import (
    ChaosSpec,
    CoefficientTensor,
    brute_force_enumerate,
    chaos_samples,
    decoupled_undecoupled_compare,
    empirical_moment,
    empirical_moments,
    exact_chaos_moments,
    exp_integrability,
    tail_certificate,
)
from chaoscon.distributions import DistributionSpec
from chaoscon.rng import RandomStream

IDENT = ChaosSpec.rademacher([CoefficientTensor.identity(2, 2)])
RAD = DistributionSpec.rademacher()


class TestEmpiricalMoment:
    def test_constant_centered_is_zero(self):
        est = empirical_moment(np.full(1000, 3.0), 3, centered=True, stream=0, n_resamples=50)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_signs_p2(self):
        x = 2.0 * RandomStream(0).generator().integers(0, 2, 10_000) - 1.0
        assert empirical_moment(x, 2, stream=1, n_resamples=50).value == 1.0

    def test_identity_chaos_p4(self):
        z = chaos_samples(IDENT, 200_000, RandomStream(0))
        est = empirical_moment(z, 4, stream=3, n_resamples=200)
        assert abs(est.value - 8 ** 0.25) <= 3 * est.std_error

    def test_overflow_recorded(self):
        with np.errstate(over="ignore"):
            est = empirical_moment(np.array([1e300, 2e300, 1e300]), 8, stream=0, n_resamples=20)
        # the point estimate survives by rescaling; the bootstrap spread does not
        assert math.isfinite(est.value) and est.failure == "p-th power overflow"
        bad = empirical_moment(np.array([1.0, np.inf]), 2, stream=0, n_resamples=20)
        assert bad.failure is not None and math.isnan(bad.value)

    def test_validation(self):
        with pytest.raises(ValueError):
            empirical_moment(np.ones(5), 0.5)
        with pytest.raises(ValueError):
            empirical_moment(np.array([]), 2)

    def test_shared_bootstrap_many_p(self):
        z = RandomStream(4).generator().standard_normal(20_000)
        ests = empirical_moments(z, [1, 2, 4], stream=5, n_resamples=100)
        vals = [e.value for e in ests]
        assert vals == sorted(vals)


class TestEnumeration:
    def test_identity(self):
        dist = brute_force_enumerate(IDENT)
        np.testing.assert_array_equal(dist.support, [0.0, 2.0])
        np.testing.assert_allclose(dist.probs, [0.5, 0.5])

    def test_zero_tensor_point_mass(self):
        dist = brute_force_enumerate(ChaosSpec.rademacher([CoefficientTensor.zeros(3, 2)]))
        np.testing.assert_array_equal(dist.support, [0.0])

    def test_empty_family_point_mass(self):
        spec = ChaosSpec((), ((RAD,) * 2,) * 2, True, 2, 2)
        assert brute_force_enumerate(spec).support.tolist() == [0.0]

    def test_first_order_sum(self):
        dist = brute_force_enumerate(ChaosSpec.rademacher([CoefficientTensor(np.array([1.0, 1.0]))]))
        np.testing.assert_array_equal(dist.support, [0.0, 2.0])
        np.testing.assert_allclose(dist.probs, [0.5, 0.5])

    def test_cap(self):
        with pytest.raises(ValueError):
            brute_force_enumerate(ChaosSpec.rademacher([CoefficientTensor.identity(11, 2)]))

    def test_needs_signs(self):
        spec = ChaosSpec.iid([CoefficientTensor.identity(2, 2)], DistributionSpec.gaussian())
        with pytest.raises(ValueError):
            brute_force_enumerate(spec)

    def test_exact_moments_against_monte_carlo(self):
        t = CoefficientTensor.random(3, 3, stream=11)
        spec = ChaosSpec.rademacher([t])
        exact = exact_chaos_moments(spec, [1, 2, 4])
        z = chaos_samples(spec, 200_000, RandomStream(12))
        for p, ex in zip([1, 2, 4], exact):
            est = empirical_moment(z, p, stream=13, n_resamples=200)
            assert abs(est.value - ex) <= 3 * est.std_error


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_enumeration_probabilities_sum_to_one(d, n, seed):
    spec = ChaosSpec.rademacher([CoefficientTensor(np.random.default_rng(seed).normal(size=(n,) * d))])
    dist = brute_force_enumerate(spec)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(dist.support >= 0)


def test_sign_sampler_calibrated():
    """z-scores of P(Z = 2) for the identity chaos over many seeds look standard normal."""
    r = []
    for k in range(200):
        z = chaos_samples(IDENT, 5000, RandomStream(1000 + k))
        r.append((np.mean(z == 2.0) - 0.5) / math.sqrt(0.25 / 5000))
    assert abs(np.mean(r)) < 0.3 and 0.8 < np.std(r) < 1.2


def test_sampling_is_deterministic_and_chunk_split():
    a = chaos_samples(IDENT, 2500, RandomStream(9), chunk=1000)
    b = chaos_samples(IDENT, 2500, RandomStream(9), chunk=1000)
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 2.0}


class TestTailCertificate:
    def test_threshold_above_max_gives_zero(self):
        rep = tail_certificate(IDENT, 2.0, 1.0, [1.0, 2.0], L_grid=[1.5], exact=True)
        assert rep.extras["L"] == 1.5
        assert rep.empirical.tolist() == [0.0, 0.0]

    def test_identity_exact(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.identity(3, 2)])
        # Z takes 1 and 3 with probability 3/4 and 1/4
        rep = tail_certificate(spec, 1.0, 1.0, [1.0, 2.0, 3.0], L_grid=[0.5, 1.0, 2.0, 4.0], exact=True)
        assert rep.extras["tail_at_M"] == pytest.approx(0.25)
        # L = 1 fails at t = 2 (1/4 > e^-2); L = 2 puts every threshold at or above 2
        assert rep.extras["L"] == 2.0
        assert rep.empirical.tolist() == pytest.approx([0.25, 0.0, 0.0])
        assert all(rep.verdicts)

    def test_first_order_median(self):
        n = 16
        spec = ChaosSpec.rademacher([CoefficientTensor(np.ones(n) / math.sqrt(n))])
        dist = brute_force_enumerate(spec)
        cdf = np.cumsum(dist.probs)
        median = float(dist.support[np.searchsorted(cdf, 0.5)])
        rep = tail_certificate(spec, median, 1.0, [1, 2, 4, 8], n_samples=100_000, stream=RandomStream(7))
        assert rep.extras["L"] is not None and not rep.failures

    def test_unresolvable_t_dropped(self):
        rep = tail_certificate(IDENT, 1.0, 1.0, [1.0, 50.0], n_samples=1000, stream=0)
        assert rep.grid.tolist() == [1.0]
        assert any("dropped" in n for n in rep.notes)

    def test_validation(self):
        with pytest.raises(ValueError):
            tail_certificate(IDENT, 1.0, 0.0, [1.0], exact=True)
        with pytest.raises(ValueError):
            tail_certificate(IDENT, 1.0, 1.0, [0.5], exact=True)

    def test_nonpositive_M_fails(self):
        rep = tail_certificate(IDENT, 0.0, 1.0, [1.0], exact=True)
        assert rep.failures and rep.extras["L"] is None


class TestDecoupling:
    def test_zero_tensor(self):
        rep = decoupled_undecoupled_compare(CoefficientTensor.zeros(3, 2), RAD, [1, 2])
        assert rep.empirical.tolist() == [0.0, 0.0] and rep.bound_upper.tolist() == [0.0, 0.0]

    def test_off_diagonal_exact(self):
        t = CoefficientTensor.off_diagonal_ones(3, 2)
        rep = decoupled_undecoupled_compare(t, RAD, [2.0])
        # undecoupled: (sum eps)^2 - 3 in {-2, 6} with probs 3/4, 1/4, so E Z^2 = 12
        assert rep.bound_upper[0] == pytest.approx(math.sqrt(12.0))
        # decoupled: E (sum_{i != j} x_i y_j)^2 = number of off-diagonal cells = 6
        assert rep.empirical[0] == pytest.approx(math.sqrt(6.0))
        assert rep.std_error.tolist() == [0.0]
        assert math.isfinite(rep.empirical[0] / rep.bound_upper[0])

    def test_gaussian_monte_carlo(self):
        t = CoefficientTensor.off_diagonal_ones(3, 2)
        rep = decoupled_undecoupled_compare(t, DistributionSpec.gaussian(), [2.0], n_samples=100_000,
                                            stream=RandomStream(3), n_resamples=100)
        # same second moments as above for any mean-zero unit-variance law
        assert abs(rep.empirical[0] - math.sqrt(6.0)) <= 3 * rep.std_error[0]

    def test_requires_flags(self):
        with pytest.raises(ValueError):
            decoupled_undecoupled_compare(CoefficientTensor.identity(2, 2), RAD, [2])


class TestExpIntegrability:
    def test_zero_family(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.zeros(2, 2)])
        out = exp_integrability(spec, [0.5, 1.0])
        assert out["value"] == [1.0, 1.0]

    def test_first_order_stable_in_n(self):
        vals = []
        for n in (4, 8, 16):
            spec = ChaosSpec.rademacher([CoefficientTensor(np.ones(n) / math.sqrt(n))])
            vals.append(exp_integrability(spec, [0.1])["value"][0])
        assert max(vals) / min(vals) < 1.05

    def test_monotone_in_alpha(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.random(3, 2, stream=5)])
        out = exp_integrability(spec, [0.1, 0.2, 0.5, 1.0])
        assert out["value"] == sorted(out["value"])

    def test_monte_carlo_matches_exact(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.identity(3, 2)])
        ex = exp_integrability(spec, [0.3], exact=True)["value"][0]
        mc = exp_integrability(spec, [0.3], n_samples=200_000, stream=RandomStream(8), exact=False)
        assert abs(mc["value"][0] - ex) <= 3 * mc["std_error"][0]

    def test_overflow_flagged(self):
        spec = ChaosSpec.rademacher([CoefficientTensor(np.array([1e3]))])
        out = exp_integrability(spec, [1.0])
        assert out["overflow"] == [True] and out["value"] == [math.inf]
