import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from chaoscon.chaos import (
    BallConstraint,
    ChaosSpec,
    CoefficientTensor,
    TailFunctionN,
    all_subsets,
    brute_force_enumerate,
    moment_bound_euclidean,
    moment_bound_logconcave,
    norm_T_I,
    norm_T_N_I_p,
    norm_T_N_I_p_grid,
    phi_curve,
    phi_of_t,
    sup_over_balls,
)
from chaoscon.distributions import DistributionSpec
from chaoscon.oracles import box_ball_linear_max, multilinear_sup_oracle
from chaoscon.rng import RandomStream

IDENT = ChaosSpec.rademacher([CoefficientTensor.identity(2, 2)])
EUC = BallConstraint.euclidean


class TestAscent:
    def test_identity(self):
        assert sup_over_balls(np.eye(2), [EUC(2), EUC(2)], stream=0).value == pytest.approx(1.0, abs=1e-12)

    def test_diag(self):
        assert sup_over_balls(np.diag([3.0, 1.0]), [EUC(2), EUC(2)], stream=0).value == pytest.approx(3.0)

    def test_rank_one(self):
        a, b, c = np.array([1.0, -2.0, 0.5]), np.array([2.0, 1.0, 1.0]), np.array([0.3, 0.4, 0.0])
        form = np.einsum("i,j,k->ijk", a, b, c)
        res = sup_over_balls(form, [EUC(3)] * 3, stream=1)
        assert res.value == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c), rel=1e-12)
        assert not res.flagged

    def test_single_block_is_exact(self):
        res = sup_over_balls(np.array([3.0, 1.0]), [BallConstraint.a_k_p(TailFunctionN.rademacher(), 2.0, 2)])
        assert res.value == pytest.approx(4.0) and res.exact

    def test_deterministic(self):
        form = RandomStream(3).generator().standard_normal((3, 3, 3))
        a = sup_over_balls(form, [EUC(3)] * 3, stream=RandomStream(4))
        b = sup_over_balls(form, [EUC(3)] * 3, stream=RandomStream(4))
        assert a.value == b.value and np.array_equal(a.restart_values, b.restart_values)

    def test_argmax_feasible_and_attains(self):
        form = RandomStream(5).generator().standard_normal((4, 3))
        cons = [BallConstraint.a_k_p(TailFunctionN.rademacher(), 2.0, 4), EUC(3)]
        res = sup_over_balls(form, cons, stream=6)
        assert all(c.contains(x) for c, x in zip(cons, res.argmax))
        assert abs(res.argmax[0] @ form @ res.argmax[1]) == pytest.approx(res.value, rel=1e-12)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(2, 3), st.integers(2, 3), st.sampled_from(["euclidean", "box_ball"]),
       st.sampled_from([1.0, 1.5, 2.0]), st.integers(0, 2**31))
def test_ascent_against_grid_oracle(m, n, kind, p, seed):
    form = np.random.default_rng(seed).standard_normal((n,) * m)
    cons = EUC(n) if kind == "euclidean" else BallConstraint.a_k_p(TailFunctionN.rademacher(), p, n)
    asc = sup_over_balls(form, [cons] * m, stream=seed).value
    grid = multilinear_sup_oracle(form, [kind] * m, p)
    assert asc >= grid.value * (1 - 1e-4)
    assert asc - grid.value <= grid.resolution_bound


class TestNormTI:
    def test_all_factors_optimized(self):
        est = norm_T_I(IDENT, (0, 1))
        assert est.value == pytest.approx(1.0) and est.std_error == 0.0 and est.outer == "none"

    def test_empty_subset(self):
        est = norm_T_I(IDENT, ())
        assert est.value == pytest.approx(1.0) and est.std_error == 0.0 and est.outer == "exact"

    def test_one_factor(self):
        assert norm_T_I(IDENT, (0,)).value == pytest.approx(math.sqrt(2))

    def test_bad_subset(self):
        with pytest.raises(ValueError):
            norm_T_I(IDENT, (2,))

    def test_monte_carlo_outer(self):
        spec = ChaosSpec.iid([CoefficientTensor.identity(3, 2)], DistributionSpec.gaussian())
        est = norm_T_I(spec, (0,), n_outer=4000, stream=RandomStream(1))
        # E|X| for X ~ N(0, I_3) is sqrt(2) Gamma(2) / Gamma(3/2) = sqrt(8/pi)
        assert abs(est.value - math.sqrt(8 / math.pi)) <= 4 * est.std_error

    def test_undecoupled_uses_decoupled_form(self):
        t = CoefficientTensor.off_diagonal_ones(3, 2)
        und = norm_T_I(ChaosSpec.rademacher([t], decoupled=False), (0, 1))
        dec = norm_T_I(ChaosSpec.rademacher([t]), (0, 1))
        assert und.value == pytest.approx(dec.value) == pytest.approx(2.0)


class TestNormTNIp:
    def test_identity_grid(self):
        ests = norm_T_N_I_p_grid(IDENT, (0, 1), [1.0, 2.0, 4.0])
        assert [e.value for e in ests] == pytest.approx([1.0, 2.0, 2.0])

    def test_empty_subset_ignores_p(self):
        base = norm_T_I(IDENT, ()).value
        for p in (1.0, 3.0, 10.0):
            assert norm_T_N_I_p(IDENT, (), p).value == pytest.approx(base)

    @pytest.mark.parametrize("c", [(1.0, -2.0, 0.5), (0.3, 0.3, 0.3, -4.0)])
    def test_box_only_gives_l1(self, c):
        spec = ChaosSpec.rademacher([CoefficientTensor(np.array(c))])
        assert norm_T_N_I_p(spec, (0,), float(len(c))).value == pytest.approx(np.abs(c).sum())

    def test_non_rademacher_needs_n_funcs(self):
        spec = ChaosSpec.iid([CoefficientTensor.identity(2, 2)], DistributionSpec.gaussian())
        with pytest.raises(ValueError):
            norm_T_N_I_p(spec, (0,), 2.0)
        assert norm_T_N_I_p(spec, (0, 1), 4.0, n_funcs=TailFunctionN.gaussian_like()).value == pytest.approx(4.0)

    def test_exponential_frozen_value(self):
        spec = ChaosSpec.iid([CoefficientTensor(np.array([3.0, 1.0, 0.5]))], DistributionSpec.exp_power(1.0))
        est = norm_T_N_I_p(spec, (0,), 2.0, n_funcs=TailFunctionN.exponential())
        assert est.value == pytest.approx(6.104166666666667, rel=1e-12)


def small_rademacher_specs():
    return st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31)).map(
        lambda a: ChaosSpec.rademacher([CoefficientTensor.random(a[1], a[0], stream=a[2], kind="gaussian")]))


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_rademacher_specs(), st.floats(0.0, 5.0))
def test_homogeneity(spec, c):
    for subset in all_subsets(spec.d):
        a = norm_T_I(spec, subset, stream=0).value
        b = norm_T_I(spec.scaled(c), subset, stream=0).value
        assert b == pytest.approx(c * a, rel=1e-9, abs=1e-12)
        a = norm_T_N_I_p(spec, subset, 2.0, stream=0).value
        b = norm_T_N_I_p(spec.scaled(c), subset, 2.0, stream=0).value
        assert b == pytest.approx(c * a, rel=1e-9, abs=1e-12)


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_rademacher_specs())
def test_monotone_in_subset(spec):
    """Sign vectors are feasible in A_p once p >= n, so optimizing a factor never loses.

    In the Euclidean ball they are not (|eps| = sqrt(n)); there the
    surrogate argument only gives ||T||_I <= sqrt(n) ||T||_{I + k}.
    """
    n = spec.n
    box = {I: norm_T_N_I_p(spec, I, float(n), stream=0, outer="exact").value for I in all_subsets(spec.d)}
    euc = {I: norm_T_I(spec, I, stream=0, outer="exact").value for I in all_subsets(spec.d)}
    for I in box:
        for k in range(spec.d):
            if k not in I:
                J = tuple(sorted(I + (k,)))
                assert box[J] >= box[I] * (1 - 1e-9) - 1e-12
                assert math.sqrt(n) * euc[J] >= euc[I] * (1 - 1e-9) - 1e-12


def test_euclidean_norms_not_monotone_in_subset():
    # identity 2x2: ||T||_{0} = sqrt(2) but ||T||_{0,1} = 1
    assert norm_T_I(IDENT, (0,)).value > norm_T_I(IDENT, (0, 1)).value


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_rademacher_specs())
def test_monotone_in_p(spec):
    ps = [1.0, 1.5, 2.0, 3.0, 5.0, 8.0]
    for subset in all_subsets(spec.d):
        vals = [e.value for e in norm_T_N_I_p_grid(spec, subset, ps, stream=0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_exact_outer_matches_enumeration_oracle():
    """Outer expectation by enumeration, inner sup by the saturated-set oracle."""
    spec = ChaosSpec.rademacher([CoefficientTensor.random(3, 2, stream=11, kind="gaussian")])
    t = spec.family[0].entries
    for p in (1.0, 2.0, 3.0):
        want = np.mean([box_ball_linear_max(np.asarray(s) @ t, p)[0]
                        for s in itertools.product([-1.0, 1.0], repeat=3)])
        assert norm_T_N_I_p(spec, (1,), p, outer="exact").value == pytest.approx(want, rel=1e-9)


class TestBoundShapes:
    def test_d1(self):
        assert moment_bound_euclidean({(0,): 0.7}, 9.0, 1) == pytest.approx(3 * 0.7)

    def test_zero(self):
        assert moment_bound_euclidean({(0,): 0, (1,): 0, (0, 1): 0}, 5.0, 2) == 0.0

    def test_d2_arithmetic(self):
        a, b, c = 0.3, 1.1, 2.0
        assert moment_bound_euclidean({(0,): a, (1,): b, (0, 1): c}, 4.0, 2) == pytest.approx(2 * a + 2 * b + 4 * c)

    def test_missing_subset(self):
        with pytest.raises(ValueError):
            moment_bound_euclidean({(0,): 1.0}, 2.0, 2)
        with pytest.raises(ValueError):
            moment_bound_logconcave({(0,): 1.0, (1,): 1.0, (0, 1): 1.0}, 2)

    def test_logconcave_zero_family(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.zeros(3, 2)])
        norms = {I: norm_T_N_I_p(spec, I, 2.0).value for I in all_subsets(2)}
        assert moment_bound_logconcave(norms, 2) == (0.0, 0.0)

    def test_logconcave_d1_box(self):
        c = np.array([1.0, 2.0, -1.0])
        spec = ChaosSpec.rademacher([CoefficientTensor(c)])
        norms = {I: norm_T_N_I_p(spec, I, 3.0).value for I in all_subsets(1)}
        dist = brute_force_enumerate(spec)
        want = np.abs(c).sum() + float(np.dot(dist.support, dist.probs))
        assert moment_bound_logconcave(norms, 1)[0] == pytest.approx(want)

    def test_logconcave_identity_composition(self):
        norms = {I: norm_T_N_I_p(IDENT, I, 2.0).value for I in all_subsets(2)}
        # E|Z| = 1, single factors sqrt(2) each (box-ball at p = 2 = n is the box), both factors 2
        assert moment_bound_logconcave(norms, 2)[1] == pytest.approx(1 + 2 + 2 + 2)


class TestPhi:
    def test_zero_family(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.zeros(2, 2)])
        assert all(v == 0 for v, _ in phi_curve(spec, [1.0, 2.0, 4.0]))

    def test_d1_two_terms(self):
        c = np.array([2.0, 1.0, 0.5])
        spec = ChaosSpec.rademacher([CoefficientTensor(c)])
        dist = brute_force_enumerate(spec)
        for t in (1.0, 2.0, 4.0):
            want = float(np.dot(dist.support, dist.probs)) + box_ball_linear_max(c, t)[0]
            assert phi_of_t(spec, t)[0] == pytest.approx(want, rel=1e-12)

    def test_identity_values(self):
        assert [v for v, _ in phi_curve(IDENT, [1.0, 2.0, 4.0])] == pytest.approx(
            [1 + 2 * math.sqrt(2) + 1, 7.0, 7.0])

    def test_scaling_inequality(self):
        spec = ChaosSpec.rademacher([CoefficientTensor.random(4, 2, stream=2)])
        curve = dict(zip([1, 2, 4, 8, 16], phi_curve(spec, [1, 2, 4, 8, 16])))
        for x in (1, 2, 4):
            for t in (2, 4):
                assert curve[x * t][0] <= t * curve[x][0] + 1e-9

    def test_t_below_one(self):
        with pytest.raises(ValueError):
            phi_of_t(IDENT, 0.5)
