import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from chaoscon.oracles import (
    ExactDistribution,
    box_ball_linear_max,
    bootstrap_ci,
    exact_moment,
    grid_polish_max,
    moment_to_tail,
    multilinear_sup_oracle,
    tail_bound,
    tail_to_moment,
)
from chaoscon.rng import RandomStream, as_stream


class TestRandomStream:
    def test_reproducible(self):
        a = RandomStream(7).split(3).generator().standard_normal(10)
        b = RandomStream(7).split(3).generator().standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_split_children_differ(self):
        root = RandomStream(7)
        a = root.split(0).generator().standard_normal(20000)
        b = root.split(1).generator().standard_normal(20000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(20000)

    def test_child_differs_from_parent(self):
        root = RandomStream(1)
        assert not np.array_equal(root.generator().random(5), root.split(0).generator().random(5))

    def test_label_and_validation(self):
        assert RandomStream(5).split(2).split(9).label == "5/2/9"
        with pytest.raises(ValueError):
            RandomStream(-1)
        with pytest.raises(ValueError):
            RandomStream(1).split(-2)

    def test_as_stream(self):
        assert as_stream(None) == RandomStream(0)
        assert as_stream(4) == RandomStream(4)


class TestExactDistribution:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExactDistribution(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            ExactDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.6]))

    def test_from_values_merges(self):
        d = ExactDistribution.from_values([2.0, -0.0, 0.0, 2.0])
        np.testing.assert_array_equal(d.support, [0.0, 2.0])
        np.testing.assert_allclose(d.probs, [0.5, 0.5])

    def test_round_trip(self):
        d = ExactDistribution(np.array([-2.0, 0.0, 2.0]), np.array([0.25, 0.5, 0.25]))
        again = ExactDistribution.from_dict(d.to_dict())
        np.testing.assert_array_equal(again.support, d.support)


class TestExactMoment:
    def test_point_mass_centered(self):
        assert exact_moment(ExactDistribution.point_mass(3.0), 5, centered=True) == 0.0

    def test_three_point(self):
        d = ExactDistribution(np.array([-2.0, 0.0, 2.0]), np.array([0.25, 0.5, 0.25]))
        assert exact_moment(d, 4) == pytest.approx(8 ** 0.25, rel=1e-15)

    def test_fair_sign(self):
        assert exact_moment(ExactDistribution(np.array([-1.0, 1.0]), np.array([0.5, 0.5])), 7) == 1.0

    def test_large_p_no_overflow(self):
        d = ExactDistribution(np.array([1e200, 2e200]), np.array([0.5, 0.5]))
        assert math.isfinite(exact_moment(d, 50))

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            exact_moment(ExactDistribution.point_mass(), 0.5)


class TestBootstrap:
    @staticmethod
    def mean(v, w):
        return float(np.dot(v, w))

    def test_constant(self):
        est, se = bootstrap_ci(np.full(100, 2.5), self.mean, 200, RandomStream(0))
        assert (est, se) == (2.5, 0.0)

    def test_fair_signs(self):
        x = 2.0 * RandomStream(1).generator().integers(0, 2, 1_000_000) - 1.0
        est, se = bootstrap_ci(x, self.mean, 300, RandomStream(2))
        assert se == pytest.approx(1e-3, rel=0.15)
        assert abs(est) < 5e-3

    def test_second_moment_matches_exact(self):
        rng = RandomStream(3).generator()
        x = np.where(rng.random(200_000) < 0.3, -1.0, 2.0)
        exact = exact_moment(ExactDistribution(np.array([-1.0, 2.0]), np.array([0.3, 0.7])), 2)
        est, se = bootstrap_ci(x, lambda v, w: math.sqrt(np.dot(w, v * v)), 300, RandomStream(4))
        assert abs(est - exact) <= 3 * se

    def test_deterministic(self):
        x = RandomStream(5).generator().standard_normal(500)
        assert bootstrap_ci(x, self.mean, 50, RandomStream(6)) == bootstrap_ci(x, self.mean, 50, RandomStream(6))


class TestGridPolish:
    def test_linear_on_disc(self):
        c = np.array([3.0, 4.0])
        r = grid_polish_max(lambda a: a @ c, 2, lambda a: np.sum(a * a, axis=1) <= 1.0, resolution=1e-3)
        assert 5.0 - 1e-3 <= r.value <= 5.0

    def test_bilinear_diag(self):
        r = multilinear_sup_oracle(np.diag([3.0, 1.0]), ["euclidean", "euclidean"])
        assert r.value == pytest.approx(3.0, abs=1e-9)
        assert r.value <= 3.0

    def test_constant(self):
        r = grid_polish_max(lambda a: np.full(a.shape[0], 1.25), 3, lambda a: np.ones(a.shape[0], bool))
        assert r.value == 1.25

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            grid_polish_max(lambda a: a.sum(axis=1), 7, lambda a: np.ones(a.shape[0], bool))

    def test_rank_one(self):
        a, b, c = np.array([1.0, 2.0]), np.array([0.5, -1.0]), np.array([2.0, 2.0])
        form = np.einsum("i,j,k->ijk", a, b, c)
        want = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
        r = multilinear_sup_oracle(form, ["euclidean"] * 3)
        assert want - 1e-6 <= r.value <= want * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.sampled_from([0.5, 1.0, 2.0, 3.5, 6.0]))
def test_box_ball_never_beats_sampled_points(c, p):
    c = np.array(c)
    best = box_ball_linear_max(c, p)[0]
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (4000, c.size))
    norms = np.linalg.norm(pts, axis=1)
    pts = pts * np.minimum(1.0, math.sqrt(p) / np.maximum(norms, 1e-300))[:, None]
    assert np.max(pts @ c) <= best + 1e-9
    # sign vector is optimal once p covers the whole box
    if p >= c.size:
        assert best == pytest.approx(np.abs(c).sum())


def test_box_ball_examples():
    assert box_ball_linear_max([3.0, 1.0], 2.0)[0] == pytest.approx(4.0)
    assert box_ball_linear_max([3.0, 1.0], 1.0)[0] == pytest.approx(math.sqrt(10))


class TestTailMoment:
    def test_gaussian_witness(self):
        # e^{-t^2/2} tail; the standard Gaussian moments must sit below K'' sqrt(p)
        k = tail_to_moment(1.0, 2.0, 2.0)
        for p in [1, 2, 3, 4, 8, 16, 32]:
            norm_p = (2 ** (p / 2) * gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)
            assert norm_p <= k * math.sqrt(p)

    def test_degenerate(self):
        c, k = moment_to_tail(0.0, 2.0)
        assert k == 0.0
        assert tail_bound(c, k, 2.0, 0.5) == 0.0

    @pytest.mark.parametrize("alpha,factor", [(1.0, 7.3890560989306495), (2.0, 6.54838046855326),
                                              (0.5, 14.778112197861304)])
    def test_round_trip_inflation(self, alpha, factor):
        c, k = moment_to_tail(1.0, alpha)
        assert tail_to_moment(c, k, alpha) == pytest.approx(factor, rel=1e-9)

    def test_moment_to_tail_is_a_valid_bound(self):
        # a sign variable has ||eps||_p = 1 <= 1 * p^(1/2)
        c, k = moment_to_tail(1.0, 2.0)
        t = np.linspace(0, 10, 101)
        assert np.all((t <= 1.0) <= tail_bound(c, k, 2.0, t) + 1e-15)
