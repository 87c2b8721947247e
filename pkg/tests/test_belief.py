"""Tests for the per-axis posterior: construction, bisection, update, summary."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbaloc import (
    EPS_MIN,
    Belief,
    bisection_point,
    median_bin,
    summarize,
    uniform,
    update,
)


def pmf_lists():
    """Weight vectors that normalize to valid beliefs."""
    return st.lists(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        min_size=2,
        max_size=50,
    ).filter(lambda w: sum(w) > 1e-6)


def as_belief(weights):
    arr = np.asarray(weights, dtype=np.float64)
    return Belief(arr / arr.sum())


class TestBeliefInvariants:
    def test_mass_is_immutable(self):
        b = uniform(4)
        with pytest.raises(ValueError):
            b.mass[0] = 0.5

    def test_rejects_single_bin(self):
        with pytest.raises(ValueError):
            Belief(np.array([1.0]))

    def test_rejects_negative_mass(self):
        with pytest.raises(ValueError):
            Belief(np.array([0.5, 0.6, -0.1]))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Belief(np.array([0.5, np.nan, 0.5]))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            Belief(np.array([0.5, 0.6]))


class TestUniform:
    def test_four_bins(self):
        assert uniform(4).mass.tolist() == [0.25, 0.25, 0.25, 0.25]

    def test_two_bins(self):
        assert uniform(2).mass.tolist() == [0.5, 0.5]

    def test_large_normalization(self):
        assert abs(uniform(1000).mass.sum() - 1.0) <= 1e-9

    def test_rejects_below_two(self):
        with pytest.raises(ValueError):
            uniform(1)
        with pytest.raises(ValueError):
            uniform(0)


class TestBisectionPoint:
    def test_uniform_ten(self):
        # cumulative through 5 is 0.5 (not above 1/2), through 6 is 0.6
        assert bisection_point(uniform(10)) == 6

    def test_point_mass(self):
        b = Belief(np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
        assert bisection_point(b) == 3

    def test_ramp(self):
        # cum2 = 0.3 <= 0.5, cum3 = 0.6 > 0.5
        b = Belief(np.array([0.1, 0.2, 0.3, 0.4]))
        assert bisection_point(b) == 3

    def test_clamped_at_right_edge(self):
        b = Belief(np.array([0.0, 0.0, 0.0, 1.0]))
        assert bisection_point(b) == 3  # raw point 4 clamped to n_bins - 1

    def test_clamped_at_left_edge(self):
        b = Belief(np.array([1.0, 0.0, 0.0, 0.0]))
        assert bisection_point(b) == 1

    @given(pmf_lists())
    @settings(max_examples=200)
    def test_split_rule_by_direct_summation(self, weights):
        b = as_belief(weights)
        x = bisection_point(b)
        assert 1 <= x <= b.n_bins - 1
        # Recover the unclamped point by plain left-to-right summation and
        # check the defining inequalities, then that the result is its clamp.
        running, raw = 0.0, b.n_bins
        for i, p in enumerate(b.mass, start=1):
            running += p
            if running > 0.5 + 1e-12:
                raw = i
                break
        assert sum(b.mass[: raw - 1]) <= 0.5 + 1e-12
        assert x == min(max(raw, 1), b.n_bins - 1)


class TestUpdate:
    def test_positive_answer_exact(self):
        posterior = update(uniform(4), (1, 2), 1, 0.2)
        np.testing.assert_allclose(posterior.mass, [0.4, 0.4, 0.1, 0.1], atol=1e-12)

    def test_negative_answer_mirrors(self):
        posterior = update(uniform(4), (1, 2), 0, 0.2)
        np.testing.assert_allclose(posterior.mass, [0.1, 0.1, 0.4, 0.4], atol=1e-12)

    def test_near_uninformative_epsilon(self):
        # At the clamp ceiling the in/out factors are 2*0.501 and 2*0.499;
        # on a half-mass region the posterior stays normalized, so the
        # exact values follow directly.
        posterior = update(uniform(4), (1, 2), 1, 0.5 - EPS_MIN)
        np.testing.assert_allclose(
            posterior.mass, [0.2505, 0.2505, 0.2495, 0.2495], atol=1e-12
        )

    def test_half_mass_region_needs_no_renormalization(self):
        # The doubled likelihood factors applied by hand already sum to 1
        # when the region holds exactly half the mass.
        epsilon = 0.2
        raw = uniform(4).mass * np.array(
            [2 * (1 - epsilon), 2 * (1 - epsilon), 2 * epsilon, 2 * epsilon]
        )
        assert raw.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(update(uniform(4), (1, 2), 1, epsilon).mass, raw,
                                   atol=1e-12)

    def test_rejects_bad_region(self):
        with pytest.raises(ValueError):
            update(uniform(4), (3, 2), 1, 0.2)  # empty
        with pytest.raises(ValueError):
            update(uniform(4), (0, 2), 1, 0.2)  # out of range
        with pytest.raises(ValueError):
            update(uniform(4), (1, 5), 1, 0.2)  # out of range

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            update(uniform(4), (1, 2), 1, 0.0)
        with pytest.raises(ValueError):
            update(uniform(4), (1, 2), 1, 0.5)
        with pytest.raises(ValueError):
            update(uniform(4), (1, 2), 1, EPS_MIN / 2)

    def test_rejects_bad_response(self):
        with pytest.raises(ValueError):
            update(uniform(4), (1, 2), 2, 0.2)

    @given(pmf_lists(), st.integers(0, 1), st.floats(EPS_MIN, 0.5 - EPS_MIN),
           st.data())
    @settings(max_examples=200)
    def test_within_side_ratios_preserved(self, weights, y, epsilon, data):
        b = as_belief(weights)
        lo = data.draw(st.integers(1, b.n_bins))
        hi = data.draw(st.integers(lo, b.n_bins))
        posterior = update(b, (lo, hi), y, epsilon)
        inside = np.zeros(b.n_bins, dtype=bool)
        inside[lo - 1 : hi] = True
        for group in (inside, ~inside):
            old = b.mass[group]
            new = posterior.mass[group]
            # cross-product form avoids dividing by zero-mass bins
            np.testing.assert_allclose(
                np.outer(new, old), np.outer(old, new).T, atol=1e-12
            )

    def test_multiplier_ratio_between_answers(self):
        # In-region multipliers for y=1 and y=0 are (1-e) and e up to the
        # common normalization, so the double ratio in/out equals
        # ((1-e)/e) / (e/(1-e)).
        b = as_belief([0.1, 0.3, 0.2, 0.4])
        epsilon = 0.3
        up1 = update(b, (2, 3), 1, epsilon)
        up0 = update(b, (2, 3), 0, epsilon)
        ratio_in = up1.mass[1] / up0.mass[1]
        ratio_out = up1.mass[0] / up0.mass[0]
        expected = ((1 - epsilon) / epsilon) / (epsilon / (1 - epsilon))
        assert ratio_in / ratio_out == pytest.approx(expected, rel=1e-12)

    @given(pmf_lists(), st.integers(0, 1), st.floats(EPS_MIN, 0.5 - EPS_MIN),
           st.data())
    @settings(max_examples=200)
    def test_posterior_stays_valid_and_bisectable(self, weights, y, epsilon, data):
        b = as_belief(weights)
        lo = data.draw(st.integers(1, b.n_bins))
        hi = data.draw(st.integers(lo, b.n_bins))
        posterior = update(b, (lo, hi), y, epsilon)
        assert abs(posterior.mass.sum() - 1.0) <= 1e-9
        assert 1 <= bisection_point(posterior) <= b.n_bins - 1

    def test_mass_at_true_bin_trends_up_under_matched_channel(self):
        # Answers from a flip-probability-eps channel, updates assuming the
        # same eps: averaged over many trials the posterior mass at the true
        # bin must not decrease over time (slack for Monte Carlo noise).
        n_bins, eps, steps, trials = 32, 0.25, 40, 300
        rng = np.random.default_rng(20240817)
        mean_mass = np.zeros(steps + 1)
        for _ in range(trials):
            target = int(rng.integers(1, n_bins + 1))
            b = uniform(n_bins)
            mean_mass[0] += b.mass[target - 1]
            for t in range(1, steps + 1):
                split = bisection_point(b)
                lo, hi = (1, split) if rng.random() < 0.5 else (split + 1, n_bins)
                truth = 1 if lo <= target <= hi else 0
                y = truth ^ int(rng.random() < eps)
                b = update(b, (lo, hi), y, eps)
                mean_mass[t] += b.mass[target - 1]
        mean_mass /= trials
        assert np.all(np.diff(mean_mass) >= -0.01)


class TestSummarize:
    def test_uniform_ten(self):
        s = summarize(uniform(10))
        assert s.median_bin == 5
        assert s.credible_width_95 == 10

    def test_point_mass(self):
        mass = np.zeros(9)
        mass[6] = 1.0
        s = summarize(Belief(mass))
        assert s == type(s)(median_bin=7, map_bin=7, variance=0.0, credible_width_95=1)

    def test_map_tie_goes_to_lowest_index(self):
        s = summarize(Belief(np.array([0.4, 0.4, 0.1, 0.1])))
        assert s.median_bin == 2
        assert s.map_bin == 1

    def test_variance_matches_direct_formula(self):
        mass = np.array([0.1, 0.2, 0.3, 0.4])
        bins = np.arange(1, 5)
        mean = (mass * bins).sum()
        expected = (mass * (bins - mean) ** 2).sum()
        assert summarize(Belief(mass)).variance == pytest.approx(expected, rel=1e-12)

    def test_width_is_shortest_interval_by_enumeration(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            mass = rng.random(n)
            mass /= mass.sum()
            width = summarize(Belief(mass)).credible_width_95
            shortest = min(
                (hi - lo + 1)
                for lo in range(1, n + 1)
                for hi in range(lo, n + 1)
                if mass[lo - 1 : hi].sum() >= 0.95 - 1e-12
            )
            assert width == shortest

    def test_median_bin_helper_matches_summary(self):
        b = Belief(np.array([0.2, 0.1, 0.4, 0.3]))
        assert median_bin(b) == summarize(b).median_bin
