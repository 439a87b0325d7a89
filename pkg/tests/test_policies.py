import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from herding.policies import (AsymptoticClass, CumulativeF, PolicyError, RatioPower, ScoreLinear, Uniform,
                              WeightTable, cum_weight_product, effective_weights_cumulative, from_config,
                              policy_probs, to_config, weight)

WEIGHT_POLICIES = [Uniform(), ScoreLinear(), RatioPower(0.8), RatioPower(2.0), RatioPower(2.5),
                   WeightTable((0.2, 0.5, 0.9)), WeightTable((0.1, 0.4), tail_gamma=0.5, tail_nu=1.0)]
ALL_POLICIES = WEIGHT_POLICIES + [CumulativeF.power(2.0), CumulativeF.power(3.5)]

profiles = arrays(np.float64, st.integers(1, 30), elements=st.floats(0.0, 10.0)).filter(lambda r: r.sum() > 0)
positive_profiles = arrays(np.float64, st.integers(2, 30), elements=st.floats(0.01, 10.0))


def test_weights():
    assert weight(RatioPower(2.0), 1) == 0.25
    assert weight(Uniform(), 123) == 1.0
    assert weight(ScoreLinear(), 7) == 7.0
    with pytest.raises(PolicyError):
        weight(CumulativeF.power(2.0), 1)


def test_cum_weight_product():
    for pol in WEIGHT_POLICIES:
        assert cum_weight_product(pol, 0) == 1.0
    assert cum_weight_product(RatioPower(2.0), 3) == pytest.approx(0.0625, rel=1e-14)
    assert cum_weight_product(Uniform(), 10) == 1.0


def test_probs_hand_values():
    r = np.array([2.0, 1.0, 1.0])
    assert policy_probs(Uniform(), r) == pytest.approx([0.5, 0.25, 0.25])
    assert policy_probs(RatioPower(1.0), r) == pytest.approx([12 / 29, 8 / 29, 9 / 29], rel=1e-14)
    assert policy_probs(CumulativeF.power(2.0), np.array([1.0, 1.0])) == pytest.approx([0.25, 0.75])


def test_defective_probs():
    r = np.array([2.0, 1.0, 1.0])
    pi = policy_probs(Uniform(), r, 4.0)
    assert pi.sum() == pytest.approx(0.5)
    with pytest.raises(PolicyError):
        policy_probs(CumulativeF.power(2.0), r, 0.1)


def test_empty_profile_selects_nothing():
    for pol in ALL_POLICIES:
        assert not policy_probs(pol, np.zeros(5)).any()


def test_effective_weights_hand_values():
    a, K = effective_weights_cumulative(CumulativeF.power(2.0), np.array([1.0, 1.0]))
    assert K == 1.0
    assert a == pytest.approx([0.25, 0.75])
    f = CumulativeF.power(2.0)
    r = np.array([1.0, 1.0, 2.0])
    assert f.probs(r) == pytest.approx([0.0625, 0.1875, 0.75])
    a, K = f.effective_weights(r)
    assert K == 2.0
    assert a == pytest.approx([0.125, 0.375, 0.75])


def test_effective_weights_zero_bin():
    a, _ = effective_weights_cumulative(CumulativeF.power(2.0), np.array([1.0, 0.0, 1.0]))
    # right-continuous limit f'(P)/f'(1) with P = 1/2
    assert a[1] == pytest.approx(0.5)


def test_cumulative_must_be_convex():
    with pytest.raises(PolicyError):
        CumulativeF.power(1.0)
    with pytest.raises(PolicyError):
        CumulativeF(np.sqrt, lambda x: 0.5 / np.sqrt(np.maximum(x, 1e-300)))


def test_weight_table_normalized_and_clamped():
    pol = WeightTable((1.0, 2.0, 4.0))
    assert list(pol.weights(5)) == [0.25, 0.5, 1.0, 1.0, 1.0]
    with pytest.raises(PolicyError):
        WeightTable((2.0, 1.0))


def test_asymptotic_class_has_no_weights():
    with pytest.raises(PolicyError):
        AsymptoticClass(1.0, 1.0).weights(3)


@pytest.mark.parametrize("pol", [p for p in ALL_POLICIES if not isinstance(p, WeightTable)] +
                         [WeightTable((0.2, 0.5, 0.9))])
def test_config_round_trip(pol):
    back = from_config(to_config(pol))
    r = np.array([3.0, 1.0, 0.5, 2.0])
    assert policy_probs(back, r) == pytest.approx(policy_probs(pol, r), rel=1e-15)


@pytest.mark.parametrize("block", [{"type": "nope"}, {"type": "ratio_power"},
                                   {"type": "uniform", "gamma": 1.0}, {"type": "cumulative_power", "c": 0.5}])
def test_bad_config(block):
    with pytest.raises(PolicyError):
        from_config(block)


@given(profiles)
def test_probs_sum_to_one(r):
    for pol in ALL_POLICIES:
        pi = policy_probs(pol, r)
        assert np.all(pi >= 0)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)


@given(profiles, st.floats(0.01, 100.0), st.floats(0.0, 5.0))
def test_scale_invariance(r, c, delta):
    for pol in WEIGHT_POLICIES:
        assert policy_probs(pol, c * r, c * delta) == pytest.approx(policy_probs(pol, r, delta), rel=1e-12, abs=1e-15)
    for pol in ALL_POLICIES[-2:]:
        # differences of f near 1 carry absolute rounding of a few ulp
        assert policy_probs(pol, c * r) == pytest.approx(policy_probs(pol, r), rel=1e-10, abs=1e-13)


def test_weights_non_decreasing():
    for pol in WEIGHT_POLICIES:
        w = pol.weights(5000)
        assert np.all(np.diff(w) >= 0)
        assert np.all(w > 0)


@given(positive_profiles, st.sampled_from([1.5, 2.0, 3.0]))
def test_cumulative_sandwich(r, c):
    f = CumulativeF.power(c)
    total = r.sum()
    P = f.cumulative(r)
    pi = f.probs(r)
    for i in range(len(r) - 1):
        left = total / r[i] * pi[i]
        right = total / r[i + 1] * pi[i + 1]
        mid = f.df(P[i])
        assert left <= mid * (1 + 1e-9) + 1e-12
        assert mid <= right * (1 + 1e-9) + 1e-12


@given(positive_profiles)
def test_cumulative_weights_monotone(r):
    a, K = CumulativeF.power(2.0).effective_weights(r)
    assert K == pytest.approx(r.sum() / 2.0)
    assert np.all(a > 0) and np.all(a <= 1 + 1e-12)
    assert np.all(np.diff(a) >= -1e-12)


def test_cum_tails_against_direct_sums():
    n = np.arange(1, 2_000_001, dtype=float)
    cases = [(RatioPower(2.0), 0), (RatioPower(3.0), 0), (RatioPower(3.0), 1),
             (WeightTable((0.01, 0.02, 0.05, 0.1, 0.2), tail_gamma=3.5, tail_nu=1.0), 0),
             (WeightTable((0.01, 0.02, 0.05, 0.1, 0.2), tail_gamma=3.5, tail_nu=1.0), 1)]
    for pol, power in cases:
        A = np.exp(pol.log_cum_weights(len(n))[1:])
        for k in (10, 100):
            direct = np.sum((n[k:] ** power) * A[k:])
            # what the truncated direct sum misses is below 1e-3 relative here
            assert pol.cum_tail(k, power) == pytest.approx(direct, rel=1e-3)
    assert RatioPower(0.8).cum_tail(5) == np.inf
    assert RatioPower(2.0).cum_tail(5, 1) == np.inf
