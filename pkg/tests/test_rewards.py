import numpy as np
import pytest
from hypothesis import given, strategies as st

from specbandit.rewards import RewardKind, bd_reward, be_reward, tv_distance

from oracles import tv as tv_oracle


def test_tv_identical_is_zero():
    p = [0.1, 0.2, 0.3, 0.4]
    assert tv_distance(p, p) == 0.0


def test_tv_disjoint_is_one():
    assert tv_distance([0.5, 0.5, 0, 0], [0, 0, 0.25, 0.75]) == 1.0


def test_tv_worked_value():
    assert tv_distance([0.5, 0.5, 0, 0], [0.2, 0.2, 0.3, 0.3]) == pytest.approx(0.6, abs=1e-15)


def test_tv_rejects_bad_input():
    with pytest.raises(ValueError, match="length mismatch"):
        tv_distance([0.5, 0.5], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="normalized"):
        tv_distance([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError, match="negative"):
        tv_distance([1.5, -0.5], [0.5, 0.5])


probability_vectors = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3),
        st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3),
    )
)


@given(probability_vectors)
def test_tv_matches_rational_oracle_and_is_a_metric(pair):
    p = np.array(pair[0]) / sum(pair[0])
    q = np.array(pair[1]) / sum(pair[1])
    d = tv_distance(p, q)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(float(tv_oracle(p, q)), abs=1e-12)
    assert d == pytest.approx(tv_distance(q, p), abs=1e-15)


def test_bd_reward_extremes_and_worked_value():
    assert bd_reward([0.0] * 5, 5) == 1.0
    assert bd_reward([1.0] * 5, 5) == 0.0
    assert bd_reward([0.2, 0.4, 0.6, 0.8, 1.0], 5) == pytest.approx(0.4, abs=1e-15)


def test_bd_reward_length_checked():
    with pytest.raises(ValueError, match="expected 5"):
        bd_reward([0.1, 0.2], 5)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=16))
def test_bd_reward_bounded(tvs):
    r = bd_reward(tvs, len(tvs))
    assert 0.0 <= r <= 1.0


@pytest.mark.parametrize("n_acc, expected", [(0, 0.0), (5, 1.0), (2, 0.4)])
def test_be_reward(n_acc, expected):
    assert be_reward(n_acc, 5) == expected


def test_be_reward_range_checked():
    with pytest.raises(ValueError):
        be_reward(6, 5)
    with pytest.raises(ValueError):
        be_reward(-1, 5)


def test_reward_kind_parse():
    assert RewardKind.parse("BD") is RewardKind.BD
    assert RewardKind.parse(RewardKind.BE) is RewardKind.BE
    with pytest.raises(ValueError, match="unknown reward"):
        RewardKind.parse("tokens")
