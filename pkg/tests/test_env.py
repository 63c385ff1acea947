import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specbandit.env import (
    BetaScaled,
    CategoricalEnv,
    DrafterProfile,
    PointMass,
    accepted_counts,
    apply_temperature,
    dist_from_dict,
    make_categorical_env,
    sample_rate_rounds,
    step_dist_env,
    step_rate_env,
)

from oracles import nacc_moments_bruteforce


def test_zero_alignment_round():
    out = step_rate_env(DrafterProfile(0, PointMass(0.0)), 0, 5, np.random.default_rng(0))
    assert (out.n_acc, out.be_reward, out.bd_reward, out.tokens_emitted) == (0, 0.0, 0.0, 1)


def test_full_alignment_round():
    out = step_rate_env(DrafterProfile(0, PointMass(1.0)), 0, 5, np.random.default_rng(0))
    assert (out.n_acc, out.be_reward, out.bd_reward, out.tokens_emitted) == (5, 1.0, 1.0, 6)


def test_rate_moments_match_enumeration():
    # 10^6 rounds at alpha = 0.5, n = 2: E = 0.75, Var = 0.6875 from the 4 accept patterns
    mean_ref, var_ref = nacc_moments_bruteforce(0.5, 2)
    assert (float(mean_ref), float(var_ref)) == (0.75, 0.6875)
    n, _, _ = sample_rate_rounds(PointMass(0.5), 2, 1_000_000, np.random.default_rng(11))
    n = n.astype(float)
    m = n.size
    se_mean = n.std() / math.sqrt(m)
    c = n - n.mean()
    se_var = math.sqrt(((c**4).mean() - n.var() ** 2) / m)
    assert abs(n.mean() - 0.75) < 3 * se_mean
    assert abs(n.var(ddof=1) - 0.6875) < 3 * se_var


def test_accepted_counts_stops_at_first_rejection():
    alphas = np.full((3, 4), 0.5)
    u = np.array([[0.1, 0.9, 0.1, 0.1], [0.6, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.1]])
    assert accepted_counts(alphas, u).tolist() == [1, 0, 4]


@given(st.floats(0.0, 1.0), st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_rate_rounds_in_range(alpha, n_max, seed):
    n, bd, alphas = sample_rate_rounds(PointMass(alpha), n_max, 64, np.random.default_rng(seed))
    assert n.min() >= 0 and n.max() <= n_max
    assert np.allclose(bd, alpha)
    assert alphas.shape == (64, n_max)


def test_beta_scaled_moments():
    d = BetaScaled(2.0, 3.0, 0.2, 0.7)
    x = d.sample(np.random.default_rng(3), 400_000)
    assert x.min() >= 0.2 and x.max() <= 0.7
    assert x.mean() == pytest.approx(d.mean, abs=4 * math.sqrt(d.variance / x.size))
    assert x.var() == pytest.approx(d.variance, rel=0.02)
    # ppf and sampling describe the same law
    assert np.median(x) == pytest.approx(float(d.ppf(np.array(0.5))), abs=2e-3)


def test_beta_from_mean():
    d = BetaScaled.from_mean(0.3, 10.0)
    assert d.mean == pytest.approx(0.3)
    assert (d.a, d.b) == pytest.approx((3.0, 7.0))


def test_dist_round_trip_and_errors():
    for d in (PointMass(0.4), BetaScaled(1.0, 2.0, 0.1, 0.9)):
        assert dist_from_dict(d.to_dict()) == d
    with pytest.raises(ValueError):
        PointMass(1.2)
    with pytest.raises(ValueError):
        BetaScaled(0.0, 1.0)
    with pytest.raises(ValueError, match="unknown"):
        dist_from_dict({"kind": "gauss"})


def test_profile_schedule():
    p = DrafterProfile(0, PointMass(0.2), ((10, PointMass(0.8)), (20, PointMass(0.5))))
    assert [p.active(t).mean for t in (0, 9, 10, 19, 20, 99)] == [0.2, 0.2, 0.8, 0.8, 0.5, 0.5]
    with pytest.raises(ValueError, match="increasing"):
        DrafterProfile(0, PointMass(0.2), ((10, PointMass(0.8)), (10, PointMass(0.5))))


def test_identical_distributions_accept_everything():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    env = CategoricalEnv(4, p, [p.copy()])
    rng = np.random.default_rng(5)
    for _ in range(200):
        out = step_dist_env(env, 0, 6, rng)
        assert out.n_acc == 6 and out.bd_reward == 1.0 and len(out.emitted) == 7


def test_zero_target_mass_is_always_rejected():
    p = np.array([0.5, 0.3, 0.2, 0.0])
    q = np.array([0.0, 0.0, 0.0, 1.0])
    env = CategoricalEnv(4, p, [q])
    rng = np.random.default_rng(6)
    counts = np.zeros(4)
    for _ in range(20_000):
        out = step_dist_env(env, 0, 3, rng)
        assert out.n_acc == 0 and len(out.emitted) == 1
        counts[out.emitted[0]] += 1
    assert 0.5 * np.abs(counts / counts.sum() - p).sum() < 0.02


@pytest.mark.parametrize("alpha, expected_tv", [(1.0, 0.0), (0.0, 1.0), (0.7, 0.3)])
def test_constructed_drafters_have_exact_distance(alpha, expected_tv):
    env = make_categorical_env(16, [alpha], np.random.default_rng(8))
    p, q = env.target, env.drafters[0]
    assert 0.5 * np.abs(p - q).sum() == pytest.approx(expected_tv, abs=1e-12)
    assert env.alignment(0) == pytest.approx(alpha, abs=1e-12)


def test_greedy_decoding_is_deterministic():
    env = make_categorical_env(8, [0.9, 0.1], np.random.default_rng(1), temperature=0.0)
    rng = np.random.default_rng(2)
    runs = {step_dist_env(env, 0, 4, rng).emitted for _ in range(20)}
    assert len(runs) == 1


def test_temperature():
    p = np.array([0.5, 0.25, 0.25, 0.0])
    assert apply_temperature(p, 0).tolist() == [1.0, 0.0, 0.0, 0.0]
    assert np.allclose(apply_temperature(p, 1.0), p)
    sharp = apply_temperature(p, 0.5)
    assert sharp[0] > p[0] and sharp[3] == 0.0 and sharp.sum() == pytest.approx(1.0)


def test_categorical_env_validation():
    with pytest.raises(ValueError, match="vocab_size"):
        make_categorical_env(2, [0.5], np.random.default_rng(0))
    with pytest.raises(ValueError, match="probability vector"):
        CategoricalEnv(4, np.array([0.5, 0.5, 0.5, 0.0]), [np.full(4, 0.25)])
    env = make_categorical_env(8, [0.5], np.random.default_rng(0))
    with pytest.raises(IndexError):
        step_dist_env(env, 3, 2, np.random.default_rng(0))


def test_survival_function_of_accepts():
    alpha, n = 0.7, 6
    x, _, _ = sample_rate_rounds(PointMass(alpha), n, 200_000, np.random.default_rng(21))
    for j in range(1, n + 1):
        freq = (x >= j).mean()
        se = math.sqrt(alpha**j * (1 - alpha**j) / x.size)
        assert abs(freq - alpha**j) < 3 * se


def test_zero_be_reward_ratio():
    x, bd, _ = sample_rate_rounds(PointMass(0.35), 4, 100_000, np.random.default_rng(22))
    se = math.sqrt(0.35 * 0.65 / x.size)
    assert abs((x == 0).mean() - 0.65) < 3 * se
    assert np.all(bd > 0)


def test_first_position_acceptance_is_one_minus_tv():
    env = make_categorical_env(16, [0.45], np.random.default_rng(23))
    rng = np.random.default_rng(24)
    acc = np.array([step_dist_env(env, 0, 1, rng).n_acc for _ in range(40_000)])
    target = env.alignment(0)
    assert abs(acc.mean() - target) < 3 * math.sqrt(target * (1 - target) / acc.size)


def test_bd_mean_tracks_alignment_mean():
    d = BetaScaled.from_mean(0.4, 3.0)
    _, bd, _ = sample_rate_rounds(d, 5, 100_000, np.random.default_rng(25))
    assert abs(bd.mean() - 0.4) < 3 * bd.std() / math.sqrt(bd.size)
