import math

import numpy as np
import pytest

from circtopo.bruteforce import exhaustive_search
from circtopo.cayley import canonicalize, diameter
from circtopo.networks import Adam, PolicyParams, ValueParams, masked_softmax, policy_logits
from circtopo.numtheory import build_candidate_pool, pool_from_candidates
from circtopo.propagation import propagation_score
from circtopo.rl import (
    Batch,
    Evaluator,
    Learner,
    TrainConfig,
    compute_gae,
    ppo_update,
    rollout_episode,
    step_features,
    surrogate_and_grad,
    train,
)

from oracles import gae_direct


def _zero_policy(hidden=4, eta=0.0, b2=0.0):
    return PolicyParams(np.zeros((hidden, 3)), np.zeros(hidden), np.zeros(hidden), b2, eta)


def _random_nets(seed=0, hidden=6, eta=1.5):
    rng = np.random.default_rng(seed)
    pol = PolicyParams(
        rng.normal(size=(hidden, 3)), rng.normal(size=hidden), rng.normal(size=hidden),
        float(rng.normal()), eta,
    )
    return pol, ValueParams.init(hidden, rng)


# ----------------------------------------------------------------- features


def test_step_features():
    pool = build_candidate_pool(31, "all")
    f = step_features(pool, 2, 2)
    assert f.shape == (15, 3)
    assert (f[:, 2] == 1.0).all()
    assert f[0, 1] == 0.0 and f[5, 1] == pytest.approx(5 / 15)
    assert np.allclose(f[:, 0], pool.normalized_orders)
    with pytest.raises(ValueError):
        step_features(pool, 0, 2)


def test_step_features_single():
    pool = pool_from_candidates(7, [3])
    assert step_features(pool, 1, 1).tolist() == [[1.0, 0.0, 1.0]]


# ------------------------------------------------------------------- logits


def test_logits_zero_weights():
    feats = step_features(build_candidate_pool(31, "all"), 1, 2)
    assert np.allclose(policy_logits(_zero_policy(eta=1.0), feats), feats[:, 0])
    assert np.allclose(policy_logits(_zero_policy(eta=0.0, b2=0.7), feats), 0.7)


def test_logits_match_straight_line():
    pol, _ = _random_nets(3)
    feats = step_features(build_candidate_pool(97, "all"), 2, 3)
    out = policy_logits(pol, feats)
    for i, x in enumerate(feats):
        s = pol.b2 + pol.eta * x[0]
        for j in range(len(pol.b1)):
            s += pol.w2[j] * math.tanh(sum(pol.w1[j, c] * x[c] for c in range(3)) + pol.b1[j])
        assert abs(out[i] - s) < 1e-12


# ------------------------------------------------------------ masked softmax


def test_masked_softmax_examples():
    assert np.allclose(masked_softmax(np.zeros(4), np.zeros(4, bool)), 0.25)
    p = masked_softmax(np.array([0.0, math.log(3.0)]), np.zeros(2, bool))
    assert p == pytest.approx([0.25, 0.75], abs=1e-15)
    p = masked_softmax(np.array([5.0, 9.0, 1.0]), np.array([False, True, False]))
    assert p[1] == 0.0 and p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        masked_softmax(np.zeros(3), np.ones(3, bool))


def test_masked_softmax_stable_for_large_logits():
    p = masked_softmax(np.array([1000.0, 1001.0]), np.zeros(2, bool))
    assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)


def test_eta_raises_max_omega_probability():
    pool = build_candidate_pool(97, "all")
    feats = step_features(pool, 1, 3)
    best = int(np.argmax(feats[:, 0]))
    mask = np.zeros(len(pool), bool)
    probs = [masked_softmax(policy_logits(_zero_policy(eta=e), feats), mask)[best]
             for e in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(b > a for a, b in zip(probs, probs[1:]))


# ------------------------------------------------------------------ rollout


@pytest.mark.parametrize("seed", range(5))
def test_rollout_telescoping_and_masking(seed):
    pool = build_candidate_pool(97, "all")
    pol, val = _random_nets(seed)
    cfg = TrainConfig(k=4, lam=0.7, lam_g=1.3)
    tr = rollout_episode(pol, val, pool, 4, np.random.default_rng(seed), cfg)
    assert tr.k == 4 and len(set(tr.actions.tolist())) == 4
    expected = -tr.diameter + cfg.lam * tr.omegas[-1] + cfg.lam_g * tr.scores[-1]
    assert abs(tr.ret - expected) < 1e-12
    gs = canonicalize(97, [pool.candidates[a] for a in tr.actions])
    assert tr.final == gs and tr.diameter == diameter(gs)
    assert tr.scores[-1] == propagation_score(gs)


def test_rollout_single_candidate():
    pool = pool_from_candidates(13, [5])
    pol, val = _random_nets(1)
    tr = rollout_episode(pol, val, pool, 1, np.random.default_rng(0))
    gs = canonicalize(13, [5])
    assert tr.actions.tolist() == [0]
    assert tr.ret == pytest.approx(-6 + 1.0 + propagation_score(gs), abs=1e-12)


def test_rollout_disconnected_penalty():
    pool = pool_from_candidates(12, [1, 5])
    # build a pool where the only picks share a factor with n
    from circtopo.numtheory import CandidatePool
    bad = CandidatePool(12, (2, 4), (1, 1), (1.0, 1.0))
    pol, val = _random_nets(2)
    tr = rollout_episode(pol, val, bad, 2, np.random.default_rng(0))
    assert math.isinf(tr.diameter)
    assert tr.rewards[-1] < -11  # penalty N = 12 dominates
    assert len(pool) == 2


def test_rollout_reproducible():
    pool = build_candidate_pool(97, "all")
    pol, val = _random_nets(4)
    a = rollout_episode(pol, val, pool, 3, np.random.default_rng(9))
    b = rollout_episode(pol, val, pool, 3, np.random.default_rng(9))
    assert a.actions.tolist() == b.actions.tolist()
    assert np.array_equal(a.rewards, b.rewards)


def test_rollout_pool_too_small():
    pol, val = _random_nets(0)
    with pytest.raises(ValueError):
        rollout_episode(pol, val, pool_from_candidates(13, [1, 2]), 3, np.random.default_rng(0))


def test_masking_over_1000_episodes():
    pool = build_candidate_pool(64, "all")
    pol, val = _random_nets(5, eta=8.0)  # strong prior tempts repeats
    rng = np.random.default_rng(0)
    ev = Evaluator()
    for _ in range(1000):
        tr = rollout_episode(pol, val, pool, 5, rng, TrainConfig(k=5), ev)
        assert len(set(tr.actions.tolist())) == 5


# ---------------------------------------------------------------------- GAE


def test_gae_lambda_zero_is_td():
    r, v = np.array([0.3, -0.2, 1.1]), np.array([0.5, 0.1, -0.4])
    adv, ret = compute_gae(r, v, 0.9, 0.0)
    assert np.array_equal(adv, np.array([0.3 + 0.9 * 0.1 - 0.5, -0.2 + 0.9 * -0.4 - 0.1, 1.1 + 0.4]))
    assert np.allclose(ret, adv + v)


def test_gae_monte_carlo_limit():
    r = np.array([0.3, -0.2, 1.1, 2.0])
    adv, _ = compute_gae(r, np.zeros(4), 1.0, 1.0)
    assert np.allclose(adv, np.cumsum(r[::-1])[::-1])


def test_gae_matches_direct_sum():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 10))
        r, v = rng.normal(size=n), rng.normal(size=n)
        gamma, lam = rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.0)
        adv, ret = compute_gae(r, v, gamma, lam)
        oadv, oret = gae_direct(r, v, gamma, lam)
        assert np.max(np.abs(adv - oadv)) < 1e-12
        assert np.max(np.abs(ret - oret)) < 1e-12


# ---------------------------------------------------------------------- PPO


def _toy_batch(seed=0, k=2):
    pool = pool_from_candidates(11, [1, 2, 3, 4, 5])
    pol, val = _random_nets(seed, hidden=4)
    rng = np.random.default_rng(seed)
    traces = [rollout_episode(pol, val, pool, k, rng) for _ in range(6)]
    return pool, pol, val, Batch.from_traces(traces, len(pool), 1.0, 0.95)


def test_surrogate_ratio_one_is_mean_advantage():
    pool, pol, _, batch = _toy_batch()
    obj, _, diag = surrogate_and_grad(pol, pool, 2, batch)
    assert obj == pytest.approx(batch.advantages.mean(), abs=1e-12)
    assert abs(diag["approx_kl"]) < 1e-12


def test_gradient_matches_finite_differences():
    pool, pol, _, batch = _toy_batch(seed=1)
    # move off the ratio=1 point so gradients are generic
    rng = np.random.default_rng(2)
    batch.old_log_probs = batch.old_log_probs + rng.normal(0, 0.3, size=len(batch.old_log_probs))
    _, grads, _ = surrogate_and_grad(pol, pool, 2, batch, clip_eps=None)
    h = 1e-5
    worst = 0.0
    for name in PolicyParams.TRAINABLE:
        base = getattr(pol, name)
        arr = np.atleast_1d(np.array(base, dtype=float))
        g = np.atleast_1d(grads[name])
        for idx in np.ndindex(arr.shape):
            vals = []
            for sign in (1, -1):
                bumped = arr.copy()
                bumped[idx] += sign * h
                p2 = pol.copy()
                setattr(p2, name, bumped if np.ndim(base) else float(bumped[0]))
                vals.append(surrogate_and_grad(p2, pool, 2, batch, clip_eps=None)[0])
            fd = (vals[0] - vals[1]) / (2 * h)
            if name == "b2":
                # a shared logit shift cancels in the softmax: true gradient is 0
                assert abs(fd) < 1e-9 and abs(g[idx]) < 1e-12
                continue
            err = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8)
            worst = max(worst, err)
    assert worst < 1e-4


def test_zero_advantages_leave_policy_unchanged():
    pool, _, _, batch = _toy_batch()
    batch.advantages = np.zeros_like(batch.advantages)
    cfg = TrainConfig(k=2, hidden=4)
    learner = Learner.init(cfg)
    before = learner.policy.copy()
    v_before = learner.value.copy()
    ppo_update(learner, pool, batch, cfg)
    for name in PolicyParams.TRAINABLE:
        assert np.array_equal(getattr(before, name), getattr(learner.policy, name))
    assert not np.array_equal(v_before.v2, learner.value.v2)


def test_non_finite_loss_aborts():
    pool, _, _, batch = _toy_batch()
    batch.returns = batch.returns * np.nan
    cfg = TrainConfig(k=2, hidden=4)
    with pytest.raises(FloatingPointError):
        ppo_update(Learner.init(cfg), pool, batch, cfg)


def test_adam_minimizes_quadratic():
    p = ValueParams(np.ones((2, 2)), np.ones(2), np.ones(2), 3.0)
    opt = Adam(0.1)
    for _ in range(500):
        opt.step(p, {"v1": 2 * p.v1, "c1": 2 * p.c1, "v2": 2 * p.v2, "c2": 2 * p.c2})
    assert abs(p.c2) < 1e-2 and np.abs(p.v1).max() < 1e-2


@pytest.mark.parametrize("bad", [dict(k=0), dict(clip_eps=1.0), dict(gamma=0.0), dict(gae_lambda=1.5)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


# -------------------------------------------------------------------- train


def test_train_k_equals_pool():
    pool = pool_from_candidates(31, [1, 5, 7])
    res = train(pool, TrainConfig(k=3))
    assert res.best == canonicalize(31, [1, 5, 7]) and res.history == []


def test_train_small_matches_exhaustive_and_is_reproducible():
    pool = build_candidate_pool(31, "all")
    cfg = TrainConfig(k=2, batches=15, episodes_per_batch=16, seed=3)
    a = train(pool, cfg)
    b = train(pool, cfg)
    assert a.best == b.best and a.history == b.history
    ex = exhaustive_search(pool, 2)
    assert (a.diameter, a.avg_path_length) == (ex.diameter, ex.avg_path_length) == (4, pytest.approx(8 / 3))
    ds = [h["best_diameter"] for h in a.history]
    assert all(y <= x for x, y in zip(ds, ds[1:]))


def test_train_workers_schedule_independent():
    pool = build_candidate_pool(47, "all")
    base = dict(k=2, batches=4, episodes_per_batch=8, seed=1)
    a = train(pool, TrainConfig(**base))
    b = train(pool, TrainConfig(**base, workers=3))
    assert a.best == b.best and a.history == b.history


def test_evaluator_cache_hits_equal_recompute():
    ev = Evaluator()
    gs = canonicalize(97, [3, 10])
    first = ev.profile(gs)
    assert ev.profile(gs) is first and ev.metrics.hits == 1
    assert ev.score(gs) == ev.score(gs) == propagation_score(gs)


# ----------------------------------------------------------------- exhaustive


@pytest.mark.parametrize(
    "n, k, d, apl, best",
    [(31, 2, 4, (8, 3), (1, 7)), (47, 2, 5, (75, 23), (1, 13)), (64, 2, 6, (242, 63), (1, 19)),
     (13, 1, 6, (7, 2), None)],
)
def test_exhaustive_frozen(n, k, d, apl, best):
    from fractions import Fraction

    res = exhaustive_search(build_candidate_pool(n, "all"), k)
    assert res.diameter == d and res.avg_path_length == Fraction(*apl)
    if best is not None:
        assert res.best.offsets == best
