"""PPO search over generator sets.

An episode picks ``k`` distinct candidates from the pool, one per step.
Step rewards are the increments of the mean normalised order and of the
propagation score; the last step also subtracts the exact diameter, so an
episode's return is ``-D + lam * omega_K + lam_g * g_K``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numpy as np

from .cayley import GeneratorSet, MetricsCache, canonicalize, profile
from .networks import (
    Adam,
    PolicyParams,
    ValueParams,
    masked_softmax,
    policy_hidden,
    policy_logits,
    value_forward,
    value_loss_and_grad,
)
from .numtheory import CandidatePool
from .propagation import propagation_score

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    k: int = 7
    lam: float = 1.0
    lam_g: float = 1.0
    eta: float = 2.0
    clip_eps: float = 0.2
    lr: float = 3e-3
    gamma: float = 1.0
    gae_lambda: float = 0.95
    episodes_per_batch: int = 64
    epochs: int = 4
    batches: int = 200
    seed: int = 0
    hidden: int = 32
    entropy_coef: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        for name in ("episodes_per_batch", "epochs", "batches", "hidden", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpisodeTrace:
    actions: np.ndarray  # (K,) pool indices
    log_probs: np.ndarray  # (K,)
    rewards: np.ndarray  # (K,)
    values: np.ndarray  # (K,) value of the state each action was taken from
    value_inputs: np.ndarray  # (K, 2) [omega_{t-1}, g_{t-1}]
    omegas: np.ndarray  # (K,) running mean order after step t
    scores: np.ndarray  # (K,) propagation score after step t
    final: GeneratorSet
    diameter: float
    k: int = field(init=False)

    def __post_init__(self):
        self.k = len(self.actions)

    @property
    def ret(self) -> float:
        return float(self.rewards.sum())


class Evaluator:
    """Caches diameters/APL and propagation scores per canonical set."""

    def __init__(self, maxsize: int = 1 << 18):
        self.metrics = MetricsCache(maxsize)
        self.scores = MetricsCache(maxsize)

    def score(self, gs: GeneratorSet) -> float:
        hit = self.scores.get(gs)
        if hit is None:
            hit = propagation_score(gs)
            self.scores.put(gs, hit)
        return hit

    def profile(self, gs: GeneratorSet):
        return profile(gs, self.metrics)


def step_features(pool: CandidatePool, t: int, k: int) -> np.ndarray:
    m = len(pool)
    if not 1 <= t <= k:
        raise ValueError(f"step {t} outside [1, {k}]")
    return np.column_stack(
        [np.asarray(pool.normalized_orders), np.arange(m) / m, np.full(m, t / k)]
    )


def diameter_penalty(gs: GeneratorSet, d: float) -> float:
    # disconnected sets get a finite penalty larger than any real diameter
    return float(gs.n) if math.isinf(d) else float(d)


def rollout_episode(
    policy: PolicyParams,
    value: ValueParams,
    pool: CandidatePool,
    k: int,
    rng: np.random.Generator,
    cfg: TrainConfig | None = None,
    evaluator: Evaluator | None = None,
) -> EpisodeTrace:
    cfg = cfg or TrainConfig(k=k)
    ev = evaluator or Evaluator()
    m = len(pool)
    if m < k:
        raise ValueError(f"pool has {m} candidates, need at least k={k}")
    omega = np.asarray(pool.normalized_orders)
    selected = np.zeros(m, dtype=bool)
    actions, logps, rewards, values, vin, omegas, scores = ([] for _ in range(7))
    w_prev = g_prev = 0.0
    omega_sum = 0.0
    gs = None
    for t in range(1, k + 1):
        probs = masked_softmax(policy_logits(policy, step_features(pool, t, k)), selected)
        # inverse-CDF draw keeps one uniform per step
        a = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        a = min(a, m - 1)
        if probs[a] == 0.0:
            a = int(np.flatnonzero(probs)[-1])
        x = np.array([w_prev, g_prev])
        vin.append(x)
        values.append(float(value_forward(value, x[None, :])[0]))
        actions.append(a)
        logps.append(float(np.log(probs[a])))
        selected[a] = True
        omega_sum += omega[a]
        w_t = omega_sum / t
        gs = canonicalize(pool.n, [pool.candidates[i] for i in actions])
        g_t = ev.score(gs)
        r = cfg.lam * (w_t - w_prev) + cfg.lam_g * (g_t - g_prev)
        omegas.append(w_t)
        scores.append(g_t)
        if t == k:
            d = ev.profile(gs).diameter
            r -= diameter_penalty(gs, d)
        rewards.append(r)
        w_prev, g_prev = w_t, g_t
    return EpisodeTrace(
        actions=np.array(actions),
        log_probs=np.array(logps),
        rewards=np.array(rewards),
        values=np.array(values),
        value_inputs=np.array(vin),
        omegas=np.array(omegas),
        scores=np.array(scores),
        final=gs,
        diameter=d,
    )


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns-to-go; the value after the last step is 0."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n = len(rewards)
    adv = np.zeros(n)
    nxt_v, acc = 0.0, 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * nxt_v - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        nxt_v = values[t]
    return adv, adv + values


@dataclass
class Batch:
    """Flattened steps from a set of episodes."""

    steps: np.ndarray  # (B,) 1-based step index
    actions: np.ndarray  # (B,)
    masks: np.ndarray  # (B, M) True where already selected before the step
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    value_inputs: np.ndarray  # (B, 2)

    @classmethod
    def from_traces(
        cls, traces: list[EpisodeTrace], m: int, gamma: float, lam: float, normalize: bool = True
    ) -> "Batch":
        if not traces:
            raise ValueError("empty batch")
        steps, acts, masks, logps, advs, rets, vins = [], [], [], [], [], [], []
        for tr in traces:
            adv, ret = compute_gae(tr.rewards, tr.values, gamma, lam)
            sel = np.zeros(m, dtype=bool)
            for t, a in enumerate(tr.actions, start=1):
                steps.append(t)
                acts.append(a)
                masks.append(sel.copy())
                sel[a] = True
            logps.append(tr.log_probs)
            advs.append(adv)
            rets.append(ret)
            vins.append(tr.value_inputs)
        adv = np.concatenate(advs)
        if normalize and len(adv) > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        return cls(
            steps=np.array(steps),
            actions=np.array(acts),
            masks=np.array(masks),
            old_log_probs=np.concatenate(logps),
            advantages=adv,
            returns=np.concatenate(rets),
            value_inputs=np.concatenate(vins),
        )


def _batch_probs(policy: PolicyParams, pool: CandidatePool, k: int, batch: Batch):
    feats = {t: step_features(pool, t, k) for t in np.unique(batch.steps)}
    hidden = {t: policy_hidden(policy, f) for t, f in feats.items()}
    logits = {t: hidden[t] @ policy.w2 + policy.b2 + policy.eta * f[:, 0] for t, f in feats.items()}
    z = np.stack([logits[t] for t in batch.steps])
    z = np.where(batch.masks, -np.inf, z)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    return feats, hidden, probs


def surrogate_and_grad(
    policy: PolicyParams,
    pool: CandidatePool,
    k: int,
    batch: Batch,
    clip_eps: float | None = 0.2,
    entropy_coef: float = 0.0,
):
    """Mean clipped surrogate (``clip_eps=None``: unclipped) and its gradient."""
    feats, hidden, probs = _batch_probs(policy, pool, k, batch)
    b = len(batch.actions)
    rows = np.arange(b)
    logp = np.log(probs[rows, batch.actions])
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    unclipped = ratio * adv
    if clip_eps is None:
        obj = unclipped
        active = np.ones(b, dtype=bool)
    else:
        clipped = np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * adv
        obj = np.minimum(unclipped, clipped)
        active = unclipped <= clipped
    objective = float(obj.mean())
    # d obj_i / d logits_i = (ratio * adv) * (onehot(a) - pi) where active
    coef = np.where(active, unclipped, 0.0) / b
    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    dlogits = coef[:, None] * (onehot - probs)
    entropy = 0.0
    if entropy_coef:
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(probs > 0, probs * np.log(np.where(probs > 0, probs, 1.0)), 0.0)
        ent = -plogp.sum(axis=1)
        entropy = float(ent.mean())
        objective += entropy_coef * entropy
        logp_all = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
        dent = -probs * (logp_all + ent[:, None])
        dlogits += entropy_coef * dent / b
    grads = {"w1": np.zeros_like(policy.w1), "b1": np.zeros_like(policy.b1),
             "w2": np.zeros_like(policy.w2), "b2": 0.0}
    for t in feats:
        ds = dlogits[batch.steps == t].sum(axis=0)
        h = hidden[t]
        grads["w2"] += h.T @ ds
        grads["b2"] += float(ds.sum())
        dz = np.outer(ds, policy.w2) * (1.0 - h**2)
        grads["w1"] += dz.T @ feats[t]
        grads["b1"] += dz.sum(axis=0)
    diag = {
        "approx_kl": float(np.mean(batch.old_log_probs - logp)),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > (clip_eps or np.inf))),
        "entropy": entropy,
    }
    return objective, grads, diag


@dataclass
class Learner:
    policy: PolicyParams
    value: ValueParams
    policy_opt: Adam
    value_opt: Adam

    @classmethod
    def init(cls, cfg: TrainConfig) -> "Learner":
        rng = np.random.default_rng([cfg.seed, 0x5EED])
        return cls(
            PolicyParams.init(cfg.hidden, cfg.eta, rng),
            ValueParams.init(cfg.hidden, rng),
            Adam(cfg.lr),
            Adam(cfg.lr),
        )


def ppo_update(learner: Learner, pool: CandidatePool, batch: Batch, cfg: TrainConfig) -> dict:
    """Run ``cfg.epochs`` full-batch PPO steps on policy and value in place."""
    diag = {}
    for _ in range(cfg.epochs):
        obj, grads, d = surrogate_and_grad(
            learner.policy, pool, cfg.k, batch, cfg.clip_eps, cfg.entropy_coef
        )
        vloss, vgrads = value_loss_and_grad(learner.value, batch.value_inputs, batch.returns)
        if not (math.isfinite(obj) and math.isfinite(vloss)):
            raise FloatingPointError(f"non-finite loss: surrogate={obj}, value={vloss}")
        learner.policy_opt.step(learner.policy, grads, maximize=True)
        learner.value_opt.step(learner.value, vgrads)
        diag = {"surrogate": obj, "value_loss": vloss, **d}
    return diag


@dataclass
class TrainResult:
    best: GeneratorSet
    diameter: float
    avg_path_length: Fraction | float
    history: list[dict]
    cache_hits: int = 0
    cache_misses: int = 0


def episode_rng(seed: int, batch: int, episode: int) -> np.random.Generator:
    return np.random.default_rng([seed, batch, episode])


def train(pool: CandidatePool, cfg: TrainConfig, evaluator: Evaluator | None = None) -> TrainResult:
    """Search for the (diameter, APL)-lexicographically best set of size k."""
    ev = evaluator or Evaluator()
    k, m = cfg.k, len(pool)
    if m < k:
        raise ValueError(f"pool has {m} candidates, need at least k={k}")
    if m == k:
        gs = canonicalize(pool.n, pool.candidates)
        prof = ev.profile(gs)
        return TrainResult(gs, prof.diameter, prof.avg_path_length, [])

    learner = Learner.init(cfg)
    best, best_key = None, (math.inf, math.inf)
    history = []
    pool_exec = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def run(ep_idx, b):
        return rollout_episode(
            learner.policy, learner.value, pool, k, episode_rng(cfg.seed, b, ep_idx), cfg, ev
        )

    try:
        for b in range(cfg.batches):
            idx = range(cfg.episodes_per_batch)
            if pool_exec is None:
                traces = [run(i, b) for i in idx]
            else:
                traces = list(pool_exec.map(lambda i: run(i, b), idx))
            for tr in traces:
                prof = ev.profile(tr.final)
                key = (prof.diameter, prof.avg_path_length)
                if key < best_key:
                    best, best_key = tr.final, key
            batch = Batch.from_traces(traces, m, cfg.gamma, cfg.gae_lambda)
            diag = ppo_update(learner, pool, batch, cfg)
            history.append(
                {
                    "batch": b,
                    "mean_return": float(np.mean([tr.ret for tr in traces])),
                    "best_diameter": best_key[0],
                    "best_apl": float(best_key[1]),
                    **diag,
                }
            )
            if b % 20 == 0 or b == cfg.batches - 1:
                log.info(
                    "batch %d mean_return %.3f best %s D=%s",
                    b, history[-1]["mean_return"], best, best_key[0],
                )
    finally:
        if pool_exec is not None:
            pool_exec.shutdown()
    return TrainResult(
        best, best_key[0], best_key[1], history, ev.metrics.hits, ev.metrics.misses
    )
