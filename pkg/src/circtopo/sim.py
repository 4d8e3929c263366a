"""Gossip, link-failure and communication-load simulators.

Every simulator takes an explicit seed or ``np.random.Generator`` and is
bit-reproducible.  Per-trial generators are derived as
``default_rng([seed, ...indices])`` so trials are independent of each other
and of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .cayley import GeneratorSet


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``0..n-1`` as an ``(E, 2)`` edge array."""

    n: int
    edges: np.ndarray = field(repr=False)

    @classmethod
    def from_generator_set(cls, gs: GeneratorSet) -> "Graph":
        return cls(gs.n, gs.edges())

    @classmethod
    def complete(cls, n: int) -> "Graph":
        iu = np.triu_indices(n, k=1)
        return cls(n, np.stack(iu, axis=1).astype(np.int64))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge, sorted by source."""
        if self.num_edges == 0:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.argsort(src, kind="stable")
        return src[order], dst[order]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)


@dataclass(frozen=True)
class BroadcastChannel:
    """Shared slotted channel: a slot succeeds only with exactly one sender.

    ``contenders`` is ``"all"`` (every agent competes for the slot with its
    own traffic) or ``"informed"`` (only holders of the message compete).
    ``q`` is the per-contender send probability; ``None`` means
    ``1 / max(1, number of contenders)``.
    """

    n: int
    q: float | None = None
    contenders: str = "all"

    def __post_init__(self):
        if self.contenders not in ("all", "informed"):
            raise ValueError(f"unknown contenders mode {self.contenders!r}")


Topology = Union[GeneratorSet, Graph, BroadcastChannel]


def as_graph(topology: Topology) -> Graph:
    if isinstance(topology, Graph):
        return topology
    if isinstance(topology, GeneratorSet):
        return Graph.from_generator_set(topology)
    if isinstance(topology, BroadcastChannel):
        return Graph.complete(topology.n)
    raise TypeError(f"not a topology: {topology!r}")


def broadcast_baseline(n: int, mode: str = "collision", q: float | None = None,
                       contenders: str = "all") -> Topology:
    if mode == "collision":
        return BroadcastChannel(n, q, contenders)
    if mode == "full":
        return Graph.complete(n)
    raise ValueError(f"unknown broadcast mode {mode!r}")


# ------------------------------------------------------------------ gossip


@dataclass(frozen=True)
class GossipConfig:
    p: float = 0.75
    max_rounds: int = 120
    trials: int = 30
    thresholds: tuple[float, ...] = (0.9, 1.0)
    source: str = "fixed"  # fixed | rotating | random
    source_vertex: int = 0

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.source not in ("fixed", "rotating", "random"):
            raise ValueError(f"unknown source mode {self.source!r}")


@dataclass
class GossipTrial:
    reached: dict  # threshold -> first round, or None when censored
    transmissions: int
    rounds: int  # rounds actually simulated (== max_rounds if not full)
    informed: int
    coverage: list[int] = field(default_factory=list, repr=False)  # informed count per round

    def crossing(self, thr: float, n: int) -> float | None:
        """Fractional round at which coverage crosses ``thr``, linearly
        interpolated between rounds; ``None`` if never reached."""
        target = thr * n - 1e-9
        if self.coverage[0] >= target:
            return 0.0
        for r in range(1, len(self.coverage)):
            prev, cur = self.coverage[r - 1], self.coverage[r]
            if cur >= target:
                return r - 1 + (thr * n - prev) / (cur - prev)
        return None


def _reached_at(count: int, n: int, thr: float) -> bool:
    return count >= thr * n - 1e-9


def push_gossip_trial(
    topology: Topology, source: int, cfg: GossipConfig, rng: np.random.Generator
) -> GossipTrial:
    """Synchronous push gossip; every attempt counts as one transmission."""
    if isinstance(topology, BroadcastChannel):
        return _broadcast_trial(topology, source, cfg, rng)
    g = as_graph(topology)
    n = g.n
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside [0, {n})")
    src, dst = g.arcs()
    deg = np.bincount(src, minlength=n)
    informed = np.zeros(n, dtype=bool)
    informed[source] = True
    count = 1
    reached = {thr: (0 if _reached_at(count, n, thr) else None) for thr in cfg.thresholds}
    tx = 0
    rnd = 0
    coverage = [count]
    while count < n and rnd < cfg.max_rounds:
        rnd += 1
        active = informed[src]
        n_att = int(deg[informed].sum())
        tx += n_att
        targets = dst[active]
        ok = rng.random(n_att) < cfg.p
        hit = targets[ok]
        fresh = hit[~informed[hit]]
        if fresh.size:
            informed[fresh] = True
            count = int(informed.sum())
        coverage.append(count)
        for thr in cfg.thresholds:
            if reached[thr] is None and _reached_at(count, n, thr):
                reached[thr] = rnd
        # closed informed set: remaining rounds only repeat the same attempts
        if fresh.size == 0 and not (~informed[targets]).any():
            tx += n_att * (cfg.max_rounds - rnd)
            coverage.extend([count] * (cfg.max_rounds - rnd))
            rnd = cfg.max_rounds
    return GossipTrial(reached, tx, rnd, count, coverage)


def _broadcast_trial(ch: BroadcastChannel, source: int, cfg: GossipConfig,
                     rng: np.random.Generator) -> GossipTrial:
    n = ch.n
    informed = np.zeros(n, dtype=bool)
    informed[source] = True
    count = 1
    reached = {thr: (0 if _reached_at(count, n, thr) else None) for thr in cfg.thresholds}
    tx = 0
    rnd = 0
    coverage = [count]
    while count < n and rnd < cfg.max_rounds:
        rnd += 1
        c = n if ch.contenders == "all" else count
        q = ch.q if ch.q is not None else 1.0 / max(1, c)
        senders = int(rng.binomial(c, q))
        tx += senders * (n - 1)
        if senders == 1:
            # the lone sender carries the message iff it is informed
            carries = ch.contenders == "informed" or rng.random() < count / n
            if carries:
                got = (~informed) & (rng.random(n) < cfg.p)
                informed |= got
                count = int(informed.sum())
        coverage.append(count)
        for thr in cfg.thresholds:
            if reached[thr] is None and _reached_at(count, n, thr):
                reached[thr] = rnd
    return GossipTrial(reached, tx, rnd, count, coverage)


@dataclass
class DisseminationStats:
    mean_rounds: dict  # threshold -> mean rounds, censored trials at the cap
    censored: dict  # threshold -> number of censored trials
    avg_tx: float
    trials: list[GossipTrial]
    sources: list[int]

    @property
    def t90(self) -> float:
        return self.mean_rounds[0.9]

    @property
    def t100(self) -> float:
        return self.mean_rounds[1.0]


def trial_source(cfg: GossipConfig, n: int, trial: int, rng: np.random.Generator) -> int:
    if cfg.source == "fixed":
        return cfg.source_vertex % n
    if cfg.source == "rotating":
        return (cfg.source_vertex + trial) % n
    return int(rng.integers(n))


def summarize(trials: Sequence[GossipTrial], cfg: GossipConfig, sources=()) -> DisseminationStats:
    means, cens = {}, {}
    for thr in cfg.thresholds:
        vals = [t.reached[thr] for t in trials]
        cens[thr] = sum(v is None for v in vals)
        means[thr] = float(np.mean([cfg.max_rounds if v is None else v for v in vals]))
    avg_tx = float(np.mean([t.transmissions for t in trials]))
    return DisseminationStats(means, cens, avg_tx, list(trials), list(sources))


def dissemination_stats(topology: Topology, cfg: GossipConfig, seed: int) -> DisseminationStats:
    n = topology.n
    trials, sources = [], []
    for i in range(cfg.trials):
        rng = np.random.default_rng([seed, i])
        s = trial_source(cfg, n, i, rng)
        sources.append(s)
        trials.append(push_gossip_trial(topology, s, cfg, rng))
    return summarize(trials, cfg, sources)


# ------------------------------------------------------------ link failure


@dataclass(frozen=True)
class FailureConfig:
    rates: tuple[float, ...] = (0.30, 0.50, 0.70, 0.85)
    realizations: int = 20
    lcc_threshold: float = 0.8

    def __post_init__(self):
        for r in self.rates:
            if not 0.0 <= r < 1.0 + 1e-12:
                raise ValueError(f"failure rate {r} outside [0, 1]")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")


def edge_offsets(g: Graph) -> np.ndarray:
    """Ring distance ``min(d, n - d)`` spanned by each edge."""
    d = (g.edges[:, 1] - g.edges[:, 0]) % g.n
    return np.minimum(d, g.n - d)


def removal_count(rate: float, num_edges: int) -> int:
    return min(num_edges, int(math.floor(rate * num_edges + 1e-9)))


def remove_edges(g: Graph, rate: float, mode: str, rng: np.random.Generator) -> Graph:
    """Delete ``floor(rate * |E|)`` edges, uniformly or biased to long links.

    In ``"distance"`` mode edges are drawn without replacement with weight
    proportional to their ring offset (Efraimidis-Spirakis keys).
    """
    if isinstance(g, GeneratorSet):
        g = Graph.from_generator_set(g)
    e = g.num_edges
    k = removal_count(rate, e)
    if k == 0:
        return g
    if mode == "random":
        drop = rng.choice(e, size=k, replace=False)
    elif mode == "distance":
        w = edge_offsets(g).astype(np.float64)
        keys = np.log(rng.random(e)) / w
        drop = np.argpartition(-keys, k - 1)[:k]
    else:
        raise ValueError(f"unknown removal mode {mode!r}")
    keep = np.ones(e, dtype=bool)
    keep[drop] = False
    return Graph(g.n, g.edges[keep])


def largest_connected_component(g: Graph) -> tuple[int, float]:
    if g.num_edges == 0:
        return 1, 1.0 / g.n
    a = coo_matrix(
        (np.ones(g.num_edges), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n)
    )
    _, labels = connected_components(a, directed=False)
    size = int(np.bincount(labels).max())
    return size, size / g.n


@dataclass
class RobustnessRecord:
    rate: float
    mean_t90: float
    censored_t90: int
    mean_lcc: float  # fraction, random removals
    mean_lcc_distance: float  # fraction, distance-biased removals
    pr80_random: float
    pr80_distance: float
    lcc_random: list[float] = field(default_factory=list, repr=False)
    lcc_distance: list[float] = field(default_factory=list, repr=False)
    t90: list[float] = field(default_factory=list, repr=False)


def robustness_eval(
    topology: Topology, fcfg: FailureConfig, gcfg: GossipConfig, seed: int
) -> list[RobustnessRecord]:
    """Per failure rate: LCC, Pr[LCC >= threshold] for both removal modes,
    and T90 of one gossip trial (uniform random source) per random-mode
    realisation."""
    g = as_graph(topology)
    out = []
    for ri, rate in enumerate(fcfg.rates):
        lcc_r, lcc_d, t90s = [], [], []
        cens = 0
        for j in range(fcfg.realizations):
            rng_r = np.random.default_rng([seed, ri, j, 0])
            rng_d = np.random.default_rng([seed, ri, j, 1])
            dmg = remove_edges(g, rate, "random", rng_r)
            lcc_r.append(largest_connected_component(dmg)[1])
            lcc_d.append(largest_connected_component(remove_edges(g, rate, "distance", rng_d))[1])
            src = int(rng_r.integers(g.n))
            trial = push_gossip_trial(dmg, src, gcfg, rng_r)
            v = trial.reached.get(0.9)
            if v is None:
                cens += 1
                v = gcfg.max_rounds
            t90s.append(float(v))
        thr = fcfg.lcc_threshold - 1e-12
        out.append(
            RobustnessRecord(
                rate=rate,
                mean_t90=float(np.mean(t90s)),
                censored_t90=cens,
                mean_lcc=float(np.mean(lcc_r)),
                mean_lcc_distance=float(np.mean(lcc_d)),
                pr80_random=float(np.mean([x >= thr for x in lcc_r])),
                pr80_distance=float(np.mean([x >= thr for x in lcc_d])),
                lcc_random=lcc_r,
                lcc_distance=lcc_d,
                t90=t90s,
            )
        )
    return out


# -------------------------------------------------------- communication load


@dataclass(frozen=True)
class LoadConfig:
    """Event-driven schedule.

    Each step every agent originates a new message with probability
    ``inject_rate``.  A message is sent only while it is needed: with
    ``addressing="node"`` a holder that has at least one neighbour lacking
    the message transmits it on all of its links (one unit per link); with
    ``addressing="link"`` it transmits only on links whose far end lacks it.
    Each link delivery succeeds with probability ``p``.
    """

    inject_rate: float = 0.01
    p: float = 0.75
    addressing: str = "node"
    inject_steps: int | None = None  # stop injecting after this many steps

    def __post_init__(self):
        if not 0.0 <= self.inject_rate <= 1.0:
            raise ValueError("inject_rate must lie in [0, 1]")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")
        if self.addressing not in ("node", "link"):
            raise ValueError(f"unknown addressing {self.addressing!r}")


@dataclass
class LoadTrace:
    per_step: np.ndarray  # bandwidth units used in each step
    injected: np.ndarray  # messages originated in each step
    undelivered: int  # messages still spreading at the end

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.per_step)

    @property
    def mean(self) -> float:
        return float(self.per_step.mean())

    @property
    def std(self) -> float:
        return float(self.per_step.std())

    @property
    def range(self) -> float:
        return float(self.per_step.max() - self.per_step.min())


def injection_schedule(n: int, steps: int, cfg: LoadConfig, seed: int) -> list[np.ndarray]:
    """Originating agents per step; depends only on ``(n, steps, cfg, seed)``."""
    rng = np.random.default_rng([seed, 0])
    out = []
    for t in range(steps):
        draw = rng.random(n) < cfg.inject_rate
        if cfg.inject_steps is not None and t >= cfg.inject_steps:
            draw[:] = False
        out.append(np.flatnonzero(draw))
    return out


def comm_load_sim(topology: Topology, steps: int, cfg: LoadConfig, seed: int,
                  origins: list[np.ndarray] | None = None) -> LoadTrace:
    """Per-step bandwidth units under the event-driven schedule.

    Topologies compared under the same seed see the same injections.  On a
    broadcast channel each originated message is sent once, costing
    ``n - 1`` units.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    n = topology.n
    origins = injection_schedule(n, steps, cfg, seed) if origins is None else origins
    if len(origins) < steps:
        raise ValueError("injection schedule shorter than steps")
    injected = np.array([len(o) for o in origins[:steps]])
    if isinstance(topology, BroadcastChannel):
        return LoadTrace(injected * (n - 1), injected, 0)
    g = as_graph(topology)
    src, dst = g.arcs()
    deg = np.bincount(src, minlength=n)
    senders = np.flatnonzero(deg)
    starts = np.concatenate([[0], np.cumsum(deg[senders])[:-1]])
    link_rng = np.random.default_rng([seed, 1])
    holds = np.zeros((0, n), dtype=bool)
    per_step = np.zeros(steps, dtype=np.int64)
    for t in range(steps):
        if len(origins[t]):
            fresh = np.zeros((len(origins[t]), n), dtype=bool)
            fresh[np.arange(len(origins[t])), origins[t]] = True
            holds = np.concatenate([holds, fresh])
        if not len(holds) or not len(src):
            continue
        need = holds[:, src] & ~holds[:, dst]
        if cfg.addressing == "link":
            per_step[t] = int(need.sum())
        else:
            active = np.logical_or.reduceat(need, starts, axis=1)
            per_step[t] = int((active * deg[senders]).sum())
        if cfg.p < 1.0:
            need &= link_rng.random(need.shape) < cfg.p
        msg, arc = np.nonzero(need)
        holds[msg, dst[arc]] = True
        holds = holds[~holds.all(axis=1)]
    return LoadTrace(per_step, injected, len(holds))
