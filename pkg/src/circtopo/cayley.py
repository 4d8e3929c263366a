"""Circulant Cayley graphs on Z_N: construction, exact metrics, baselines.

A topology is fully described by its modulus ``n`` and a set of positive
generators (offsets).  Vertex ``u`` is adjacent to ``u + s`` and ``u - s``
(mod ``n``) for every offset ``s``.  Because the graph is vertex-transitive,
one BFS from vertex 0 yields every all-pairs metric.
"""

from __future__ import annotations

import csv
import json
import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Iterable

import numpy as np


class TopologyError(ValueError):
    """Raised for invalid moduli, offsets or unsatisfiable constructions."""


@dataclass(frozen=True)
class GeneratorSet:
    """Modulus plus canonical positive offsets (each ``s <= n // 2``)."""

    n: int
    offsets: tuple[int, ...]

    def __post_init__(self):
        if self.n < 3:
            raise TopologyError(f"modulus must be >= 3, got {self.n}")
        if not self.offsets:
            raise TopologyError("generator set is empty")
        prev = 0
        for s in self.offsets:
            if not prev < s <= self.n // 2:
                raise TopologyError(
                    f"offsets {self.offsets} are not canonical for n={self.n}"
                )
            prev = s

    @property
    def degree(self) -> int:
        # the half-modulus offset is its own inverse and adds a single edge
        return sum(1 if 2 * s == self.n else 2 for s in self.offsets)

    @property
    def steps(self) -> np.ndarray:
        """Signed neighbour steps, one per incident edge."""
        out = []
        for s in self.offsets:
            out.append(s)
            if 2 * s != self.n:
                out.append(self.n - s)
        return np.array(out, dtype=np.int64)

    def neighbor_table(self) -> np.ndarray:
        """``(n, degree)`` array; row ``u`` lists the neighbours of ``u``."""
        return (np.arange(self.n)[:, None] + self.steps[None, :]) % self.n

    def edges(self) -> np.ndarray:
        """Undirected edge list ``(|E|, 2)`` with each edge listed once."""
        u = np.arange(self.n)
        parts = []
        for s in self.offsets:
            if 2 * s == self.n:
                # u -- u + n/2 appears twice when sweeping all u
                lo = u[: self.n // 2]
                parts.append(np.stack([lo, lo + s], axis=1))
            else:
                parts.append(np.stack([u, (u + s) % self.n], axis=1))
        return np.concatenate(parts)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "offsets": list(self.offsets)})

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSet":
        try:
            obj = json.loads(text)
            return canonicalize(int(obj["n"]), [int(s) for s in obj["offsets"]])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise TopologyError(f"malformed generator-set JSON: {exc}") from exc

    def __str__(self):
        return f"C_{self.n}({', '.join(map(str, self.offsets))})"


def canonicalize(n: int, raw_offsets: Iterable[int]) -> GeneratorSet:
    """Map each offset to ``min(s, n - s)``, dedupe and sort."""
    if n < 3:
        raise TopologyError(f"modulus must be >= 3, got {n}")
    canon = set()
    for s in raw_offsets:
        s = int(s)
        if not 1 <= s <= n - 1:
            raise TopologyError(f"offset {s} outside [1, {n - 1}]")
        canon.add(min(s, n - s))
    if not canon:
        raise TopologyError("generator set is empty")
    return GeneratorSet(n, tuple(sorted(canon)))


@dataclass(frozen=True)
class DistanceProfile:
    """Hop distances from vertex 0; ``-1`` marks unreachable vertices."""

    distances: np.ndarray = field(repr=False)
    diameter: float  # int, or math.inf when disconnected
    avg_path_length: Fraction | float

    @property
    def connected(self) -> bool:
        return not math.isinf(self.diameter)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "distance"])
            for v, d in enumerate(self.distances.tolist()):
                w.writerow([v, d if d >= 0 else "inf"])


def bfs_distances(gs: GeneratorSet) -> DistanceProfile:
    n = gs.n
    steps = gs.steps
    dist = np.full(n, -1, dtype=np.int64)
    dist[0] = 0
    frontier = np.array([0], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        cand = ((frontier[:, None] + steps[None, :]) % n).ravel()
        cand = np.unique(cand)
        cand = cand[dist[cand] < 0]
        dist[cand] = level
        frontier = cand
    if (dist < 0).any():
        return DistanceProfile(dist, math.inf, math.inf)
    return DistanceProfile(dist, int(dist.max()), Fraction(int(dist.sum()), n - 1))


class MetricsCache:
    """Thread-safe, size-bounded LRU store of distance profiles."""

    def __init__(self, maxsize: int = 65536):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key):
        with self._lock:
            try:
                value = self._data[key]
            except KeyError:
                self.misses += 1
                return None
            self._data.move_to_end(key)
            self.hits += 1
            return value

    def put(self, key, value) -> None:
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def __len__(self):
        return len(self._data)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0


_default_cache = MetricsCache()


def profile(gs: GeneratorSet, cache: MetricsCache | None = None) -> DistanceProfile:
    """Cached :func:`bfs_distances`."""
    cache = _default_cache if cache is None else cache
    hit = cache.get(gs)
    if hit is not None:
        return hit
    prof = bfs_distances(gs)
    cache.put(gs, prof)
    return prof


def diameter(gs: GeneratorSet, cache: MetricsCache | None = None) -> float:
    return profile(gs, cache).diameter


def avg_path_length(gs: GeneratorSet, cache: MetricsCache | None = None):
    return profile(gs, cache).avg_path_length


def is_connected(gs: GeneratorSet) -> bool:
    return reduce(math.gcd, gs.offsets, gs.n) == 1


def moore_min_diameter(n: int, degree: int) -> int:
    """Smallest D with ``n <= 1 + degree * sum_{h<D} (degree-1)**h``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0
    if degree < 2:
        if n <= degree + 1:
            return 1
        raise ValueError(f"no finite Moore bound for n={n}, degree={degree}")
    reach, layer, d = 1, degree, 0
    while reach < n:
        reach += layer
        layer *= degree - 1
        d += 1
    return d


# ---------------------------------------------------------------- baselines


def expo_generators(n: int, k: int | None = None) -> GeneratorSet:
    """Powers of two up to ``2**ceil(log2(n-1))`` (the exponential graph)."""
    if n < 3:
        raise TopologyError(f"modulus must be >= 3, got {n}")
    top = math.ceil(math.log2(n - 1))
    powers = [2**e for e in range(top + 1) if 2**e <= n - 1]
    gs = canonicalize(n, powers)
    if k is None:
        return gs
    if k > len(gs.offsets):
        warnings.warn(
            f"only {len(gs.offsets)} distinct powers of two for n={n}; k={k} ignored",
            stacklevel=2,
        )
        return gs
    return GeneratorSet(n, gs.offsets[:k])


def _take_distinct(n: int, values: Iterable[int], k: int, name: str) -> GeneratorSet:
    if k < 1:
        raise TopologyError("k must be >= 1")
    picked: list[int] = []
    for v in values:
        if v > n - 1:
            break
        if v not in picked:
            picked.append(v)
        if len(picked) == k:
            break
    if len(picked) < k:
        raise TopologyError(f"fewer than {k} {name} values below {n}")
    gs = canonicalize(n, picked)
    if len(gs.offsets) < k:
        raise TopologyError(f"{name} values collapse to fewer than {k} offsets mod {n}")
    return gs


def _fibonacci():
    a, b = 1, 2
    while True:
        yield a
        a, b = b, a + b


def _primes():
    yield 2
    found = [2]
    c = 3
    while True:
        if all(c % p for p in found if p * p <= c):
            found.append(c)
            yield c
        c += 2


def fibonacci_generators(n: int, k: int) -> GeneratorSet:
    return _take_distinct(n, _fibonacci(), k, "Fibonacci")


def prime_generators(n: int, k: int) -> GeneratorSet:
    return _take_distinct(n, _primes(), k, "prime")


def ring(n: int) -> GeneratorSet:
    return GeneratorSet(n, (1,))


def complete(n: int) -> GeneratorSet:
    return GeneratorSet(n, tuple(range(1, n // 2 + 1)))


def load_generator_set(path: str | Path) -> GeneratorSet:
    return GeneratorSet.from_json(Path(path).read_text())


def save_generator_set(gs: GeneratorSet, path: str | Path) -> None:
    Path(path).write_text(gs.to_json() + "\n")

