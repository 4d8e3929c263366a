"""Exhaustive search over size-k subsets of a candidate pool."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .cayley import GeneratorSet, MetricsCache, canonicalize, profile
from .numtheory import CandidatePool

DEFAULT_CAP = 10**6


class SearchTooLarge(RuntimeError):
    pass


@dataclass
class ExhaustiveResult:
    best: GeneratorSet
    diameter: float
    avg_path_length: object
    evaluated: int
    optima: int  # number of subsets attaining the best (D, L)


def exhaustive_search(pool: CandidatePool, k: int, cap: int = DEFAULT_CAP) -> ExhaustiveResult:
    """Globally (diameter, APL)-optimal subset; ties keep the first found."""
    total = math.comb(len(pool), k)
    if total == 0:
        raise ValueError(f"pool has {len(pool)} candidates, need k={k}")
    if total > cap:
        raise SearchTooLarge(
            f"C({len(pool)}, {k}) = {total} subsets exceeds cap {cap}; use 'optimize'"
        )
    cache = MetricsCache(maxsize=1)
    best, best_key, ties = None, (math.inf, math.inf), 0
    for combo in itertools.combinations(pool.candidates, k):
        gs = canonicalize(pool.n, combo)
        prof = profile(gs, cache)
        key = (prof.diameter, prof.avg_path_length)
        if key < best_key:
            best, best_key, ties = gs, key, 1
        elif key == best_key:
            ties += 1
    return ExhaustiveResult(best, best_key[0], best_key[1], total, ties)
