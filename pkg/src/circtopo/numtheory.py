"""Multiplicative orders and the candidate pool of coprime generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


def gcd(a: int, b: int) -> int:
    if a < 0 or b < 0:
        raise ValueError("gcd arguments must be non-negative")
    if a == 0 and b == 0:
        raise ValueError("gcd(0, 0) is undefined")
    return math.gcd(a, b)


def multiplicative_order(a: int, n: int) -> int:
    """Smallest k >= 1 with ``a**k = 1 (mod n)``, by repeated multiplication."""
    if n < 2:
        raise ValueError("modulus must be >= 2")
    a %= n
    if math.gcd(a, n) != 1:
        raise ValueError(f"{a} is not a unit modulo {n}")
    x, k = a, 1
    while x != 1:
        x = x * a % n
        k += 1
        if k > n:  # unreachable for a unit; guards against bad input
            raise ArithmeticError(f"order of {a} mod {n} exceeds {n}")
    return k


def primes_below(n: int) -> list[int]:
    if n < 3:
        return []
    sieve = bytearray([1]) * n
    sieve[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n - 1) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(range(p * p, n, p)))
    return [i for i in range(n) if sieve[i]]


@dataclass(frozen=True)
class CandidatePool:
    """Ordered coprime candidates with their orders and normalised orders.

    Order in ``candidates`` is fixed: the policy's positional feature
    depends on it.
    """

    n: int
    candidates: tuple[int, ...]
    orders: tuple[int, ...]
    normalized_orders: tuple[float, ...]

    def __len__(self):
        return len(self.candidates)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["candidate", "order", "omega"])
            for row in zip(self.candidates, self.orders, self.normalized_orders):
                w.writerow([row[0], row[1], repr(row[2])])


def pool_from_candidates(n: int, candidates: Sequence[int]) -> CandidatePool:
    cands = []
    for c in candidates:
        c = int(c)
        if not 1 <= c <= n // 2:
            raise ValueError(f"candidate {c} outside canonical range [1, {n // 2}]")
        if math.gcd(c, n) != 1:
            raise ValueError(f"candidate {c} is not coprime to {n}")
        if c in cands:
            raise ValueError(f"duplicate candidate {c}")
        cands.append(c)
    if not cands:
        raise ValueError(f"empty candidate pool for n={n}")
    orders = [multiplicative_order(c, n) for c in cands]
    top = max(orders)
    return CandidatePool(n, tuple(cands), tuple(orders), tuple(o / top for o in orders))


def build_candidate_pool(
    n: int, mode: str = "all", explicit: Iterable[int] | None = None
) -> CandidatePool:
    """Enumerate coprime candidates in ``[1, n // 2]``.

    ``mode`` is ``"all"`` (every unit), ``"primes"`` (primes coprime to n)
    or ``"explicit"`` (the given list, kept in the given order after
    dropping non-coprime or out-of-range entries).
    """
    if n < 3:
        raise ValueError("modulus must be >= 3")
    half = n // 2
    if mode == "all":
        cands = [c for c in range(1, half + 1) if math.gcd(c, n) == 1]
    elif mode == "primes":
        cands = [p for p in primes_below(half + 1) if math.gcd(p, n) == 1]
    elif mode == "explicit":
        if explicit is None:
            raise ValueError("explicit mode needs a candidate list")
        cands = []
        for c in explicit:
            c = int(c) % n
            c = min(c, n - c)
            if c >= 1 and math.gcd(c, n) == 1 and c not in cands:
                cands.append(c)
    else:
        raise ValueError(f"unknown pool mode {mode!r}")
    if not cands:
        raise ValueError(f"empty candidate pool for n={n}, mode={mode}")
    return pool_from_candidates(n, cands)


def read_candidate_file(path: str | Path) -> list[int]:
    """Integers separated by whitespace or commas; ``#`` starts a comment."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        out.extend(int(tok) for tok in line.replace(",", " ").split())
    return out
