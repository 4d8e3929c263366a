import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from circtopo.numtheory import (
    build_candidate_pool,
    gcd,
    multiplicative_order,
    pool_from_candidates,
    primes_below,
    read_candidate_file,
)

from oracles import brute_order, carmichael


def test_gcd():
    assert gcd(12, 8) == 4
    assert gcd(1, 977) == 1
    assert gcd(1023, 1024) == 1
    with pytest.raises(ValueError):
        gcd(0, 0)


@pytest.mark.parametrize("a, n, k", [(1, 2, 1), (1, 97, 1), (3, 7, 6), (3, 1024, 256)])
def test_order_examples(a, n, k):
    assert multiplicative_order(a, n) == k == brute_order(a, n)


def test_order_domain_error():
    with pytest.raises(ValueError):
        multiplicative_order(2, 6)


def test_order_exhaustive_up_to_200():
    for n in range(2, 201):
        lam = carmichael(n)
        for a in range(1, n):
            if math.gcd(a, n) != 1:
                continue
            k = multiplicative_order(a, n)
            assert pow(a, k, n) == 1 % n
            assert all(pow(a, j, n) != 1 for j in range(1, k))
            assert lam % k == 0


def test_primes_below():
    assert primes_below(30) == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert primes_below(2) == []


def test_pool_primes_1024():
    pool = build_candidate_pool(1024, "primes")
    expected = [p for p in range(3, 513) if all(p % d for d in range(2, p))]
    assert list(pool.candidates) == expected
    assert pool.candidates[0] == 3 and pool.candidates[-1] == 509


def test_pool_all_7():
    pool = build_candidate_pool(7, "all")
    assert pool.candidates == (1, 2, 3)
    assert pool.orders == (1, 3, 6)
    assert pool.normalized_orders == pytest.approx((1 / 6, 1 / 2, 1.0), abs=0)


def test_pool_all_1024_is_odd_half():
    pool = build_candidate_pool(1024, "all")
    assert pool.candidates == tuple(range(1, 512, 2))
    assert max(pool.orders) == 256


def test_empty_pool_errors():
    with pytest.raises(ValueError):
        build_candidate_pool(4, "primes")  # only prime <= 2 is 2, not coprime
    with pytest.raises(ValueError):
        build_candidate_pool(8, "bogus")


def test_explicit_pool_keeps_order_and_filters():
    pool = build_candidate_pool(31, "explicit", [7, 30, 3, 24, 7])
    assert pool.candidates == (7, 1, 3)  # 30 -> 1, 24 -> 7 (dup)


def test_pool_from_candidates_validates():
    with pytest.raises(ValueError):
        pool_from_candidates(10, [2])
    with pytest.raises(ValueError):
        pool_from_candidates(10, [9])


@given(st.integers(3, 400), st.sampled_from(["all", "primes"]))
def test_omega_normalisation(n, mode):
    try:
        pool = build_candidate_pool(n, mode)
    except ValueError:
        return
    assert max(pool.normalized_orders) == 1.0
    assert all(0 < w <= 1 for w in pool.normalized_orders)
    assert all(math.gcd(c, n) == 1 for c in pool.candidates)
    assert len(set(pool.candidates)) == len(pool)


def test_pool_csv(tmp_path):
    p = tmp_path / "pool.csv"
    build_candidate_pool(7, "all").write_csv(p)
    assert p.read_text().splitlines()[0] == "candidate,order,omega"
    assert p.read_text().splitlines()[3].startswith("3,6,1.0")


def test_read_candidate_file(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("3, 5 7  # primes\n11\n")
    assert read_candidate_file(p) == [3, 5, 7, 11]
