import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy20q.indexing import Partition, bin_center, bin_center_exact, bin_of, gamma, gamma_inv


def test_gamma_examples():
    p = Partition(3, 2)
    assert gamma(p, (2, 3)) == 6
    assert gamma(p, (1, 1)) == 1
    assert gamma(p, (3, 3)) == 9
    assert gamma_inv(p, 6) == (2, 3)
    assert gamma_inv(p, 1) == (1, 1)


def test_gamma_range_errors():
    p = Partition(3, 2)
    with pytest.raises(ValueError):
        gamma(p, (0, 1))
    with pytest.raises(ValueError):
        gamma(p, (1, 4))
    with pytest.raises(ValueError):
        gamma_inv(p, 10)
    with pytest.raises(ValueError):
        Partition(0, 1)


def gamma_oracle(M, idx):
    d = len(idx)
    return 1 + sum((i - 1) * M ** (d - j) for j, i in enumerate(idx, start=1))


@pytest.mark.parametrize("M,d", [(1, 3), (2, 10), (7, 3), (10, 6), (1000, 2), (1_000_000, 1)])
def test_gamma_bijection_exhaustive(M, d):
    p = Partition(M, d)
    n = p.n_bins
    assert n <= 10**6
    if d > 1 and n <= 10**4:
        # direct formula check on the full product set
        for idx in itertools.product(range(1, M + 1), repeat=d):
            assert gamma(p, idx) == gamma_oracle(M, idx)
    seen = bytearray(n + 1)
    for m in range(1, n + 1):
        idx = gamma_inv(p, m)
        assert gamma(p, idx) == m
        seen[m] = 1
    assert sum(seen) == n


def test_gamma_bijection_randomized_beyond_exhaustive():
    p = Partition(10**9, 3)
    r = random.Random(5)
    for _ in range(2000):
        m = r.randint(1, p.n_bins)
        assert gamma(p, gamma_inv(p, m)) == m


def test_bin_of_examples():
    p = Partition(4, 1)
    assert bin_of(p, [0.0]) == (1,)
    assert bin_of(p, [1.0]) == (4,)
    assert bin_of(p, [0.5]) == (3,)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 64), st.floats(0.0, 1.0))
def test_bin_of_matches_interval_oracle(M, s):
    i = bin_of(Partition(M, 1), [s])[0]
    s = Fraction(s)
    lo, hi = Fraction(i - 1, M), Fraction(i, M)
    assert lo <= s and (s < hi or (i == M and s == 1))


def test_bin_center_examples():
    assert bin_center(Partition(1, 1), (1,)) == (0.5,)
    assert bin_center(Partition(4, 1), (3,)) == (0.625,)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), st.integers(1, 3), st.data())
def test_center_consistency_and_geometry(M, d, data):
    p = Partition(M, d)
    idx = tuple(data.draw(st.integers(1, M)) for _ in range(d))
    assert bin_of(p, bin_center_exact(p, idx)) == idx
    s = tuple(
        Fraction(i - 1, M) + Fraction(data.draw(st.integers(0, 999)), 1000 * M) for i in idx
    )
    assert bin_of(p, s) == idx
    c = bin_center_exact(p, idx)
    assert max(abs(a - b) for a, b in zip(c, s)) <= Fraction(1, 2 * M)


def test_huge_partition_exact():
    M = 2**200 + 7
    p = Partition(M, 1)
    s = Fraction(3, 7)
    (i,) = bin_of(p, [s])
    (c,) = bin_center_exact(p, (i,))
    assert abs(c - s) <= Fraction(1, 2 * M)
