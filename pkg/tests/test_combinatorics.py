from math import comb

import pytest
from hypothesis import given, strategies as st

from cubeforms.combinatorics import (DomainError, complement, enumerate_sigma, full, index_set,
                                     merge_sign, minus, plus, sign_eps)


def test_enumerate_examples():
    assert enumerate_sigma((1, 2, 3), 2) == [(1, 2), (1, 3), (2, 3)]
    assert enumerate_sigma((1, 2, 3), 0) == [()]
    assert len(enumerate_sigma((1, 2, 3, 4), 2)) == comb(4, 2)


@pytest.mark.parametrize("n", range(0, 7))
def test_enumerate_counts_and_order(n):
    for k in range(n + 1):
        maps = enumerate_sigma(full(n), k)
        assert len(maps) == comb(n, k)
        assert maps == sorted(maps)
        assert all(list(s) == sorted(set(s)) for s in maps)


def test_sigma_ops_examples():
    assert complement((1, 3), (1, 2, 3)) == (2,)
    assert minus((1, 3), 3) == (1,)
    assert plus((1, 3), 2, (1, 2, 3, 4)) == (1, 2, 3)


def test_sigma_ops_errors():
    with pytest.raises(DomainError):
        minus((1, 3), 2)
    with pytest.raises(DomainError):
        plus((1, 3), 3)
    with pytest.raises(DomainError):
        index_set((2, 1))
    with pytest.raises(DomainError):
        sign_eps(1, (1, 2))


def test_sign_examples():
    assert sign_eps(2, (1, 3)) == -1
    assert sign_eps(4, (1, 3)) == 1
    assert sign_eps(1, ()) == 1


def _perm_sign(seq):
    seq = list(seq)
    s = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                s = -s
    return s


@given(st.integers(1, 7).flatmap(lambda n: st.tuples(st.just(n), st.sets(st.integers(1, n)))))
def test_sign_eps_is_sorting_sign(data):
    n, sset = data
    sigma = tuple(sorted(sset))
    for i in complement(sigma, full(n)):
        assert sign_eps(i, sigma) == _perm_sign((i, *sigma))


@given(st.sets(st.integers(1, 8), max_size=8), st.data())
def test_merge_sign_is_sorting_sign(labels, data):
    labels = sorted(labels)
    a = tuple(sorted(data.draw(st.sets(st.sampled_from(labels)) if labels else st.just(set()))))
    b = tuple(x for x in labels if x not in a)
    assert merge_sign(a, b) == _perm_sign(a + b)


def test_complement_partition():
    for n in range(5):
        for k in range(n + 1):
            for s in enumerate_sigma(full(n), k):
                c = complement(s, full(n))
                assert sorted(s + c) == list(full(n))
