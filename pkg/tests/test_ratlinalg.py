from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cubeforms.ratlinalg import (RationalSpan, exact_rank, modular_rank, rational_inverse, rational_matvec,
                                 sparse_rank, to_float)

small = st.fractions(min_value=-4, max_value=4, max_denominator=5)


@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_rank_matches_sympy(m, n, data):
    import sympy
    rows = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    want = sympy.Matrix(rows).rank()
    assert exact_rank(rows)[0] == want
    assert modular_rank(rows) <= want


def test_modular_rank_is_lower_bound_case():
    # the determinant 2^31 - 1 vanishes modulo the first prime only
    p = 2147483647
    rows = [[1, 0], [0, p]]
    assert modular_rank(rows) == 1
    assert exact_rank(rows)[0] == 2


@given(st.integers(1, 5), st.data())
def test_inverse(n, data):
    rows = [[data.draw(small) for _ in range(n)] for _ in range(n)]
    if exact_rank(rows)[0] < n:
        return
    inv = rational_inverse(rows)
    for i in range(n):
        e = [Fraction(int(i == j)) for j in range(n)]
        col = rational_matvec(rows, [inv[j][i] for j in range(n)])
        assert col == e


def test_span_coordinates_and_relations():
    vecs = [{"a": 1, "b": 2}, {"b": 1}, {"a": 2, "b": 5}, {"c": 3}]
    s = RationalSpan(vecs)
    assert s.rank == 3 and len(s.relations) == 1
    rel = s.relations[0]
    comb = {}
    for i, c in rel.items():
        for k, v in vecs[i].items():
            comb[k] = comb.get(k, 0) + c * v
    assert all(v == 0 for v in comb.values())
    coords = s.coordinates({"a": 3, "b": 7, "c": 6})
    assert coords is not None
    assert s.coordinates({"d": 1}) is None


def test_sparse_rank_and_float():
    assert sparse_rank([{1: 1}, {2: 1}, {1: 2, 2: 2}])[0] == 2
    assert np.array_equal(to_float([[Fraction(1, 2)]]), np.array([[0.5]]))


def test_singular_inverse_raises():
    with pytest.raises(Exception):
        rational_inverse([[1, 2], [2, 4]])
