from math import comb

import pytest

from cubeforms.combinatorics import DomainError
from cubeforms.polyform import PolyForm, d_koszul, degrees, parse_form
from cubeforms.spaces import basis, basis_tildeQ, expected_dim, span_of


def fset(b):
    return {u for u in b}


def test_qminus_example():
    b = basis("Qminus", 2, 1, 1)
    want = {parse_form(t, 2) for t in ("dx1", "x2 dx1", "dx2", "x1 dx2")}
    assert fset(b) == want and b.dim == 4


def test_b_example():
    b = basis("B", 2, 1, 1)
    want = {parse_form(t, 2) for t in ("x1 dx1", "x1 x2 dx1", "x2 dx2", "x1 x2 dx2")}
    assert fset(b) == want and b.dim == 8 - 4


def test_tilde_example():
    b = basis_tildeQ(2, 1, 1)
    dk = d_koszul(parse_form("x1 x2 dx1", 2))
    assert dk == parse_form("2 x1 x2 dx1 + x1^2 dx2", 2)
    assert b.contains(dk)
    assert b.dim == 8
    assert basis_tildeQ(3, 1, 2).dim == 81


@pytest.mark.parametrize("n,r", [(n, r) for n in (1, 2, 3) for r in (1, 2, 3)])
def test_family_dimensions(n, r):
    for k in range(n + 1):
        for fam in ("Q", "Qminus", "B"):
            b = basis(fam, n, k, r)
            assert b.dim == expected_dim(fam, n, k, r) == b.rank()
        assert basis_tildeQ(n, k, r).dim == comb(n, k) * (r + 1) ** n


@pytest.mark.parametrize("n,r", [(2, 1), (2, 3), (3, 2)])
def test_extreme_degrees_equal_q(n, r):
    for k in (0, n):
        q = basis("Q", n, k, r)
        qt = basis_tildeQ(n, k, r)
        assert all(qt.contains(u) for u in q)
        assert all(q.contains(u) for u in qt)


def test_membership_examples():
    for r in (1, 2):
        assert basis("Q", 2, 0, r).contains(PolyForm.monomial(2, (0, 0)))
        assert not basis("Q", 2, 1, r).contains(PolyForm.monomial(2, (r + 1, 0), (2,)))
        qt = basis_tildeQ(2, 1, r)
        assert all(qt.contains(d_koszul(m)) for m in basis("B", 2, 1, r))


def test_qminus_characterized_by_conforming_degree():
    for n in (2, 3):
        for k in range(n + 1):
            for r in (1, 2):
                for m in basis("Qminus", n, k, r):
                    assert degrees(m.monomials()[0], r)[0] == 0
                for m in basis("B", n, k, r):
                    assert degrees(m.monomials()[0], r)[0] > 0


def test_membership_mismatch_raises():
    with pytest.raises(DomainError):
        basis("Q", 2, 1, 1).contains(PolyForm.monomial(2, (0, 0)))
    with pytest.raises(DomainError):
        basis("Qtilde", 2, 1, 0)
    with pytest.raises(DomainError):
        basis("P", 2, 1, 1)


def test_direct_sum_and_tilde_not_q():
    # same dimension as Q but a different space for 0 < k < n
    q = basis("Q", 2, 1, 1)
    qt = basis_tildeQ(2, 1, 1)
    assert span_of(list(q) + list(qt)).rank > q.dim
    assert span_of(list(basis("Qminus", 2, 1, 2)) + list(basis("B", 2, 1, 2))).rank == expected_dim("Q", 2, 1, 2)


def test_face_free_basis():
    b = basis_tildeQ(3, 1, 2, free=(1, 3))
    assert b.dim == comb(2, 1) * 3 ** 2
    assert all(u.free == (1, 3) for u in b)
