from fractions import Fraction
from math import sqrt

import numpy as np
import pytest
import sympy

from cubeforms.combinatorics import DomainError
from cubeforms.polyform import parse_form
from cubeforms.quadrature import (gauss_lobatto, legendre, legendre_family, legendre_value, nodal_eval,
                                  tensor_nodes, weighted_monic_legendre)

t = sympy.symbols("t")


def as_sym(p):
    return sum(sympy.Rational(c.numerator, c.denominator) * t ** j for j, c in enumerate(p))


def gram_schmidt_weighted(s):
    """Monic orthogonal polynomials for the weight 1 - t^2 by Gram-Schmidt."""
    ip = lambda a, b: sympy.integrate(a * b * (1 - t ** 2), (t, -1, 1))
    basis = []
    for j in range(s + 1):
        p = t ** j
        for q in basis:
            p -= ip(t ** j, q) / ip(q, q) * q
        basis.append(sympy.expand(p))
    return basis[s]


def test_legendre_examples():
    assert legendre_family(2) == (Fraction(-1, 2), 0, Fraction(3, 2))
    assert as_sym(legendre_family(2, "weighted_monic")) == t ** 2 - sympy.Rational(1, 5)
    assert as_sym(legendre_family(1, "weighted_monic")) == t
    with pytest.raises(DomainError):
        legendre_family(2, "other")


@pytest.mark.parametrize("s", range(0, 9))
def test_legendre_matches_sympy(s):
    assert sympy.expand(as_sym(legendre(s)) - sympy.legendre(s, t)) == 0


@pytest.mark.parametrize("s", range(0, 7))
def test_weighted_monic_matches_gram_schmidt(s):
    assert sympy.expand(as_sym(weighted_monic_legendre(s)) - gram_schmidt_weighted(s)) == 0


def test_gl_examples():
    r1 = gauss_lobatto(1)
    assert np.allclose(r1.nodes, [-1, 1]) and np.allclose(r1.weights, [1, 1])
    r2 = gauss_lobatto(2)
    assert np.allclose(r2.nodes, [-1, 0, 1], atol=1e-15)
    assert np.allclose(r2.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)
    r3 = gauss_lobatto(3)
    assert np.allclose(r3.nodes[1:3], [-1 / sqrt(5), 1 / sqrt(5)], atol=1e-15)
    with pytest.raises(DomainError):
        gauss_lobatto(0)


def moment_matching(r):
    """Weights of the rule with the given nodes, by solving the moment system through degree r."""
    x = gauss_lobatto(r).nodes
    V = np.vander(x, r + 1, increasing=True).T
    m = np.array([2 / (j + 1) if j % 2 == 0 else 0 for j in range(r + 1)])
    return np.linalg.solve(V, m)


@pytest.mark.parametrize("r", range(1, 11))
def test_gl_rule(r):
    rule = gauss_lobatto(r)
    # interior nodes are the roots of L_r'
    roots = np.sort(np.polynomial.legendre.Legendre.basis(r).deriv().roots().real)
    assert np.allclose(rule.nodes[1:-1], roots, atol=1e-13)
    assert np.allclose(rule.weights, moment_matching(r), atol=1e-12)
    for m in range(2 * r):
        exact = 2 / (m + 1) if m % 2 == 0 else 0
        assert abs(rule.integrate(lambda x: x ** m) - exact) <= 1e-13
    # not exact at degree 2r
    assert abs(rule.integrate(lambda x: x ** (2 * r)) - 2 / (2 * r + 1)) > 1e-6


@pytest.mark.parametrize("r", range(1, 9))
def test_legendre_identity_at_nodes(r):
    x = gauss_lobatto(r).nodes
    assert np.abs(legendre_value(r + 1, x) - legendre_value(r - 1, x)).max() <= 1e-13


def test_nodal_eval_examples():
    nodes = tensor_nodes(2, 1)
    vals = nodal_eval(parse_form("dx1", 2), nodes, "R")
    assert np.array_equal(vals, [1, 1, 1, 1, 0, 0, 0, 0])
    for n in (1, 2, 3):
        for r in (1, 2, 3):
            assert abs(nodal_eval(lambda p: np.ones(len(p)), tensor_nodes(n, r), "E") - 2 ** n) <= 1e-13


@pytest.mark.parametrize("r", [1, 2, 3, 4])
def test_quadrature_kills_legendre_difference(r):
    rng = np.random.default_rng(r)
    n = 2
    nodes = tensor_nodes(n, r)
    coeff = rng.standard_normal((r + 1, r + 1))
    Ld = lambda x: legendre_value(r + 1, x) - legendre_value(r - 1, x)
    f = lambda p: Ld(p[:, 0]) * np.polynomial.polynomial.polyval2d(p[:, 0], p[:, 1], coeff)
    assert abs(nodal_eval(f, nodes, "E")) <= 1e-13 * np.abs(coeff).sum()


def test_tensor_order_axis1_fastest():
    nodes = tensor_nodes(2, 2)
    assert nodes.multi[:4].tolist() == [[0, 0], [1, 0], [2, 0], [0, 1]]
    assert all(nodes.index(m) == i for i, m in enumerate(nodes.multi))


def test_slice_quadrature():
    nodes = tensor_nodes(2, 2)
    u = parse_form("x1 x2^2 dx1", 2)
    # integrate over x2 with x1 pinned at 1/2: 1/2 * 2/3
    val = nodal_eval(u, nodes, "E_at_slice", sigma=(1,), slice_point=(0.5,))
    assert abs(val - 1 / 3) <= 1e-14
