"""Independent symbolic model of polynomial forms (sympy), used as a test oracle.

Forms are dicts ``sorted index tuple -> sympy expression``; signs come from
counting inversions of concatenated index lists, not from the package.
"""

from itertools import product

import sympy

X = sympy.symbols("x1:7")


def _sort_sign(seq):
    seq = list(seq)
    if len(set(seq)) < len(seq):
        return 0, None
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return (-1) ** inv, tuple(sorted(seq))


def to_sym(u):
    out = {}
    for s, a, c in u.terms:
        term = sympy.Rational(c.numerator, c.denominator)
        for i, e in enumerate(a):
            term *= X[i] ** e
        out[s] = out.get(s, 0) + term
    return _clean(out)


def _clean(f):
    return {s: sympy.expand(e) for s, e in f.items() if sympy.expand(e) != 0}


def sym_wedge(f, g):
    out = {}
    for (s, e), (t, h) in product(f.items(), g.items()):
        sign, key = _sort_sign(s + t)
        if sign:
            out[key] = out.get(key, 0) + sign * e * h
    return _clean(out)


def sym_d(f, n):
    out = {}
    for s, e in f.items():
        for i in range(1, n + 1):
            sign, key = _sort_sign((i,) + s)
            if sign:
                out[key] = out.get(key, 0) + sign * sympy.diff(e, X[i - 1])
    return _clean(out)


def sym_kappa(f, center=None):
    out = {}
    for s, e in f.items():
        for pos, i in enumerate(s):
            rest = s[:pos] + s[pos + 1:]
            xi = X[i - 1] - (center[i - 1] if center else 0)
            out[rest] = out.get(rest, 0) + (-1) ** pos * xi * e
    return _clean(out)
