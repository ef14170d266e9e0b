from fractions import Fraction

from hypothesis import strategies as st

from cubeforms.combinatorics import enumerate_sigma, full
from cubeforms.polyform import PolyForm

coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def forms(draw, n=None, k=None, max_deg=3, max_terms=4, homogeneous=None):
    n = draw(st.integers(1, 4)) if n is None else n
    k = draw(st.integers(0, n)) if k is None else k
    sigmas = enumerate_sigma(full(n), k)
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        sigma = draw(st.sampled_from(sigmas))
        if homogeneous is None:
            alpha = tuple(draw(st.lists(st.integers(0, max_deg), min_size=n, max_size=n)))
        else:
            parts = draw(st.lists(st.integers(0, n - 1), min_size=homogeneous, max_size=homogeneous))
            alpha = tuple(parts.count(i) for i in range(n))
        terms[(sigma, alpha)] = terms.get((sigma, alpha), 0) + draw(coeffs)
    return PolyForm.from_dict(n, k, terms)


@st.composite
def form_pairs(draw):
    n = draw(st.integers(1, 4))
    k = draw(st.integers(0, n))
    l = draw(st.integers(0, n - k))
    return draw(forms(n, k)), draw(forms(n, l))


@st.composite
def affine_maps(draw, n):
    scale = [draw(st.fractions(min_value=-4, max_value=4, max_denominator=4).filter(lambda a: a != 0))
             for _ in range(n)]
    shift = [draw(st.fractions(min_value=-3, max_value=3, max_denominator=3)) for _ in range(n)]
    return scale, shift


def fr(x):
    return Fraction(x)
