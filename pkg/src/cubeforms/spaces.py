"""Monomial bases of the cubical polynomial form spaces.

Families:

``Q``       all ``x^alpha dx_sigma`` with every exponent at most ``r``
``Qminus``  the members of ``Q`` with no conforming index of degree ``r``
``B``       the members of ``Q`` with at least one conforming index of degree ``r``
``Qtilde``  ``Qminus`` followed by ``d kappa`` of every ``B`` monomial

Every basis can live on a coordinate face: ``free`` restricts the monomials
to a subset of the labels of R^n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product
from math import comb
from typing import Sequence

from .combinatorics import DomainError, IndexSet, enumerate_sigma, full, index_set
from .polyform import PolyForm, d_koszul, degrees
from .ratlinalg import RationalSpan, sparse_rank

FAMILIES = ("Q", "Qminus", "B", "Qtilde")


class ConstructionError(RuntimeError):
    """A construction that the theory guarantees has failed."""


@dataclass(frozen=True)
class SpaceBasis:
    family: str
    n: int
    k: int
    r: int
    free: IndexSet
    forms: tuple[PolyForm, ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.forms)

    def __len__(self) -> int:
        return len(self.forms)

    def __iter__(self):
        return iter(self.forms)

    def __getitem__(self, i: int) -> PolyForm:
        return self.forms[i]

    @cached_property
    def span(self) -> RationalSpan:
        return RationalSpan(f.as_dict() for f in self.forms)

    def rank(self) -> int:
        return sparse_rank([f.as_dict() for f in self.forms])[0]

    def contains(self, u: PolyForm) -> bool:
        return membership(u, self)[0]


def expected_dim(family: str, n: int, k: int, r: int) -> int:
    """Dimension formulas for the families on an ``n``-dimensional cube."""
    q = comb(n, k) * (r + 1) ** n
    qm = comb(n, k) * r ** k * (r + 1) ** (n - k)
    return {"Q": q, "Qtilde": q, "Qminus": qm, "B": q - qm}[family]


def _monomials(n: int, k: int, r: int, free: IndexSet):
    for sigma in enumerate_sigma(free, k):
        ranges = [range(r + 1) if i in free else range(1) for i in range(1, n + 1)]
        for alpha in product(*ranges):
            yield sigma, alpha


@lru_cache(maxsize=None)
def _basis_cached(family: str, n: int, k: int, r: int, free: IndexSet) -> SpaceBasis:
    if family == "Qtilde":
        qm = _basis_cached("Qminus", n, k, r, free)
        bb = _basis_cached("B", n, k, r, free)
        forms = qm.forms + tuple(d_koszul(m) for m in bb.forms)
        return SpaceBasis(family, n, k, r, free, forms)
    forms = []
    for sigma, alpha in _monomials(n, k, r, free):
        if family != "Q":
            cdeg = degrees((sigma, alpha), r, free)[0]
            if (family == "Qminus") != (cdeg == 0):
                continue
        forms.append(PolyForm.monomial(n, alpha, sigma, 1, free))
    return SpaceBasis(family, n, k, r, free, tuple(forms))


def basis(family: str, n: int, k: int, r: int, free: Sequence[int] | None = None) -> SpaceBasis:
    """Monomial-derived basis of ``family`` for ``k``-forms of order ``r``.

    ``r = 0`` is accepted for ``Q`` and ``Qminus``, which appear as weight
    spaces of lower-order moments.
    """
    free = full(n) if free is None else index_set(free)
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}")
    if not 0 <= k <= len(free):
        raise DomainError(f"k={k} outside 0..{len(free)}")
    if r < 0 or (r == 0 and family not in ("Q", "Qminus")):
        raise DomainError(f"r={r} not admissible for {family}")
    if any(i > n for i in free):
        raise DomainError(f"labels {free} outside 1..{n}")
    return _basis_cached(family, n, k, r, free)


def basis_tildeQ(n: int, k: int, r: int, free: Sequence[int] | None = None,
                 check: bool = True) -> SpaceBasis:
    """Basis of ``Qminus + d kappa B``; verifies it has the full dimension."""
    b = basis("Qtilde", n, k, r, free)
    if check:
        _certify(b)
    return b


@lru_cache(maxsize=None)
def _certify(b: SpaceBasis) -> int:
    m = len(b.free)
    want = comb(m, b.k) * (b.r + 1) ** m
    rk = b.rank()
    if rk != want or b.dim != want:
        raise ConstructionError(
            f"Qtilde(n={b.n}, k={b.k}, r={b.r}) has rank {rk}, expected {want}")
    return rk


def membership(u: PolyForm, space: SpaceBasis) -> tuple[bool, list[Fraction] | None]:
    """Exact test of ``u`` in the span; returns the coordinates when it is."""
    if u.n != space.n or u.k != space.k:
        raise DomainError("form and space disagree on (n, k)")
    coords = space.span.coordinates(u.as_dict())
    return coords is not None, coords


def span_of(forms: Sequence[PolyForm]) -> RationalSpan:
    return RationalSpan(f.as_dict() for f in forms)


def dk_image(n: int, k: int, r: int) -> list[PolyForm]:
    """``d kappa`` applied to the monomial basis of ``B``."""
    return [d_koszul(m) for m in basis("B", n, k, r)]
