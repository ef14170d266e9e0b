"""Increasing index maps and the signs that govern wedge and contraction.

Index maps are plain sorted tuples of 1-based coordinate labels.  The
lexicographic enumeration order produced here is the canonical ordering of
form components everywhere else in the package.
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterable, Sequence

IndexSet = tuple[int, ...]
IndexMap = tuple[int, ...]


class DomainError(ValueError):
    """Raised when an argument lies outside the operation's domain."""


def index_set(labels: Iterable[int]) -> IndexSet:
    """Return ``labels`` as a validated strictly increasing tuple."""
    out = tuple(labels)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise DomainError(f"labels must be strictly increasing: {out}")
    if any(i < 1 for i in out):
        raise DomainError(f"labels are 1-based: {out}")
    return out


def full(n: int) -> IndexSet:
    return tuple(range(1, n + 1))


def enumerate_sigma(ambient: Sequence[int], k: int) -> list[IndexMap]:
    """All increasing maps of length ``k`` into ``ambient``, lexicographically.

    >>> enumerate_sigma((1, 2, 3), 2)
    [(1, 2), (1, 3), (2, 3)]
    """
    ambient = index_set(ambient)
    if not 0 <= k <= len(ambient):
        raise DomainError(f"k={k} out of range for ambient of size {len(ambient)}")
    return list(combinations(ambient, k))


def complement(sigma: IndexMap, ambient: Sequence[int]) -> IndexMap:
    s = set(sigma)
    if not s <= set(ambient):
        raise DomainError(f"{sigma} is not contained in {tuple(ambient)}")
    return tuple(i for i in ambient if i not in s)


def minus(sigma: IndexMap, i: int) -> IndexMap:
    if i not in sigma:
        raise DomainError(f"{i} not in {sigma}")
    return tuple(j for j in sigma if j != i)


def plus(sigma: IndexMap, j: int, ambient: Sequence[int] | None = None) -> IndexMap:
    if j in sigma:
        raise DomainError(f"{j} already in {sigma}")
    if ambient is not None and j not in ambient:
        raise DomainError(f"{j} not in ambient {tuple(ambient)}")
    return tuple(sorted(sigma + (j,)))


def sigma_ops(sigma: IndexMap, action: str, index: int | None = None,
              ambient: Sequence[int] | None = None) -> IndexMap:
    """Dispatch ``complement``, ``minus`` or ``plus`` by name."""
    if action == "complement":
        if ambient is None:
            raise DomainError("complement needs the ambient index set")
        return complement(sigma, ambient)
    if index is None:
        raise DomainError(f"{action} needs an index")
    if action == "minus":
        return minus(sigma, index)
    if action == "plus":
        return plus(sigma, index, ambient)
    raise DomainError(f"unknown action {action!r}")


def sign_eps(i: int, sigma: IndexMap) -> int:
    """``(-1)**l`` with ``l`` the number of labels of ``sigma`` below ``i``.

    This is the sign in ``dx_i ^ dx_sigma = sign_eps(i, sigma) dx_{sigma+i}``.
    """
    if i in sigma:
        raise DomainError(f"{i} must not belong to {sigma}")
    below = sum(1 for j in sigma if j < i)
    return -1 if below % 2 else 1


def merge_sign(a: IndexMap, b: IndexMap) -> int:
    """Sign of the permutation sorting the concatenation ``a + b``; 0 if they overlap."""
    if set(a) & set(b):
        return 0
    inversions = sum(1 for x in a for y in b if x > y)
    return -1 if inversions % 2 else 1
