"""Exact linear algebra over the rationals.

Two tools: :class:`RationalSpan`, an incrementally built reduced row echelon
form over sparse rational vectors (membership, coordinates, rank), and
:func:`modular_rank`, which certifies full rank of large integer/rational
matrices by elimination modulo word-sized primes.  A matrix that has full
rank modulo some prime has full rank over Q, so a full-rank answer from
:func:`exact_rank` is a proof; deficient answers fall back to rational
elimination.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

PRIMES = (2147483647, 2147483629, 2147483587)


class RationalSpan:
    """Span of rational vectors stored in reduced row echelon form.

    Vectors are mappings ``key -> rational`` over any hashable keys.  Each
    echelon row remembers how it combines the inserted vectors, so
    :meth:`coordinates` expresses a member in terms of the inputs.  Every
    dependent insertion records a linear relation among the inputs; together
    they span the kernel of the map "coefficients -> combination".
    """

    def __init__(self, vectors: Iterable[Mapping[Hashable, object]] = ()):
        self.rows: list[dict] = []
        self.combos: list[dict[int, Fraction]] = []
        self.pivot_of: dict[Hashable, int] = {}
        self.count = 0
        self.independent: list[int] = []
        self.relations: list[dict[int, Fraction]] = []
        for v in vectors:
            self.add(v)

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _reduce(self, vec: Mapping) -> tuple[dict, dict[int, Fraction]]:
        res = {k: Fraction(c) for k, c in vec.items() if c}
        combo: dict[int, Fraction] = {}
        hits = [(self.pivot_of[k], c) for k, c in res.items() if k in self.pivot_of]
        for ridx, c in hits:
            row = self.rows[ridx]
            for k, rc in row.items():
                val = res.get(k, 0) - c * rc
                if val:
                    res[k] = val
                else:
                    res.pop(k, None)
            for j, cc in self.combos[ridx].items():
                val = combo.get(j, 0) + c * cc
                if val:
                    combo[j] = val
                else:
                    combo.pop(j, None)
        return res, combo

    def add(self, vec: Mapping) -> bool:
        """Insert a vector; return True when it enlarged the span."""
        idx = self.count
        self.count += 1
        res, combo = self._reduce(vec)
        if not res:
            rel = {j: -c for j, c in combo.items()}
            rel[idx] = Fraction(1)
            self.relations.append(rel)
            return False
        # the new row is res = vec - sum(combo); track it as a combination
        new_combo = {j: -c for j, c in combo.items()}
        new_combo[idx] = Fraction(1)
        pivot = min(res)
        inv = 1 / res[pivot]
        res = {k: c * inv for k, c in res.items()}
        new_combo = {j: c * inv for j, c in new_combo.items()}
        for ridx, row in enumerate(self.rows):
            c = row.get(pivot)
            if not c:
                continue
            for k, rc in res.items():
                val = row.get(k, 0) - c * rc
                if val:
                    row[k] = val
                else:
                    row.pop(k, None)
            cmb = self.combos[ridx]
            for j, cc in new_combo.items():
                val = cmb.get(j, 0) - c * cc
                if val:
                    cmb[j] = val
                else:
                    cmb.pop(j, None)
        self.pivot_of[pivot] = len(self.rows)
        self.rows.append(res)
        self.combos.append(new_combo)
        self.independent.append(idx)
        return True

    def residual(self, vec: Mapping) -> dict:
        return self._reduce(vec)[0]

    def contains(self, vec: Mapping) -> bool:
        return not self._reduce(vec)[0]

    def coordinates(self, vec: Mapping) -> list[Fraction] | None:
        """Coefficients over the inserted vectors, or None if ``vec`` is outside the span."""
        res, combo = self._reduce(vec)
        if res:
            return None
        return [combo.get(j, Fraction(0)) for j in range(self.count)]


def _integer_rows(rows: Sequence[Sequence]) -> list[list[int]]:
    out = []
    for row in rows:
        fr = [Fraction(x) for x in row]
        den = lcm(*(f.denominator for f in fr)) if fr else 1
        out.append([int(f * den) for f in fr])
    return out


def modular_rank(rows: Sequence[Sequence], p: int = PRIMES[0]) -> int:
    """Rank modulo ``p`` of a dense rational matrix (rows are scaled to integers)."""
    if len(rows) == 0:
        return 0
    ints = _integer_rows(rows)
    a = np.array([[x % p for x in r] for r in ints], dtype=np.int64)
    m, ncols = a.shape
    rank = 0
    for col in range(ncols):
        if rank == m:
            break
        nz = np.nonzero(a[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, col]), p - 2, p)
        a[rank] = (a[rank] * inv) % p
        rows_nz = np.nonzero(a[rank + 1:, col])[0] + rank + 1
        if rows_nz.size:
            a[rows_nz] = (a[rows_nz] - np.outer(a[rows_nz, col], a[rank]) % p) % p
        rank += 1
    return rank


def exact_rank(rows: Sequence[Sequence]) -> tuple[int, str]:
    """Exact rank of a rational matrix and how it was certified.

    Returns ``(rank, method)`` with method ``"modular"`` (full rank proved
    modulo a prime) or ``"rational"`` (fraction elimination).
    """
    rows = [list(r) for r in rows]
    if not rows:
        return 0, "modular"
    full_rank = min(len(rows), len(rows[0]))
    for p in PRIMES[:2]:
        if modular_rank(rows, p) == full_rank:
            return full_rank, "modular"
    span = RationalSpan({j: x for j, x in enumerate(r) if x} for r in rows)
    return span.rank, "rational"


def sparse_rank(vectors: Sequence[Mapping], keys: Sequence | None = None) -> tuple[int, str]:
    """:func:`exact_rank` for sparse vectors given as mappings."""
    if keys is None:
        keys = sorted({k for v in vectors for k in v})
    col = {k: j for j, k in enumerate(keys)}
    dense = []
    for v in vectors:
        row = [0] * len(keys)
        for k, c in v.items():
            row[col[k]] = c
        dense.append(row)
    return exact_rank(dense)


def rational_inverse(mat: Sequence[Sequence]) -> list[list[Fraction]]:
    """Gauss-Jordan inverse over Fractions; raises ZeroDivisionError if singular."""
    n = len(mat)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        prow = [x * inv for x in a[col]]
        a[col] = prow
        nzc = [j for j in range(col, 2 * n) if prow[j]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                row = a[r]
                for j in nzc:
                    row[j] -= f * prow[j]
    return [row[n:] for row in a]


def rational_matvec(mat: Sequence[Sequence[Fraction]], vec: Sequence) -> list[Fraction]:
    return [sum((a * b for a, b in zip(row, vec) if a and b), Fraction(0)) for row in mat]


def to_float(mat: Sequence[Sequence]) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in mat], dtype=float)
