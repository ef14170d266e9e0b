"""Polynomial differential forms with exact rational coefficients.

A :class:`PolyForm` is a canonical sum of form monomials ``c x^alpha dx_sigma``
on an ambient coordinate set (``free``), embedded in R^n.  Exponent tuples
always have length ``n``; coordinates outside ``free`` carry exponent zero.
Every operation returns a canonical form: terms sorted by ``(sigma, alpha)``,
merged, and free of zero coefficients.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from numbers import Rational
from typing import Mapping, Sequence

import numpy as np

from .combinatorics import (
    DomainError,
    IndexMap,
    IndexSet,
    complement,
    full,
    index_set,
    merge_sign,
    sign_eps,
)

Alpha = tuple[int, ...]
TermKey = tuple[IndexMap, Alpha]


def _rational(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    raise TypeError(f"coefficients must be exact rationals, got {type(c).__name__}")


@dataclass(frozen=True)
class PolyForm:
    """Canonical polynomial k-form on the coordinates ``free`` of R^n."""

    n: int
    k: int
    free: IndexSet
    terms: tuple[tuple[IndexMap, Alpha, Fraction], ...] = ()

    # construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, n: int, k: int, coeffs: Mapping[TermKey, object],
                  free: Sequence[int] | None = None) -> "PolyForm":
        free = full(n) if free is None else index_set(free)
        out = []
        for (sigma, alpha), c in coeffs.items():
            c = _rational(c)
            if c == 0:
                continue
            if len(sigma) != k:
                raise DomainError(f"component {sigma} has wrong degree for a {k}-form")
            out.append((tuple(sigma), tuple(alpha), c))
        out.sort(key=lambda t: (t[0], t[1]))
        return cls(n, k, free, tuple(out))

    @classmethod
    def zero(cls, n: int, k: int, free: Sequence[int] | None = None) -> "PolyForm":
        return cls(n, k, full(n) if free is None else index_set(free), ())

    @classmethod
    def monomial(cls, n: int, alpha: Sequence[int], sigma: Sequence[int] = (),
                 coeff=1, free: Sequence[int] | None = None) -> "PolyForm":
        alpha = tuple(alpha)
        if len(alpha) != n or min(alpha, default=0) < 0:
            raise DomainError(f"bad multi-index {alpha} for n={n}")
        sigma = index_set(sigma)
        return cls.from_dict(n, len(sigma), {(sigma, alpha): coeff}, free)

    # basic protocol ---------------------------------------------------

    def as_dict(self) -> dict[TermKey, Fraction]:
        return {(s, a): c for s, a, c in self.terms}

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def _like(self, coeffs: Mapping[TermKey, object], k: int | None = None,
              free: IndexSet | None = None) -> "PolyForm":
        return PolyForm.from_dict(self.n, self.k if k is None else k, coeffs,
                                  self.free if free is None else free)

    def _check_compatible(self, other: "PolyForm") -> None:
        if self.n != other.n or self.k != other.k:
            raise DomainError(f"incompatible forms: (n={self.n},k={self.k}) vs (n={other.n},k={other.k})")

    def __add__(self, other: "PolyForm") -> "PolyForm":
        self._check_compatible(other)
        acc = self.as_dict()
        for s, a, c in other.terms:
            acc[(s, a)] = acc.get((s, a), 0) + c
        return self._like(acc)

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.n, self.k, self.free, tuple((s, a, -c) for s, a, c in self.terms))

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + (-other)

    def __mul__(self, scalar) -> "PolyForm":
        scalar = _rational(scalar)
        if scalar == 0:
            return PolyForm.zero(self.n, self.k, self.free)
        return PolyForm(self.n, self.k, self.free, tuple((s, a, c * scalar) for s, a, c in self.terms))

    __rmul__ = __mul__

    def __xor__(self, other: "PolyForm") -> "PolyForm":
        return wedge(self, other)

    def multiply_poly(self, poly: "PolyForm") -> "PolyForm":
        """Multiply every coefficient by the scalar polynomial ``poly`` (a 0-form)."""
        if poly.k != 0:
            raise DomainError("multiply_poly expects a 0-form")
        return wedge(poly, self)

    def components(self) -> dict[IndexMap, dict[Alpha, Fraction]]:
        out: dict[IndexMap, dict[Alpha, Fraction]] = {}
        for s, a, c in self.terms:
            out.setdefault(s, {})[a] = c
        return out

    def monomials(self) -> list["PolyForm"]:
        return [PolyForm(self.n, self.k, self.free, (t,)) for t in self.terms]

    def max_exponent(self) -> int:
        return max((max(a, default=0) for _, a, _ in self.terms), default=0)

    def evaluate(self, points: np.ndarray) -> dict[IndexMap, np.ndarray]:
        """Float values of each nonzero component at ``points`` (shape ``(m, n)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out: dict[IndexMap, np.ndarray] = {}
        for s, a, c in self.terms:
            val = float(c) * np.prod(pts ** np.asarray(a, dtype=float), axis=1)
            out[s] = out[s] + val if s in out else val
        return out

    def __str__(self) -> str:
        return format_form(self)


# --- algebra -----------------------------------------------------------


def wedge(u: PolyForm, v: PolyForm) -> PolyForm:
    """Exterior product; returns the zero form when the degrees overflow."""
    if u.n != v.n:
        raise DomainError("wedge of forms on different R^n")
    free = u.free if u.free == v.free else index_set(sorted(set(u.free) | set(v.free)))
    k = u.k + v.k
    if k > len(free):
        return PolyForm.zero(u.n, k, free)
    acc: dict[TermKey, Fraction] = {}
    for s1, a1, c1 in u.terms:
        for s2, a2, c2 in v.terms:
            sgn = merge_sign(s1, s2)
            if not sgn:
                continue
            key = (tuple(sorted(s1 + s2)), tuple(x + y for x, y in zip(a1, a2)))
            acc[key] = acc.get(key, 0) + sgn * c1 * c2
    return PolyForm.from_dict(u.n, k, acc, free)


def exterior_derivative(u: PolyForm) -> PolyForm:
    """``d u = sum_sigma sum_i d_i u_sigma dx_i ^ dx_sigma``."""
    acc: dict[TermKey, Fraction] = {}
    if u.k >= len(u.free):
        return PolyForm.zero(u.n, u.k + 1, u.free)
    for s, a, c in u.terms:
        for i in u.free:
            if i in s or a[i - 1] == 0:
                continue
            b = list(a)
            b[i - 1] -= 1
            key = (tuple(sorted(s + (i,))), tuple(b))
            acc[key] = acc.get(key, 0) + sign_eps(i, s) * a[i - 1] * c
    return u._like(acc, k=u.k + 1)


d = exterior_derivative


def koszul(u: PolyForm, center: Sequence | None = None) -> PolyForm:
    """Contraction with ``x - center`` (the origin by default).

    ``kappa dx_sigma = sum_{i in sigma} eps(i, sigma - i) (x_i - c_i) dx_{sigma - i}``.
    """
    if u.k == 0:
        return PolyForm.zero(u.n, 0, u.free)
    cvec = [Fraction(0)] * u.n if center is None else [_rational(c) for c in center]
    acc: dict[TermKey, Fraction] = {}
    for s, a, c in u.terms:
        for i in s:
            rest = tuple(j for j in s if j != i)
            sgn = sign_eps(i, rest)
            b = list(a)
            b[i - 1] += 1
            key = (rest, tuple(b))
            acc[key] = acc.get(key, 0) + sgn * c
            if cvec[i - 1]:
                key0 = (rest, a)
                acc[key0] = acc.get(key0, 0) - sgn * c * cvec[i - 1]
    return u._like(acc, k=u.k - 1)


def d_koszul(u: PolyForm) -> PolyForm:
    return exterior_derivative(koszul(u))


# --- faces, traces, pullbacks --------------------------------------------


@dataclass(frozen=True)
class Face:
    """Affine coordinate subspace: ``fixed`` labels pinned to rational values."""

    n: int
    fixed: tuple[tuple[int, Fraction], ...]
    free: IndexSet = field(default=())

    @classmethod
    def make(cls, n: int, fixed: Mapping[int, object]) -> "Face":
        fx = tuple(sorted((int(i), _rational(v)) for i, v in fixed.items()))
        labels = {i for i, _ in fx}
        if not labels <= set(full(n)):
            raise DomainError(f"fixed labels {sorted(labels)} outside 1..{n}")
        free = tuple(i for i in full(n) if i not in labels)
        return cls(n, fx, free)

    @property
    def fixed_dict(self) -> dict[int, Fraction]:
        return dict(self.fixed)

    @property
    def dim(self) -> int:
        return len(self.free)

    def __str__(self) -> str:
        pins = ", ".join(f"x{i}={v}" for i, v in self.fixed)
        return f"Face({pins or 'R^%d' % self.n})"


def trace(u: PolyForm, f: Face) -> PolyForm:
    """Pull ``u`` back to the face: substitute pinned coordinates, drop normal dx's."""
    if f.n != u.n:
        raise DomainError("face and form live in different R^n")
    pins = f.fixed_dict
    free = tuple(i for i in u.free if i not in pins)
    acc: dict[TermKey, Fraction] = {}
    for s, a, c in u.terms:
        if any(i in pins for i in s):
            continue
        b = list(a)
        for i, v in pins.items():
            e = b[i - 1]
            if e:
                c = c * v ** e
                b[i - 1] = 0
        if c:
            key = (s, tuple(b))
            acc[key] = acc.get(key, 0) + c
    return PolyForm.from_dict(u.n, u.k, acc, free)


def interior_constant(u: PolyForm, vec: Sequence) -> PolyForm:
    """Contraction ``vec _| u`` with a constant vector."""
    vec = [_rational(v) for v in vec]
    if u.k == 0:
        return PolyForm.zero(u.n, 0, u.free)
    acc: dict[TermKey, Fraction] = {}
    for s, a, c in u.terms:
        for i in s:
            if not vec[i - 1]:
                continue
            rest = tuple(j for j in s if j != i)
            key = (rest, a)
            acc[key] = acc.get(key, 0) + sign_eps(i, rest) * vec[i - 1] * c
    return u._like(acc, k=u.k - 1)


@dataclass(frozen=True)
class AffineDiagonalMap:
    """``x -> diag(scale) x + shift``."""

    scale: tuple[Fraction, ...]
    shift: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.scale) != len(self.shift):
            raise DomainError("scale and shift lengths differ")
        if any(_rational(a) == 0 for a in self.scale):
            raise DomainError("affine map must be invertible (zero scale)")

    @classmethod
    def make(cls, scale: Sequence, shift: Sequence | None = None) -> "AffineDiagonalMap":
        shift = [0] * len(scale) if shift is None else shift
        return cls(tuple(_rational(a) for a in scale), tuple(_rational(b) for b in shift))


def pullback_affine(phi: AffineDiagonalMap, u: PolyForm) -> PolyForm:
    if len(phi.scale) != u.n:
        raise DomainError("map dimension does not match the form")
    acc: dict[TermKey, Fraction] = {}
    for s, a, c in u.terms:
        c0 = c
        for i in s:
            c0 *= phi.scale[i - 1]
        # expand prod_i (a_i x_i + b_i)^{alpha_i}
        partial: dict[Alpha, Fraction] = {tuple([0] * u.n): c0}
        for i, e in enumerate(a):
            if e == 0:
                continue
            ai, bi = phi.scale[i], phi.shift[i]
            nxt: dict[Alpha, Fraction] = {}
            for beta, cb in partial.items():
                for j in range(e + 1):
                    if j < e and bi == 0:
                        continue
                    coef = cb * comb(e, j) * ai ** j * bi ** (e - j)
                    g = list(beta)
                    g[i] = j
                    g = tuple(g)
                    nxt[g] = nxt.get(g, 0) + coef
            partial = nxt
        for beta, cb in partial.items():
            key = (s, beta)
            acc[key] = acc.get(key, 0) + cb
    return u._like(acc)


def monomial_integral(e: int, lo: Fraction, hi: Fraction) -> Fraction:
    return (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)


def integrate_box(u: PolyForm, box: Mapping[int, tuple] | Sequence[tuple]) -> Fraction:
    """Exact integral of a top-degree form over a box in its free coordinates.

    ``box`` maps each free label to ``(lo, hi)`` or lists intervals in the
    order of ``u.free``.  Orientation is the one of ``dx_free``.
    """
    if u.k != len(u.free):
        raise DomainError(f"integrate_box needs a top-degree form, got k={u.k} on {len(u.free)} coordinates")
    if not isinstance(box, Mapping):
        box = dict(zip(u.free, box))
    if set(box) != set(u.free):
        raise DomainError("box must give one interval per free coordinate")
    ivals = {i: (_rational(lo), _rational(hi)) for i, (lo, hi) in box.items()}
    total = Fraction(0)
    for _, a, c in u.terms:
        val = c
        for i, e in enumerate(a, start=1):
            if i in ivals:
                val *= monomial_integral(e, *ivals[i])
            elif e:
                raise DomainError(f"coefficient depends on coordinate x{i} outside the box")
        total += val
    return total


# --- degree bookkeeping --------------------------------------------------


def degrees(m: PolyForm | tuple, s: int, free: Sequence[int] | None = None) -> tuple[int, int]:
    """Conforming and nonconforming ``s``-degrees of a form monomial.

    ``m`` is a single-term PolyForm or a raw ``(sigma, alpha)`` pair (then
    ``free`` defaults to all labels ``1..len(alpha)``).
    """
    if isinstance(m, PolyForm):
        if len(m.terms) != 1:
            raise DomainError("degrees are defined for form monomials only")
        sigma, alpha, _ = m.terms[0]
        free = m.free
    else:
        sigma, alpha = m
        free = full(len(alpha)) if free is None else free
    cdeg = sum(1 for i in sigma if alpha[i - 1] == s)
    ncdeg = sum(1 for i in complement(sigma, free) if alpha[i - 1] == s)
    return cdeg, ncdeg


# --- text format -----------------------------------------------------------



def _format_term(sigma: IndexMap, alpha: Alpha, c: Fraction) -> str:
    factors = []
    for i, e in enumerate(alpha, start=1):
        if e == 1:
            factors.append(f"x{i}")
        elif e > 1:
            factors.append(f"x{i}^{e}")
    if sigma:
        factors.append("^".join(f"dx{i}" for i in sigma))
    mag = abs(c)
    if mag != 1 or not factors:
        factors.insert(0, str(mag))
    return " ".join(factors)


def format_form(u: PolyForm) -> str:
    """Render e.g. ``3/2 x1^2 x3 dx1^dx2 - x2 dx1^dx3``; the zero form is ``0``."""
    if not u.terms:
        return "0"
    parts = []
    for idx, (s, a, c) in enumerate(u.terms):
        body = _format_term(s, a, c)
        if idx == 0:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)


def parse_form(text: str, n: int, k: int | None = None,
               free: Sequence[int] | None = None) -> PolyForm:
    """Inverse of :func:`format_form`."""
    text = text.strip()
    if text == "0":
        if k is None:
            raise DomainError("degree of the zero form is ambiguous; pass k")
        return PolyForm.zero(n, k, free)
    tokens = re.split(r"\s+([+-])\s+", text)
    signs, bodies = [], []
    first = tokens[0]
    if first.startswith("-"):
        signs.append(-1)
        bodies.append(first[1:].strip())
    else:
        signs.append(1)
        bodies.append(first)
    for op, body in zip(tokens[1::2], tokens[2::2]):
        signs.append(-1 if op == "-" else 1)
        bodies.append(body)
    acc: dict[TermKey, Fraction] = {}
    degree = k
    for sgn, body in zip(signs, bodies):
        coef = Fraction(1)
        alpha = [0] * n
        sigma: tuple[int, ...] = ()
        for tok in body.split():
            if tok.startswith("dx"):
                sigma = tuple(int(p[2:]) for p in tok.split("^"))
            elif tok.startswith("x"):
                base, _, e = tok.partition("^")
                alpha[int(base[1:]) - 1] += int(e) if e else 1
            else:
                coef = Fraction(tok)
        if degree is None:
            degree = len(sigma)
        key = (index_set(sigma), tuple(alpha))
        acc[key] = acc.get(key, 0) + sgn * coef
    return PolyForm.from_dict(n, degree, acc, free)


def scalar_poly(n: int, coeffs: Mapping[Alpha, object], free: Sequence[int] | None = None) -> PolyForm:
    """A 0-form from a mapping multi-index -> coefficient."""
    return PolyForm.from_dict(n, 0, {((), tuple(a)): c for a, c in coeffs.items()}, free)


def univariate(n: int, label: int, coeffs: Sequence) -> PolyForm:
    """The 0-form ``sum_j coeffs[j] x_label^j``."""
    out = {}
    for j, c in enumerate(coeffs):
        a = [0] * n
        a[label - 1] = j
        out[tuple(a)] = c
    return scalar_poly(n, out)


def homogeneous_degree(u: PolyForm) -> int | None:
    degs = {sum(a) for _, a, _ in u.terms}
    return degs.pop() if len(degs) == 1 else None


def from_components(n: int, k: int, comps: Mapping[IndexMap, PolyForm],
                    free: Sequence[int] | None = None) -> PolyForm:
    """Assemble ``sum_sigma comps[sigma] dx_sigma`` from scalar 0-forms."""
    acc: dict[TermKey, Fraction] = {}
    for sigma, p in comps.items():
        for _, a, c in p.terms:
            key = (tuple(sigma), a)
            acc[key] = acc.get(key, 0) + c
    return PolyForm.from_dict(n, k, acc, free)


__all__ = [
    "AffineDiagonalMap",
    "Face",
    "PolyForm",
    "d",
    "d_koszul",
    "degrees",
    "exterior_derivative",
    "format_form",
    "from_components",
    "homogeneous_degree",
    "integrate_box",
    "interior_constant",
    "koszul",
    "parse_form",
    "pullback_affine",
    "scalar_poly",
    "trace",
    "univariate",
    "wedge",
]
