"""Legendre polynomials and Gauss-Lobatto rules on [-1, 1] and its tensor powers."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .combinatorics import DomainError, complement, enumerate_sigma, full
from .polyform import PolyForm

Poly = tuple[Fraction, ...]  # ascending coefficients


@lru_cache(maxsize=None)
def legendre(s: int) -> Poly:
    """Coefficients of ``L_s`` normalized by ``L_s(1) = 1`` (Bonnet recurrence)."""
    if s < 0:
        raise DomainError("degree must be nonnegative")
    if s == 0:
        return (Fraction(1),)
    if s == 1:
        return (Fraction(0), Fraction(1))
    p1, p0 = list(legendre(s - 1)), list(legendre(s - 2))
    m = s - 1
    out = [Fraction(0)] * (s + 1)
    for j, c in enumerate(p1):
        out[j + 1] += Fraction(2 * m + 1, m + 1) * c
    for j, c in enumerate(p0):
        out[j] -= Fraction(m, m + 1) * c
    return tuple(out)


def poly_derivative(p: Sequence[Fraction]) -> Poly:
    return tuple(j * c for j, c in enumerate(p))[1:] or (Fraction(0),)


@lru_cache(maxsize=None)
def weighted_monic_legendre(s: int) -> Poly:
    """Monic degree-``s`` polynomial orthogonal to lower degrees under ``1 - t^2``.

    Uses the fact that ``L_{s+1}'`` is such a polynomial.
    """
    p = poly_derivative(legendre(s + 1))
    lead = p[-1]
    return tuple(c / lead for c in p)


def legendre_family(s: int, kind: str = "standard") -> Poly:
    if kind == "standard":
        return legendre(s)
    if kind == "weighted_monic":
        return weighted_monic_legendre(s)
    raise DomainError(f"unknown kind {kind!r}")


def poly_eval(p: Sequence, t) -> np.ndarray:
    """Float evaluation of an ascending coefficient sequence."""
    return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), [float(c) for c in p])


def _legendre_with_derivs(r: int, t: float) -> tuple[float, float, float]:
    p0, p1 = 1.0, t
    if r == 0:
        return 1.0, 0.0, 0.0
    for m in range(1, r):
        p0, p1 = p1, ((2 * m + 1) * t * p1 - m * p0) / (m + 1)
    # p1 = L_r, p0 = L_{r-1}
    dp = r * (p0 - t * p1) / (1 - t * t)
    ddp = (2 * t * dp - r * (r + 1) * p1) / (1 - t * t)
    return p1, dp, ddp


def legendre_value(r: int, t) -> np.ndarray:
    """``L_r(t)`` by the three-term recurrence (stable, unlike the monomial expansion)."""
    t = np.asarray(t, dtype=float)
    p0, p1 = np.ones_like(t), t.copy()
    if r == 0:
        return p0
    for m in range(1, r):
        p0, p1 = p1, ((2 * m + 1) * t * p1 - m * p0) / (m + 1)
    return p1


@dataclass(frozen=True)
class Rule1D:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=None)
def gauss_lobatto(r: int, tol: float = 1e-15, maxiter: int = 100) -> Rule1D:
    """The ``r + 1`` point Gauss-Lobatto rule; exact through degree ``2r - 1``."""
    if r < 1:
        raise DomainError("Gauss-Lobatto needs r >= 1")
    interior = []
    for j in range(1, r):
        t = -np.cos(np.pi * j / r)
        for _ in range(maxiter):
            _, dp, ddp = _legendre_with_derivs(r, t)
            step = dp / ddp
            t -= step
            if abs(step) <= tol:
                break
        else:
            raise RuntimeError(f"Newton iteration for Gauss-Lobatto node {j} (r={r}) did not converge")
        interior.append(t)
    nodes = np.array([-1.0, *sorted(interior), 1.0])
    # symmetrize away the last ulp of Newton asymmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    lr = legendre_value(r, nodes)
    weights = 2.0 / (r * (r + 1) * lr ** 2)
    for m in range(2 * r):
        exact = 2.0 / (m + 1) if m % 2 == 0 else 0.0
        got = float(np.dot(weights, nodes ** m))
        if abs(got - exact) > 1e-14 * max(1.0, abs(exact)):
            raise RuntimeError(f"Gauss-Lobatto rule r={r} fails moment {m}: {got} vs {exact}")
    return Rule1D(r, nodes, weights)


@dataclass(frozen=True)
class TensorNodes:
    """Tensor Gauss-Lobatto points of a ``dim``-cube, axis 1 varying fastest."""

    dim: int
    rule: Rule1D
    multi: np.ndarray   # (N, dim) integer node indices
    points: np.ndarray  # (N, dim)
    weights: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return len(self.weights)

    def index(self, multi: Sequence[int]) -> int:
        m = self.rule.order + 1
        return int(sum(j * m ** a for a, j in enumerate(multi)))


@lru_cache(maxsize=None)
def tensor_nodes(dim: int, r: int) -> TensorNodes:
    rule = gauss_lobatto(r)
    # product varies the last factor fastest; reverse so axis 1 is fastest
    multi = np.array([tuple(reversed(t)) for t in product(range(r + 1), repeat=dim)], dtype=int)
    multi = multi.reshape(-1, dim)
    pts = rule.nodes[multi]
    w = np.prod(rule.weights[multi], axis=1)
    return TensorNodes(dim, rule, multi, pts, w)


def _values(u, pts: np.ndarray, sigma) -> np.ndarray:
    if isinstance(u, PolyForm):
        return u.evaluate(pts).get(sigma, np.zeros(len(pts)))
    if isinstance(u, dict):
        return np.asarray(u[sigma](pts), dtype=float)
    return np.asarray(u(pts), dtype=float)


def nodal_eval(u, nodes: TensorNodes, mode: str = "R", sigma: Sequence[int] | None = None,
               slice_point: Sequence[float] | None = None):
    """Node functionals of a form or scalar function on the reference cube.

    ``R``             component values at every node, components in lexicographic
                      order, nodes in the tensor order (the nodal DOF vector)
    ``E``             the tensor quadrature sum; a float for scalars, else a
                      dict per component
    ``E_at_slice``    quadrature over the coordinates outside ``sigma`` with the
                      ``sigma`` coordinates pinned at ``slice_point``

    ``u`` may be a PolyForm, a callable on points ``(N, n)`` (scalar), or a
    dict mapping components to such callables.
    """
    n = nodes.dim
    pts = nodes.points
    if mode == "R":
        if isinstance(u, PolyForm):
            comps = enumerate_sigma(full(n), u.k)
            vals = u.evaluate(pts)
            return np.concatenate([vals.get(s, np.zeros(len(pts))) for s in comps])
        if isinstance(u, dict):
            return np.concatenate([_values(u, pts, s) for s in sorted(u)])
        return _values(u, pts, ())
    if mode == "E":
        if isinstance(u, PolyForm) and u.k > 0:
            vals = u.evaluate(pts)
            return {s: float(nodes.weights @ vals.get(s, np.zeros(len(pts))))
                    for s in enumerate_sigma(full(n), u.k)}
        return float(nodes.weights @ _values(u, pts, ()))
    if mode == "E_at_slice":
        if sigma is None or slice_point is None:
            raise DomainError("E_at_slice needs sigma and slice_point")
        sigma = tuple(sigma)
        rest = complement(sigma, full(n))
        sub = tensor_nodes(len(rest), nodes.rule.order) if rest else None
        m = 1 if sub is None else sub.size
        p = np.zeros((m, n))
        for a, i in enumerate(sigma):
            p[:, i - 1] = slice_point[a]
        if sub is not None:
            for a, i in enumerate(rest):
                p[:, i - 1] = sub.points[:, a]
        w = np.ones(1) if sub is None else sub.weights
        comp = sigma if isinstance(u, PolyForm) and u.k == len(sigma) else ()
        return float(w @ _values(u, p, comp))
    raise DomainError(f"unknown mode {mode!r}")
