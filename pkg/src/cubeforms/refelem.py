"""Reference element on the cube ``[-1, 1]^n``.

Moment degrees of freedom integrate the trace of a form against weight forms
on every subcell; nodal degrees of freedom read component values at the
tensor Gauss-Lobatto points.  :func:`build_element` pairs a shape basis with
one of the two and certifies unisolvence: exactly (modular or rational rank)
for moments, by condition number for nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product
from math import comb

import numpy as np

from .combinatorics import DomainError, IndexMap, complement, enumerate_sigma, full, merge_sign
from .polyform import Face, PolyForm, exterior_derivative, integrate_box, trace, wedge
from .quadrature import TensorNodes, legendre, nodal_eval, tensor_nodes
from .ratlinalg import RationalSpan, exact_rank, rational_inverse, rational_matvec
from .spaces import ConstructionError, SpaceBasis, basis, basis_tildeQ, membership

NODAL_COND_LIMIT = 1e12


class ElementConstructionError(ConstructionError):
    """A Vandermonde matrix that should be invertible is not."""


# --- subcells -------------------------------------------------------------


@lru_cache(maxsize=None)
def reference_faces(n: int, l: int) -> tuple[Face, ...]:
    """The ``l``-dimensional faces of the reference cube.

    Ordered by free labels (lexicographic), then by the pinned values with
    ``-1`` before ``+1`` and the first pinned label varying slowest.
    """
    if not 0 <= l <= n:
        raise DomainError(f"face dimension {l} outside 0..{n}")
    out = []
    for free in enumerate_sigma(full(n), l):
        pinned = complement(free, full(n))
        for vals in product((-1, 1), repeat=len(pinned)):
            out.append(Face.make(n, dict(zip(pinned, vals))))
    return tuple(out)


def all_faces(n: int, lmin: int = 0) -> tuple[Face, ...]:
    return tuple(f for l in range(lmin, n + 1) for f in reference_faces(n, l))


def face_box(f: Face) -> dict[int, tuple[int, int]]:
    return {i: (-1, 1) for i in f.free}


# --- degrees of freedom ---------------------------------------------------


@dataclass(frozen=True)
class MomentDof:
    """``u -> integral over face of tr u ^ weight``."""

    face: Face
    tau: IndexMap
    weight: PolyForm

    @property
    def dim(self) -> int:
        return self.face.dim

    def __call__(self, u: PolyForm) -> Fraction:
        return moment_value(self, u)


@dataclass(frozen=True)
class NodalDof:
    """Component ``sigma`` of a form at tensor Gauss-Lobatto node ``node``."""

    node: int
    multi: tuple[int, ...]
    sigma: IndexMap


def _tilde_weights(f: Face, n: int, k: int, r: int) -> list[tuple[IndexMap, PolyForm]]:
    # (Q_{r-2} in the tau variables) x (Q_r in the others) dx_tau; Q_{-1} is empty
    out = []
    for tau in enumerate_sigma(f.free, f.dim - k):
        if tau and r < 2:
            continue
        ranges = [range(r - 1) if i in tau else range(r + 1) if i in f.free else range(1)
                  for i in full(n)]
        for beta in product(*ranges):
            out.append((tau, PolyForm.monomial(n, beta, tau, 1, f.free)))
    return out


def _qminus_weights(f: Face, n: int, k: int, r: int) -> list[tuple[IndexMap, PolyForm]]:
    j = f.dim - k
    if r - 1 == 0 and j > 0:
        return []
    return [(w.terms[0][0], w) for w in basis("Qminus", n, j, r - 1, f.free)]


@lru_cache(maxsize=None)
def _moment_dofs(n: int, k: int, r: int, family: str) -> tuple[MomentDof, ...]:
    weights = _qminus_weights if family == "Qminus" else _tilde_weights
    out = []
    for f in all_faces(n, k):
        out.extend(MomentDof(f, tau, w) for tau, w in weights(f, n, k, r))
    return tuple(out)


def moment_dofs(n: int, k: int, r: int, family: str = "Qtilde") -> tuple[MomentDof, ...]:
    """Moment functionals of ``family`` ordered by (face dimension, face, tau, weight)."""
    _check_params(n, k, r, family)
    return _moment_dofs(n, k, r, family)


def nodal_dofs(n: int, k: int, r: int) -> tuple[NodalDof, ...]:
    nodes = tensor_nodes(n, r)
    return tuple(NodalDof(j, tuple(int(x) for x in nodes.multi[j]), s)
                 for s in enumerate_sigma(full(n), k) for j in range(nodes.size))


def dof_count_by_dim(dofs) -> dict[int, int]:
    out: dict[int, int] = {}
    for d in dofs:
        out[d.dim] = out.get(d.dim, 0) + 1
    return out


def entity_multiplicity(l: int, k: int, r: int) -> int:
    """Number of moment functionals attached to one ``l``-dimensional subcell."""
    if l < k:
        return 0
    if l > k and r < 2:
        return 0
    return comb(l, l - k) * (r - 1) ** (l - k) * (r + 1) ** k


def _check_params(n: int, k: int, r: int, family: str) -> None:
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"invalid (n, k) = ({n}, {k})")
    if r < 1:
        raise DomainError("r must be at least 1")
    if family not in ("Qtilde", "Qminus", "Q"):
        raise DomainError(f"no reference element for family {family!r}")
    if family == "Q" and k not in (0, n):
        raise DomainError("the full Q family is an element only for k = 0 or k = n")


# --- evaluation -----------------------------------------------------------


def moment_value(dof: MomentDof, u: PolyForm) -> Fraction:
    """Generic route: trace, wedge, exact box integral."""
    t = trace(u, dof.face)
    return integrate_box(wedge(t, dof.weight), face_box(dof.face))


def _even_moment(e: int) -> Fraction:
    return Fraction(2, e + 1) if e % 2 == 0 else Fraction(0)


def moment_matrix(dofs, shapes) -> list[list[Fraction]]:
    """``V[i][j] = dofs[i](shapes[j])`` by a term-wise fast path.

    On a face with free labels ``F`` the weight ``x^beta dx_tau`` only pairs
    with the trace component ``dx_sigma`` with ``sigma = F - tau``; the
    integral factors into one-dimensional moments on ``[-1, 1]``.
    """
    shapes = list(shapes)
    rows: list[list[Fraction]] = []
    traces_for: dict[Face, list[dict]] = {}
    for dof in dofs:
        f = dof.face
        if f not in traces_for:
            per_shape = []
            for u in shapes:
                by_sigma: dict[IndexMap, list] = {}
                for s, a, c in trace(u, f).terms:
                    by_sigma.setdefault(s, []).append((a, c))
                per_shape.append(by_sigma)
            traces_for[f] = per_shape
        row = []
        for by_sigma in traces_for[f]:
            val = Fraction(0)
            for tau, beta, w in dof.weight.terms:
                sigma = complement(tau, f.free)
                terms = by_sigma.get(sigma)
                if not terms:
                    continue
                sign = merge_sign(sigma, tau)
                for a, c in terms:
                    m = Fraction(1)
                    for i in f.free:
                        m *= _even_moment(a[i - 1] + beta[i - 1])
                        if not m:
                            break
                    if m:
                        val += sign * c * w * m
            row.append(val)
        rows.append(row)
    return rows


def nodal_matrix(n: int, k: int, r: int, shapes) -> np.ndarray:
    nodes = tensor_nodes(n, r)
    return np.column_stack([nodal_eval(u, nodes, "R") for u in shapes])


# --- elements -------------------------------------------------------------


@dataclass(frozen=True)
class ElementDef:
    """Shape basis, functionals, and the certified Vandermonde matrix.

    ``vandermonde[i][j]`` is functional ``i`` applied to shape ``j``; the
    columns of :attr:`dual` give the basis dual to the functionals in
    shape coordinates.
    """

    n: int
    k: int
    r: int
    family: str
    dof_kind: str
    shapes: SpaceBasis = field(repr=False)
    dofs: tuple = field(repr=False)
    vandermonde: object = field(repr=False)
    rank: int = 0
    certificate: str = ""
    cond: float = float("nan")

    @property
    def dim(self) -> int:
        return self.shapes.dim

    @cached_property
    def vandermonde_float(self) -> np.ndarray:
        return np.array(self.vandermonde, dtype=float)

    @cached_property
    def dual(self) -> np.ndarray:
        return np.linalg.inv(self.vandermonde_float)

    @cached_property
    def dual_exact(self) -> list[list[Fraction]]:
        if self.dof_kind != "moment":
            raise DomainError("exact dual only exists for moment functionals")
        return rational_inverse(self.vandermonde)

    @cached_property
    def monomial_keys(self) -> list[tuple]:
        return sorted({(s, a) for u in self.shapes for s, a, _ in u.terms})

    @cached_property
    def shape_coefficients(self) -> np.ndarray:
        """Monomial coefficients of the shapes, shape ``(len(monomial_keys), dim)``."""
        row = {key: i for i, key in enumerate(self.monomial_keys)}
        out = np.zeros((len(row), self.dim))
        for j, u in enumerate(self.shapes):
            for s, a, c in u.terms:
                out[row[(s, a)], j] = float(c)
        return out

    @cached_property
    def basis_coefficients(self) -> np.ndarray:
        """Monomial coefficients of the dual (nodal or moment) basis."""
        return self.shape_coefficients @ self.dual

    def dual_form(self, j: int) -> PolyForm:
        """Dual basis function ``j`` as a PolyForm with float-rounded rational coefficients."""
        if self.dof_kind == "moment":
            col = [row[j] for row in self.dual_exact]
            acc = PolyForm.zero(self.n, self.k)
            for c, u in zip(col, self.shapes):
                if c:
                    acc = acc + c * u
            return acc
        coeffs = {key: Fraction(float(c)).limit_denominator(10 ** 15)
                  for key, c in zip(self.monomial_keys, self.basis_coefficients[:, j]) if c}
        return PolyForm.from_dict(self.n, self.k, coeffs)


def shape_basis(n: int, k: int, r: int, family: str) -> SpaceBasis:
    if family == "Qtilde":
        return basis_tildeQ(n, k, r)
    return basis(family, n, k, r)


@lru_cache(maxsize=None)
def build_element(n: int, k: int, r: int, family: str = "Qtilde",
                  dof_kind: str = "nodal") -> ElementDef:
    """Certified reference element; raises ElementConstructionError when singular."""
    _check_params(n, k, r, family)
    if dof_kind not in ("moment", "nodal"):
        raise DomainError(f"unknown dof kind {dof_kind!r}")
    if dof_kind == "nodal" and family == "Qminus":
        raise DomainError("nodal functionals are not unisolvent for Qminus")
    shapes = shape_basis(n, k, r, family)
    if dof_kind == "moment":
        dofs = moment_dofs(n, k, r, "Qminus" if family == "Qminus" else "Qtilde")
        vm = moment_matrix(dofs, shapes)
        if len(dofs) != shapes.dim:
            raise ElementConstructionError(
                f"{len(dofs)} functionals for a {shapes.dim}-dimensional space")
        rank, cert = exact_rank(vm)
        cond = float("nan")
        if rank != shapes.dim:
            raise ElementConstructionError(
                f"moment Vandermonde of {family}(n={n}, k={k}, r={r}) has rank {rank} < {shapes.dim}")
        vand: object = tuple(tuple(row) for row in vm)
    else:
        dofs = nodal_dofs(n, k, r)
        vm = nodal_matrix(n, k, r, shapes)
        if vm.shape[0] != vm.shape[1]:
            raise ElementConstructionError(f"nodal Vandermonde is {vm.shape}, not square")
        sv = np.linalg.svd(vm, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
        if not cond < NODAL_COND_LIMIT:
            raise ElementConstructionError(
                f"nodal Vandermonde of {family}(n={n}, k={k}, r={r}) has condition {cond:.3e}")
        rank, cert = vm.shape[0], "condition"
        vm.setflags(write=False)
        vand = vm
    return ElementDef(n, k, r, family, dof_kind, shapes, dofs, vand, rank, cert, cond)


# --- reference interpolation onto Qminus ----------------------------------


def qminus_moments(u: PolyForm, r: int) -> list[Fraction]:
    return moment_matrix(moment_dofs(u.n, u.k, r, "Qminus"), [u])


def qminus_moments_column(u: PolyForm, r: int) -> list[Fraction]:
    return [row[0] for row in qminus_moments(u, r)]


def hat_pi(u: PolyForm, r: int) -> PolyForm:
    """The member of Qminus with the same Qminus moments as ``u``."""
    if u.free != full(u.n):
        raise DomainError("hat_pi acts on forms of the full reference cube")
    if not membership(u, basis_tildeQ(u.n, u.k, r))[0]:
        raise DomainError("form is not in the Qtilde space of this order")
    el = build_element(u.n, u.k, r, "Qminus", "moment")
    coeffs = rational_matvec(el.dual_exact, qminus_moments_column(u, r))
    out = PolyForm.zero(u.n, u.k)
    for c, q in zip(coeffs, el.shapes):
        if c:
            out = out + c * q
    return out


@lru_cache(maxsize=None)
def interpolation_matrix(n: int, k: int, r: int) -> np.ndarray:
    """Qtilde nodal coefficients -> Qminus shape coordinates of the interpolant."""
    qt = build_element(n, k, r, "Qtilde", "nodal")
    qm = build_element(n, k, r, "Qminus", "moment")
    dm = np.array(moment_matrix(qm.dofs, qt.shapes), dtype=float)
    out = qm.dual @ dm @ qt.dual
    out.setflags(write=False)
    return out


# --- structural checks ----------------------------------------------------


def _scalar(n: int, factors: dict[int, tuple], extra: tuple[int, ...]) -> dict:
    """``prod_i poly_i(x_i) * x^extra`` as a monomial dict over exponent tuples."""
    acc = {tuple(extra): Fraction(1)}
    for i, p in factors.items():
        nxt: dict = {}
        for a, c in acc.items():
            for e, pc in enumerate(p):
                if pc:
                    b = list(a)
                    b[i - 1] += e
                    b = tuple(b)
                    nxt[b] = nxt.get(b, 0) + c * pc
        acc = {a: c for a, c in nxt.items() if c}
    return acc


def residual_spanning_set(n: int, sigma: IndexMap, r: int) -> list[dict]:
    """Scalar polynomials allowed in component ``sigma`` of ``u - hat_pi u``.

    Two kinds: ``(L_{r+1} - L_{r-1})(x_i) p`` with ``i`` outside ``sigma``
    and ``p`` free of ``x_i`` of degree at most ``r`` in the other
    non-``sigma`` variables and ``r - 1`` in the ``sigma`` variables; and
    ``L_r(x_j) q`` with ``j`` in ``sigma`` and ``q`` free of ``x_j``.
    """
    lp, lm = legendre(r + 1), legendre(r - 1)
    diff = tuple(a - (lm[e] if e < len(lm) else 0) for e, a in enumerate(lp))
    star = complement(sigma, full(n))
    out = []
    for i in star:
        ranges = [range(1) if l == i else range(r) if l in sigma else range(r + 1) for l in full(n)]
        for e in product(*ranges):
            out.append(_scalar(n, {i: diff}, e))
    for j in sigma:
        ranges = [range(1) if l == j else range(r + 2) for l in full(n)]
        for e in product(*ranges):
            out.append(_scalar(n, {j: legendre(r)}, e))
    return out


def residual_structure_holds(u: PolyForm, r: int) -> bool:
    """Whether every component of ``u - hat_pi u`` lies in the residual span."""
    v = u - hat_pi(u, r)
    for sigma, comp in v.components().items():
        span = RationalSpan(residual_spanning_set(u.n, sigma, r))
        if not span.contains(comp):
            return False
    return True


def d_commutes_with_hat_pi(u: PolyForm, r: int) -> bool:
    return exterior_derivative(u - hat_pi(u, r)).is_zero()


def trace_property_failures(n: int, k: int, r: int) -> list[tuple[Face, int]]:
    """(face, shape index) pairs whose trace leaves the face's Qtilde space."""
    if k > n - 1:
        return []
    bad = []
    for f in reference_faces(n, n - 1):
        target = basis_tildeQ(n, k, r, f.free)
        for j, u in enumerate(basis_tildeQ(n, k, r)):
            if not membership(trace(u, f), target)[0]:
                bad.append((f, j))
    return bad


def qminus_dofs_subset(n: int, k: int, r: int) -> bool:
    """Every Qminus moment weight lies in the span of the Qtilde weights on its face."""
    tilde: dict[Face, set] = {}
    for dof in moment_dofs(n, k, r, "Qtilde"):
        tilde.setdefault(dof.face, set()).add(dof.weight.terms[0][:2])
    for dof in moment_dofs(n, k, r, "Qminus"):
        if dof.weight.terms[0][:2] not in tilde.get(dof.face, set()):
            return False
    return True


def vanishing_trace_report(n: int, k: int, r: int) -> dict:
    """Interior functionals restricted to the zero-trace subspace of Qtilde.

    Returns the subspace dimension, the number of interior functionals and
    the exact rank of their matrix on a kernel basis.
    """
    shapes = list(basis_tildeQ(n, k, r))
    faces = reference_faces(n, n - 1)
    vecs = []
    for u in shapes:
        vec = {}
        for fi, f in enumerate(faces):
            for s, a, c in trace(u, f).terms:
                vec[(fi, s, a)] = c
        vecs.append(vec)
    span = RationalSpan(vecs)
    kernel = span.relations
    interior = [d for d in moment_dofs(n, k, r, "Qtilde") if d.dim == n]
    dm = moment_matrix(interior, shapes)
    restricted = [[sum((row[j] * c for j, c in rel.items()), Fraction(0)) for rel in kernel]
                  for row in dm]
    rank = exact_rank(restricted)[0] if kernel and interior else 0
    return {"zero_trace_dim": len(kernel), "interior_dofs": len(interior), "rank": rank}


def nodes_of(n: int, r: int) -> TensorNodes:
    return tensor_nodes(n, r)
