"""Global matrices on structured cubical meshes.

Every cell is the image of the reference cube under ``x = c + (h/2) xhat``.
A physical nodal basis function attached to component ``sigma`` pulls back
to ``s_sigma`` times the reference nodal function, ``s_sigma`` being the
product of ``h_i / 2`` over ``sigma``; a physical component ``rho`` is the
reference component divided by ``s_rho``.  Reference Gram matrices are
computed once from exact monomial moments and rescaled per cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .combinatorics import DomainError, enumerate_sigma, full
from .mesh import GlobalDofMap, StructuredCubicalMesh, global_dofs, moment_global_dofs
from .polyform import exterior_derivative
from .quadrature import tensor_nodes
from .refelem import build_element, moment_matrix

HARMONIC_TOL = 1e-8
DENSE_LIMIT = 2500


# --- reference tables -----------------------------------------------------


def _moments_1d(emax: int) -> np.ndarray:
    e = np.arange(emax + 1)
    return np.where(e % 2 == 0, 2.0 / (e + 1), 0.0)


def _monomial_values(keys: Sequence[tuple], points: np.ndarray) -> np.ndarray:
    """``(npts, nkeys)`` values of ``x^alpha`` (component labels ignored)."""
    alphas = np.array([a for _, a in keys], dtype=int).reshape(len(keys), -1)
    pts = np.asarray(points, dtype=float)
    out = np.ones((len(pts), len(keys)))
    for ax in range(alphas.shape[1]):
        out *= pts[:, [ax]] ** alphas[:, ax][None, :]
    return out


@dataclass(frozen=True)
class ComponentTable:
    """A family of reference forms in monomial coordinates, split by component."""

    n: int
    k: int
    keys: tuple[tuple, ...]
    coeff: np.ndarray  # (nkeys, nfuncs)

    @cached_property
    def comps(self) -> list[tuple[int, ...]]:
        return enumerate_sigma(full(self.n), self.k)

    def rows_of(self, rho) -> np.ndarray:
        return np.array([i for i, (s, _) in enumerate(self.keys) if s == rho], dtype=int)

    def values(self, points: np.ndarray) -> np.ndarray:
        """``(ncomp, npts, nfuncs)`` component values at reference points."""
        mono = _monomial_values(self.keys, points)
        out = np.zeros((len(self.comps), len(points), self.coeff.shape[1]))
        for p, rho in enumerate(self.comps):
            rows = self.rows_of(rho)
            if rows.size:
                out[p] = mono[:, rows] @ self.coeff[rows]
        return out


def _table_from_forms(n: int, k: int, forms, combine: np.ndarray | None = None) -> ComponentTable:
    keys = sorted({(s, a) for u in forms for s, a, _ in u.terms})
    idx = {key: i for i, key in enumerate(keys)}
    mat = np.zeros((len(keys), len(forms)))
    for j, u in enumerate(forms):
        for s, a, c in u.terms:
            mat[idx[(s, a)], j] = float(c)
    if combine is not None:
        mat = mat @ combine
    return ComponentTable(n, k, tuple(keys), mat)


def reference_gram(a: ComponentTable, b: ComponentTable) -> np.ndarray:
    """``G[p, q, i, j] = integral over [-1,1]^n of a_i[comp p] * b_j[comp q]``."""
    if a.k != b.k or a.n != b.n:
        raise DomainError("Gram pairing needs forms of equal degree")
    emax = 2 * max([max(al, default=0) for _, al in a.keys + b.keys], default=0)
    mom = _moments_1d(emax)
    P = len(a.comps)
    out = np.zeros((P, P, a.coeff.shape[1], b.coeff.shape[1]))
    for p, rho in enumerate(a.comps):
        ra = a.rows_of(rho)
        if not ra.size:
            continue
        al = np.array([a.keys[i][1] for i in ra], dtype=int).reshape(len(ra), -1)
        for q, rho2 in enumerate(b.comps):
            rb = b.rows_of(rho2)
            if not rb.size:
                continue
            bl = np.array([b.keys[i][1] for i in rb], dtype=int).reshape(len(rb), -1)
            w = np.prod(mom[al[:, None, :] + bl[None, :, :]], axis=2)
            out[p, q] = a.coeff[ra].T @ w @ b.coeff[rb]
    return out


@dataclass(frozen=True)
class ElementTables:
    """Reference element of degree ``k`` with its dual basis and derivative, in table form.

    ``family`` is ``Qtilde`` (nodal functionals) or ``Qminus`` (moment
    functionals).
    """

    n: int
    k: int
    r: int
    family: str = "Qtilde"

    @cached_property
    def element(self):
        kind = "nodal" if self.family == "Qtilde" else "moment"
        return build_element(self.n, self.k, self.r, self.family, kind)

    @property
    def nodal(self) -> bool:
        return self.family == "Qtilde"

    @cached_property
    def comps(self) -> list[tuple[int, ...]]:
        return enumerate_sigma(full(self.n), self.k)

    @property
    def npts(self) -> int:
        return (self.r + 1) ** self.n

    @property
    def nloc(self) -> int:
        return self.element.dim

    @cached_property
    def comp_of_local(self) -> np.ndarray:
        if not self.nodal:
            raise DomainError("moment functionals carry no component")
        return np.repeat(np.arange(len(self.comps)), self.npts)

    @cached_property
    def node_of_local(self) -> np.ndarray:
        return np.tile(np.arange(self.npts), len(self.comps))

    def local_scale(self, h: np.ndarray) -> np.ndarray:
        """Factor between the pulled-back physical basis and the reference basis."""
        if self.nodal:
            return comp_scales(h, self.comps)[self.comp_of_local]
        return np.ones(self.nloc)

    @cached_property
    def basis(self) -> ComponentTable:
        el = self.element
        return _table_from_forms(self.n, self.k, list(el.shapes), el.dual)

    @cached_property
    def dbasis(self) -> ComponentTable:
        el = self.element
        return _table_from_forms(self.n, self.k + 1, [exterior_derivative(u) for u in el.shapes], el.dual)

    @cached_property
    def nodal_identity_error(self) -> float:
        vals = self.basis.values(tensor_nodes(self.n, self.r).points)
        got = np.concatenate(list(vals), axis=0)
        return float(np.abs(got - np.eye(self.nloc)).max())

    @cached_property
    def mass_gram(self) -> np.ndarray:
        return reference_gram(self.basis, self.basis)

    @cached_property
    def stiffness_gram(self) -> np.ndarray:
        return reference_gram(self.dbasis, self.dbasis)


@lru_cache(maxsize=None)
def element_tables(n: int, k: int, r: int, family: str = "Qtilde") -> ElementTables:
    return ElementTables(n, k, r, family)


@lru_cache(maxsize=None)
def _cross_gram(n: int, k: int, r: int, lo_family: str, hi_family: str) -> np.ndarray:
    """``<d psi_tau, psi_v>`` on the reference cube for tau of degree k-1, v of degree k."""
    lo, hi = element_tables(n, k - 1, r, lo_family), element_tables(n, k, r, hi_family)
    return reference_gram(lo.dbasis, hi.basis)


def comp_scales(h: np.ndarray, comps) -> np.ndarray:
    return np.array([np.prod([h[i - 1] / 2 for i in s]) for s in comps])


# --- global spaces --------------------------------------------------------


@dataclass(frozen=True)
class FESpace:
    """A conforming global space on a mesh: nodal Qtilde or moment-based Qminus."""

    mesh: StructuredCubicalMesh
    k: int
    r: int
    family: str = "Qtilde"

    def __post_init__(self):
        if self.family not in ("Qtilde", "Qminus"):
            raise DomainError(f"no global space for family {self.family!r}")
        if not 0 <= self.k <= self.mesh.n:
            raise DomainError(f"k={self.k} outside 0..{self.mesh.n}")

    @property
    def tables(self) -> ElementTables:
        return element_tables(self.mesh.n, self.k, self.r, self.family)

    @cached_property
    def dofmap(self):
        if self.family == "Qtilde":
            return global_dofs(self.mesh, self.k, self.r)
        return moment_global_dofs(self.mesh, self.k, self.r)

    @property
    def size(self) -> int:
        return self.dofmap.size

    @property
    def l2g(self) -> np.ndarray:
        return self.dofmap.local_to_global

    @cached_property
    def local_scale(self) -> np.ndarray:
        return self.tables.local_scale(self.mesh.h)


@lru_cache(maxsize=128)
def fe_space(mesh: StructuredCubicalMesh, k: int, r: int, family: str = "Qtilde") -> FESpace:
    return FESpace(mesh, k, r, family)


def sigma_space(mesh: StructuredCubicalMesh, k: int, r: int) -> FESpace:
    """V_h^{k-1}: the nodal Qtilde space carrying the lumped product."""
    return fe_space(mesh, k - 1, r, "Qtilde")


def u_space(mesh: StructuredCubicalMesh, k: int, r: int) -> FESpace:
    """V_h^k: the Qminus space, which contains d of V_h^{k-1}."""
    return fe_space(mesh, k, r, "Qminus")


# --- coefficients ---------------------------------------------------------


@dataclass(frozen=True)
class CoefficientField:
    """Per-cell SPD matrices acting on the components of a form."""

    values: np.ndarray = field(repr=False)  # (ncells, P, P)

    @classmethod
    def identity(cls, ncells: int, ncomp: int) -> "CoefficientField":
        return cls(np.broadcast_to(np.eye(ncomp), (ncells, ncomp, ncomp)).copy())

    @classmethod
    def make(cls, mesh: StructuredCubicalMesh, k: int, spec=None) -> "CoefficientField":
        """``spec``: None, one matrix for every cell, a per-cell stack, or a callable of the cell centre."""
        ncomp = len(enumerate_sigma(full(mesh.n), k))
        if spec is None:
            return cls.identity(mesh.num_cells, ncomp)
        if callable(spec):
            vals = np.array([np.asarray(spec(c), dtype=float) for c in mesh.centers])
        else:
            vals = np.asarray(spec, dtype=float)
            if vals.ndim == 0:
                vals = vals * np.eye(ncomp)
            if vals.ndim == 2:
                vals = np.broadcast_to(vals, (mesh.num_cells, *vals.shape)).copy()
        if vals.shape != (mesh.num_cells, ncomp, ncomp):
            raise DomainError(f"coefficient shape {vals.shape}, expected {(mesh.num_cells, ncomp, ncomp)}")
        if not np.allclose(vals, np.swapaxes(vals, 1, 2), atol=1e-14, rtol=1e-12):
            raise DomainError("coefficient matrices must be symmetric")
        if ncomp and np.linalg.eigvalsh(vals).min() <= 0:
            raise DomainError("coefficient matrices must be positive definite")
        return cls(vals)

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.values == np.eye(self.values.shape[1])))


# --- assembly -------------------------------------------------------------


def _assemble(mesh: StructuredCubicalMesh, rows_map: np.ndarray, cols_map: np.ndarray,
              local: np.ndarray, shape: tuple[int, int]) -> sp.csr_matrix:
    """Sum element matrices ``local`` (one shared or one per cell) into CSR."""
    ne = mesh.num_cells
    if local.ndim == 2:
        local = np.broadcast_to(local, (ne, *local.shape))
    rows = np.repeat(rows_map[:, :, None], cols_map.shape[1], axis=2)
    cols = np.repeat(cols_map[:, None, :], rows_map.shape[1], axis=1)
    mat = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def _jacobian(mesh: StructuredCubicalMesh) -> float:
    return mesh.cell_volume / 2 ** mesh.n


def element_mass(space: FESpace, mode: str = "exact", K: CoefficientField | None = None) -> np.ndarray:
    """Per-cell mass matrices ``(ncells, nloc, nloc)`` in the physical basis of ``space``."""
    mesh, t = space.mesh, space.tables
    jac = _jacobian(mesh)
    sc = comp_scales(mesh.h, t.comps)
    s_loc = space.local_scale
    Kv = CoefficientField.make(mesh, space.k, None).values if K is None else K.values
    if mode == "exact":
        g = t.mass_gram * (jac * s_loc[None, None, :, None] * s_loc[None, None, None, :]
                           / (sc[:, None, None, None] * sc[None, :, None, None]))
        return np.einsum("epq,pqij->eij", Kv, g)
    if mode == "lumped":
        if not t.nodal:
            raise DomainError("the lumped product needs the nodal Qtilde space")
        if t.nodal_identity_error > 1e-9:
            raise RuntimeError(f"nodal basis is not dual to the nodes ({t.nodal_identity_error:.2e})")
        # the dual basis is the identity at the nodes: <psi_i, psi_j>_h reduces
        # to J lambda_z K[sigma_i, sigma_j] when psi_i and psi_j share node z
        lam = tensor_nodes(mesh.n, space.r).weights[t.node_of_local]
        same = t.node_of_local[:, None] == t.node_of_local[None, :]
        ci, cj = t.comp_of_local[:, None], t.comp_of_local[None, :]
        base = jac * np.where(same, lam[:, None], 0.0)
        return base[None] * Kv[:, ci, cj]
    raise DomainError(f"unknown mass mode {mode!r}")


def assemble_mass(space: FESpace, mode: str = "exact", K: CoefficientField | None = None) -> sp.csr_matrix:
    """Exact or Gauss-Lobatto lumped mass matrix (symmetric positive definite)."""
    loc = element_mass(space, mode, K)
    if K is None or K.is_identity:
        loc = loc[0]
    return _assemble(space.mesh, space.l2g, space.l2g, loc, (space.size, space.size))


def element_pairing(lo: FESpace, hi: FESpace) -> np.ndarray:
    """``<d tau, v>`` element matrix, rows ``v`` in ``hi``, columns ``tau`` in ``lo``."""
    mesh = lo.mesh
    if hi.k != lo.k + 1:
        raise DomainError("pairing needs consecutive form degrees")
    sc = comp_scales(mesh.h, hi.tables.comps)
    g = _cross_gram(mesh.n, hi.k, lo.r, lo.family, hi.family)
    diag = np.einsum("ppij->pij", g) / (sc ** 2)[:, None, None]
    return (_jacobian(mesh) * diag.sum(axis=0) * lo.local_scale[:, None] * hi.local_scale[None, :]).T


def element_stiffness(space: FESpace) -> np.ndarray:
    mesh, t = space.mesh, space.tables
    sc1 = comp_scales(mesh.h, t.dbasis.comps)
    diag = np.einsum("ppij->pij", t.stiffness_gram) / (sc1 ** 2)[:, None, None]
    s = space.local_scale
    return _jacobian(mesh) * diag.sum(axis=0) * s[:, None] * s[None, :]


def assemble_pairing(lo: FESpace, hi: FESpace) -> sp.csr_matrix:
    return _assemble(lo.mesh, hi.l2g, lo.l2g, element_pairing(lo, hi), (hi.size, lo.size))


def assemble_stiffness(space: FESpace) -> sp.csr_matrix | None:
    if space.k >= space.mesh.n:
        return None
    return _assemble(space.mesh, space.l2g, space.l2g, element_stiffness(space), (space.size, space.size))


def assemble_derivative_forms(mesh: StructuredCubicalMesh, k: int, r: int) -> tuple[sp.csr_matrix | None, sp.csr_matrix | None]:
    """``B[v, tau] = <d tau, v>`` for tau in V_h^{k-1}, v in V_h^k, and ``S[u, v] = <du, dv>`` on V_h^k."""
    hi = u_space(mesh, k, r)
    B = assemble_pairing(sigma_space(mesh, k, r), hi) if k >= 1 else None
    return B, assemble_stiffness(hi)


def derivative_matrix(src: FESpace, dst: FESpace) -> sp.csr_matrix:
    """Exterior derivative ``src -> dst`` in the two global bases.

    The functionals of ``dst`` are applied to d of the pulled-back basis of
    ``src``; a global row is read from any one cell containing its support.
    """
    mesh = src.mesh
    if dst.k != src.k + 1:
        raise DomainError("derivative needs consecutive form degrees")
    tl, th = src.tables, dst.tables
    if th.nodal:
        vals = tl.dbasis.values(tensor_nodes(mesh.n, dst.r).points)  # (P_hi, npts, n_lo)
        s_hi = comp_scales(mesh.h, th.comps)[th.comp_of_local]
        local = vals.reshape(-1, tl.nloc) / s_hi[:, None]
    else:
        dforms = [exterior_derivative(u) for u in tl.element.shapes]
        dm = np.array(moment_matrix(th.element.dofs, dforms), dtype=float)
        local = dm @ tl.element.dual
    local = local * src.local_scale[None, :]
    out = sp.lil_matrix((dst.size, src.size))
    seen = np.zeros(dst.size, dtype=bool)
    for e in range(mesh.num_cells):
        rows = dst.l2g[e]
        for i in np.nonzero(~seen[rows])[0]:
            nz = np.nonzero(np.abs(local[i]) > 1e-14 * max(1.0, np.abs(local[i]).max()))[0]
            out[rows[i], src.l2g[e][nz]] = local[i, nz]
        seen[rows] = True
    return out.tocsr()


# --- harmonic forms -------------------------------------------------------


@dataclass(frozen=True)
class HarmonicBasis:
    k: int
    vectors: np.ndarray  # (dim V_h^k, m), orthonormal in the exact mass
    eigenvalues: np.ndarray
    gap: float
    expected: int

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def harmonic_basis(mesh: StructuredCubicalMesh, k: int, r: int,
                   dense_limit: int = DENSE_LIMIT) -> HarmonicBasis:
    """Discrete harmonic k-forms in V_h^k: ``dq = 0`` and ``<q, d tau> = 0``.

    They form the kernel of ``S + B D^{-1} B^T`` for any SPD ``D``; the lumped
    (diagonal) mass of V_h^{k-1} keeps that composite sparse.  Zero modes are
    separated with a relative threshold on the generalized eigenvalues.
    """
    B, S = assemble_derivative_forms(mesh, k, r)
    M = assemble_mass(u_space(mesh, k, r), "exact")
    N = M.shape[0]
    L = sp.csr_matrix((N, N))
    if S is not None:
        L = L + S
    if B is not None:
        D = assemble_mass(sigma_space(mesh, k, r), "lumped")
        L = L + B @ sp.diags(1.0 / D.diagonal()) @ B.T
    expected = mesh.betti[k]
    if N <= dense_limit:
        w, v = sla.eigh(L.toarray(), M.toarray())
    else:
        m = min(N - 2, expected + 6)
        w, v = spla.eigsh(L.tocsc(), k=m, M=M.tocsc(), sigma=-1.0, which="LM")
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    scale = max(1.0, float(np.abs(w).max()))
    zero = w < HARMONIC_TOL * scale
    q = v[:, zero]
    if q.shape[1]:
        g = q.T @ (M @ q)
        c = np.linalg.cholesky(g)
        q = np.linalg.solve(c, q.T).T
    rest = w[~zero]
    gap = float(rest.min()) if rest.size else float("inf")
    return HarmonicBasis(k, q, w[zero], gap, expected)


def harmonic_residuals(mesh: StructuredCubicalMesh, k: int, r: int, hb: HarmonicBasis) -> dict:
    """Max violations of ``dq = 0``, ``<q, d tau> = 0`` and orthonormality."""
    out = {"d": 0.0, "orth": 0.0, "orthonormal": 0.0}
    if hb.dim == 0:
        return out
    V = u_space(mesh, k, r)
    B, _ = assemble_derivative_forms(mesh, k, r)
    M = assemble_mass(V, "exact")
    if k < mesh.n:
        D = derivative_matrix(V, fe_space(mesh, k + 1, r, "Qminus"))
        out["d"] = float(np.abs(D @ hb.vectors).max())
    if B is not None:
        out["orth"] = float(np.abs(B.T @ hb.vectors).max())
    out["orthonormal"] = float(np.abs(hb.vectors.T @ (M @ hb.vectors) - np.eye(hb.dim)).max())
    return out


# --- interpolation onto Qminus --------------------------------------------


def pi_h_global(mesh: StructuredCubicalMesh, k: int, r: int) -> sp.csr_matrix:
    """Qtilde coefficients -> coefficients of the interpolant in the global Qminus basis.

    The interpolant shares every Qminus moment with its argument; moments
    on shared entities agree from both sides, so a row is read off any
    cell containing its entity.
    """
    src, dst = fe_space(mesh, k, r, "Qtilde"), fe_space(mesh, k, r, "Qminus")
    el = dst.tables.element
    dm = np.array(moment_matrix(el.dofs, src.tables.element.shapes), dtype=float)
    local = dm @ src.tables.element.dual * src.local_scale[None, :]
    out = sp.lil_matrix((dst.size, src.size))
    seen = np.zeros(dst.size, dtype=bool)
    for e in range(mesh.num_cells):
        rows = dst.l2g[e]
        for i in np.nonzero(~seen[rows])[0]:
            nz = np.nonzero(np.abs(local[i]) > 1e-14 * max(1.0, np.abs(local[i]).max()))[0]
            out[rows[i], src.l2g[e][nz]] = local[i, nz]
        seen[rows] = True
    return out.tocsr()


def embedding(mesh: StructuredCubicalMesh, k: int, r: int) -> sp.csr_matrix:
    """Qminus coefficients -> Qtilde nodal coefficients (Qminus is a subspace)."""
    src, dst = fe_space(mesh, k, r, "Qminus"), fe_space(mesh, k, r, "Qtilde")
    vals = src.tables.basis.values(tensor_nodes(mesh.n, r).points)
    s_hi = dst.local_scale
    local = vals.reshape(-1, src.tables.nloc) / s_hi[:, None]
    out = sp.lil_matrix((dst.size, src.size))
    seen = np.zeros(dst.size, dtype=bool)
    for e in range(mesh.num_cells):
        rows = dst.l2g[e]
        for i in np.nonzero(~seen[rows])[0]:
            nz = np.nonzero(np.abs(local[i]) > 1e-14)[0]
            out[rows[i], src.l2g[e][nz]] = local[i, nz]
        seen[rows] = True
    return out.tocsr()


def w_space_table(n: int, k: int, r: int) -> ComponentTable:
    """Monomials of Q_{r-1} times dx_rho for every component: the test family W."""
    from .polyform import PolyForm
    forms = [PolyForm.monomial(n, a, s) for s in enumerate_sigma(full(n), k)
             for a in product(range(r), repeat=n)]
    return _table_from_forms(n, k, forms)


def w_space_pairing(mesh: StructuredCubicalMesh, k: int, r: int) -> sp.csr_matrix:
    """``<tau, w>_h`` for tau in the nodal Qtilde space and w in the broken W family.

    Rows: cell-major W monomials (pushed forward to each cell); columns:
    global Qtilde DOFs.
    """
    space = fe_space(mesh, k, r, "Qtilde")
    t = space.tables
    W = w_space_table(mesh.n, k, r)
    pts = tensor_nodes(mesh.n, r).points
    lam = tensor_nodes(mesh.n, r).weights
    sc = comp_scales(mesh.h, t.comps)
    wv = W.values(pts)  # (P, npts, nw)
    # <psi_i, w>_h = J sum_z lam_z sum_rho psi_rho(z) w_rho(z), with physical
    # components psi_rho = s_i psihat_rho / s_rho and w pushed forward unscaled
    loc = np.zeros((W.coeff.shape[1], t.nloc))
    for i in range(t.nloc):
        p, z = t.comp_of_local[i], t.node_of_local[i]
        loc[:, i] = _jacobian(mesh) * lam[z] * wv[p, z, :] * space.local_scale[i] / sc[p]
    nw = loc.shape[0]
    rows = np.arange(mesh.num_cells * nw).reshape(mesh.num_cells, nw)
    return _assemble(mesh, rows, space.l2g, loc, (mesh.num_cells * nw, space.size))


# --- coderivative ---------------------------------------------------------


@dataclass(frozen=True)
class LocalityReport:
    mode: str
    local: bool
    worst_ratio: float  # largest |entry outside the patch| / row max
    violating_rows: int
    rows: int


@dataclass(frozen=True)
class CoderivativeOperator:
    mode: str
    matrix: np.ndarray  # (dim V_h^{k-1}, dim V_h^k)
    report: LocalityReport

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


def node_patch(mesh: StructuredCubicalMesh, dm: GlobalDofMap) -> list[np.ndarray]:
    """Cells whose closure contains the node of each global nodal DOF."""
    by_point: dict[tuple, set] = {}
    for e in range(mesh.num_cells):
        for g in dm.local_to_global[e]:
            by_point.setdefault(dm.point[g], set()).add(e)
    return [np.array(sorted(by_point[p])) for p in dm.point]


def coderivative_operator(mesh: StructuredCubicalMesh, k: int, r: int, mode: str = "lumped",
                          K: CoefficientField | None = None, tol: float = 1e-12) -> CoderivativeOperator:
    """``sigma_h = M^{-1} B^T u_h`` with a locality report per sigma-DOF.

    The report checks, for every global sigma-DOF at node ``z``, that the
    u-DOFs influencing it belong to cells containing ``z``.
    """
    if k < 1:
        raise DomainError("the coderivative needs k >= 1")
    mass_mode = "lumped" if mode == "lumped" else "exact"
    lo, hi = sigma_space(mesh, k, r), u_space(mesh, k, r)
    M = assemble_mass(lo, mass_mode, K)
    B = assemble_pairing(lo, hi)
    try:
        lu = spla.splu(M.tocsc())
    except RuntimeError as exc:
        raise RuntimeError(f"singular {mass_mode} mass matrix") from exc
    C = lu.solve(B.T.toarray())
    patches = node_patch(mesh, lo.dofmap)
    worst, bad = 0.0, 0
    for i in range(C.shape[0]):
        row = np.abs(C[i])
        top = row.max()
        if top == 0:
            continue
        allowed = np.zeros(hi.size, dtype=bool)
        allowed[np.unique(hi.l2g[patches[i]])] = True
        out = row[~allowed].max(initial=0.0) / top
        worst = max(worst, out)
        bad += out > tol
    rep = LocalityReport(mode, bool(bad == 0), float(worst), int(bad), C.shape[0])
    return CoderivativeOperator(mode, C, rep)


# --- lumped product: norm equivalence and exactness ---------------------


def norm_equivalence(mesh: StructuredCubicalMesh, k: int, r: int,
                     K: CoefficientField | None = None) -> tuple[float, float]:
    """Extreme generalized eigenvalues ``c1, c2`` of (lumped, exact) mass on the nodal space of degree k."""
    space = fe_space(mesh, k, r, "Qtilde")
    Mh = assemble_mass(space, "lumped", K).toarray()
    M = assemble_mass(space, "exact", K).toarray()
    w = sla.eigh(Mh, M, eigvals_only=True)
    return float(w.min()), float(w.max())


def _lumped_pairing(n: int, r: int, a_vals: np.ndarray, b_vals: np.ndarray) -> np.ndarray:
    lam = tensor_nodes(n, r).weights
    return np.einsum("pzi,z,pzj->ij", a_vals, lam, b_vals)


def quadrature_exactness(n: int, k: int, r: int) -> tuple[float, float]:
    """max |<tau, w> - <tau, w>_h| over Qminus x W on the reference cube, and the scale."""
    qm = element_tables(n, k, r, "Qminus").basis
    W = w_space_table(n, k, r)
    exact = np.einsum("ppij->ij", reference_gram(qm, W))
    pts = tensor_nodes(n, r).points
    lumped = _lumped_pairing(n, r, qm.values(pts), W.values(pts))
    return float(np.abs(exact - lumped).max()), float(np.abs(exact).max())


def interpolation_checks(mesh: StructuredCubicalMesh, k: int, r: int, seed: int = 0,
                         samples: int = 5) -> dict:
    """Global checks of the interpolant onto Qminus.

    ``d``: max |d(u - Pi u)| over random u (nodal coefficients of the
    difference in the next Qtilde space); ``orth``: max |<Pi tau - tau, w>_h|
    over all Qtilde basis functions and W monomials; ``identity``: deviation
    of Pi from the identity on Qminus.
    """
    Pi = pi_h_global(mesh, k, r)
    E = embedding(mesh, k, r)
    R = (E @ Pi).toarray() - np.eye(E.shape[0])  # Pi tau - tau in nodal coordinates
    Wp = w_space_pairing(mesh, k, r)
    out = {"orth": float(np.abs(Wp @ R).max()), "scale": float(np.abs(Wp.toarray()).max())}
    rng = np.random.default_rng(seed)
    if k < mesh.n:
        D = derivative_matrix(fe_space(mesh, k, r, "Qtilde"), fe_space(mesh, k + 1, r, "Qtilde"))
        u = rng.standard_normal((E.shape[0], samples))
        out["d"] = float(np.abs(D @ (R @ u)).max())
        out["d_scale"] = float(np.abs(D @ u).max())
    else:
        out["d"], out["d_scale"] = 0.0, 1.0
    out["identity"] = float(np.abs((Pi @ E).toarray() - np.eye(Pi.shape[0])).max())
    return out


def export_coo(mat: sp.spmatrix, path: str) -> None:
    """Write ``row col value`` lines (0-based, full precision)."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
