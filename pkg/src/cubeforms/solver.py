"""Mixed Hodge Laplacian solves with exact or lumped sigma-mass, and convergence studies.

Unknowns: ``sigma_h`` in the nodal Qtilde space of degree ``k - 1``,
``u_h`` in the Qminus space of degree ``k`` and ``p_h`` in the discrete
harmonic forms.  The block system

    [ -M    B^T   0  ] [sigma]   [0]
    [  B    S     MH ] [ u   ] = [F]
    [  0   (MH)^T 0  ] [ p   ]   [0]

is the first row negated, which makes it symmetric; it is factored by a
sparse direct LU.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (CoefficientField, FESpace, HarmonicBasis, assemble_mass, assemble_pairing,
                       assemble_stiffness, comp_scales, harmonic_basis, sigma_space, u_space)
from .combinatorics import DomainError, complement, enumerate_sigma, full, sign_eps
from .mesh import StructuredCubicalMesh, unit_grid
from .quadrature import tensor_nodes

Field = Mapping[tuple, Callable[[np.ndarray], np.ndarray]]
CSV_COLUMNS = ("h", "dofs", "err_sigma", "err_u", "err_dsigma", "err_du",
               "rate_sigma", "rate_u", "rate_dsigma", "rate_du")
BC_TOL = 1e-10


class SolverError(RuntimeError):
    pass


class BoundaryGateError(DomainError):
    """A manufactured solution violates the natural boundary conditions."""


# --- manufactured solutions -----------------------------------------------


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields as component callables on points ``(N, n)``.

    ``sigma = d* u`` (degree k-1), ``f = d sigma + d* d u``.  Missing
    components are zero.
    """

    name: str
    n: int
    k: int
    u: Field = field(repr=False)
    du: Field = field(repr=False)
    sigma: Field = field(repr=False)
    dsigma: Field = field(repr=False)
    f: Field = field(repr=False)


def _zero(x):
    return np.zeros(len(x))


def _sinsin(n: int) -> ManufacturedCase:
    pi = math.pi
    top = full(n)

    def phi(x):
        return np.prod(np.sin(pi * x), axis=1)

    def dphi(i):
        def g(x):
            out = pi * np.cos(pi * x[:, i - 1])
            for j in range(n):
                if j != i - 1:
                    out = out * np.sin(pi * x[:, j])
            return out
        return g

    sigma = {}
    for i in top:
        rest = complement((i,), top)
        sgn = sign_eps(i, rest)
        sigma[rest] = (lambda g, s: (lambda x: -s * g(x)))(dphi(i), sgn)
    f = {top: lambda x: n * pi ** 2 * phi(x)}
    return ManufacturedCase("sinsin", n, n, {top: phi}, {}, sigma, dict(f), f)


def _gradient() -> ManufacturedCase:
    pi = math.pi

    def g(x):
        return np.cos(pi * x[:, 0]) * np.cos(pi * x[:, 1])

    def g1(x):
        return -pi * np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1])

    def g2(x):
        return -pi * np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    u = {(1,): g1, (2,): g2}
    two = 2 * pi ** 2
    f = {(1,): lambda x: two * g1(x), (2,): lambda x: two * g2(x)}
    return ManufacturedCase("gradient", 2, 1, u, {}, {(): lambda x: two * g(x)}, dict(f), f)


def _zero_case(n: int, k: int) -> ManufacturedCase:
    return ManufacturedCase("zero", n, k, {}, {}, {}, {}, {})


CASES = ("sinsin", "gradient", "zero")


def manufactured_case(name: str, n: int, k: int | None = None) -> ManufacturedCase:
    if name == "sinsin":
        if k not in (None, n):
            raise DomainError("the sinsin case is an n-form problem (k = n)")
        return _sinsin(n)
    if name == "gradient":
        if n != 2 or k not in (None, 1):
            raise DomainError("the gradient case needs n = 2, k = 1")
        return _gradient()
    if name == "zero":
        return _zero_case(n, n if k is None else k)
    raise DomainError(f"unknown case {name!r}; choose from {CASES}")


def boundary_faces(mesh: StructuredCubicalMesh) -> list[tuple[np.ndarray, np.ndarray, int]]:
    """Boundary (n-1)-faces as (lower corner, upper corner, normal label)."""
    n = mesh.n
    out = []
    origin = np.array([float(o) for o in mesh.origin])
    h = mesh.h
    for e, c in enumerate(mesh.active):
        for a in range(n):
            for step in (-1, 1):
                if mesh.neighbor(e, a, step) is None:
                    lo = origin + np.array(c) * h
                    hi = lo + h
                    side = lo[a] if step < 0 else hi[a]
                    lo2, hi2 = lo.copy(), hi.copy()
                    lo2[a] = hi2[a] = side
                    out.append((lo2, hi2, a + 1))
    return out


def boundary_residual(case: ManufacturedCase, mesh: StructuredCubicalMesh, samples: int = 20,
                      seed: int = 0) -> float:
    """Max over boundary samples of the components that must vanish there.

    On a face normal to ``x_i`` the natural conditions ask ``u_sigma = 0``
    and ``(du)_rho = 0`` whenever ``i`` belongs to ``sigma`` (resp. ``rho``).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lo, hi, i in boundary_faces(mesh):
        pts = lo + rng.random((samples, mesh.n)) * (hi - lo)
        for fld in (case.u, case.du):
            for s, fn in fld.items():
                if i in s:
                    worst = max(worst, float(np.abs(fn(pts)).max()))
    return worst


# --- evaluation of discrete fields ----------------------------------------


def _physical_points(mesh: StructuredCubicalMesh, xhat: np.ndarray) -> np.ndarray:
    """``(ncells, npts, n)`` images of reference points."""
    return mesh.centers[:, None, :] + 0.5 * mesh.h[None, None, :] * xhat[None, :, :]


def field_values(space: FESpace, coeffs: np.ndarray, xhat: np.ndarray, derivative: bool = False) -> np.ndarray:
    """Physical components ``(ncells, P, npts)`` of a discrete field (or of its d)."""
    t = space.tables
    table = t.dbasis if derivative else t.basis
    vals = table.values(xhat)  # (P, npts, nloc)
    sc = comp_scales(space.mesh.h, table.comps)
    local = coeffs[space.l2g] * space.local_scale[None, :]  # (ncells, nloc)
    return np.einsum("pzi,ei->epz", vals, local) / sc[None, :, None]


def exact_values(fld: Field, comps, pts: np.ndarray) -> np.ndarray:
    """``(ncells, P, npts)`` values of an exact field at physical points ``(ncells, npts, n)``."""
    ne, npts, n = pts.shape
    flat = pts.reshape(-1, n)
    out = np.zeros((ne, len(comps), npts))
    for p, s in enumerate(comps):
        if s in fld:
            out[:, p, :] = np.asarray(fld[s](flat), dtype=float).reshape(ne, npts)
    return out


def l2_error(space: FESpace, coeffs: np.ndarray, exact: Field, derivative: bool = False,
             order: int | None = None) -> float:
    mesh = space.mesh
    q = tensor_nodes(mesh.n, order or space.r + 4)
    deg = space.k + (1 if derivative else 0)
    if deg > mesh.n:
        return 0.0
    comps = enumerate_sigma(full(mesh.n), deg)
    diff = field_values(space, coeffs, q.points, derivative) - exact_values(exact, comps, _physical_points(mesh, q.points))
    jac = mesh.cell_volume / 2 ** mesh.n
    return float(math.sqrt(jac * np.einsum("epz,z->", diff ** 2, q.weights)))


def load_vector(space: FESpace, f: Field, order: int | None = None) -> np.ndarray:
    """``<f, v>`` for every basis function of ``space`` (Gauss-Lobatto of order r + 3)."""
    mesh = space.mesh
    q = tensor_nodes(mesh.n, order or space.r + 3)
    t = space.tables
    vals = t.basis.values(q.points)  # (P, npts, nloc)
    sc = comp_scales(mesh.h, t.comps)
    fv = exact_values(f, t.comps, _physical_points(mesh, q.points))  # (ne, P, npts)
    jac = mesh.cell_volume / 2 ** mesh.n
    loc = jac * np.einsum("epz,z,pzi->ei", fv / sc[None, :, None], q.weights, vals) * space.local_scale[None, :]
    out = np.zeros(space.size)
    np.add.at(out, space.l2g.ravel(), loc.ravel())
    return out


# --- the solve ------------------------------------------------------------


@dataclass
class HodgeSolution:
    k: int
    r: int
    mode: str
    sigma: np.ndarray
    u: np.ndarray
    p: np.ndarray  # harmonic part as a V_h^k coefficient vector
    p_coords: np.ndarray
    residual: float
    first_row_residual: float
    harmonic_constraint: float
    dofs: int
    errors: dict = field(default_factory=dict)


@dataclass
class HodgeSystem:
    """Assembled blocks of one mixed problem."""

    mesh: StructuredCubicalMesh
    k: int
    r: int
    mode: str
    sigma_space: FESpace
    u_space: FESpace
    M: sp.csr_matrix
    B: sp.csr_matrix
    S: sp.csr_matrix
    Mu: sp.csr_matrix
    harmonic: HarmonicBasis

    @property
    def MH(self) -> np.ndarray:
        return self.Mu @ self.harmonic.vectors

    def matrix(self) -> sp.csc_matrix:
        m = self.harmonic.dim
        MH = sp.csr_matrix(self.MH) if m else None
        return sp.bmat([[-self.M, self.B.T, None],
                        [self.B, self.S, MH],
                        [None, MH.T if m else None, sp.csr_matrix((m, m)) if m else None]],
                       format="csc")


def assemble_system(mesh: StructuredCubicalMesh, k: int, r: int, mode: str = "lumped",
                    K: CoefficientField | None = None) -> HodgeSystem:
    if mode not in ("standard", "lumped"):
        raise DomainError(f"unknown mode {mode!r}")
    if not 1 <= k <= mesh.n:
        raise DomainError("the mixed problem needs 1 <= k <= n")
    lo, hi = sigma_space(mesh, k, r), u_space(mesh, k, r)
    M = assemble_mass(lo, "lumped" if mode == "lumped" else "exact", K)
    B = assemble_pairing(lo, hi)
    S = assemble_stiffness(hi)
    if S is None:
        S = sp.csr_matrix((hi.size, hi.size))
    Mu = assemble_mass(hi, "exact")
    return HodgeSystem(mesh, k, r, mode, lo, hi, M, B, S, Mu, harmonic_basis(mesh, k, r))


def solve_system(system: HodgeSystem, F: np.ndarray) -> HodgeSolution:
    A = system.matrix()
    ns, nu, m = system.sigma_space.size, system.u_space.size, system.harmonic.dim
    rhs = np.concatenate([np.zeros(ns), F, np.zeros(m)])
    try:
        x = spla.splu(A).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"singular saddle system of size {A.shape[0]} "
                          f"(sigma {ns}, u {nu}, harmonic {m})") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution")
    sigma, u, pc = x[:ns], x[ns:ns + nu], x[ns + nu:]
    bnorm = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(A @ x - rhs)) / (bnorm if bnorm else 1.0)
    first = system.M @ sigma - system.B.T @ u
    scale = max(float(np.abs(system.B.T @ u).max(initial=0.0)), 1.0)
    H = system.harmonic.vectors
    p = H @ pc if m else np.zeros(nu)
    hc = float(np.abs(system.MH.T @ u).max()) if m else 0.0
    return HodgeSolution(system.k, system.r, system.mode, sigma, u, p, pc, res,
                         float(np.abs(first).max(initial=0.0)) / scale, hc, ns + nu + m)


def solve_hodge(mesh: StructuredCubicalMesh, k: int, r: int, f: Field | ManufacturedCase,
                mode: str = "lumped", K: CoefficientField | None = None,
                load_order: int | None = None) -> HodgeSolution:
    """Solve the mixed problem with load ``f`` (component callables or a manufactured case).

    With a manufactured case the solution carries L2 errors of sigma, u and
    their derivatives, and the harmonic part.
    """
    case = f if isinstance(f, ManufacturedCase) else None
    if case is not None:
        if (case.n, case.k) != (mesh.n, k):
            raise DomainError(f"case {case.name} is for n={case.n}, k={case.k}")
        gate = boundary_residual(case, mesh)
        if gate > BC_TOL:
            raise BoundaryGateError(f"case {case.name} violates the natural boundary conditions ({gate:.2e})")
    system = assemble_system(mesh, k, r, mode, K)
    F = load_vector(system.u_space, case.f if case else f, load_order)
    sol = solve_system(system, F)
    if case is not None:
        sol.errors = solution_errors(system, sol, case)
    return sol


def solution_errors(system: HodgeSystem, sol: HodgeSolution, case: ManufacturedCase) -> dict:
    lo, hi = system.sigma_space, system.u_space
    p_norm = float(math.sqrt(max(sol.p @ (system.Mu @ sol.p), 0.0)))
    return {
        "err_sigma": l2_error(lo, sol.sigma, case.sigma),
        "err_dsigma": l2_error(lo, sol.sigma, case.dsigma, derivative=True),
        "err_u": l2_error(hi, sol.u, case.u),
        "err_du": l2_error(hi, sol.u, case.du, derivative=True),
        "err_p": p_norm,
    }


def mode_difference(mesh: StructuredCubicalMesh, k: int, r: int, case: ManufacturedCase,
                    K: CoefficientField | None = None) -> dict:
    """L2 distance between the lumped and standard solutions."""
    a = solve_hodge(mesh, k, r, case, "lumped", K)
    b = solve_hodge(mesh, k, r, case, "standard", K)
    ds, du = a.sigma - b.sigma, a.u - b.u
    Ms = assemble_mass(sigma_space(mesh, k, r), "exact")
    Mu = assemble_mass(u_space(mesh, k, r), "exact")
    return {"sigma": float(math.sqrt(max(ds @ (Ms @ ds), 0.0))),
            "u": float(math.sqrt(max(du @ (Mu @ du), 0.0)))}


# --- convergence ----------------------------------------------------------


def fitted_rate(h: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(h); nan if any error vanishes."""
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    if len(h) < 2 or np.any(err <= 0):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def default_levels(n: int) -> tuple[int, ...]:
    return (4, 8, 16) if n == 2 else (2, 4, 8)


@dataclass
class ConvergenceTable:
    n: int
    k: int
    r: int
    mode: str
    case: str
    rows: list[dict]
    rates: dict
    mode_gap: list[float] = field(default_factory=list)
    mode_gap_rate: float = float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{v:.10e}"


def convergence_study(n: int, k: int, r: int, case: str = "sinsin", mode: str = "lumped",
                      levels: Sequence[int] | None = None, K=None,
                      compare_modes: bool = False) -> ConvergenceTable:
    """Errors and rates on uniform unit-cube grids with ``levels`` cells per axis."""
    levels = tuple(levels or default_levels(n))
    mc = manufactured_case(case, n, k)
    rows, gaps = [], []
    for N in levels:
        mesh = unit_grid(n, N)
        coeff = CoefficientField.make(mesh, k - 1, K) if K is not None else None
        sol = solve_hodge(mesh, k, r, mc, mode, coeff)
        rows.append({"h": 1.0 / N, "dofs": sol.dofs, **{c: sol.errors[c] for c in
                                                          ("err_sigma", "err_u", "err_dsigma", "err_du")}})
        if compare_modes:
            gaps.append(mode_difference(mesh, k, r, mc, coeff)["sigma"])
    for a, b in zip(rows, rows[1:]):
        for c in ("sigma", "u", "dsigma", "du"):
            ea, eb = a[f"err_{c}"], b[f"err_{c}"]
            b[f"rate_{c}"] = (math.log(ea / eb) / math.log(a["h"] / b["h"])
                              if ea > 0 and eb > 0 else float("nan"))
    hs = [row["h"] for row in rows]
    rates = {c: fitted_rate(hs, [row[f"err_{c}"] for row in rows]) for c in ("sigma", "u", "dsigma", "du")}
    table = ConvergenceTable(n, k, r, mode, case, rows, rates)
    if compare_modes:
        table.mode_gap = gaps
        table.mode_gap_rate = fitted_rate(hs, gaps)
    return table


def solve_harmonic_load(mesh: StructuredCubicalMesh, k: int, r: int, mode: str = "lumped",
                        index: int = 0) -> tuple[HodgeSolution, np.ndarray]:
    """Solve with load equal to a discrete harmonic form ``q``; expect ``u = sigma = 0`` and ``p = q``."""
    system = assemble_system(mesh, k, r, mode)
    if system.harmonic.dim <= index:
        raise DomainError(f"mesh has only {system.harmonic.dim} discrete harmonic {k}-forms")
    q = system.harmonic.vectors[:, index]
    return solve_system(system, system.Mu @ q), q
