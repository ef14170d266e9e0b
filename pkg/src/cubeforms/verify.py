"""Verification suites: each check returns ``{"name", "passed", "detail"}``.

``algebra``       exact identities of the form calculus and the shape spaces
``unisolvency``   Vandermonde certification of the reference elements
``conditions``    quadrature exactness, interpolation properties, norm
                  equivalence and block structure of the lumped product
``locality``      support of the discrete coderivative
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product
from math import comb
from typing import Iterable

import numpy as np

from .assembly import (CoefficientField, assemble_mass, coderivative_operator, fe_space,
                       harmonic_basis, harmonic_residuals, interpolation_checks, norm_equivalence,
                       quadrature_exactness)
from .combinatorics import complement, enumerate_sigma, full, minus, plus, sign_eps
from .mesh import StructuredCubicalMesh, annulus_mask, unit_grid
from .polyform import (AffineDiagonalMap, Face, PolyForm, d, d_koszul, degrees, interior_constant,
                       koszul, pullback_affine, trace, wedge)
from .quadrature import gauss_lobatto, legendre_value
from .refelem import (ElementConstructionError, build_element, dof_count_by_dim,
                      qminus_dofs_subset, trace_property_failures, vanishing_trace_report)
from .spaces import ConstructionError, basis, basis_tildeQ, expected_dim, span_of


def _check(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# --- algebra --------------------------------------------------------------


def random_homogeneous(rng: random.Random, n: int, k: int, s: int, terms: int = 4) -> PolyForm:
    coeffs = {}
    sigmas = enumerate_sigma(full(n), k)
    for _ in range(terms):
        sigma = rng.choice(sigmas)
        alpha = [0] * n
        for _ in range(s):
            alpha[rng.randrange(n)] += 1
        coeffs[(sigma, tuple(alpha))] = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
    return PolyForm.from_dict(n, k, coeffs)


def check_homotopy(seed: int = 0, samples: int = 150, nmax: int = 4, smax: int = 4) -> dict:
    rng = random.Random(seed)
    fails = 0
    for _ in range(samples):
        n = rng.randint(1, nmax)
        k = rng.randint(0, n)
        s = rng.randint(0, smax)
        u = random_homogeneous(rng, n, k, s)
        lhs = PolyForm.zero(n, k)
        if k < n:
            lhs = lhs + koszul(d(u))
        if k > 0:
            lhs = lhs + d(koszul(u))
        if lhs != (s + k) * u:
            fails += 1
    return _check("homotopy formula", fails == 0, samples=samples, failures=fails)


def check_degree_invariance(nmax: int = 4, rmax: int = 3) -> dict:
    """Exhaustive check of the ncdeg/cdeg bookkeeping under the two elementary moves."""
    checked = fails = 0
    for n in range(2, nmax + 1):
        for k in range(1, n):
            for sigma in enumerate_sigma(full(n), k):
                star = complement(sigma, full(n))
                for alpha in product(range(rmax + 1), repeat=n):
                    m = (sigma, alpha)
                    moves = []
                    for i in star:
                        if alpha[i - 1] >= 1:
                            a2 = list(alpha)
                            a2[i - 1] -= 1
                            moves.append(("d", i, (plus(sigma, i), tuple(a2))))
                    for j in sigma:
                        a2 = list(alpha)
                        a2[j - 1] += 1
                        moves.append(("k", j, (minus(sigma, j), tuple(a2))))
                    for s in range(1, rmax + 2):
                        c0, nc0 = degrees(m, s)
                        nc0_next = degrees(m, s + 1)[1]
                        for kind, idx, m2 in moves:
                            c2, nc2 = degrees(m2, s)
                            nc2_next = degrees(m2, s + 1)[1]
                            if kind == "d":
                                ok = nc2 == nc0 - (s == alpha[idx - 1])
                            else:
                                ok = nc2 == nc0 + (alpha[idx - 1] == s - 1)
                            ok = ok and (nc0_next + c0 == nc2_next + c2)
                            checked += 1
                            fails += not ok
                    # a degree-(r+1) nonconforming index created by kappa comes from a degree-r conforming one
                    r = max(alpha) if alpha else 0
                    if r >= 1 and degrees(m, r)[0] > 0:
                        for kind, idx, m2 in moves:
                            if kind == "k" and m2[1][idx - 1] == r + 1:
                                checked += 1
                                fails += not (alpha[idx - 1] == r and idx in sigma)
    return _check("degree invariance", fails == 0, checked=checked, failures=fails)


def check_eps_identity(nmax: int = 5) -> dict:
    checked = fails = 0
    for n in range(2, nmax + 1):
        for k in range(1, n):
            for sigma in enumerate_sigma(full(n), k):
                for i in complement(sigma, full(n)):
                    big = plus(sigma, i)
                    for it in sigma:
                        st = minus(big, it)
                        if st == sigma:
                            continue
                        val = (sign_eps(i, sigma) * sign_eps(i, minus(st, i))
                               - sign_eps(it, st) * sign_eps(it, minus(sigma, it)))
                        checked += 1
                        fails += val == 0
    return _check("sign identity", fails == 0, checked=checked, failures=fails)


def _form_monomials(n: int, k: int, r: int):
    for sigma in enumerate_sigma(full(n), k):
        for alpha in product(range(r + 1), repeat=n):
            yield PolyForm.monomial(n, alpha, sigma)


def check_inc_dec(nmax: int = 3, rmax: int = 3) -> dict:
    """cdeg never drops under d; ncdeg never drops under kappa."""
    checked = fails = 0
    for n in range(1, nmax + 1):
        for k in range(n + 1):
            for m in _form_monomials(n, k, rmax):
                for op, which in ((d, 0), (koszul, 1)):
                    for mt in op(m).monomials():
                        for s in range(1, rmax + 2):
                            checked += 1
                            fails += degrees(mt, s)[which] < degrees(m, s)[which]
    return _check("cdeg under d, ncdeg under kappa", fails == 0, checked=checked, failures=fails)


def check_inclusions(nmax: int = 3, rmax: int = 3) -> dict:
    fails: list[str] = []
    checked = 0
    for n in range(1, nmax + 1):
        for r in range(1, rmax + 1):
            for k in range(n + 1):
                qt = basis_tildeQ(n, k, r)
                qm = basis("Qminus", n, k, r)
                bb = basis("B", n, k, r)
                qq = basis("Q", n, k, r)
                # direct sum
                checked += 1
                if span_of(list(qm) + list(bb)).rank != expected_dim("Q", n, k, r):
                    fails.append(f"direct sum n={n} k={k} r={r}")
                if k >= 1:
                    qm_lo = basis("Qminus", n, k - 1, r)
                    for u in qm:
                        checked += 1
                        if not qm_lo.contains(koszul(u)):
                            fails.append(f"kappa Qminus n={n} k={k} r={r}")
                            break
                if k < n:
                    b_hi = basis("B", n, k + 1, r)
                    dkb_hi = span_of([d_koszul(m) for m in b_hi])
                    qt_hi = basis_tildeQ(n, k + 1, r)
                    for u in bb:
                        du = d(u)
                        checked += 2
                        if not b_hi.contains(du) or not dkb_hi.contains(du.as_dict()):
                            fails.append(f"d B n={n} k={k} r={r}")
                            break
                    for u in qq:
                        checked += 1
                        if not qt_hi.contains(d(u)):
                            fails.append(f"d Q n={n} k={k} r={r}")
                            break
                    for u in qt:
                        checked += 1
                        if not qt_hi.contains(d(u)):
                            fails.append(f"d Qtilde n={n} k={k} r={r}")
                            break
                for u in (qq if k >= 1 else ()):
                    checked += 1
                    if not qt.contains(d_koszul(u)):
                        fails.append(f"d kappa Q n={n} k={k} r={r}")
                        break
    return _check("inclusions", not fails, checked=checked, failures=fails)


def check_dk_injective(nmax: int = 3, rmax: int = 3) -> dict:
    fails = []
    for n in range(1, nmax + 1):
        for k in range(n + 1):
            for r in range(1, rmax + 1):
                bb = list(basis("B", n, k, r))
                img = [d_koszul(m) for m in bb]
                if span_of(img).rank != len(bb):
                    fails.append((n, k, r))
                # each kappa m has a monomial with nonconforming (r+1)-degree one
                if k >= 1:
                    for m in bb:
                        if not any(degrees(t, r + 1)[1] == 1 for t in koszul(m).monomials()):
                            fails.append((n, k, r, "a"))
                            break
    return _check("d kappa injective on B", not fails, failures=fails)


def random_affine(rng: random.Random, n: int) -> AffineDiagonalMap:
    scale = []
    for _ in range(n):
        a = Fraction(rng.randint(1, 7), rng.randint(1, 4)) * rng.choice((-1, 1))
        scale.append(a)
    shift = [Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for _ in range(n)]
    return AffineDiagonalMap.make(scale, shift)


def check_pullback_closure(seed: int = 0, maps: int = 200, nmax: int = 3, rmax: int = 2) -> dict:
    rng = random.Random(seed)
    fails = 0
    checked = 0
    for _ in range(maps):
        n = rng.randint(1, nmax)
        k = rng.randint(0, n)
        r = rng.randint(1, rmax)
        phi = random_affine(rng, n)
        qt = basis_tildeQ(n, k, r)
        for u in qt:
            checked += 1
            fails += not qt.contains(pullback_affine(phi, u))
    return _check("pullback closure", fails == 0, maps=maps, checked=checked, failures=fails)


def check_trace_property(nmax: int = 3, rmax: int = 3) -> dict:
    bad = []
    for n in range(2, nmax + 1):
        for k in range(n):
            for r in range(1, rmax + 1):
                if trace_property_failures(n, k, r):
                    bad.append((n, k, r))
    return _check("trace property", not bad, failures=bad)


def check_trace_identities(seed: int = 0, samples: int = 60) -> dict:
    """tr kappa u = kappa_f tr u + tr(x^f _| u) and tr d = d tr on random forms and faces."""
    rng = random.Random(seed)
    fails = 0
    for _ in range(samples):
        n = rng.randint(2, 4)
        k = rng.randint(0, n)
        u = random_homogeneous(rng, n, k, rng.randint(0, 3)) + random_homogeneous(rng, n, k, rng.randint(0, 3))
        pinned = rng.sample(range(1, n + 1), rng.randint(1, n - 1))
        vals = {i: Fraction(rng.randint(-3, 3), rng.randint(1, 2)) for i in pinned}
        f = Face.make(n, vals)
        xf = [vals.get(i, 0) for i in full(n)]
        lhs = trace(koszul(u), f)
        rhs = koszul(trace(u, f)) + trace(interior_constant(u, xf), f)
        fails += lhs != rhs
        fails += trace(d(u), f) != d(trace(u, f))
    return _check("trace identities", fails == 0, samples=samples, failures=fails)


def check_wedge_sign(nmax: int = 5) -> dict:
    fails = 0
    for n in range(1, nmax + 1):
        for k in range(n):
            for sigma in enumerate_sigma(full(n), k):
                for i in complement(sigma, full(n)):
                    lhs = wedge(PolyForm.monomial(n, (0,) * n, (i,)), PolyForm.monomial(n, (0,) * n, sigma))
                    rhs = sign_eps(i, sigma) * PolyForm.monomial(n, (0,) * n, plus(sigma, i))
                    fails += lhs != rhs
    return _check("wedge sign", fails == 0, failures=fails)


def check_dimensions(sweep: Iterable[tuple[int, int, int]] | None = None) -> dict:
    sweep = list(sweep or default_sweep())
    bad = []
    for n, k, r in sweep:
        try:
            b = basis_tildeQ(n, k, r)
        except ConstructionError as exc:
            bad.append((n, k, r, str(exc)))
            continue
        if b.dim != comb(n, k) * (r + 1) ** n:
            bad.append((n, k, r, b.dim))
    return _check("dimension", not bad, cases=len(sweep), failures=bad)


def default_sweep(include_stretch: bool = True) -> list[tuple[int, int, int]]:
    out = [(n, k, r) for n in (1, 2, 3) for k in range(n + 1) for r in (1, 2, 3)]
    if include_stretch:
        out += [(4, k, r) for k in range(5) for r in (1, 2)]
    return out


def algebra_suite(seed: int = 0, nmax: int = 3, rmax: int = 3) -> list[dict]:
    return [
        check_wedge_sign(),
        check_homotopy(seed),
        check_degree_invariance(max(nmax, 4), rmax),
        check_eps_identity(max(nmax, 5)),
        check_inc_dec(nmax, rmax),
        check_inclusions(nmax, rmax),
        check_dk_injective(nmax, rmax),
        check_pullback_closure(seed),
        check_trace_property(nmax, rmax),
        check_trace_identities(seed),
    ]


# --- unisolvency ----------------------------------------------------------


def unisolvency_report(n: int, k: int, r: int) -> dict:
    rep: dict = {"n": n, "k": k, "r": r, "dim": comb(n, k) * (r + 1) ** n}
    try:
        em = build_element(n, k, r, "Qtilde", "moment")
        rep["moment_rank"], rep["moment_certificate"] = em.rank, em.certificate
        rep["moment_dofs_by_dim"] = {str(l): c for l, c in sorted(dof_count_by_dim(em.dofs).items())}
        en = build_element(n, k, r, "Qtilde", "nodal")
        rep["nodal_rank"], rep["nodal_cond"] = en.rank, en.cond
        qm = build_element(n, k, r, "Qminus", "moment")
        rep["qminus_rank"] = qm.rank
        rep["passed"] = (em.rank == rep["dim"] and en.rank == rep["dim"] and en.cond < 1e12
                         and qm.rank == qm.dim)
    except ElementConstructionError as exc:
        rep["passed"] = False
        rep["error"] = str(exc)
    return rep


def unisolvency_suite(n: int | None = None, k: int | None = None, r: int | None = None,
                      reduced: bool = True) -> list[dict]:
    sweep = [(a, b, c) for a, b, c in default_sweep()
             if (n is None or a == n) and (k is None or b == k) and (r is None or c == r)]
    if not sweep and None not in (n, k, r):
        sweep = [(n, k, r)]
    out = []
    for a, b, c in sweep:
        rep = unisolvency_report(a, b, c)
        out.append(_check(f"unisolvency n={a} k={b} r={c}", rep.pop("passed"), **rep))
        if reduced and a <= 3 and b < a:
            vt = vanishing_trace_report(a, b, c)
            ok = vt["zero_trace_dim"] == vt["interior_dofs"] == vt["rank"]
            out.append(_check(f"vanishing trace n={a} k={b} r={c}", ok, **vt))
            out.append(_check(f"qminus functionals subset n={a} k={b} r={c}", qminus_dofs_subset(a, b, c)))
    return out


# --- conditions -----------------------------------------------------------


def lumped_block_report(mesh: StructuredCubicalMesh, k: int, r: int, K=None) -> dict:
    space = fe_space(mesh, k, r, "Qtilde")
    Mh = assemble_mass(space, "lumped", K).tocoo()
    pts = space.dofmap.point
    vmax = float(np.abs(Mh.data).max())
    off_block = max((abs(v) for i, j, v in zip(Mh.row, Mh.col, Mh.data) if pts[i] != pts[j]), default=0.0)
    off_diag = max((abs(v) for i, j, v in zip(Mh.row, Mh.col, Mh.data) if i != j), default=0.0)
    return {"off_block": off_block / vmax, "off_diag": off_diag / vmax,
            "min_diag": float(Mh.tocsr().diagonal().min())}


def random_spd_field(mesh: StructuredCubicalMesh, k: int, seed: int = 0) -> CoefficientField:
    rng = np.random.default_rng(seed)
    P = comb(mesh.n, k)
    a = rng.standard_normal((mesh.num_cells, P, P))
    vals = np.einsum("eij,ekj->eik", a, a) + P * np.eye(P)
    return CoefficientField.make(mesh, k, vals)


def conditions_suite(n: int = 2, k: int = 1, r: int = 2, seed: int = 0,
                     levels: tuple[int, ...] = (2, 4, 8)) -> list[dict]:
    """Checks for the sigma-space of the degree-k problem (forms of degree k - 1)."""
    j = k - 1
    out = []
    err, scale = quadrature_exactness(n, j, r)
    out.append(_check("quadrature exactness on Qminus x W", err <= 1e-12 * max(scale, 1.0),
                      error=err, scale=scale))
    mesh = unit_grid(n, 2 if n == 3 else 3)
    ic = interpolation_checks(mesh, j, r, seed)
    out.append(_check("d commutes with interpolation", ic["d"] <= 1e-11 * max(1.0, ic["d_scale"]),
                      error=ic["d"], scale=ic["d_scale"]))
    out.append(_check("lumped orthogonality of interpolation residual",
                      ic["orth"] <= 1e-11 * max(1.0, ic["scale"]), error=ic["orth"], scale=ic["scale"]))
    out.append(_check("interpolation fixes Qminus", ic["identity"] <= 1e-11, error=ic["identity"]))
    ratios = []
    consts = []
    for N in levels:
        c1, c2 = norm_equivalence(unit_grid(n, N), j, r)
        consts.append((c1, c2))
        ratios.append(c2 / c1)
    spread = max(ratios) / min(ratios) - 1
    out.append(_check("norm equivalence ratio stable", spread <= 0.05, levels=list(levels),
                      constants=consts, ratios=ratios, spread=spread))
    blk = lumped_block_report(mesh, j, r)
    out.append(_check("lumped mass diagonal (identity coefficient)",
                      blk["off_diag"] <= 1e-13 and blk["min_diag"] > 0, **blk))
    K = random_spd_field(mesh, j, seed)
    blk = lumped_block_report(mesh, j, r, K)
    out.append(_check("lumped mass block diagonal by node (SPD coefficient)", blk["off_block"] <= 1e-13, **blk))
    return out


# --- locality -------------------------------------------------------------


def locality_suite(n: int = 2, k: int = 2, r: int = 1, cells: int = 4) -> list[dict]:
    mesh = unit_grid(n, cells)
    lum = coderivative_operator(mesh, k, r, "lumped").report
    std = coderivative_operator(mesh, k, r, "standard").report
    return [
        _check(f"lumped coderivative local (r={r})", lum.local, worst_ratio=lum.worst_ratio,
               violating_rows=lum.violating_rows, rows=lum.rows),
        _check(f"exact-mass coderivative nonlocal (r={r})", not std.local, worst_ratio=std.worst_ratio,
               violating_rows=std.violating_rows, rows=std.rows),
    ]


def harmonic_suite(r: int = 1) -> list[dict]:
    out = []
    for name, mesh, want in (("full 3x3", unit_grid(2, 3), 0),
                             ("3x3 minus centre", unit_grid(2, 3, annulus_mask()), 1)):
        hb = harmonic_basis(mesh, 1, r)
        res = harmonic_residuals(mesh, 1, r, hb)
        ok = hb.dim == want and max(res.values()) <= 1e-10
        out.append(_check(f"harmonic 1-forms on {name} (r={r})", ok, dim=hb.dim, expected=want,
                          betti=mesh.betti[1], gap=hb.gap, **res))
    return out


def legendre_identity(rmax: int = 8) -> dict:
    worst = 0.0
    for r in range(1, rmax + 1):
        nodes = gauss_lobatto(r).nodes
        worst = max(worst, float(np.abs(legendre_value(r + 1, nodes) - legendre_value(r - 1, nodes)).max()))
    return _check("Legendre identity at Gauss-Lobatto nodes", worst <= 1e-13, worst=worst)


def summarize(checks: list[dict]) -> dict:
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


__all__ = [name for name in dir() if not name.startswith("_")]
