"""Exact rational assembly from physical basis forms, independent of the tabulated route.

Each local basis function is the reference dual basis function (scaled by the
space's pullback convention) pushed forward to the cell with an exact affine
pullback; products are integrated exactly.  Lumped products evaluate the
physical forms at the cell's Gauss-Lobatto nodes.
"""

from fractions import Fraction

import numpy as np

from cubeforms.combinatorics import enumerate_sigma, full
from cubeforms.polyform import AffineDiagonalMap, PolyForm, d, integrate_box, pullback_affine
from cubeforms.quadrature import tensor_nodes


def cell_box(mesh, e):
    c = mesh.active[e]
    return [(mesh.origin[i] + c[i] * mesh.spacing[i], mesh.origin[i] + (c[i] + 1) * mesh.spacing[i])
            for i in range(mesh.n)]


def inverse_map(mesh, e):
    """Physical x -> reference xhat = (2x - lo - hi) / h."""
    box = cell_box(mesh, e)
    scale = [Fraction(2) / h for h in mesh.spacing]
    shift = [-(lo + hi) / h for (lo, hi), h in zip(box, mesh.spacing)]
    return AffineDiagonalMap.make(scale, shift)


def physical_basis(space, e):
    el = space.tables.element
    phi = inverse_map(space.mesh, e)
    out = []
    for j in range(el.dim):
        s = Fraction(float(space.local_scale[j])).limit_denominator(10 ** 12)
        out.append(pullback_affine(phi, s * el.dual_form(j)))
    return out


def l2_product(u, v, box):
    """Exact sum over components of the integral of u_sigma v_sigma over the box."""
    n = u.n
    top = tuple(range(1, n + 1))
    acc = {}
    cu, cv = u.components(), v.components()
    for s in set(cu) & set(cv):
        for a, c in cu[s].items():
            for b, e in cv[s].items():
                key = (top, tuple(x + y for x, y in zip(a, b)))
                acc[key] = acc.get(key, 0) + c * e
    return integrate_box(PolyForm.from_dict(n, n, acc), box)


def assemble(space_a, space_b, local):
    mesh = space_a.mesh
    out = np.zeros((space_a.size, space_b.size))
    for e in range(mesh.num_cells):
        A, Bf = physical_basis(space_a, e), physical_basis(space_b, e)
        box = cell_box(mesh, e)
        for i, u in enumerate(A):
            for j, v in enumerate(Bf):
                out[space_a.l2g[e][i], space_b.l2g[e][j]] += float(local(u, v, box))
    return out


def exact_mass(space):
    return assemble(space, space, l2_product)


def pairing(lo, hi):
    """Rows indexed by hi (v), columns by lo (tau): <d tau, v>."""
    return assemble(hi, lo, lambda v, tau, box: l2_product(d(tau), v, box))


def stiffness(space):
    return assemble(space, space, lambda u, v, box: l2_product(d(u), d(v), box))


def lumped_mass(space):
    mesh = space.mesh
    nodes = tensor_nodes(mesh.n, space.r)
    out = np.zeros((space.size, space.size))
    comps = enumerate_sigma(full(mesh.n), space.k)
    jac = mesh.cell_volume / 2 ** mesh.n
    for e in range(mesh.num_cells):
        pts = np.array([mesh.to_physical(e, p) for p in nodes.points])
        vals = []
        for u in physical_basis(space, e):
            ev = u.evaluate(pts)
            vals.append(np.array([ev.get(s, np.zeros(len(pts))) for s in comps]))
        for i, a in enumerate(vals):
            for j, b in enumerate(vals):
                out[space.l2g[e][i], space.l2g[e][j]] += jac * float(np.einsum("pz,z,pz->", a, nodes.weights, b))
    return out
