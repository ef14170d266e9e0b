"""Axis-aligned structured cubical meshes with an active-cell mask.

Entities are addressed on the doubled lattice: an ``l``-dimensional entity
is an integer vector ``p`` with ``0 <= p_i <= 2 N_i`` whose odd coordinates
are exactly its ``l`` free directions.  Cell ``c`` has doubled centre
``2c + 1``.  Cells and entities are ordered with axis 1 varying fastest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .combinatorics import DomainError, enumerate_sigma, full
from .refelem import entity_multiplicity, moment_dofs, reference_faces


def _axis1_fastest(t: Sequence[int]) -> tuple[int, ...]:
    return tuple(reversed(tuple(t)))


@dataclass(frozen=True)
class Entity:
    dim: int
    coords: tuple[int, ...]  # doubled lattice
    free: tuple[int, ...]


@dataclass(frozen=True)
class StructuredCubicalMesh:
    n: int
    cells: tuple[int, ...]
    spacing: tuple[Fraction, ...]
    origin: tuple[Fraction, ...]
    active: tuple[tuple[int, ...], ...] = field(repr=False)

    # --- construction ---

    @classmethod
    def build(cls, cells: Sequence[int], spacing: Sequence | None = None,
              origin: Sequence | None = None, mask=None) -> "StructuredCubicalMesh":
        cells = tuple(int(c) for c in cells)
        n = len(cells)
        if n < 1 or any(c < 1 for c in cells):
            raise DomainError(f"cells must be positive counts, got {cells}")
        spacing = tuple(Fraction(1, c) for c in cells) if spacing is None else \
            tuple(Fraction(s).limit_denominator(10 ** 9) if isinstance(s, float) else Fraction(s)
                  for s in spacing)
        origin = (Fraction(0),) * n if origin is None else \
            tuple(Fraction(o).limit_denominator(10 ** 9) if isinstance(o, float) else Fraction(o)
                  for o in origin)
        if len(spacing) != n or len(origin) != n:
            raise DomainError("spacing and origin need one entry per axis")
        if any(h <= 0 for h in spacing):
            raise DomainError("spacing must be positive")
        if mask is None:
            m = np.ones(cells, dtype=bool)
        else:
            m = np.asarray(mask, dtype=bool)
            if m.shape != cells:
                raise DomainError(f"mask shape {m.shape} does not match cells {cells}")
        act = sorted((tuple(int(x) for x in c) for c in np.argwhere(m)), key=_axis1_fastest)
        if not act:
            raise DomainError("mask has no active cell")
        return cls(n, cells, spacing, origin, tuple(act))

    @classmethod
    def from_json(cls, doc: Mapping | str) -> "StructuredCubicalMesh":
        """``{"dim", "cells", "spacing", "origin", "mask"}``; ``mask[i1][i2]...`` indexes axis 1 first."""
        if isinstance(doc, str):
            doc = json.loads(doc)
        cells = doc["cells"]
        if isinstance(cells, int):
            cells = [cells] * int(doc["dim"])
        if "dim" in doc and int(doc["dim"]) != len(cells):
            raise DomainError("dim disagrees with the length of cells")
        return cls.build(cells, doc.get("spacing"), doc.get("origin"), doc.get("mask"))

    def to_json(self) -> dict:
        mask = np.zeros(self.cells, dtype=bool)
        for c in self.active:
            mask[c] = True
        return {"dim": self.n, "cells": list(self.cells),
                "spacing": [str(h) for h in self.spacing],
                "origin": [str(o) for o in self.origin], "mask": mask.astype(int).tolist()}

    # --- cells ---

    @property
    def num_cells(self) -> int:
        return len(self.active)

    @cached_property
    def cell_index(self) -> dict[tuple[int, ...], int]:
        return {c: e for e, c in enumerate(self.active)}

    @property
    def h(self) -> np.ndarray:
        return np.array([float(x) for x in self.spacing])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def max_h(self) -> float:
        return float(max(self.spacing))

    def cell_center(self, e: int) -> np.ndarray:
        c = np.array(self.active[e], dtype=float)
        return np.array([float(o) for o in self.origin]) + (c + 0.5) * self.h

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([self.cell_center(e) for e in range(self.num_cells)])

    def to_physical(self, e: int, xhat: np.ndarray) -> np.ndarray:
        return self.cell_center(e) + 0.5 * self.h * np.asarray(xhat)

    def neighbor(self, e: int, axis: int, step: int = 1) -> int | None:
        """Active cell across the face normal to ``axis`` (0-based), or None."""
        c = list(self.active[e])
        c[axis] += step
        return self.cell_index.get(tuple(c))

    # --- entities ---

    def _cell_entity_coords(self, c: tuple[int, ...], l: int) -> list[tuple[int, ...]]:
        out = []
        for f in reference_faces(self.n, l):
            pins = f.fixed_dict
            out.append(tuple(2 * ci + 1 if i in f.free else 2 * ci + (0 if pins[i] < 0 else 2)
                             for i, ci in zip(full(self.n), c)))
        return out

    @cached_property
    def _entity_tables(self) -> tuple[list[list[tuple]], list[dict], list[np.ndarray]]:
        lists, index, incid = [], [], []
        for l in range(self.n + 1):
            coords = {p for c in self.active for p in self._cell_entity_coords(c, l)}
            ordered = sorted(coords, key=_axis1_fastest)
            idx = {p: j for j, p in enumerate(ordered)}
            table = np.array([[idx[p] for p in self._cell_entity_coords(c, l)] for c in self.active],
                             dtype=int)
            lists.append(ordered)
            index.append(idx)
            incid.append(table)
        return lists, index, incid

    def entities(self, l: int) -> list[Entity]:
        if not 0 <= l <= self.n:
            raise DomainError(f"entity dimension {l} outside 0..{self.n}")
        return [Entity(l, p, tuple(i + 1 for i, x in enumerate(p) if x % 2))
                for p in self._entity_tables[0][l]]

    def num_entities(self, l: int) -> int:
        return len(self._entity_tables[0][l])

    def element_entities(self, e: int, l: int) -> np.ndarray:
        """Global ids of the ``l``-entities of cell ``e`` in reference-face order."""
        return self._entity_tables[2][l][e]

    def boundary_matrix(self, l: int) -> np.ndarray:
        """Cellular boundary from ``l``-entities to ``(l-1)``-entities (dense integers)."""
        if not 1 <= l <= self.n:
            raise DomainError("boundary defined for 1 <= l <= n")
        lower = self._entity_tables[1][l - 1]
        ents = self._entity_tables[0][l]
        out = np.zeros((len(lower), len(ents)), dtype=int)
        for j, p in enumerate(ents):
            free_axes = [a for a, x in enumerate(p) if x % 2]
            for pos, a in enumerate(free_axes):
                for step, s in ((-1, -1), (1, 1)):
                    q = list(p)
                    q[a] += step
                    out[lower[tuple(q)], j] += s * (-1) ** pos
        return out

    @cached_property
    def betti(self) -> tuple[int, ...]:
        """Cubical Betti numbers of the union of active cells."""
        ranks = [0] * (self.n + 2)
        for l in range(1, self.n + 1):
            ranks[l] = int(np.linalg.matrix_rank(self.boundary_matrix(l).astype(float)))
        return tuple(self.num_entities(l) - ranks[l] - ranks[l + 1] for l in range(self.n + 1))

    def moment_dof_count(self, k: int, r: int) -> int:
        return sum(self.num_entities(l) * entity_multiplicity(l, k, r) for l in range(k, self.n + 1))


def build_mesh(spec: Mapping | str | StructuredCubicalMesh) -> StructuredCubicalMesh:
    if isinstance(spec, StructuredCubicalMesh):
        return spec
    return StructuredCubicalMesh.from_json(spec)


def unit_grid(n: int, cells: int | Sequence[int], mask=None) -> StructuredCubicalMesh:
    cells = [cells] * n if isinstance(cells, int) else list(cells)
    return StructuredCubicalMesh.build(cells, mask=mask)


def annulus_mask(cells: int = 3) -> np.ndarray:
    """Square grid with the middle cell removed."""
    m = np.ones((cells, cells), dtype=bool)
    m[cells // 2, cells // 2] = False
    return m


# --- global degrees of freedom --------------------------------------------


class _UnionFind:
    def __init__(self, size: int):
        self.parent = np.arange(size)

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass(frozen=True)
class GlobalDofMap:
    """Conforming global numbering of the nodal functionals.

    ``local_to_global[e, i]`` is the global id of local functional ``i``
    (component-major, node-minor) of cell ``e``.  ``point`` holds the
    lattice key of each global DOF's node (``c_a r + j_a`` per axis) and
    ``sigma`` its component; ``node_groups`` lists the global ids sharing a
    geometric node.
    """

    n: int
    k: int
    r: int
    size: int
    local_to_global: np.ndarray = field(repr=False)
    point: tuple[tuple[int, ...], ...] = field(repr=False)
    sigma: tuple[tuple[int, ...], ...] = field(repr=False)
    node_groups: tuple[np.ndarray, ...] = field(repr=False)

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class MomentDofMap:
    """Global numbering of moment functionals shared through mesh entities.

    ``entity[g]`` is ``(l, entity id, weight index)`` of global DOF ``g``.
    """

    n: int
    k: int
    r: int
    size: int
    local_to_global: np.ndarray = field(repr=False)
    entity: tuple[tuple[int, int, int], ...] = field(repr=False)

    def __len__(self) -> int:
        return self.size


def moment_global_dofs(mesh: StructuredCubicalMesh, k: int, r: int, family: str = "Qminus") -> MomentDofMap:
    """Identify moment functionals living on the same entity with the same weight.

    All cells share one orientation, so a weight defined in face coordinates
    means the same functional from either side of a shared face.
    """
    dofs = moment_dofs(mesh.n, k, r, family)
    local_keys = []
    count: dict = {}
    for d in dofs:
        fi = reference_faces(mesh.n, d.dim).index(d.face)
        j = count.get(d.face, 0)
        count[d.face] = j + 1
        local_keys.append((d.dim, fi, j))
    keys = [[(l, int(mesh.element_entities(e, l)[fi]), j) for l, fi, j in local_keys]
            for e in range(mesh.num_cells)]
    ordered = sorted({key for row in keys for key in row})
    number = {key: g for g, key in enumerate(ordered)}
    l2g = np.array([[number[key] for key in row] for row in keys], dtype=int).reshape(mesh.num_cells, len(dofs))
    l2g.setflags(write=False)
    return MomentDofMap(mesh.n, k, r, len(ordered), l2g, tuple(ordered))


def global_dofs(mesh: StructuredCubicalMesh, k: int, r: int) -> GlobalDofMap:
    """Identify tangential nodal values across shared faces (union-find)."""
    n = mesh.n
    if not 0 <= k <= n:
        raise DomainError(f"k={k} outside 0..{n}")
    m = r + 1
    npts = m ** n
    comps = enumerate_sigma(full(n), k)
    nloc = len(comps) * npts
    multi = np.array([_axis1_fastest(t) for t in product(range(m), repeat=n)], dtype=int).reshape(-1, n)
    uf = _UnionFind(mesh.num_cells * nloc)
    for e in range(mesh.num_cells):
        for a in range(n):
            nb = mesh.neighbor(e, a, 1)
            if nb is None:
                continue
            hi = np.nonzero(multi[:, a] == r)[0]
            lo_multi = multi[hi].copy()
            lo_multi[:, a] = 0
            lo = lo_multi @ (m ** np.arange(n))
            for si, s in enumerate(comps):
                if a + 1 in s:
                    continue
                for p, q in zip(hi, lo):
                    uf.union(e * nloc + si * npts + int(p), nb * nloc + si * npts + int(q))
    roots = np.array([uf.find(i) for i in range(mesh.num_cells * nloc)])
    # order classes by (node key, component, first member)
    info = {}
    for e, c in enumerate(mesh.active):
        base = np.array(c) * r
        for si in range(len(comps)):
            for j in range(npts):
                g = e * nloc + si * npts + j
                root = int(roots[g])
                if root not in info:
                    key = tuple(int(x) for x in base + multi[j])
                    info[root] = (_axis1_fastest(key), si, root, key)
    order = sorted(info.values())
    number = {v[2]: i for i, v in enumerate(order)}
    l2g = np.array([number[int(x)] for x in roots], dtype=int).reshape(mesh.num_cells, nloc)
    points = tuple(v[3] for v in order)
    sigmas = tuple(comps[v[1]] for v in order)
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(points):
        groups.setdefault(p, []).append(i)
    node_groups = tuple(np.array(groups[p]) for p in sorted(groups, key=_axis1_fastest))
    l2g.setflags(write=False)
    return GlobalDofMap(n, k, r, len(order), l2g, points, sigmas, node_groups)
