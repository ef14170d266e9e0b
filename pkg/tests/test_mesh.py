import json

import numpy as np
import pytest

from cubeforms.combinatorics import DomainError
from cubeforms.mesh import StructuredCubicalMesh, annulus_mask, global_dofs, moment_global_dofs, unit_grid


def test_entity_counts_2x2():
    m = unit_grid(2, 2)
    assert [m.num_entities(l) for l in range(3)] == [9, 12, 4]
    assert m.betti == (1, 0, 0)


def test_single_cell_entities():
    m = unit_grid(2, 1)
    assert [m.num_entities(l) for l in range(3)] == [4, 4, 1]
    m3 = unit_grid(3, 1)
    assert [m3.num_entities(l) for l in range(4)] == [8, 12, 6, 1]


def test_annulus():
    m = unit_grid(2, 3, annulus_mask())
    assert m.num_cells == 8
    assert m.betti == (1, 1, 0)


@pytest.mark.parametrize("cells", [(3, 2), (2, 2, 2), (4,)])
def test_euler_characteristic(cells):
    m = unit_grid(len(cells), list(cells))
    chi = sum((-1) ** l * m.num_entities(l) for l in range(m.n + 1))
    assert chi == 1 == sum((-1) ** l * b for l, b in enumerate(m.betti))


def test_boundary_of_boundary():
    m = unit_grid(3, [2, 2, 1])
    for l in range(1, 3):
        assert not np.any(m.boundary_matrix(l) @ m.boundary_matrix(l + 1))


def test_disconnected_components():
    mask = np.array([[1, 0, 1], [1, 0, 1], [1, 0, 1]], dtype=bool)
    m = unit_grid(2, 3, mask)
    assert m.betti[0] == 2


def test_global_dof_examples():
    assert global_dofs(unit_grid(2, 1), 1, 1).size == 8
    assert global_dofs(unit_grid(2, [2, 1]), 1, 1).size == 14
    assert moment_global_dofs(unit_grid(2, [2, 1]), 1, 1, "Qtilde").size == 7 * 2
    # lowest-order Qminus: one functional per edge
    assert moment_global_dofs(unit_grid(2, [2, 1]), 1, 1).size == 7


@pytest.mark.parametrize("n,cells", [(2, 3), (3, 2)])
@pytest.mark.parametrize("r", [1, 2])
def test_lagrange_count(n, cells, r):
    m = unit_grid(n, cells)
    assert global_dofs(m, 0, r).size == (cells * r + 1) ** n


@pytest.mark.parametrize("mesh", [unit_grid(2, 3), unit_grid(2, 3, annulus_mask()), unit_grid(3, 2)])
@pytest.mark.parametrize("r", [1, 2])
def test_nodal_and_moment_counts_agree(mesh, r):
    for k in range(mesh.n + 1):
        assert global_dofs(mesh, k, r).size == mesh.moment_dof_count(k, r) == \
            moment_global_dofs(mesh, k, r, "Qtilde").size


def test_json_roundtrip_and_mask_orientation():
    doc = {"dim": 2, "cells": [3, 2], "spacing": ["1/3", "1/2"], "origin": [0, 0],
           "mask": [[1, 1], [1, 0], [1, 1]]}
    m = StructuredCubicalMesh.from_json(json.dumps(doc))
    assert m.num_cells == 5
    assert (1, 1) not in m.active
    m2 = StructuredCubicalMesh.from_json(m.to_json())
    assert m2 == m


def test_bad_meshes():
    with pytest.raises(DomainError):
        StructuredCubicalMesh.build([0, 2])
    with pytest.raises(DomainError):
        StructuredCubicalMesh.build([2, 2], mask=np.zeros((2, 2)))
    with pytest.raises(DomainError):
        StructuredCubicalMesh.build([2, 2], mask=np.ones((3, 2)))
    with pytest.raises(DomainError):
        StructuredCubicalMesh.from_json({"dim": 3, "cells": [2, 2]})
