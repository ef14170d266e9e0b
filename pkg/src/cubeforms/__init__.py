"""Cubical polynomial differential forms and mass-lumped mixed Hodge-Laplace solvers.

Exact rational form calculus (``polyform``), the shape spaces Q, Q^-, B and
their sum Q^- + d kappa B (``spaces``), Gauss-Lobatto quadrature, moment and
nodal reference elements, structured cubical meshes with conforming degree
of freedom maps, lumped and exact assembly, and the mixed solver.
"""

from .combinatorics import DomainError
from .polyform import PolyForm, d, format_form, koszul, parse_form
from .spaces import ConstructionError, basis, basis_tildeQ, expected_dim

__version__ = "0.1.0"

__all__ = ["DomainError", "ConstructionError", "PolyForm", "d", "koszul", "format_form", "parse_form",
           "basis", "basis_tildeQ", "expected_dim", "__version__"]
