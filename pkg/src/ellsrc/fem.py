"""
Q1 finite elements for the screened Poisson equation with a natural
(homogeneous Neumann) boundary condition.

The state equation ``-lap(u) + eps*u = f`` is discretized with the standard
H1 weak form, giving ``(S + eps*M) u = b``.  For ``eps == 0`` the source is
mean-corrected and the free constant is fixed by requiring the boundary
integral of ``u`` to vanish, enforced with a single Lagrange multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import Mesh, SourceGrid

# 2-point Gauss rule on [0, 1]
_G2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_W2 = np.array([0.5, 0.5])
# reference corners, counter-clockwise from (0, 0)
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)


def _shape(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape functions and their reference gradients at (xi, eta)."""
    sx = np.where(_CORNERS[:, 0] == 1, xi, 1 - xi)
    sy = np.where(_CORNERS[:, 1] == 1, eta, 1 - eta)
    dx = np.where(_CORNERS[:, 0] == 1, 1.0, -1.0) * sy
    dy = np.where(_CORNERS[:, 1] == 1, 1.0, -1.0) * sx
    return sx * sy, np.column_stack([dx, dy])


def element_matrices(hx: float, hy: float) -> tuple[np.ndarray, np.ndarray]:
    """Element stiffness and mass matrices of an ``hx x hy`` rectangle.

    Integrated with the tensor 2x2 Gauss rule, which is exact for both.
    """
    ke = np.zeros((4, 4))
    me = np.zeros((4, 4))
    for a, wa in zip(_G2, _W2):
        for b, wb in zip(_G2, _W2):
            n, dn = _shape(a, b)
            grad = dn / np.array([hx, hy])
            w = wa * wb * hx * hy
            ke += w * grad @ grad.T
            me += w * np.outer(n, n)
    return ke, me


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.cells, 4, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 4)).ravel()
    vals = np.tile(local.ravel(), mesh.n_cells)
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


def cell_load(mesh: Mesh, cell_values: np.ndarray) -> np.ndarray:
    """Load vector ``b_k = int f v_k`` for ``f`` constant on each mesh cell."""
    cell_values = np.asarray(cell_values, dtype=float)
    quarter = 0.25 * mesh.cell_area
    if cell_values.ndim == 1:
        return np.bincount(mesh.cells.ravel(), np.repeat(cell_values * quarter, 4), mesh.n_nodes)
    out = np.zeros((mesh.n_nodes, cell_values.shape[1]))
    np.add.at(out, mesh.cells.ravel(), np.repeat(cell_values * quarter, 4, axis=0))
    return out


def _gauss_points(mesh: Mesh, order: int):
    g, w = np.polynomial.legendre.leggauss(order)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    hx, hy = mesh.cell_size
    origin = mesh.nodes[mesh.cells[:, 0]]
    for a, wa in zip(g, w):
        for b, wb in zip(g, w):
            n, _ = _shape(a, b)
            pts = origin + np.array([a * hx, b * hy])
            yield pts, n, wa * wb * hx * hy


def quadrature_load(mesh: Mesh, func: Callable, order: int = 3) -> np.ndarray:
    """Load vector for a smooth source ``func(x, y)`` by tensor Gauss quadrature."""
    out = np.zeros(mesh.n_nodes)
    for pts, n, w in _gauss_points(mesh, order):
        f = func(pts[:, 0], pts[:, 1])
        np.add.at(out, mesh.cells.ravel(), (w * f[:, None] * n[None, :]).ravel())
    return out


def l2_error(mesh: Mesh, u: np.ndarray, exact: Callable, order: int = 4) -> float:
    """L2(Omega) distance between the Q1 field ``u`` and ``exact(x, y)``."""
    total = 0.0
    for pts, n, w in _gauss_points(mesh, order):
        uh = u[mesh.cells] @ n
        total += w * np.sum((uh - exact(pts[:, 0], pts[:, 1])) ** 2)
    return float(np.sqrt(total))


def boundary_mass_matrix(mesh: Mesh, edge_ids: np.ndarray) -> sp.csr_matrix:
    """Consistent P1 edge mass matrix summed over the given boundary edges."""
    edges = mesh.boundary_edges[edge_ids]
    lengths = mesh.edge_lengths(edges)
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    vals = (lengths[:, None] * local.ravel()[None, :]).ravel()
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


@dataclass(eq=False)
class AssembledOperators:
    """Matrices of one mesh, plus the factorizations built from them.

    ``boundary_mass`` is restricted to ``boundary_nodes`` (the nodes touched by
    at least one observed edge).  ``boundary_weights[k]`` is the integral of
    the nodal basis function ``k`` over the whole boundary.
    """

    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    source_load: np.ndarray | None
    boundary_mass: sp.csr_matrix
    boundary_nodes: np.ndarray
    observed_edges: np.ndarray
    boundary_weights: np.ndarray
    source_grid: SourceGrid | None = None
    _factors: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    def factor(self, epsilon: float):
        """Sparse LU of the state operator, cached per epsilon."""
        if epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {epsilon}")
        key = float(epsilon)
        if key not in self._factors:
            if key > 0:
                a = (self.stiffness + key * self.mass).tocsc()
            else:
                g = sp.csc_matrix(self.boundary_weights[:, None])
                a = sp.bmat([[self.stiffness, g], [g.T, None]], format="csc")
            try:
                self._factors[key] = splu(a)
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(f"state operator is singular for epsilon={key}: {exc}")
        return self._factors[key]


def assemble(
    mesh: Mesh,
    source_grid: SourceGrid | None = None,
    observed_edges: np.ndarray | None = None,
) -> AssembledOperators:
    hx, hy = mesh.cell_size
    ke, me = element_matrices(hx, hy)
    stiffness = _scatter(mesh, ke)
    mass = _scatter(mesh, me)

    if observed_edges is None:
        observed_edges = np.arange(len(mesh.boundary_edges))
    observed_edges = np.asarray(observed_edges, dtype=np.int64)
    mb_full = boundary_mass_matrix(mesh, observed_edges)
    bnodes = np.unique(mesh.boundary_edges[observed_edges])
    boundary_mass = mb_full[bnodes][:, bnodes].tocsr()

    full_mb = boundary_mass_matrix(mesh, np.arange(len(mesh.boundary_edges)))
    boundary_weights = np.asarray(full_mb.sum(axis=1)).ravel()

    source_load = None
    if source_grid is not None:
        owner = source_grid.mesh_cell_to_source
        if len(owner) != mesh.n_cells or np.any(owner < 0):
            raise ValueError("source grid is not aligned with this mesh")
        indicator = np.zeros((mesh.n_cells, source_grid.n))
        indicator[np.arange(mesh.n_cells), owner] = source_grid.cell_area ** -0.5
        source_load = cell_load(mesh, indicator)

    return AssembledOperators(
        mesh=mesh,
        stiffness=stiffness,
        mass=mass,
        source_load=source_load,
        boundary_mass=boundary_mass,
        boundary_nodes=bnodes,
        observed_edges=observed_edges,
        boundary_weights=boundary_weights,
        source_grid=source_grid,
    )


def solve_load(ops: AssembledOperators, load: np.ndarray, epsilon: float) -> np.ndarray:
    """Solve the state equation for one or more assembled load vectors.

    For ``epsilon == 0`` the load is first mean-corrected (source minus its
    average) and the solution normalized to zero boundary integral.
    """
    load = np.asarray(load, dtype=float)
    lu = ops.factor(epsilon)
    if epsilon > 0:
        return lu.solve(load)
    # int f dx = sum of load entries (nodal basis is a partition of unity)
    mass_rows = np.asarray(ops.mass.sum(axis=1)).ravel()
    total = load.sum(axis=0)
    corrected = load - np.multiply.outer(mass_rows, total) / ops.mesh.area
    pad = np.zeros((1,) + load.shape[1:])
    sol = lu.solve(np.concatenate([corrected, pad], axis=0))
    return sol[:-1]


def solve_state(ops: AssembledOperators, source_coeffs: np.ndarray, epsilon: float) -> np.ndarray:
    """Nodal solution for a source given by its coefficients in the phi-basis."""
    if ops.source_load is None:
        raise ValueError("operators were assembled without a source grid")
    return solve_load(ops, ops.source_load @ np.asarray(source_coeffs, dtype=float), epsilon)


def export_coo(matrix, path: str | Path) -> None:
    """Write a sparse matrix as ``row col value`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"% {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
