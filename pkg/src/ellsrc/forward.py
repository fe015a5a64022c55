"""
Dense forward operator mapping source coefficients to boundary traces, and
synthetic boundary data generated on a nested finer mesh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .fem import AssembledOperators, cell_load, solve_load
from .mesh import SourceGrid


@dataclass(eq=False)
class ForwardOperator:
    """``K[:, j]`` is the boundary trace of the state driven by basis function ``j``.

    The boundary inner product is ``<a, b> = a @ gram @ b`` with
    ``gram = L @ L.T``; ``weighted`` is ``L.T @ K`` so that Euclidean norms of
    ``weighted @ x`` equal boundary L2 norms of ``K @ x``.
    """

    K: np.ndarray
    gram: np.ndarray
    gram_chol: np.ndarray
    source_grid: SourceGrid
    epsilon: float
    boundary_nodes: np.ndarray
    boundary_points: np.ndarray

    @property
    def n(self) -> int:
        return self.K.shape[1]

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @cached_property
    def weighted(self) -> np.ndarray:
        return self.gram_chol.T @ self.K

    def weight_data(self, d) -> np.ndarray:
        return self.gram_chol.T @ _values(d)

    def inner(self, a, b) -> float:
        return float(_values(a) @ self.gram @ _values(b))

    def norm(self, a) -> float:
        a = _values(a)
        return float(np.sqrt(max(a @ self.gram @ a, 0.0)))


@dataclass
class BoundaryData:
    values: np.ndarray
    points: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def _values(d) -> np.ndarray:
    return np.asarray(d.values if isinstance(d, BoundaryData) else d, dtype=float)


def build_forward_matrix(ops: AssembledOperators, epsilon: float) -> ForwardOperator:
    if ops.source_load is None or ops.source_grid is None:
        raise ValueError("operators were assembled without a source grid")
    states = solve_load(ops, ops.source_load, epsilon)
    K = np.ascontiguousarray(states[ops.boundary_nodes, :])
    gram = ops.boundary_mass.toarray()
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        diag = np.diag(gram)
        lacking = ops.boundary_nodes[diag <= 0]
        raise np.linalg.LinAlgError(
            f"boundary Gram matrix is not positive definite; nodes without observed edges: {lacking.tolist()}"
        )
    return ForwardOperator(
        K=K,
        gram=gram,
        gram_chol=chol,
        source_grid=ops.source_grid,
        epsilon=float(epsilon),
        boundary_nodes=ops.boundary_nodes.copy(),
        boundary_points=ops.mesh.nodes[ops.boundary_nodes],
    )


def apply_forward(op: ForwardOperator, coeffs) -> BoundaryData:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != op.n:
        raise ValueError(f"expected {op.n} coefficients, got {coeffs.shape[0]}")
    return BoundaryData(op.K @ coeffs, op.boundary_points, {"source": "forward operator"})


def _match_points(mesh_nodes: np.ndarray, points: np.ndarray, h: float) -> np.ndarray:
    """Node id of each point, requiring an exact (to rounding) coincidence."""
    scale = 1.0 / (0.5 * h)
    keys = {tuple(k): idx for idx, k in enumerate(np.rint(mesh_nodes * scale).astype(np.int64))}
    out = np.empty(len(points), dtype=np.int64)
    for r, p in enumerate(points):
        key = tuple(np.rint(p * scale).astype(np.int64))
        idx = keys.get(key, -1)
        if idx < 0 or np.max(np.abs(mesh_nodes[idx] - p)) > 1e-9 * max(1.0, h):
            raise ValueError(f"boundary point {p.tolist()} is not a node of the data mesh")
        out[r] = idx
    return out


def synthesize_data(
    true_source: np.ndarray,
    fine_ops: AssembledOperators,
    epsilon: float,
    boundary_points: np.ndarray,
) -> BoundaryData:
    """Boundary data from a cellwise-constant source solved on the fine mesh.

    ``true_source`` holds one value per fine mesh cell.  The trace is sampled
    directly at ``boundary_points``, which must be nodes of the fine mesh.
    """
    mesh = fine_ops.mesh
    true_source = np.asarray(true_source, dtype=float)
    if true_source.shape != (mesh.n_cells,):
        raise ValueError(f"true source must have one value per fine cell ({mesh.n_cells})")
    nodes = _match_points(mesh.nodes, np.asarray(boundary_points), min(mesh.cell_size))
    u = solve_load(fine_ops, cell_load(mesh, true_source), epsilon)
    return BoundaryData(
        u[nodes].copy(),
        np.asarray(boundary_points, dtype=float).copy(),
        {"source": "fine mesh", "grid": [mesh.spec.nx, mesh.spec.ny], "epsilon": float(epsilon)},
    )


def add_noise(d: BoundaryData, level: float, seed: int, gram: np.ndarray | None = None) -> BoundaryData:
    """Add Gaussian noise scaled to ``level`` times the data norm.

    Norms use ``gram`` when given (boundary L2), the Euclidean norm otherwise.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    values = _values(d)
    if level == 0:
        return BoundaryData(values.copy(), d.points, dict(d.provenance))
    g = np.random.default_rng(seed).standard_normal(values.shape)
    gram = np.eye(len(values)) if gram is None else gram

    def nrm(v):
        return np.sqrt(v @ gram @ v)

    noisy = values + level * nrm(values) / nrm(g) * g
    prov = dict(d.provenance, noise_level=level, noise_seed=seed)
    return BoundaryData(noisy, d.points, prov)


def write_boundary_csv(d: BoundaryData, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for (x, y), v in zip(d.points, d.values):
            w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])


def read_boundary_csv(path: str | Path) -> BoundaryData:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return BoundaryData(data[:, 2].copy(), data[:, :2].copy(), {"source": str(path)})


def gram_roundtrip_error(op: ForwardOperator) -> float:
    """max |L L^T - M_b| relative to max |M_b|."""
    return float(np.max(np.abs(op.gram_chol @ op.gram_chol.T - op.gram)) / np.max(np.abs(op.gram)))
