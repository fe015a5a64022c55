"""
Structured quadrilateral meshes with removable cells.

A domain is a ``width x height`` rectangle split into ``nx x ny`` congruent
cells, some of which may be removed to form non-convex shapes (L-shapes,
horseshoes).  Cell ``(i, j)`` occupies ``[i*hx, (i+1)*hx] x [j*hy, (j+1)*hy]``.

Everything that enumerates cells (mesh cells, source cells) uses row-major
order by ``(j, i)`` with the origin at the bottom-left corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

_FOUR_NEIGHBOURS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


class MeshError(ValueError):
    """Raised for inconsistent domain, mesh or grid definitions."""


@dataclass(frozen=True)
class DomainSpec:
    width: float
    height: float
    nx: int
    ny: int
    removed_cells: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise MeshError(f"need nx, ny >= 1, got ({self.nx}, {self.ny})")
        if self.width <= 0 or self.height <= 0:
            raise MeshError("width and height must be positive")
        removed = frozenset((int(i), int(j)) for i, j in self.removed_cells)
        for i, j in removed:
            if not (0 <= i < self.nx and 0 <= j < self.ny):
                raise MeshError(f"removed cell {(i, j)} outside the {self.nx}x{self.ny} grid")
        object.__setattr__(self, "removed_cells", removed)

    @property
    def cell_size(self) -> tuple[float, float]:
        return self.width / self.nx, self.height / self.ny

    def retained_mask(self) -> np.ndarray:
        """Boolean array of shape (nx, ny), True where a cell is kept."""
        mask = np.ones((self.nx, self.ny), dtype=bool)
        for i, j in self.removed_cells:
            mask[i, j] = False
        return mask

    def to_json(self) -> str:
        return json.dumps({
            "width": self.width,
            "height": self.height,
            "nx": self.nx,
            "ny": self.ny,
            "removed_cells": sorted([list(c) for c in self.removed_cells]),
        })

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        return cls(
            width=float(data["width"]),
            height=float(data["height"]),
            nx=int(data["nx"]),
            ny=int(data["ny"]),
            removed_cells=frozenset(tuple(c) for c in data.get("removed_cells", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_raster(cls, text: str, width: float = 1.0, height: float = 1.0) -> "DomainSpec":
        """Build a spec from rows of '0'/'1' (1 = removed), top row first."""
        rows = [r.strip() for r in text.strip().splitlines() if r.strip()]
        if not rows:
            raise MeshError("empty raster")
        nx = len(rows[0])
        if any(len(r) != nx for r in rows):
            raise MeshError("raster rows have unequal length")
        ny = len(rows)
        removed = set()
        for row_no, row in enumerate(rows):
            j = ny - 1 - row_no
            for i, ch in enumerate(row):
                if ch == "1":
                    removed.add((i, j))
                elif ch != "0":
                    raise MeshError(f"unexpected raster character {ch!r}")
        return cls(width, height, nx, ny, frozenset(removed))

    def to_raster(self) -> str:
        mask = self.retained_mask()
        lines = []
        for j in reversed(range(self.ny)):
            lines.append("".join("0" if mask[i, j] else "1" for i in range(self.nx)))
        return "\n".join(lines) + "\n"


def rectangle(width: float, height: float, nx: int, ny: int) -> DomainSpec:
    return DomainSpec(width, height, nx, ny)


def remove_box(spec: DomainSpec, x0: float, x1: float, y0: float, y1: float) -> DomainSpec:
    """Remove every cell whose centre lies inside ``[x0, x1] x [y0, y1]``."""
    hx, hy = spec.cell_size
    removed = set(spec.removed_cells)
    for i in range(spec.nx):
        cx = (i + 0.5) * hx
        if not (x0 <= cx <= x1):
            continue
        for j in range(spec.ny):
            cy = (j + 0.5) * hy
            if y0 <= cy <= y1:
                removed.add((i, j))
    return DomainSpec(spec.width, spec.height, spec.nx, spec.ny, frozenset(removed))


def lshape(n: int) -> DomainSpec:
    """Unit square minus the upper-right quadrant ``[0.5, 1] x [0.5, 1]``."""
    return remove_box(rectangle(1.0, 1.0, n, n), 0.5, 1.0, 0.5, 1.0)


def horseshoe(n: int) -> DomainSpec:
    """Unit square minus the slot ``[0.375, 0.625] x [0.375, 1]`` (opening upward)."""
    return remove_box(rectangle(1.0, 1.0, n, n), 0.375, 0.625, 0.375, 1.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Bilinear quadrilateral mesh of a structured domain.

    Attributes
    ----------
    spec : DomainSpec
    nodes : (N, 2) array of node coordinates
    cells : (C, 4) array of node ids, counter-clockwise from the lower-left corner
    cell_ij : (C, 2) lattice indices of each cell
    boundary_edges : (E, 2) node id pairs; the domain lies to the left of each edge
    boundary_edge_cells : (E,) the retained cell owning each boundary edge
    node_lattice : (nx+1, ny+1) map from lattice ``(i, j)`` to node id, -1 if absent
    """

    spec: DomainSpec
    nodes: np.ndarray
    cells: np.ndarray
    cell_ij: np.ndarray
    boundary_edges: np.ndarray
    boundary_edge_cells: np.ndarray
    node_lattice: np.ndarray

    @property
    def cell_size(self) -> tuple[float, float]:
        return self.spec.cell_size

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def cell_area(self) -> float:
        hx, hy = self.cell_size
        return hx * hy

    @property
    def area(self) -> float:
        return self.n_cells * self.cell_area

    @property
    def node_index(self) -> dict:
        ii, jj = np.nonzero(self.node_lattice >= 0)
        return {(int(i), int(j)): int(self.node_lattice[i, j]) for i, j in zip(ii, jj)}

    def cell_centers(self) -> np.ndarray:
        hx, hy = self.cell_size
        return (self.cell_ij + 0.5) * np.array([hx, hy])

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def edge_lengths(self, edges: np.ndarray | None = None) -> np.ndarray:
        edges = self.boundary_edges if edges is None else edges
        d = self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def outward_normals(self) -> np.ndarray:
        """Unit outward normal of each boundary edge (right of the edge direction)."""
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def boundary_length(self) -> float:
        return float(self.edge_lengths().sum())


def _check_connected(mask: np.ndarray) -> None:
    labels, count = ndimage.label(mask, structure=_FOUR_NEIGHBOURS)
    if count == 0:
        raise MeshError("every cell has been removed")
    if count > 1:
        sizes = np.bincount(labels.ravel())[1:]
        raise MeshError(
            f"retained cells form {count} edge-connected components (sizes {sizes.tolist()}); "
            "a single connected domain is required"
        )


def build_structured_mesh(spec: DomainSpec) -> Mesh:
    mask = spec.retained_mask()
    _check_connected(mask)
    nx, ny = spec.nx, spec.ny
    hx, hy = spec.cell_size

    # a lattice node exists when at least one of its four surrounding cells is kept
    used = np.zeros((nx + 1, ny + 1), dtype=bool)
    used[:-1, :-1] |= mask
    used[1:, :-1] |= mask
    used[:-1, 1:] |= mask
    used[1:, 1:] |= mask

    node_lattice = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    jj, ii = np.nonzero(used.T)  # row-major by (j, i)
    node_lattice[ii, jj] = np.arange(len(ii))
    nodes = np.column_stack([ii * hx, jj * hy]).astype(float)

    cj, ci = np.nonzero(mask.T)
    cell_ij = np.column_stack([ci, cj])
    cells = np.column_stack([
        node_lattice[ci, cj],
        node_lattice[ci + 1, cj],
        node_lattice[ci + 1, cj + 1],
        node_lattice[ci, cj + 1],
    ])

    padded = np.zeros((nx + 2, ny + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    edges, owners = [], []
    # (neighbour offset, local corner pair) for bottom, right, top, left sides
    sides = [((0, -1), (0, 1)), ((1, 0), (1, 2)), ((0, 1), (2, 3)), ((-1, 0), (3, 0))]
    for c, (i, j) in enumerate(cell_ij):
        for (di, dj), (a, b) in sides:
            if not padded[i + 1 + di, j + 1 + dj]:
                edges.append((cells[c, a], cells[c, b]))
                owners.append(c)
    return Mesh(
        spec=spec,
        nodes=nodes,
        cells=cells,
        cell_ij=cell_ij,
        boundary_edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        boundary_edge_cells=np.asarray(owners, dtype=np.int64),
        node_lattice=node_lattice,
    )


def refine(mesh: Mesh, factor: int) -> Mesh:
    """Split every cell into ``factor**2`` congruent cells."""
    if factor < 2:
        raise MeshError(f"refinement factor must be >= 2, got {factor}")
    s = mesh.spec
    removed = frozenset(
        (factor * i + a, factor * j + b)
        for i, j in s.removed_cells
        for a in range(factor)
        for b in range(factor)
    )
    return build_structured_mesh(
        DomainSpec(s.width, s.height, s.nx * factor, s.ny * factor, removed)
    )


@dataclass(frozen=True, eq=False)
class SourceGrid:
    """Coarse disjoint cells carrying the piecewise-constant source basis.

    Basis function ``i`` is ``cell_area**-0.5`` on block ``blocks[i]`` and
    zero elsewhere, so the basis is orthonormal in L2.
    """

    nx: int
    ny: int
    factor: int
    block_size: tuple
    blocks: np.ndarray
    cell_area: float
    centers: np.ndarray
    block_lattice: np.ndarray
    mesh_cell_to_source: np.ndarray

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def cells(self) -> list:
        return [tuple(int(v) for v in b) for b in self.blocks]

    @property
    def mask(self) -> np.ndarray:
        return self.block_lattice >= 0

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Source index containing each point (points strictly inside cells); -1 if none."""
        points = np.atleast_2d(points)
        bx, by = self.block_size
        i = np.clip(np.floor(points[:, 0] / bx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(points[:, 1] / by).astype(int), 0, self.ny - 1)
        return self.block_lattice[i, j]

    def to_lattice(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Scatter per-source values onto an (nx, ny) array."""
        out = np.full((self.nx, self.ny), fill, dtype=float)
        out[self.blocks[:, 0], self.blocks[:, 1]] = values
        return out


def coarsen_to_source_grid(mesh: Mesh, factor: int) -> SourceGrid:
    """Group ``factor x factor`` blocks of mesh cells into source cells."""
    if factor < 1:
        raise MeshError(f"coarsening factor must be >= 1, got {factor}")
    s = mesh.spec
    if s.nx % factor or s.ny % factor:
        raise MeshError(f"mesh {s.nx}x{s.ny} is not divisible by factor {factor}")
    mask = s.retained_mask()
    bnx, bny = s.nx // factor, s.ny // factor
    counts = mask.reshape(bnx, factor, bny, factor).sum(axis=(1, 3))
    partial = (counts > 0) & (counts < factor * factor)
    if partial.any():
        bad = [tuple(int(v) for v in b) for b in np.argwhere(partial)[:5]]
        raise MeshError(f"removed cells are not aligned to {factor}x{factor} blocks, e.g. blocks {bad}")
    full = counts == factor * factor

    block_lattice = -np.ones((bnx, bny), dtype=np.int64)
    bj, bi = np.nonzero(full.T)
    block_lattice[bi, bj] = np.arange(len(bi))
    blocks = np.column_stack([bi, bj])

    hx, hy = s.cell_size
    bx, by = factor * hx, factor * hy
    centers = (blocks + 0.5) * np.array([bx, by])
    owner = block_lattice[mesh.cell_ij[:, 0] // factor, mesh.cell_ij[:, 1] // factor]
    return SourceGrid(
        nx=bnx,
        ny=bny,
        factor=factor,
        block_size=(bx, by),
        blocks=blocks,
        cell_area=bx * by,
        centers=centers,
        block_lattice=block_lattice,
        mesh_cell_to_source=owner,
    )


Segment = tuple  # ((x0, y0), (x1, y1)), axis-aligned


def boundary_subset(mesh: Mesh, segments: Iterable[Segment], tol: float = 1e-9) -> np.ndarray:
    """Ids of boundary edges whose midpoints lie on one of the given segments."""
    segments = list(segments)
    if not segments:
        raise MeshError("no observation segments given")
    mid = 0.5 * (mesh.nodes[mesh.boundary_edges[:, 0]] + mesh.nodes[mesh.boundary_edges[:, 1]])
    hit = np.zeros(len(mid), dtype=bool)
    for (x0, y0), (x1, y1) in segments:
        if abs(x0 - x1) > tol and abs(y0 - y1) > tol:
            raise MeshError(f"segment {((x0, y0), (x1, y1))} is not axis-aligned")
        lo = np.minimum([x0, y0], [x1, y1]) - tol
        hi = np.maximum([x0, y0], [x1, y1]) + tol
        hit |= np.all((mid >= lo) & (mid <= hi), axis=1)
    ids = np.flatnonzero(hit)
    if ids.size == 0:
        raise MeshError("observation segments do not cover any boundary edge")
    return ids


def load_domain(path: str | Path) -> DomainSpec:
    """Read a DomainSpec from JSON or from a '0'/'1' raster text file."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return DomainSpec.from_json(text)
    return DomainSpec.from_raster(text)


def euler_characteristic(mesh: Mesh) -> int:
    """nodes - edges + cells for the planar cell complex."""
    edges = set()
    for quad in mesh.cells:
        for a, b in zip(quad, np.roll(quad, -1)):
            edges.add((min(a, b), max(a, b)))
    return mesh.n_nodes - len(edges) + mesh.n_cells


__all__: Sequence[str] = [
    "DomainSpec", "Mesh", "MeshError", "SourceGrid", "boundary_subset",
    "build_structured_mesh", "coarsen_to_source_grid", "euler_characteristic",
    "horseshoe", "load_domain", "lshape", "rectangle", "refine", "remove_box",
]
