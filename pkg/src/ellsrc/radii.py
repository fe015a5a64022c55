"""
Peak detection on recovered fields and radius fitting for constant-magnitude
disk sources with known centres.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import AssembledOperators, cell_load, solve_load
from .forward import _values
from .mesh import Mesh, SourceGrid

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Peak:
    index: int
    position: tuple
    value: float


@dataclass
class PeakSet:
    peaks: list
    threshold: float

    def __len__(self):
        return len(self.peaks)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.peaks], dtype=float).reshape(-1, 2)


def detect_peaks(field: np.ndarray, grid: SourceGrid, theta: float = 0.25) -> PeakSet:
    """Cells whose value is >= every retained 8-neighbour and >= theta * max."""
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    field = np.asarray(field, dtype=float)
    if field.size == 0 or not np.isfinite(field).all() or field.max() <= 0:
        return PeakSet([], theta)
    lat = grid.to_lattice(field, fill=-np.inf)
    padded = np.pad(lat, 1, constant_values=-np.inf)
    nx, ny = lat.shape
    dominant = np.ones_like(lat, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            dominant &= lat >= padded[1 + di: 1 + di + nx, 1 + dj: 1 + dj + ny]
    cutoff = theta * field.max()
    peaks = []
    for i, j in np.argwhere(dominant & (lat >= cutoff) & grid.mask):
        idx = int(grid.block_lattice[i, j])
        peaks.append(Peak(idx, tuple(float(v) for v in grid.centers[idx]), float(field[idx])))
    peaks.sort(key=lambda p: (-p.value, p.index))
    return PeakSet(peaks, theta)


@dataclass
class RadiiProblem:
    centers: np.ndarray
    magnitude: float
    r_max: np.ndarray
    radii: np.ndarray = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        m = len(self.centers)
        self.r_max = np.broadcast_to(np.asarray(self.r_max, dtype=float), (m,)).copy()
        if self.radii is None:
            self.radii = np.zeros(m)
        self.radii = np.clip(np.asarray(self.radii, dtype=float), 0.0, self.r_max)


def _cell_geometry(cells) -> tuple[np.ndarray, tuple]:
    if isinstance(cells, Mesh):
        hx, hy = cells.cell_size
        return cells.cell_ij * np.array([hx, hy]), (hx, hy)
    if isinstance(cells, SourceGrid):
        bx, by = cells.block_size
        return cells.blocks * np.array([bx, by]), (bx, by)
    raise TypeError("expected a Mesh or a SourceGrid")


def rasterize_balls(problem: RadiiProblem, cells, subsample: int = 4,
                    radii: np.ndarray | None = None) -> np.ndarray:
    """Known magnitude times the fraction of each cell covered by the union of disks.

    Coverage is averaged over a ``subsample x subsample`` grid of points per
    cell.  Each point is covered by a disk through a linear ramp of one
    sample spacing ``delta`` centred on the rim, ``clip((r - dist)/delta + 1/2)``,
    damped by ``min(1, 2r/delta)`` so a zero radius covers nothing.  This keeps
    the result continuous and nondecreasing in every radius.  ``radii``
    overrides ``problem.radii``.
    """
    if subsample < 1:
        raise ValueError("subsample must be >= 1")
    origin, (hx, hy) = _cell_geometry(cells)
    centers = problem.centers
    radii = problem.radii if radii is None else np.asarray(radii, dtype=float)
    delta = max(hx, hy) / subsample
    t = (np.arange(subsample) + 0.5) / subsample
    offs = np.stack(np.meshgrid(t * hx, t * hy, indexing="ij"), axis=-1).reshape(-1, 2)
    cover = np.zeros((len(origin), len(offs)))
    for c, r in zip(centers, radii):
        if r <= 0:
            continue
        reach = r + 0.5 * delta
        # only cells whose box can meet the widened disk
        near = np.all((origin + np.array([hx, hy]) > c - reach) & (origin < c + reach), axis=1)
        if not near.any():
            continue
        pts = origin[near, None, :] + offs[None, :, :]
        dist = np.sqrt(np.sum((pts - c) ** 2, axis=-1))
        ramp = np.clip((r - dist) / delta + 0.5, 0.0, 1.0) * min(1.0, 2.0 * r / delta)
        cover[near] = np.maximum(cover[near], ramp)
    return problem.magnitude * cover.mean(axis=1)


class RadiiObjective:
    """``J(r) = 0.5 * ||u(r)|_boundary - d||^2`` in the observed boundary L2 norm."""

    def __init__(self, problem: RadiiProblem, ops: AssembledOperators, epsilon: float,
                 d, subsample: int = 4):
        self.problem = problem
        self.ops = ops
        self.epsilon = float(epsilon)
        self.d = _values(d)
        self.subsample = subsample
        self.n_evals = 0

    def field(self, radii) -> np.ndarray:
        return rasterize_balls(self.problem, self.ops.mesh, self.subsample, radii=radii)

    def trace(self, radii) -> np.ndarray:
        u = solve_load(self.ops, cell_load(self.ops.mesh, self.field(radii)), self.epsilon)
        return u[self.ops.boundary_nodes]

    def __call__(self, radii) -> float:
        self.n_evals += 1
        r = self.trace(radii) - self.d
        return 0.5 * float(r @ (self.ops.boundary_mass @ r))


def golden_section(f, lo: float, hi: float, tol: float = 1e-4, max_iter: int = 200):
    """Minimize a scalar function on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


@dataclass
class RadiiResult:
    centers: np.ndarray
    radii: np.ndarray
    objective: float
    sweeps: int
    history: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
            "objective": self.objective,
            "sweeps": self.sweeps,
        })

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def optimize_radii(problem: RadiiProblem, objective: RadiiObjective, tol: float = 1e-4,
                   max_sweeps: int = 50) -> RadiiResult:
    """Coordinate descent over the radii with golden-section line searches.

    A coordinate update is kept only if it lowers the objective, so the
    recorded history is nonincreasing.
    """
    if len(problem.centers) == 0:
        raise ValueError("at least one centre is required")
    if tol <= 0:
        raise ValueError("tol must be positive")
    radii = problem.radii.copy()
    best = objective(radii)
    history = [best]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        biggest = 0.0
        for k in range(len(radii)):
            def along(t, k=k):
                trial = radii.copy()
                trial[k] = t
                return objective(trial)

            t, ft = golden_section(along, 0.0, float(problem.r_max[k]), tol=0.5 * tol)
            f0 = along(0.0)
            if f0 < ft:
                t, ft = 0.0, f0
            if ft < best:
                biggest = max(biggest, abs(t - radii[k]))
                radii[k] = t
                best = ft
                history.append(best)
        if biggest < tol:
            break
    problem.radii = radii
    return RadiiResult(problem.centers.copy(), radii, best, sweeps, history)
