"""
SVD of the Gram-weighted forward matrix: numerical rank, projections onto
the nullspace and its complement, the diagonal weights, minimum-norm
least-squares solutions and recovery/decay profiles.

In the orthonormal source basis the source space is plain R^n, so the
projector onto the complement of the nullspace is ``V_r @ V_r.T`` where
``V_r`` holds the leading ``r`` right singular vectors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import ForwardOperator, _values
from .mesh import SourceGrid


class WeightFloorError(ValueError):
    """A basis function lies (numerically) in the nullspace."""


@dataclass(eq=False)
class SpectralDecomposition:
    singular_values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    rank: int
    tol: float
    weighted: np.ndarray
    gram_chol: np.ndarray

    @property
    def n(self) -> int:
        return self.right_vectors.shape[0]

    @property
    def range_basis(self) -> np.ndarray:
        return self.right_vectors[:, : self.rank]

    @property
    def null_basis(self) -> np.ndarray:
        return self.right_vectors[:, self.rank:]

    @property
    def P(self) -> np.ndarray:
        vr = self.range_basis
        return vr @ vr.T

    @property
    def PN(self) -> np.ndarray:
        vn = self.null_basis
        return vn @ vn.T

    def spectrum(self) -> np.ndarray:
        """Rows of (index, sigma_i / sigma_1)."""
        s = self.singular_values
        rel = s / s[0] if s.size and s[0] > 0 else np.zeros_like(s)
        return np.column_stack([np.arange(1, s.size + 1), rel])


def default_rank_tol(m: int, n: int) -> float:
    return max(m, n) * np.finfo(float).eps


def decompose_matrix(weighted: np.ndarray, rank_tol: float | None = None,
                     gram_chol: np.ndarray | None = None) -> SpectralDecomposition:
    """Decompose an already Gram-weighted matrix (``L.T @ K``)."""
    weighted = np.asarray(weighted, dtype=float)
    m, n = weighted.shape
    tol = default_rank_tol(m, n) if rank_tol is None else float(rank_tol)
    if not 0 < tol < 1:
        raise ValueError(f"rank_tol must lie in (0, 1), got {tol}")
    try:
        u, s, vt = np.linalg.svd(weighted, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"SVD of the weighted forward matrix failed: {exc}")
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return SpectralDecomposition(
        singular_values=s,
        right_vectors=vt.T,
        left_vectors=u[:, : s.size],
        rank=rank,
        tol=tol,
        weighted=weighted,
        gram_chol=np.eye(m) if gram_chol is None else gram_chol,
    )


def decompose(op: ForwardOperator, rank_tol: float | None = None) -> SpectralDecomposition:
    return decompose_matrix(op.weighted, rank_tol, op.gram_chol)


def project(decomp: SpectralDecomposition, x: np.ndarray, which: str = "range") -> np.ndarray:
    """Apply ``P`` (``which='range'``) or ``P^N = I - P`` (``which='null'``)."""
    x = np.asarray(x, dtype=float)
    vr = decomp.range_basis
    px = vr @ (vr.T @ x)
    if which == "range":
        return px
    if which == "null":
        return x - px
    raise ValueError(f"which must be 'range' or 'null', got {which!r}")


@dataclass
class Weights:
    w: np.ndarray
    floor: float

    @property
    def inverse(self) -> np.ndarray:
        return 1.0 / self.w

    def summary(self) -> dict:
        return {"min": float(self.w.min()), "max": float(self.w.max()), "floor": self.floor}


def weight_operator(decomp: SpectralDecomposition, floor: float = 1e-8) -> Weights:
    """Diagonal weights ``w_i = ||P e_i||``."""
    if floor <= 0:
        raise ValueError("weight floor must be positive")
    w = np.linalg.norm(decomp.range_basis, axis=1)
    bad = np.flatnonzero(w < floor)
    if bad.size:
        raise WeightFloorError(
            f"{bad.size} basis functions project below the weight floor {floor:g} "
            f"(indices {bad[:10].tolist()}); their images are numerically zero"
        )
    return Weights(w, floor)


def min_norm_solution(decomp: SpectralDecomposition, d) -> np.ndarray:
    """Minimum-norm least-squares solution of ``K x = d`` (raw boundary values)."""
    dw = decomp.gram_chol.T @ _values(d)
    return min_norm_weighted(decomp, dw)


def min_norm_weighted(decomp: SpectralDecomposition, dw: np.ndarray) -> np.ndarray:
    """Same as :func:`min_norm_solution` for data already multiplied by ``L.T``."""
    r = decomp.rank
    ur = decomp.left_vectors[:, :r]
    coef = (ur.T @ dw) / (decomp.singular_values[:r] if dw.ndim == 1
                          else decomp.singular_values[:r, None])
    return decomp.range_basis @ coef


def basis_recovery(decomp: SpectralDecomposition, weights: Weights, j: int) -> np.ndarray:
    """``W^{-1} x_j^*`` through the pseudoinverse of the image of basis function ``j``."""
    return min_norm_weighted(decomp, decomp.weighted[:, j]) / weights.w


def recovery_by_cosines(decomp: SpectralDecomposition, j: int) -> np.ndarray:
    """``||P e_j|| * cos(P e_j, P e_i)`` for every ``i``."""
    vr = decomp.range_basis
    proj = vr @ vr.T  # columns are P e_i
    norms = np.linalg.norm(proj, axis=0)
    return norms[j] * (proj.T @ proj[:, j]) / (norms * norms[j])


def recovery_by_point_values(decomp: SpectralDecomposition, j: int, cell_area: float) -> np.ndarray:
    """``sqrt(A) * (P phi_j)(z_i) / ||P phi_i||`` using point values in each cell."""
    vr = decomp.range_basis
    p_phi_j_at = (vr @ vr[j]) * cell_area ** -0.5  # value of P phi_j in cell i
    return cell_area ** 0.5 * p_phi_j_at / np.linalg.norm(vr, axis=1)


def recovery_by_nullspace(decomp: SpectralDecomposition, j: int, cell_area: float) -> np.ndarray:
    """The same vector written with the nullspace projection ``P^N``."""
    vn = decomp.null_basis
    pn_phi_j_at = (vn @ vn[j]) * cell_area ** -0.5
    pn_norm_sq = np.sum(vn * vn, axis=1)
    denom = np.sqrt(1.0 - pn_norm_sq)
    out = -cell_area ** 0.5 * pn_phi_j_at / denom
    out[j] = cell_area ** 0.5 * (cell_area ** -0.5 - pn_phi_j_at[j]) / denom[j]
    return out


@dataclass
class DecayProfile:
    j: int
    index: np.ndarray
    distance: np.ndarray
    value: np.ndarray

    def rows(self):
        return zip(self.index.tolist(), self.distance.tolist(), self.value.tolist())

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "distance", "value"])
            for i, dist, v in self.rows():
                w.writerow([i, f"{dist:.17g}", f"{v:.17g}"])


def decay_profile(decomp: SpectralDecomposition, weights: Weights, j: int,
                  grid: SourceGrid) -> DecayProfile:
    """Recovered coefficient of every cell for a unit source in cell ``j``, by distance."""
    if not 0 <= j < grid.n:
        raise IndexError(f"source index {j} out of range [0, {grid.n})")
    vr = decomp.range_basis
    value = (vr @ vr[j]) / weights.w
    dist = np.linalg.norm(grid.centers - grid.centers[j], axis=1)
    order = np.argsort(dist, kind="stable")
    return DecayProfile(j, order, dist[order], value[order])


def write_spectrum_csv(decomp: SpectralDecomposition, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "relative_singular_value"])
        for i, v in decomp.spectrum():
            w.writerow([int(i), f"{v:.17g}"])
