"""
Weighted Tikhonov inversion schemes.

All three methods fit Gram-weighted boundary data ``L.T @ d`` with the
Gram-weighted forward matrix ``Kt = L.T @ K``:

* Method I   : standard Tikhonov ``x_a``, reported as ``W^{-1} x_a``.
* Method II  : Tikhonov for ``y`` in ``Kt W^{-1} y = d``; reports ``y_a``.
* Method III : penalty ``alpha * ||W z||^2``; reports ``z_a = W^{-1} y_a``.

Each regularized problem is solved through the SVD of its system matrix
(filter factors ``s / (s**2 + alpha)``) rather than the normal equations,
whose conditioning squares that of the problem and is too poor at the
small alphas the recovery results are stated for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import BoundaryData, ForwardOperator, _values
from .spectral import Weights

METHODS = ("I", "II", "III")


@dataclass
class SourceEstimate:
    coefficients: np.ndarray
    field: np.ndarray
    method: str
    alpha: float
    residual: float
    penalty: float
    extra: dict = field(default_factory=dict)


def _svd(op: ForwardOperator, scale: np.ndarray | None):
    cache = op.__dict__.setdefault("_svd_cache", {})
    key = None if scale is None else scale.tobytes()
    if key not in cache:
        a = op.weighted if scale is None else op.weighted * scale[None, :]
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        cache[key] = (u, s, vt)
    return cache[key]


def tikhonov(op: ForwardOperator, dw: np.ndarray, alpha: float,
             scale: np.ndarray | None = None) -> np.ndarray:
    """Minimizer of ``||Kt diag(scale) v - dw||^2 + alpha ||v||^2``.

    ``dw`` is Gram-weighted data; a 2-D ``dw`` solves column by column.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    u, s, vt = _svd(op, scale)
    filt = s / (s * s + alpha)
    coef = u.T @ dw
    coef = coef * (filt if coef.ndim == 1 else filt[:, None])
    return vt.T @ coef


def _estimate(op, d, coeffs, method, alpha, penalty, extra=None) -> SourceEstimate:
    area = op.source_grid.cell_area
    residual = op.norm(op.K @ coeffs - _values(d))
    return SourceEstimate(
        coefficients=coeffs,
        field=coeffs * area ** -0.5,
        method=method,
        alpha=float(alpha),
        residual=residual,
        penalty=float(penalty),
        extra=extra or {},
    )


def method_I(op: ForwardOperator, weights: Weights, d, alpha: float = 1e-6) -> SourceEstimate:
    x = tikhonov(op, op.weight_data(d), alpha)
    return _estimate(op, d, x / weights.w, "I", alpha, 0.5 * alpha * x @ x, {"x_alpha": x})


def method_II(op: ForwardOperator, weights: Weights, d, alpha: float = 1e-6) -> SourceEstimate:
    y = tikhonov(op, op.weight_data(d), alpha, scale=weights.inverse)
    return _estimate(op, d, y, "II", alpha, 0.5 * alpha * y @ y)


def method_III(op: ForwardOperator, weights: Weights, d, alpha: float = 1e-6) -> SourceEstimate:
    y = tikhonov(op, op.weight_data(d), alpha, scale=weights.inverse)
    z = y / weights.w
    return _estimate(op, d, z, "III", alpha, 0.5 * alpha * y @ y)


def run_method(name: str, op: ForwardOperator, weights: Weights, d, alpha: float) -> SourceEstimate:
    try:
        fn = {"I": method_I, "II": method_II, "III": method_III}[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; expected one of {METHODS}") from None
    return fn(op, weights, d, alpha)


def normal_equation_residual(op: ForwardOperator, weights: Weights, d, est: SourceEstimate) -> float:
    """Backward-error style residual of the optimality system behind ``est``.

    ``||M v - rhs|| / (||M|| ||v|| + ||rhs||)`` for the method's own unknown ``v``.
    """
    kt = op.weighted
    dw = op.weight_data(d)
    w = weights.w
    n = op.n
    if est.method == "I":
        v = est.coefficients * w
        m = kt.T @ kt + est.alpha * np.eye(n)
        rhs = kt.T @ dw
    elif est.method == "II":
        v = est.coefficients
        a = kt / w[None, :]
        m = a.T @ a + est.alpha * np.eye(n)
        rhs = a.T @ dw
    else:
        v = est.coefficients
        m = kt.T @ kt + est.alpha * np.diag(w * w)
        rhs = kt.T @ dw
    r = m @ v - rhs
    return float(np.linalg.norm(r) / (np.linalg.norm(m, 2) * np.linalg.norm(v) + np.linalg.norm(rhs)))


@dataclass
class BasisComparison:
    j: int
    alpha: np.ndarray
    error_I: np.ndarray
    error_II_scaled: np.ndarray
    error_III: np.ndarray

    def rows(self):
        return list(zip(self.alpha.tolist(), self.error_I.tolist(),
                        self.error_II_scaled.tolist(), self.error_III.tolist()))


def compare_methods_on_basis(op: ForwardOperator, weights: Weights, j: int,
                             alpha_list) -> BasisComparison:
    """L2 distance to ``phi_j`` of each method applied to the image of ``phi_j``.

    Method II is scaled by ``1 / ||P phi_j||`` before comparison.
    """
    if not 0 <= j < op.n:
        raise IndexError(f"source index {j} out of range [0, {op.n})")
    e = np.zeros(op.n)
    e[j] = 1.0
    d = BoundaryData(op.K[:, j].copy())
    alphas = np.asarray(list(alpha_list), dtype=float)
    out = np.zeros((3, alphas.size))
    for k, a in enumerate(alphas):
        out[0, k] = np.linalg.norm(e - method_I(op, weights, d, a).coefficients)
        y = method_II(op, weights, d, a).coefficients
        out[1, k] = np.linalg.norm(e - y / weights.w[j])
        out[2, k] = np.linalg.norm(e - y / weights.w)
    return BasisComparison(j, alphas, out[0], out[1], out[2])
