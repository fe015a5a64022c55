import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellsrc.forward import BoundaryData
from ellsrc.inversion import (METHODS, compare_methods_on_basis, method_I, method_II, method_III,
                              normal_equation_residual, run_method, tikhonov)
from ellsrc.mesh import rectangle
from ellsrc.spectral import min_norm_solution

from conftest import make_context


def _data(ctx, rng):
    return BoundaryData(ctx.op.K @ rng.standard_normal(ctx.op.n))


def test_basis_argmax_at_tiny_alpha(square16):
    op, w = square16.op, square16.weights
    for j in range(op.n):
        est = method_I(op, w, op.K[:, j], 1e-12)
        assert np.argmax(est.coefficients) == j


@pytest.mark.parametrize("method", METHODS)
def test_zero_data_gives_zero(square16, method):
    est = run_method(method, square16.op, square16.weights, np.zeros(square16.op.m), 1e-6)
    assert np.all(est.coefficients == 0)
    assert est.residual == 0


def test_large_alpha_decay(square16, rng):
    op, w = square16.op, square16.weights
    d = _data(square16, rng)
    s1 = square16.dec.singular_values[0] ** 2
    norms = [np.linalg.norm(method_I(op, w, d, a).extra["x_alpha"]) for a in (1e4 * s1, 1e5 * s1, 1e6 * s1)]
    assert norms[0] > norms[1] > norms[2]
    # O(1/alpha): one decade of alpha shrinks the solution tenfold
    assert norms[0] / norms[1] == pytest.approx(10, rel=1e-3)
    assert norms[1] / norms[2] == pytest.approx(10, rel=1e-3)


def test_method_II_equals_I_without_nullspace(square4, rng):
    assert np.allclose(square4.weights.w, 1.0, atol=1e-12)
    d = _data(square4, rng)
    a = method_I(square4.op, square4.weights, d, 1e-6).coefficients
    b = method_II(square4.op, square4.weights, d, 1e-6).coefficients
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1e-10, 1e-6, 1e-2]))
def test_method_III_is_scaled_method_II(square16, seed, alpha):
    op, w = square16.op, square16.weights
    d = np.random.default_rng(seed).standard_normal(op.m)
    y = method_II(op, w, d, alpha).coefficients
    z = method_III(op, w, d, alpha).coefficients
    assert np.max(np.abs(z - y / w.w)) <= 1e-12 * max(1.0, np.max(np.abs(z)))


def test_method_III_direct_solve(square16, rng):
    # the direct normal-equation route loses digits at smaller alpha; 1e-4 keeps it accurate
    op, w = square16.op, square16.weights
    d = _data(square16, rng)
    alpha = 1e-4
    kt = op.weighted
    z_direct = np.linalg.solve(kt.T @ kt + alpha * np.diag(w.w ** 2), kt.T @ op.weight_data(d))
    z = method_III(op, w, d, alpha).coefficients
    assert np.linalg.norm(z - z_direct) <= 1e-10 * np.linalg.norm(z)


@pytest.mark.parametrize("alpha", [1e-12, 1e-6, 1e-2])
def test_normal_equation_residuals(square16, rng, alpha):
    d = _data(square16, rng)
    for m in METHODS:
        est = run_method(m, square16.op, square16.weights, d, alpha)
        assert normal_equation_residual(square16.op, square16.weights, d, est) <= 1e-10


def test_estimate_bookkeeping(square16, rng):
    op, w = square16.op, square16.weights
    d = _data(square16, rng)
    for m in METHODS:
        est = run_method(m, op, w, d, 1e-6)
        assert est.method == m and est.alpha == 1e-6
        assert np.array_equal(est.field, est.coefficients * op.source_grid.cell_area ** -0.5)
        assert abs(est.residual - op.norm(op.K @ est.coefficients - d.values)) <= 1e-12
        assert est.penalty >= 0


def test_invalid_inputs(square16):
    with pytest.raises(ValueError):
        method_I(square16.op, square16.weights, np.zeros(square16.op.m), 0.0)
    with pytest.raises(ValueError):
        run_method("IV", square16.op, square16.weights, np.zeros(square16.op.m), 1e-6)
    with pytest.raises(IndexError):
        compare_methods_on_basis(square16.op, square16.weights, -1, [1e-6])


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_alpha_limit(eps, rng):
    ctx = make_context(rectangle(1, 1, 4, 4), eps=eps)
    d = _data(ctx, rng)
    xstar = min_norm_solution(ctx.dec, d)
    dist = [np.linalg.norm(method_I(ctx.op, ctx.weights, d, a).extra["x_alpha"] - xstar)
            for a in (1e-6, 1e-9, 1e-12)]
    assert dist[0] > dist[1] > dist[2]
    assert dist[2] <= 1e-6 * np.linalg.norm(xstar)


def test_alpha_limit_with_nullspace():
    # Poisson mode has the constants in the nullspace, so x* differs from any exact preimage
    ctx = make_context(rectangle(1, 1, 8, 8), factor=4, eps=0.0)
    assert ctx.dec.rank < ctx.dec.n
    d = ctx.op.K @ np.arange(1.0, ctx.dec.n + 1)
    xstar = min_norm_solution(ctx.dec, d)
    assert abs(xstar.mean()) <= 1e-10
    x = method_I(ctx.op, ctx.weights, d, 1e-12).extra["x_alpha"]
    assert np.linalg.norm(x - xstar) <= 1e-6 * np.linalg.norm(xstar)


def test_method_superposition(square16, rng):
    op, w = square16.op, square16.weights
    for _ in range(3):
        i, j = rng.choice(op.n, 2, replace=False)
        joint = method_I(op, w, op.K[:, i] + op.K[:, j], 1e-6).coefficients
        parts = method_I(op, w, op.K[:, i], 1e-6).coefficients + method_I(op, w, op.K[:, j], 1e-6).coefficients
        assert np.linalg.norm(joint - parts) <= 1e-10 * np.linalg.norm(parts)


def test_scaled_method_II_beats_method_I(square16):
    op, w = square16.op, square16.weights
    for j in range(op.n):
        cmp = compare_methods_on_basis(op, w, j, [1e-12])
        assert cmp.error_II_scaled[0] <= cmp.error_I[0] + 1e-8


def test_comparison_sweep(square16):
    alphas = 10.0 ** -np.arange(2, 13)
    cmp = compare_methods_on_basis(square16.op, square16.weights, 27, alphas)
    table = np.array([cmp.error_I, cmp.error_II_scaled, cmp.error_III])
    assert np.all(np.isfinite(table)) and np.all(table > 0)
    ratios = table[:, 1:] / table[:, :-1]
    assert np.all((ratios > 0.01) & (ratios < 100))
    assert len(list(cmp.rows())) == len(alphas)


def test_tikhonov_columns(square16, rng):
    dw = square16.op.weighted @ rng.standard_normal((square16.op.n, 2))
    both = tikhonov(square16.op, dw, 1e-6)
    assert np.allclose(both[:, 0], tikhonov(square16.op, dw[:, 0], 1e-6))
