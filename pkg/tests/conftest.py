"""Shared small configurations; session scoped because the SVDs are reused."""

from types import SimpleNamespace

import numpy as np
import pytest

from ellsrc.fem import assemble
from ellsrc.forward import build_forward_matrix
from ellsrc.mesh import build_structured_mesh, coarsen_to_source_grid, horseshoe, lshape, rectangle
from ellsrc.spectral import decompose, weight_operator


def make_context(spec, factor=2, eps=1.0, observed=None, rank_tol=None):
    mesh = build_structured_mesh(spec)
    grid = coarsen_to_source_grid(mesh, factor)
    ops = assemble(mesh, grid, observed)
    op = build_forward_matrix(ops, eps)
    dec = decompose(op, rank_tol)
    return SimpleNamespace(mesh=mesh, grid=grid, ops=ops, op=op, dec=dec,
                           weights=weight_operator(dec))


@pytest.fixture(scope="session")
def square16():
    """Unit square, 16x16 state mesh, 8x8 source grid, eps = 1."""
    return make_context(rectangle(1, 1, 16, 16))


@pytest.fixture(scope="session")
def square4():
    """Unit square, 4x4 state mesh, 2x2 source grid."""
    return make_context(rectangle(1, 1, 4, 4))


@pytest.fixture(scope="session")
def geometries():
    """Every shipped domain shape at 16x16 state resolution."""
    return {
        "square": make_context(rectangle(1, 1, 16, 16)),
        "lshape": make_context(lshape(16)),
        "horseshoe": make_context(horseshoe(16)),
        "rect05": make_context(rectangle(1, 0.5, 16, 16)),
        "rect02": make_context(rectangle(1, 0.2, 16, 16)),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
