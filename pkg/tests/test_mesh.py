from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from ellsrc.mesh import (DomainSpec, MeshError, boundary_subset, build_structured_mesh,
                         coarsen_to_source_grid, euler_characteristic, horseshoe, load_domain,
                         lshape, rectangle, refine)


def lshape_2x2():
    return DomainSpec(1.0, 1.0, 2, 2, frozenset({(1, 1)}))


def test_single_cell():
    m = build_structured_mesh(rectangle(1, 1, 1, 1))
    assert (m.n_nodes, m.n_cells, len(m.boundary_edges)) == (4, 1, 4)


def test_small_lshape_counts():
    m = build_structured_mesh(lshape_2x2())
    assert (m.n_nodes, m.n_cells, len(m.boundary_edges)) == (8, 3, 8)


def test_32_square_counts():
    m = build_structured_mesh(rectangle(1, 1, 32, 32))
    assert (m.n_nodes, m.n_cells, len(m.boundary_edges)) == (1089, 1024, 128)


def test_disconnected_rejected():
    # removing the middle column splits the domain in two
    spec = DomainSpec(1, 1, 3, 3, frozenset({(1, 0), (1, 1), (1, 2)}))
    with pytest.raises(MeshError, match="connected"):
        build_structured_mesh(spec)


def test_corner_contact_counts_as_disconnected():
    spec = DomainSpec(1, 1, 2, 2, frozenset({(1, 0), (0, 1)}))
    with pytest.raises(MeshError):
        build_structured_mesh(spec)


def test_removing_everything_rejected():
    with pytest.raises(MeshError):
        build_structured_mesh(DomainSpec(1, 1, 1, 1, frozenset({(0, 0)})))


def test_spec_validation():
    with pytest.raises(MeshError):
        DomainSpec(1, 1, 0, 3)
    with pytest.raises(MeshError):
        DomainSpec(1, 1, 2, 2, frozenset({(2, 0)}))
    with pytest.raises(MeshError):
        DomainSpec(-1, 1, 2, 2)


def test_uniform_cell_size():
    spec = rectangle(2.0, 0.5, 8, 4)
    m = build_structured_mesh(spec)
    assert m.cell_size == (0.25, 0.125)
    p = m.nodes[m.cells]
    assert np.allclose(p[:, 2] - p[:, 0], [0.25, 0.125])


def test_refine_single_cell():
    m = refine(build_structured_mesh(rectangle(1, 1, 1, 1)), 2)
    assert (m.n_cells, m.n_nodes) == (4, 9)


def test_refine_to_forward_grid():
    m = refine(build_structured_mesh(rectangle(1, 1, 32, 32)), 2)
    assert (m.spec.nx, m.spec.ny, m.n_cells) == (64, 64, 4096)


def test_refine_factor_validated():
    with pytest.raises(MeshError):
        refine(build_structured_mesh(rectangle(1, 1, 2, 2)), 1)


def _polygon_corners(mesh):
    """Boundary vertices where the loop turns, as a set of coordinates."""
    e = mesh.boundary_edges
    nxt = {a: b for a, b in e}
    prv = {b: a for a, b in e}
    corners = set()
    for v in nxt:
        d_in = mesh.nodes[v] - mesh.nodes[prv[v]]
        d_out = mesh.nodes[nxt[v]] - mesh.nodes[v]
        if abs(d_in[0] * d_out[1] - d_in[1] * d_out[0]) > 1e-12:
            corners.add(tuple(np.round(mesh.nodes[v], 12)))
    return corners


def test_refine_small_lshape_keeps_polygon():
    coarse = build_structured_mesh(lshape_2x2())
    fine = refine(coarse, 2)
    assert fine.spec.removed_cells == frozenset({(2, 2), (3, 2), (2, 3), (3, 3)})
    assert fine.n_cells == 12
    assert _polygon_corners(fine) == _polygon_corners(coarse)
    assert fine.boundary_length() == pytest.approx(coarse.boundary_length())
    # coarse nodes are a subset of the fine nodes
    fine_pts = {tuple(np.round(p, 12)) for p in fine.nodes}
    assert {tuple(np.round(p, 12)) for p in coarse.nodes} <= fine_pts


def test_coarsen_square():
    g = coarsen_to_source_grid(build_structured_mesh(rectangle(1, 1, 32, 32)), 2)
    assert g.n == 256
    assert g.cell_area == pytest.approx(1 / 256)


def test_coarsen_to_single_cell():
    spec = rectangle(1.5, 2.0, 2, 2)
    g = coarsen_to_source_grid(build_structured_mesh(spec), 2)
    assert g.n == 1
    assert g.cell_area == pytest.approx(3.0)
    assert np.allclose(g.centers, [[0.75, 1.0]])


def test_coarsen_lshape():
    g = coarsen_to_source_grid(build_structured_mesh(lshape(32)), 2)
    assert g.n == 192


def test_coarsen_rejects_misaligned_removal():
    spec = DomainSpec(1, 1, 4, 4, frozenset({(3, 3)}))
    with pytest.raises(MeshError, match="aligned"):
        coarsen_to_source_grid(build_structured_mesh(spec), 2)


def test_coarsen_rejects_indivisible():
    with pytest.raises(MeshError):
        coarsen_to_source_grid(build_structured_mesh(rectangle(1, 1, 6, 6)), 4)


@pytest.mark.parametrize("spec", [rectangle(1, 1, 16, 16), lshape(16), horseshoe(16),
                                  rectangle(1, 0.2, 16, 16)])
def test_source_cells_tile_domain(spec):
    mesh = build_structured_mesh(spec)
    g = coarsen_to_source_grid(mesh, 2)
    owner = g.mesh_cell_to_source
    assert owner.min() >= 0
    counts = np.bincount(owner, minlength=g.n)
    assert np.all(counts == 4)
    assert g.n * g.cell_area == pytest.approx(mesh.area)
    # unit L2 norm of the basis function A^-1/2 on a cell of area A
    assert (g.cell_area ** -0.5) ** 2 * g.cell_area == pytest.approx(1.0)
    assert np.array_equal(g.locate(g.centers), np.arange(g.n))


def test_refine_then_coarsen_recovers_partition():
    mesh = build_structured_mesh(horseshoe(8))
    fine = refine(mesh, 2)
    g = coarsen_to_source_grid(fine, 2)
    assert g.n == mesh.n_cells
    assert np.allclose(g.centers, mesh.cell_centers())
    assert g.cell_area == pytest.approx(mesh.cell_area)


def test_boundary_subset_full():
    mesh = build_structured_mesh(rectangle(1, 1, 8, 8))
    sides = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((0, 1), (1, 1)), ((0, 0), (0, 1))]
    assert np.array_equal(boundary_subset(mesh, sides), np.arange(32))


def test_boundary_subset_bottom():
    mesh = build_structured_mesh(rectangle(1, 1, 8, 8))
    ids = boundary_subset(mesh, [((0, 0), (1, 0))])
    assert len(ids) == 8
    mids = mesh.nodes[mesh.boundary_edges[ids]].mean(axis=1)
    assert np.allclose(mids[:, 1], 0.0)


def test_boundary_subset_errors():
    mesh = build_structured_mesh(rectangle(1, 1, 4, 4))
    with pytest.raises(MeshError):
        boundary_subset(mesh, [])
    with pytest.raises(MeshError):
        boundary_subset(mesh, [((0.5, 0.5), (0.5, 0.6))])
    with pytest.raises(MeshError):
        boundary_subset(mesh, [((0, 0), (1, 1))])


@pytest.mark.parametrize("n", [1, 3, 8, 17])
def test_euler_characteristic_rectangles(n):
    assert euler_characteristic(build_structured_mesh(rectangle(1, 1, n, n + 2))) == 1


def test_json_and_raster_roundtrip(tmp_path):
    spec = horseshoe(8)
    assert DomainSpec.from_json(spec.to_json()) == spec
    assert DomainSpec.from_raster(spec.to_raster()) == spec
    p = tmp_path / "dom.txt"
    p.write_text("0000\n0010\n0000\n")
    loaded = load_domain(p)
    assert (loaded.nx, loaded.ny) == (4, 3)
    assert loaded.removed_cells == frozenset({(2, 1)})
    p.write_text(spec.to_json())
    assert load_domain(p) == spec


def _connected(mask):
    _, count = ndimage.label(mask)
    return count == 1


masks = st.integers(2, 6).flatmap(lambda nx: st.integers(2, 6).flatmap(
    lambda ny: st.lists(st.tuples(st.integers(0, nx - 1), st.integers(0, ny - 1)),
                        max_size=nx * ny // 2).map(lambda rem: (nx, ny, frozenset(rem)))))


@settings(max_examples=60, deadline=None)
@given(masks)
def test_boundary_structure_random_domains(data):
    nx, ny, removed = data
    spec = DomainSpec(1.0, 1.0, nx, ny, removed)
    if not _connected(spec.retained_mask()):
        with pytest.raises(MeshError):
            build_structured_mesh(spec)
        return
    mesh = build_structured_mesh(spec)
    e = mesh.boundary_edges
    # closed loops: every boundary node is entered as often as it is left
    assert Counter(e[:, 0].tolist()) == Counter(e[:, 1].tolist())
    # each boundary edge is a side of exactly one retained cell
    sides = Counter()
    for quad in mesh.cells:
        for a, b in zip(quad, np.roll(quad, -1)):
            sides[frozenset((int(a), int(b)))] += 1
    assert all(sides[frozenset(map(int, edge))] == 1 for edge in e)
    assert sum(1 for c in sides.values() if c == 1) == len(e)
    # outward normals point away from the owning cell
    mid = mesh.nodes[e].mean(axis=1)
    owner_center = mesh.cell_centers()[mesh.boundary_edge_cells]
    assert np.all(np.sum(mesh.outward_normals() * (mid - owner_center), axis=1) > 0)
    # Euler characteristic = 1 - number of holes
    holes = ndimage.label(~np.pad(spec.retained_mask(), 1, constant_values=False))[1] - 1
    assert euler_characteristic(mesh) == 1 - holes
