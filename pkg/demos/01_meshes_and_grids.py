"""
Meshes, removed cells and nested grids
======================================

Every domain is a structured rectangle with some cells switched off.  The
same description is refined for data synthesis and coarsened into the
source cells that carry the unknown.
"""

import numpy as np

from ellsrc.mesh import (build_structured_mesh, coarsen_to_source_grid, euler_characteristic,
                         horseshoe, lshape, refine)

# the L-shape at the state resolution used by the presets
state = build_structured_mesh(lshape(32))
print("state mesh:", state.n_nodes, "nodes,", state.n_cells, "cells,",
      len(state.boundary_edges), "boundary edges")

# data are generated on a mesh twice as fine, so the inversion never sees its own discretization
fine = refine(state, 2)
print("fine mesh: ", fine.n_cells, "cells")

# sources live on 2x2 blocks of state cells
grid = coarsen_to_source_grid(state, 2)
print("source grid:", grid.n, "cells of area", grid.cell_area)

# the boundary is one closed loop, oriented with the domain on the left
print("boundary length:", state.boundary_length())
print("Euler characteristic:", euler_characteristic(state))

# the horseshoe as a 0/1 raster (1 = removed), top row first
print(horseshoe(8).to_raster())

# outward normals point away from the cell that owns each boundary edge
mid = state.nodes[state.boundary_edges].mean(axis=1)
away = np.sum(state.outward_normals() * (mid - state.cell_centers()[state.boundary_edge_cells]), axis=1)
print("all normals outward:", bool(np.all(away > 0)))
