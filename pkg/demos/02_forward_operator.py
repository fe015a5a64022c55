"""
The forward operator and synthetic data
=======================================

Column j of K is the boundary trace of the state driven by the j-th
normalized cell indicator.  Data for the inversions come from the finer mesh.
"""

import numpy as np

from ellsrc.fem import assemble
from ellsrc.forward import add_noise, build_forward_matrix, synthesize_data
from ellsrc.mesh import build_structured_mesh, coarsen_to_source_grid, rectangle, refine

state = build_structured_mesh(rectangle(1, 1, 32, 32))
grid = coarsen_to_source_grid(state, 2)
ops = assemble(state, grid)
op = build_forward_matrix(ops, epsilon=1.0)
print("K has shape", op.K.shape)

# a constant unit source solves -lap(u) + u = 1 with u = 1
const = np.full(grid.n, grid.cell_area ** 0.5)
print("max |trace - 1| for f = 1:", np.abs(op.K @ const - 1).max())

# in Poisson mode constants are invisible from the boundary
op0 = build_forward_matrix(ops, epsilon=0.0)
print("boundary norm of K const at eps = 0:", op0.norm(op0.K @ const))

# data for phi_20 from the fine mesh differ slightly from the coarse column
fine = refine(state, 2)
owner = grid.locate(fine.cell_centers())
phi = np.where(owner == 20, grid.cell_area ** -0.5, 0.0)
d = synthesize_data(phi, assemble(fine), 1.0, op.boundary_points)
print("relative gap between fine data and K e_20:",
      op.norm(d.values - op.K[:, 20]) / op.norm(op.K[:, 20]))

# optional noise, reproducible from its seed
noisy = add_noise(d, 0.05, seed=1, gram=op.gram)
print("relative noise level:", op.norm(noisy.values - d.values) / op.norm(d.values))
