"""
Nullspace, weights and decay
============================

The weights are the lengths of the basis functions after projection onto the
orthogonal complement of the nullspace.  Dividing the minimum-norm solution
by them puts the maximum of every single-cell recovery back on its own cell.
"""

import numpy as np

from ellsrc.experiments import build_setup, preset
from ellsrc.spectral import basis_recovery, decay_profile, decompose, weight_operator

setup = build_setup(preset("example1_square"))
dec = decompose(setup.op)
w = weight_operator(dec)
print(f"rank {dec.rank} of {dec.n} (tol {dec.tol:.2e})")
print("weights range from", w.w.min(), "to", w.w.max())

# interior cells are barely seen from the boundary, so their weights are small
lat = setup.grid.to_lattice(w.w)
print("weight along the middle row:", np.round(lat[:, 8], 3))

hits = sum(np.argmax(basis_recovery(dec, w, j)) == j for j in range(setup.grid.n))
print(f"single-cell recoveries peaking on their own cell: {hits}/{setup.grid.n}")

# how fast the recovery of a cell near the centre falls off with distance
j = int(setup.grid.block_lattice[8, 8])
prof = decay_profile(dec, w, j, setup.grid)
for dist in (0.0, 0.0625, 0.125, 0.25, 0.5):
    k = np.searchsorted(prof.distance, dist - 1e-12)
    print(f"  distance {prof.distance[k]:.3f}: value {prof.value[k]:+.4f}")
