"""
Observing only part of the boundary
===================================

The horseshoe with data on the whole boundary, and with data on the bottom
and left sides only.
"""

from ellsrc.experiments import preset, run_experiment

for name in ("example2_horseshoe", "example2_partial", "example2_square"):
    rep = run_experiment(preset(name), out_dir="out")
    print(f"{name}: rank {rep.rank}, {rep.setup.op.m} observed boundary nodes")
    for m, res in rep.methods.items():
        dist = ", ".join("unmatched" if d == float("inf") else f"{d:.3f}" for d in res.distances)
        print(f"  Method {m}: {len(res.peaks)} peaks, distances [{dist}]")
