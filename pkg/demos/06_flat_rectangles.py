"""
Three sources on thinner and thinner rectangles
===============================================

The same three sources on (0,1) x (0,gamma).  As gamma shrinks every cell is
closer to the boundary and the sources separate more easily.
"""

from ellsrc.experiments import preset, run_experiment

for name in ("example3_gamma1", "example3_gamma05", "example3_gamma02"):
    rep = run_experiment(preset(name), out_dir="out")
    counts = {m: len(r.peaks) for m, r in rep.methods.items()}
    worst = {m: max(r.distances) for m, r in rep.methods.items()}
    print(f"{name}: peaks {counts}, worst distance {worst}")
