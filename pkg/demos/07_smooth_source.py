"""
A smooth source
===============

A Gaussian bump centred at (0.3, 0.25).  The recovered bump is broad and its
maximum sits somewhat further inside the domain than the true centre.
"""

import numpy as np

from ellsrc.experiments import preset, run_experiment

rep = run_experiment(preset("example4_smooth"), out_dir="out")
for m, res in rep.methods.items():
    top = res.peaks.peaks[0]
    off = np.hypot(top.position[0] - 0.3, top.position[1] - 0.25)
    print(f"Method {m}: top peak at {top.position}, {off:.3f} from the true centre")
