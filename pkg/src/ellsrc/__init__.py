"""
Localization of internal sources of ``-Lap(u) + eps*u = f`` (homogeneous
Neumann condition) from Dirichlet boundary data by weighted Tikhonov
regularization.

Typical use::

    from ellsrc import preset, run_experiment
    report = run_experiment(preset("example1_lshape"), out_dir="out")
"""

from .experiments import (PRESET_NAMES, ExperimentConfig, RunReport, build_setup, load_config,
                          localization_metrics, preset, run_experiment)
from .fem import assemble, solve_state
from .forward import BoundaryData, add_noise, apply_forward, build_forward_matrix, synthesize_data
from .inversion import compare_methods_on_basis, method_I, method_II, method_III
from .mesh import (DomainSpec, MeshError, boundary_subset, build_structured_mesh,
                   coarsen_to_source_grid, refine)
from .radii import RadiiProblem, detect_peaks, optimize_radii, rasterize_balls
from .spectral import (WeightFloorError, decay_profile, decompose, min_norm_solution, project,
                       weight_operator)

__version__ = "0.1.0"

__all__ = [
    "PRESET_NAMES", "ExperimentConfig", "RunReport", "build_setup", "load_config",
    "localization_metrics", "preset", "run_experiment", "assemble", "solve_state",
    "BoundaryData", "add_noise", "apply_forward", "build_forward_matrix", "synthesize_data",
    "compare_methods_on_basis", "method_I", "method_II", "method_III", "DomainSpec",
    "MeshError", "boundary_subset", "build_structured_mesh", "coarsen_to_source_grid",
    "refine", "RadiiProblem", "detect_peaks", "optimize_radii", "rasterize_balls",
    "WeightFloorError", "decay_profile", "decompose", "min_norm_solution", "project",
    "weight_operator",
]
