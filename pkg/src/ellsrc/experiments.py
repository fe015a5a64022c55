"""
Experiment configurations, presets and the end-to-end pipeline:
mesh -> forward operator -> weights -> inversions -> peaks/metrics -> files.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .fem import AssembledOperators, assemble
from .forward import (BoundaryData, ForwardOperator, add_noise, build_forward_matrix,
                      synthesize_data, write_boundary_csv)
from .inversion import METHODS, SourceEstimate, run_method
from .mesh import (DomainSpec, Mesh, SourceGrid, boundary_subset, build_structured_mesh,
                   coarsen_to_source_grid, horseshoe, lshape, rectangle, refine)
from .radii import (PeakSet, RadiiObjective, RadiiProblem, detect_peaks, optimize_radii,
                    rasterize_balls)
from .spectral import SpectralDecomposition, Weights, decompose, weight_operator


@dataclass
class ExperimentConfig:
    name: str
    domain: dict = field(default_factory=lambda: {"preset": "square"})
    epsilon: float = 1.0
    alpha: float = 1e-6
    grids: tuple = (64, 32, 16)
    true_source: dict = field(default_factory=lambda: {"kind": "zero"})
    observed_boundary: object = "full"
    methods: tuple = METHODS
    rank_tol: float | None = None
    weight_floor: float = 1e-8
    theta: float = 0.25
    noise: dict | None = None
    radii: dict | None = None

    def __post_init__(self):
        self.grids = tuple(int(g) for g in self.grids)
        self.methods = tuple(self.methods)
        fwd, state, src = self.grids
        if fwd != 2 * state:
            raise ValueError(f"forward grid must be twice the state grid, got {self.grids}")
        if state % src:
            raise ValueError(f"state grid must be a multiple of the source grid, got {self.grids}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grids"] = list(self.grids)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig.from_dict(d)


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a JSON config; keys absent from the file come from ``base``."""
    data = json.loads(Path(path).read_text())
    if base is None:
        return ExperimentConfig.from_dict(data)
    merged = base.to_dict()
    merged.update(data)
    return ExperimentConfig.from_dict(merged)


# -- presets -----------------------------------------------------------------

def _block(i0: int, j0: int, size: int = 2) -> list:
    return [[i0 + a, j0 + b] for b in range(size) for a in range(size)]


_EXAMPLE1_SOURCES = {"kind": "cells", "sources": [
    {"cells": _block(3, 10), "amplitude": 1.0},
    {"cells": _block(10, 3), "amplitude": 1.0},
]}
_EXAMPLE2_SOURCES = {"kind": "cells", "sources": [
    {"cells": [[3, 11]], "amplitude": 1.0},
    {"cells": [[12, 11]], "amplitude": 1.0},
]}
_EXAMPLE3_SOURCES = {"kind": "cells", "sources": [
    {"cells": _block(3, 7), "amplitude": 1.0},
    {"cells": _block(7, 7), "amplitude": 1.0},
    {"cells": _block(11, 7), "amplitude": 1.0},
]}


def _presets() -> dict:
    return {
        "example1_lshape": ExperimentConfig(
            "example1_lshape", {"preset": "lshape"}, true_source=_EXAMPLE1_SOURCES),
        "example1_square": ExperimentConfig(
            "example1_square", {"preset": "square"}, true_source=_EXAMPLE1_SOURCES),
        "example2_horseshoe": ExperimentConfig(
            "example2_horseshoe", {"preset": "horseshoe"}, true_source=_EXAMPLE2_SOURCES),
        "example2_square": ExperimentConfig(
            "example2_square", {"preset": "square"}, true_source=_EXAMPLE2_SOURCES),
        "example2_partial": ExperimentConfig(
            "example2_partial", {"preset": "horseshoe"}, true_source=_EXAMPLE2_SOURCES,
            observed_boundary=[[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]]),
        "example3_gamma1": ExperimentConfig(
            "example3_gamma1", {"preset": "rectangle", "gamma": 1.0}, alpha=1e-4,
            true_source=_EXAMPLE3_SOURCES),
        "example3_gamma05": ExperimentConfig(
            "example3_gamma05", {"preset": "rectangle", "gamma": 0.5}, alpha=1e-4,
            true_source=_EXAMPLE3_SOURCES),
        "example3_gamma02": ExperimentConfig(
            "example3_gamma02", {"preset": "rectangle", "gamma": 0.2}, alpha=1e-4,
            true_source=_EXAMPLE3_SOURCES),
        "example4_smooth": ExperimentConfig(
            "example4_smooth", {"preset": "square"}, grids=(64, 32, 32),
            true_source={"kind": "gaussian", "amplitude": 1.0, "center": [0.3, 0.25],
                         "rates": [10.0, 5.0]}),
        "example5_radii": ExperimentConfig(
            "example5_radii", {"preset": "lshape"}, methods=("I",),
            true_source={"kind": "balls", "magnitude": 1.0, "subsample": 8, "balls": [
                {"center": [0.28125, 0.71875], "radius": 0.1},
                {"center": [0.78125, 0.21875], "radius": 0.0625},
            ]},
            radii={"subsample": 4, "tol": 1e-4, "max_sweeps": 50}),
        "poisson_smoke": ExperimentConfig(
            "poisson_smoke", {"preset": "square"}, epsilon=0.0,
            true_source=_EXAMPLE2_SOURCES),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> ExperimentConfig:
    try:
        return _presets()[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None


# -- pipeline pieces -----------------------------------------------------------

def domain_spec(config: ExperimentConfig) -> DomainSpec:
    """Domain at state-grid resolution."""
    n = config.grids[1]
    dom = config.domain
    if "spec" in dom:
        spec = DomainSpec.from_dict(dom["spec"])
        if (spec.nx, spec.ny) != (n, n) and not dom.get("free_resolution", False):
            raise ValueError(f"explicit domain must be {n}x{n} state cells, got {spec.nx}x{spec.ny}")
        return spec
    kind = dom.get("preset", "square")
    if kind == "square":
        return rectangle(1.0, 1.0, n, n)
    if kind == "lshape":
        return lshape(n)
    if kind == "horseshoe":
        return horseshoe(n)
    if kind == "rectangle":
        return rectangle(1.0, float(dom.get("gamma", 1.0)), n, n)
    raise ValueError(f"unknown domain preset {kind!r}")


@dataclass
class Setup:
    """Everything derived from a config before any inversion."""

    config: ExperimentConfig
    state_mesh: Mesh
    fine_mesh: Mesh
    grid: SourceGrid
    ops: AssembledOperators
    fine_ops: AssembledOperators
    op: ForwardOperator


def build_setup(config: ExperimentConfig) -> Setup:
    state = build_structured_mesh(domain_spec(config))
    fine = refine(state, 2)
    grid = coarsen_to_source_grid(state, config.grids[1] // config.grids[2])
    if config.observed_boundary == "full":
        observed = None
    else:
        observed = boundary_subset(state, [tuple(map(tuple, s)) for s in config.observed_boundary])
    ops = assemble(state, grid, observed)
    fine_ops = assemble(fine)
    op = build_forward_matrix(ops, config.epsilon)
    return Setup(config, state, fine, grid, ops, fine_ops, op)


def _source_groups(config: ExperimentConfig, grid: SourceGrid) -> list:
    groups = []
    for src in config.true_source.get("sources", []):
        idx = [int(grid.block_lattice[i, j]) for i, j in src["cells"]]
        if min(idx) < 0:
            raise ValueError(f"true source cells {src['cells']} include removed cells")
        groups.append((idx, float(src.get("amplitude", 1.0))))
    return groups


def true_fields(config: ExperimentConfig, setup: Setup) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(value per fine cell, value per source cell, truth centroids)."""
    ts = config.true_source
    kind = ts.get("kind", "zero")
    grid, fine = setup.grid, setup.fine_mesh
    fine_centers = fine.cell_centers()
    if kind == "zero":
        return np.zeros(fine.n_cells), np.zeros(grid.n), np.zeros((0, 2))
    if kind == "cells":
        coarse = np.zeros(grid.n)
        centroids = []
        for idx, amp in _source_groups(config, grid):
            coarse[idx] += amp * grid.cell_area ** -0.5
            centroids.append(grid.centers[idx].mean(axis=0))
        owner = grid.locate(fine_centers)
        return coarse[owner], coarse, np.array(centroids)
    if kind == "gaussian":
        amp = float(ts.get("amplitude", 1.0))
        cx, cy = ts["center"]
        ax, ay = ts["rates"]

        def f(p):
            return amp * np.exp(-ax * (p[:, 0] - cx) ** 2 - ay * (p[:, 1] - cy) ** 2)

        return f(fine_centers), f(grid.centers), np.array([[cx, cy]])
    if kind == "balls":
        centers = [b["center"] for b in ts["balls"]]
        radii = [b["radius"] for b in ts["balls"]]
        prob = RadiiProblem(centers, float(ts.get("magnitude", 1.0)), np.inf, radii)
        sub = int(ts.get("subsample", 8))
        return (rasterize_balls(prob, fine, sub), rasterize_balls(prob, grid, sub),
                np.asarray(centers, dtype=float))
    raise ValueError(f"unknown true source kind {kind!r}")


def localization_metrics(peaks: PeakSet, truth) -> list:
    """Greedy matching in truth order; unmatched truths get ``inf``."""
    available = list(range(len(peaks)))
    pos = peaks.positions
    out = []
    for t in np.asarray(truth, dtype=float).reshape(-1, 2):
        if not available:
            out.append(float("inf"))
            continue
        dist = np.linalg.norm(pos[available] - t, axis=1)
        k = int(np.argmin(dist))
        out.append(float(dist[k]))
        available.pop(k)
    return out


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class MethodResult:
    estimate: SourceEstimate
    peaks: PeakSet
    distances: list
    csv_path: Path | None = None
    pgm_path: Path | None = None

    def summary(self) -> dict:
        return {
            "residual": self.estimate.residual,
            "penalty": self.estimate.penalty,
            "max_abs_field": float(np.max(np.abs(self.estimate.field))),
            "peaks": [{"cell": p.index, "position": list(p.position), "value": p.value}
                      for p in self.peaks.peaks],
            "localization": self.distances,
            "field_csv": self.csv_path,
            "heatmap": self.pgm_path,
        }


@dataclass
class RunReport:
    config: ExperimentConfig
    rank: int
    rank_tol: float
    weights: dict
    methods: dict
    truth_centroids: np.ndarray
    source_cell_width: float
    timing: dict
    files: dict = field(default_factory=dict)
    radii: dict | None = None
    checks: dict = field(default_factory=dict)
    # live objects for programmatic use, not serialized
    setup: Setup | None = field(default=None, repr=False)
    data: BoundaryData | None = field(default=None, repr=False)
    decomposition: SpectralDecomposition | None = field(default=None, repr=False)
    weight_vector: Weights | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return _json_safe({
            "config": self.config.to_dict(),
            "rank": self.rank,
            "rank_tol": self.rank_tol,
            "weights": self.weights,
            "methods": {k: v.summary() for k, v in self.methods.items()},
            "truth_centroids": self.truth_centroids,
            "source_cell_width": self.source_cell_width,
            "timing": self.timing,
            "files": self.files,
            "radii": self.radii,
            "checks": self.checks,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Run the whole pipeline; files are written only when ``out_dir`` is given."""
    timing = {}
    t0 = time.perf_counter()
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

    def stage(name, fn, *args):
        t = time.perf_counter()
        try:
            result = fn(*args)
        except Exception as exc:
            raise RuntimeError(f"stage '{name}' failed: {exc}") from exc
        timing[name] = time.perf_counter() - t
        return result

    setup = stage("setup", build_setup, config)
    grid, op = setup.grid, setup.op
    fine_values, coarse_truth, centroids = stage("truth", true_fields, config, setup)
    d = stage("data", synthesize_data, fine_values, setup.fine_ops, config.epsilon, op.boundary_points)
    if config.noise:
        d = add_noise(d, float(config.noise["level"]), int(config.noise["seed"]), op.gram)
    decomp = stage("decompose", decompose, op, config.rank_tol)
    weights = stage("weights", weight_operator, decomp, config.weight_floor)

    files = {}
    if out is not None:
        files["truth"] = [str(p) for p in io.export_field(coarse_truth, grid, out / f"{config.name}_truth")]
        files["data"] = str(out / f"{config.name}_data.csv")
        write_boundary_csv(d, files["data"])

    def invert(method):
        est = run_method(method, op, weights, d, config.alpha)
        peaks = detect_peaks(est.field, grid, config.theta)
        res = MethodResult(est, peaks, localization_metrics(peaks, centroids))
        if out is not None:
            res.csv_path, res.pgm_path = io.export_field(
                est.field, grid, out / f"{config.name}_method{method}")
        return res

    methods = {m: stage(f"method_{m}", invert, m) for m in config.methods}

    radii_summary = None
    if config.radii is not None:
        radii_summary = stage("radii", _radii_stage, config, setup, weights, d, methods)
        if out is not None:
            path = out / f"{config.name}_radii.json"
            path.write_text(json.dumps(_json_safe(radii_summary["result"])))
            files["radii"] = str(path)

    checks = {}
    if config.epsilon == 0:
        const = np.full(grid.n, grid.cell_area ** 0.5)
        checks["constant_source_trace_norm"] = op.norm(op.K @ const)

    timing["total"] = time.perf_counter() - t0
    report = RunReport(
        config=config,
        rank=decomp.rank,
        rank_tol=decomp.tol,
        weights=weights.summary(),
        methods=methods,
        truth_centroids=centroids,
        source_cell_width=grid.block_size[0],
        timing=timing,
        files=files,
        radii=radii_summary,
        checks=checks,
        setup=setup,
        data=d,
        decomposition=decomp,
        weight_vector=weights,
    )
    if out is not None:
        report_path = out / f"{config.name}_report.json"
        report.files["report"] = str(report_path)
        report_path.write_text(report.to_json())
    return report


def _radii_stage(config: ExperimentConfig, setup: Setup, weights: Weights, d, methods: dict) -> dict:
    opts = dict(config.radii)
    first = methods.get("I")
    if first is None:
        est = run_method("I", setup.op, weights, d, config.alpha)
        peaks = detect_peaks(est.field, setup.grid, config.theta)
    else:
        peaks = first.peaks
    if len(peaks) == 0:
        raise ValueError("Method I produced no peaks to centre the disks on")
    spec = setup.state_mesh.spec
    r_max = opts.get("r_max") or 0.5 * min(spec.width, spec.height)
    magnitude = float(opts.get("magnitude", config.true_source.get("magnitude", 1.0)))
    problem = RadiiProblem(peaks.positions, magnitude, r_max)
    objective = RadiiObjective(problem, setup.ops, config.epsilon, d,
                               subsample=int(opts.get("subsample", 4)))
    result = optimize_radii(problem, objective, tol=float(opts.get("tol", 1e-4)),
                            max_sweeps=int(opts.get("max_sweeps", 50)))
    return {
        "result": {"centers": result.centers, "radii": result.radii,
                   "objective": result.objective, "sweeps": result.sweeps},
        "history": result.history,
        "evaluations": objective.n_evals,
    }
