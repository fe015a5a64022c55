"""CSV and PGM writers for cellwise fields."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import SourceGrid


def write_field_csv(field: np.ndarray, grid: SourceGrid, path: str | Path) -> Path:
    path = Path(path)
    field = np.asarray(field, dtype=float)
    if field.shape != (grid.n,):
        raise ValueError(f"field has shape {field.shape}, grid has {grid.n} cells")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "x", "y", "value"])
        for i, ((x, y), v) in enumerate(zip(grid.centers, field)):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])
    return path


def read_field_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(centers, values)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:3], data[:, 3]


def field_image(field: np.ndarray, grid: SourceGrid) -> np.ndarray:
    """8-bit image, top row = highest y; min -> 0, max -> 255, removed cells 0.

    A constant field maps every retained cell to 255.
    """
    field = np.asarray(field, dtype=float)
    lo, hi = float(field.min()), float(field.max())
    if hi > lo:
        scaled = np.rint(255.0 * (field - lo) / (hi - lo))
    else:
        scaled = np.full(field.shape, 255.0)
    lat = grid.to_lattice(scaled, fill=0.0)
    return np.flipud(lat.T).astype(np.uint8)


def write_pgm(image: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    # header layout as produced by write_pgm; pixel bytes may look like whitespace
    magic, size, _maxval, data = Path(path).read_bytes().split(b"\n", 3)
    if magic != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in size.split())
    return np.frombuffer(data[: w * h], dtype=np.uint8).reshape(h, w)


def export_field(field: np.ndarray, grid: SourceGrid, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.pgm``."""
    base = Path(path)
    base = base.with_suffix("") if base.suffix in (".csv", ".pgm") else base
    csv_path = write_field_csv(field, grid, base.with_name(base.name + ".csv"))
    pgm_path = write_pgm(field_image(field, grid), base.with_name(base.name + ".pgm"))
    return csv_path, pgm_path
