"""Field and series persistence: legacy VTK ASCII and CSV.

Doubles are printed with 17 significant digits so that parsing the text
back recovers the exact bit pattern; identical inputs produce
byte-identical files.  Writes go to a temporary file in the target
directory followed by an atomic rename, so a failed write leaves no
partial file behind.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .grid import ScalarField

__all__ = ["format_double", "write_field_vtk", "write_series_csv"]


def format_double(x: float) -> str:
    """17-significant-digit decimal, enough for an exact double round trip."""
    return f"{float(x):.17g}"


def _atomic_write(path: Path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError:
        if tmp.exists():
            tmp.unlink()
        raise


def write_field_vtk(field: ScalarField, path, name: str = "value"):
    """Write a cell-centered field as legacy-VTK STRUCTURED_POINTS.

    Point dimensions are (nx+1, ny+1, 1) with one CELL_DATA block of
    nx*ny doubles named by ``name``.
    """
    grid = field.grid
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {format_double(grid.hx)} {format_double(grid.hy)} 1",
        f"CELL_DATA {grid.ncells}",
        f"SCALARS {name} double",
        "LOOKUP_TABLE default",
    ]
    lines.extend(format_double(v) for v in field.values)
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def write_series_csv(columns: dict, path):
    """Write named equal-length arrays as CSV with LF line endings."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    if arrays:
        length = arrays[0].size
        for n, a in zip(names, arrays):
            if a.size != length:
                raise ValueError(
                    f"column '{n}' has {a.size} entries, expected {length}"
                )
    lines = [",".join(names)]
    if arrays:
        for row in zip(*arrays):
            lines.append(",".join(format_double(v) for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")
