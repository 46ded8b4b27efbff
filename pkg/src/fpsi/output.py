"""CSV and legacy-VTK writers for run artifacts.

Floats are written with 17 significant digits so re-reading a file
reproduces the in-memory values bit-exactly.  VTK output uses the legacy
ASCII 2.0 unstructured-grid format with point data sampled at mesh vertices.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh2D

FLOAT_FMT = "%.17g"


def write_csv(path, header, rows) -> Path:
    """Write rows of floats/strings with round-trip float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([
                FLOAT_FMT % v if isinstance(v, (float, np.floating)) else v
                for v in row
            ])
    return path


def read_csv(path):
    """Header and float-parsed rows (non-numeric cells stay strings)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for row in r:
            parsed = []
            for cell in row:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


def write_profile_csv(path, xs, values, x_label="x") -> Path:
    return write_csv(path, [x_label, "value"], zip(xs, values))


def write_vtk(path, mesh: Mesh2D, point_data=None) -> Path:
    """Legacy ASCII VTK 2.0 unstructured grid of triangles.

    ``point_data`` maps names to per-vertex arrays: shape (nv,) scalars or
    (nv, 2) vectors (padded with a zero z component).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nv = mesh.n_vertices
    nt = mesh.n_triangles
    lines = [
        "# vtk DataFile Version 2.0",
        "fpsi output",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{FLOAT_FMT % x} {FLOAT_FMT % y} 0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(FLOAT_FMT % v for v in arr)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(
                    f"{FLOAT_FMT % vx} {FLOAT_FMT % vy} 0" for vx, vy in arr
                )
    path.write_text("\n".join(lines) + "\n")
    return path


def vertex_values(mesh: Mesh2D, coeffs: np.ndarray, components: int = 1) -> np.ndarray:
    """Vertex samples of a nodal field (vertex dofs come first by layout)."""
    nv = mesh.n_vertices
    if components == 1:
        return coeffs[:nv]
    return np.column_stack([coeffs[0:2 * nv:2], coeffs[1:2 * nv:2]])
