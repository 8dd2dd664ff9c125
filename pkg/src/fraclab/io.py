"""CSV and JSON exports with a byte-stable number format."""

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "to_jsonable",
    "write_nodes",
    "write_matrix",
    "write_spectrum",
    "write_modes",
    "write_field",
    "write_evidence",
]


def fmt(value):
    """Shortest round-trip text for a float; integers and strings pass through."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _coord_header(dim):
    return ["x"] if dim == 1 else ["x", "y"]


def write_nodes(path, grid):
    """Node table: id, coordinates, boundary flag."""
    rows = (
        [i, *grid.nodes[i], int(grid.boundary[i])] for i in range(grid.n_nodes)
    )
    return write_csv(path, ["id", *_coord_header(grid.dim), "boundary"], rows)


def write_matrix(path, A, tol=0.0):
    """Coordinate format i, j, value for entries with |value| > tol."""
    A = np.asarray(A)
    ii, jj = np.nonzero(np.abs(A) > tol)
    return write_csv(path, ["i", "j", "value"], zip(ii, jj, A[ii, jj]))


def write_spectrum(path, values, name="lambda"):
    return write_csv(path, ["k", name], ((k + 1, v) for k, v in enumerate(values)))


def write_modes(path, grid, vectors, count):
    """Node coordinates and the first ``count`` modes, zero on the boundary."""
    count = min(int(count), vectors.shape[1])
    full = np.zeros((grid.n_nodes, count))
    full[grid.interior] = vectors[:, :count]
    header = ["id", *_coord_header(grid.dim)] + [f"phi_{k + 1}" for k in range(count)]
    rows = ([i, *grid.nodes[i], *full[i]] for i in range(grid.n_nodes))
    return write_csv(path, header, rows)


def write_field(path, field):
    """Extension field table i, j, coordinates, y, U over interior nodes and ladder nodes."""
    grid = field.grid
    pts = grid.interior_nodes
    ys = field.ladder.nodes
    # the extension variable is y, so 2D lateral coordinates become x1, x2
    coords = ["x"] if grid.dim == 1 else ["x1", "x2"]
    header = ["i", "j", *coords, "y", "U"]

    def rows():
        for i in range(len(pts)):
            for j in range(len(ys)):
                yield [i, j, *pts[i], ys[j], field.values[i, j]]

    return write_csv(path, header, rows())


def write_evidence(path, zeros):
    """Zero index, location and spacing to the previous zero."""
    zeros = np.asarray(zeros, dtype=float)
    rows = (
        [k + 1, z, (z - zeros[k - 1]) if k else float("nan")] for k, z in enumerate(zeros)
    )
    return write_csv(path, ["index", "location", "spacing"], rows)
