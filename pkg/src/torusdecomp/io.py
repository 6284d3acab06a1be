"""File formats: measures, spectra, edge lists, planar point sets, reports.

Floats in CSV files are written with ``repr``-exact ``.17g`` formatting so that
identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .addcomb import BipartiteGraph
from .errors import RejectedInputError
from .measure import GridMeasure, Spectrum


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def to_jsonable(obj):
    """Recursively convert numpy values, tuples and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# measures


def measure_to_json(mu: GridMeasure, sparse: bool = True) -> dict:
    if sparse:
        idx = mu.support
        return {"Q": mu.Q,
                "weights": {"sparse": [[int(i), float(mu.weights[i])] for i in idx]}}
    return {"Q": mu.Q, "weights": {"dense": mu.weights.tolist()}}


def measure_from_json(data: dict) -> GridMeasure:
    try:
        Q = int(data["Q"])
        w = data["weights"]
    except (KeyError, TypeError, ValueError) as exc:
        raise RejectedInputError("measure JSON needs Q and weights", key="weights") from exc
    if not isinstance(w, dict) or len(w) != 1 or next(iter(w)) not in ("dense", "sparse"):
        raise RejectedInputError('weights must be {"dense": [...]} or {"sparse": [[i, w], ...]}',
                                 key="weights")
    if "dense" in w:
        return GridMeasure(Q, np.asarray(w["dense"], dtype=float))
    dense = np.zeros(Q)
    for item in w["sparse"]:
        i, x = int(item[0]), float(item[1])
        if not 0 <= i < Q:
            raise RejectedInputError(f"sparse index {i} outside [0, {Q})", key="weights")
        dense[i] += x
    return GridMeasure(Q, dense)


def load_measure(path) -> GridMeasure:
    return measure_from_json(json.loads(Path(path).read_text()))


def save_measure(mu: GridMeasure, path, sparse: bool = True) -> Path:
    return write_json(path, measure_to_json(mu, sparse))


# ---------------------------------------------------------------------------
# spectra, graphs, planar sets, granules


def spectrum_rows(spec: Spectrum):
    for n, c in zip(spec.frequencies.tolist(), spec.coeffs):
        yield (n, c.real, c.imag, abs(c))


def write_spectrum_csv(spec: Spectrum, path) -> Path:
    return write_csv(path, ("n", "re", "im", "abs"), spectrum_rows(spec))


def read_edge_list(path) -> BipartiteGraph:
    """Lines ``a b``; blank lines and lines starting with # are skipped."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RejectedInputError(f"edge list line {lineno}: expected two fields",
                                     line=lineno)
        edges.append((int(parts[0]), int(parts[1])))
    if not edges:
        raise RejectedInputError("edge list is empty")
    part_a = sorted({a for a, _ in edges})
    part_b = sorted({b for _, b in edges})
    return BipartiteGraph(tuple(part_a), tuple(part_b), tuple(sorted(set(edges))))


def read_planar_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"x", "y"}:
        raise RejectedInputError("planar CSV needs header x,y")
    return np.array([[float(r["x"]), float(r["y"])] for r in rows])


def write_planar_csv(points, path) -> Path:
    return write_csv(path, ("x", "y"), np.asarray(points, dtype=float).reshape(-1, 2).tolist())


def write_family_json(fam, path) -> Path:
    return write_json(path, fam.to_json())
