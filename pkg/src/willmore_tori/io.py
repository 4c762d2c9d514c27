"""Writers for reports (sorted-key JSON and RFC-4180 CSV) and for Wavefront OBJ meshes."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from pathlib import Path

import numpy as np

from .immersion import evaluate_r4


def to_jsonable(obj):
    """Recursively convert a report object to plain JSON types.

    Complex numbers become {"re": ..., "im": ...}; non-finite floats become
    the strings "nan", "inf" or "-inf".
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return to_jsonable(dataclasses.asdict(obj))
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
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def csv_text(rows, columns) -> str:
    """RFC-4180 CSV with a header row; floats written with 17 significant digits."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([format(float(r[c]), ".17g") if isinstance(r[c], (float, np.floating)) else r[c]
                     for c in columns])
    return buf.getvalue()


def write_csv(rows, columns, path) -> None:
    Path(path).write_text(csv_text(rows, columns), newline="")


def mesh_grid(imm, n: int):
    """(n+1) x (n+1) vertices of the map over the fundamental cell, seam rows duplicated.

    Returns (vertices in R^4 of shape ((n+1)^2, 4), seam flags, (s, t) parameters).
    """
    s = np.arange(n + 1) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    lat = imm.lattice if hasattr(imm, "lattice") else imm.kernel.lattice
    # the last row and column repeat the first ones exactly (periodicity)
    Sw, Tw = np.where(S >= 1.0, 0.0, S), np.where(T >= 1.0, 0.0, T)
    z = lat.point(Sw, Tw).ravel()
    X = np.asarray(evaluate_r4(imm, z))
    seam = ((S >= 1.0) | (T >= 1.0)).ravel()
    return X, seam, np.stack([S.ravel(), T.ravel()], -1)


def obj_text(imm, n: int = 64) -> str:
    """Wavefront OBJ of an n x n periodic quad grid.

    Vertices are the first three R^4 coordinates; the fourth is kept as a
    per-vertex comment.  Texture coordinates are the lattice parameters.
    Vertices on the seam (s = 1 or t = 1) duplicate s = 0 or t = 0 and are
    listed in a "# seam" comment.
    """
    X, seam, st = mesh_grid(imm, n)
    lines = ["# structured periodic quad grid", f"# grid {n} x {n}",
             "# vertex: x1 x2 x3, comment: x4"]
    for x in X:
        lines.append(f"v {x[0]:.17g} {x[1]:.17g} {x[2]:.17g}")
    for x in X:
        lines.append(f"# x4 {x[3]:.17g}")
    for p in st:
        lines.append(f"vt {p[0]:.17g} {p[1]:.17g}")
    seam_ids = np.nonzero(seam)[0] + 1
    for k in range(0, len(seam_ids), 16):
        lines.append("# seam " + " ".join(str(i) for i in seam_ids[k:k + 16]))
    m = n + 1
    for i in range(n):
        for j in range(n):
            a = i * m + j + 1
            b = (i + 1) * m + j + 1
            c = (i + 1) * m + j + 2
            d = i * m + j + 2
            lines.append(f"f {a}/{a} {b}/{b} {c}/{c} {d}/{d}")
    return "\n".join(lines) + "\n"


def write_obj(imm, path, n: int = 64) -> None:
    Path(path).write_text(obj_text(imm, n))
