"""Mesh, CSV and JSON writers."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import numpy as np

from ..errors import IoError, ValidationError

__all__ = ["project", "obj_text", "export_mesh", "write_text", "json_text", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)


def _fmt(x: float) -> str:
    return "%.17g" % (0.0 if x == 0.0 else x)  # no "-0"


def project(points: np.ndarray, projection: str = "coords", coords=(1, 2, 3)) -> np.ndarray:
    """Map (..., m) points to (..., 3) for display.

    ``coords`` picks 1-based coordinates; ``"pca"`` projects onto the best
    fitting affine 3-plane, with axes ordered by variance and signs fixed so the
    largest component of each axis is positive.  Missing axes are zero.
    """
    pts = np.asarray(points, dtype=float)
    m = pts.shape[-1]
    if projection == "coords":
        idx = [int(c) - 1 for c in coords]
        if not all(0 <= i < m for i in idx):
            raise ValidationError("output.coords", f"indices must lie in 1..{m}")
        out = pts[..., idx]
    elif projection == "pca":
        flat = pts.reshape(-1, m)
        ok = np.all(np.isfinite(flat), axis=1)
        centre = flat[ok].mean(axis=0) if ok.any() else np.zeros(m)
        _, _, vt = np.linalg.svd(flat[ok] - centre, full_matrices=False)
        axes = vt[:3]
        for a in axes:
            if a[np.argmax(np.abs(a))] < 0:
                a *= -1.0
        out = (pts - centre) @ axes.T
    else:
        raise ValidationError("output.projection", f"unknown projection {projection!r}")
    if out.shape[-1] < 3:
        out = np.concatenate([out, np.zeros(out.shape[:-1] + (3 - out.shape[-1],))], axis=-1)
    return out


def _faces(n_t: int, n_s: int):
    for i in range(n_t - 1):
        for j in range(n_s - 1):
            a = i * n_s + j + 1
            b = a + n_s
            yield a, b, b + 1
            yield a, b + 1, a + 1


def obj_text(points: np.ndarray, projection: str = "coords", coords=(1, 2, 3), comment: str | None = None) -> str:
    """OBJ text for an (n_t, n_s, m) grid; vertices in row-major order."""
    pts = np.asarray(points, dtype=float)
    n_t, n_s, _ = pts.shape
    xyz = project(pts, projection, coords).reshape(-1, 3)
    lines = [] if comment is None else [f"# {comment}"]
    lines += ["v " + " ".join(_fmt(c) for c in p) for p in xyz]
    lines += [f"f {a} {b} {c}" for a, b, c in _faces(n_t, n_s)]
    return "\n".join(lines) + "\n"


def _csv_text(t, s, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = points.shape[-1]
    w.writerow(["i_t", "j_s", "t", "s"] + [f"x{k + 1}" for k in range(m)])
    for i, ti in enumerate(t):
        for j, sj in enumerate(s):
            w.writerow([i, j, _fmt(ti), _fmt(sj)] + [_fmt(x) for x in points[i, j]])
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(f"{p}: {exc.strerror or exc}") from None
    return p


def export_mesh(grid_or_points, path, projection: str = "coords", coords=(1, 2, 3), t=None, s=None,
                failed=None) -> dict:
    """Write ``path`` (OBJ) and ``path`` with suffix ``.csv`` (all m coordinates).

    Accepts a :class:`~nablatan.surface.TangentSurfaceGrid` or a raw
    (n_t, n_s, m) array.  Failed columns are dropped with a warning.  Returns a
    small summary dict.
    """
    if hasattr(grid_or_points, "points"):
        g = grid_or_points
        points, t, s, failed = g.points, g.t, g.s, g.failed
    else:
        points = np.asarray(grid_or_points, dtype=float)
    n_t, n_s, m = points.shape
    t = np.arange(n_t, dtype=float) if t is None else np.asarray(t, dtype=float)
    s = np.arange(n_s, dtype=float) if s is None else np.asarray(s, dtype=float)
    failed = np.zeros(n_t, dtype=bool) if failed is None else np.asarray(failed, dtype=bool)
    if failed.any():
        log.warning("dropping %d failed column(s) at t = %s", int(failed.sum()),
                    ", ".join(f"{x:.6g}" for x in t[failed]))
    keep = ~failed
    points, t = points[keep], t[keep]
    if points.shape[0] == 0:
        raise ValidationError("grid", "every column failed; nothing to export")
    obj = Path(path)
    side = obj.with_suffix(".csv")
    write_text(obj, obj_text(points, projection, coords))
    write_text(side, _csv_text(t, s, points))
    n_faces = 2 * max(points.shape[0] - 1, 0) * (n_s - 1)
    return {"obj": str(obj), "csv": str(side), "vertices": points.shape[0] * n_s, "faces": n_faces,
            "dropped_columns": int(failed.sum()), "dim": m}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def json_text(payload: dict) -> str:
    """Sorted, versioned JSON; non-finite floats become null."""
    body = {"schema_version": SCHEMA_VERSION}
    body.update(_clean(payload))
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"
