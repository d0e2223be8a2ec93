"""``nablatan`` command line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import fields

import tomli

from .. import __version__
from ..classify import classification_report, codim, scan_curve
from ..errors import IoError, NablaTanError, ParseError, ValidationError
from ..genericity import PerturbationSpec, montecarlo_types
from ..geodesic import integrate_geodesic
from ..normal_forms import GERM_NAMES, GermKind, germ_grid
from ..surface import eval_surface
from .export import _fmt, export_mesh, json_text, write_text
from .scene import load_scene

__all__ = ["main", "build_parser", "run"]

log = logging.getLogger("nablatan")


def _floats(text: str, what: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(what, f"expected comma-separated numbers, got {text!r}") from None


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        write_text(path, text)


def _cmd_classify(args) -> int:
    scene = load_scene(args.scene)
    num = scene.numerics
    report = classification_report(
        scene.build_connection(), scene.build_curve(), args.t0, num.rank_rel_tol, num.zero_rel_tol, num.jet_order
    )
    payload = {"kind": "classification", "scene": scene.name}
    payload.update(report.to_dict())
    _emit(json_text(payload), args.output)
    return 0


def _cmd_scan(args) -> int:
    scene = load_scene(args.scene)
    curve = scene.build_curve()
    lo = curve.domain[0] if args.t_min is None else args.t_min
    hi = curve.domain[1] if args.t_max is None else args.t_max
    if not lo < hi:
        raise ValidationError("--t-min", f"empty range [{lo}, {hi}]")
    num = scene.numerics
    events = scan_curve(scene.build_connection(), curve, (lo, hi), args.samples, num.rank_rel_tol, num.zero_rel_tol)
    payload = {
        "kind": "scan",
        "scene": scene.name,
        "t_range": [lo, hi],
        "samples": args.samples,
        "events": [e.to_dict() for e in events],
    }
    _emit(json_text(payload), args.output)
    return 0


def _cmd_mesh(args) -> int:
    scene = load_scene(args.scene)
    g = scene.grid
    out = args.output or scene.output.mesh
    if out is None:
        raise ValidationError("output.mesh", "no mesh path; pass -o or set output.mesh")
    num = scene.numerics
    grid = eval_surface(
        scene.build_connection(), scene.build_curve(), g.t_range, g.s_range,
        args.n_t or g.n_t, args.n_s or g.n_s, num.integrator, num.rank_rel_tol, num.zero_atol,
        workers=args.workers,
    )
    coords = tuple(int(c) for c in _floats(args.coords, "--coords")) if args.coords else scene.output.coords
    summary = export_mesh(grid, out, args.projection or scene.output.projection, coords)
    summary["failed_t"] = [float(grid.t[i]) for i in range(grid.t.size) if grid.failed[i]]
    sys.stdout.write(json_text({"kind": "mesh", **summary}))
    return 0


def _cmd_geodesic(args) -> int:
    scene = load_scene(args.scene)
    x = _floats(args.x, "--x")
    v = _floats(args.v, "--v")
    for name, vec in (("--x", x), ("--v", v)):
        if len(vec) != scene.dim:
            raise ValidationError(name, f"expected {scene.dim} components, got {len(vec)}")
    if args.samples < 2:
        raise ValidationError("--samples", "need at least 2 samples")
    path = integrate_geodesic(scene.build_connection(), x, v, args.s_end, scene.numerics.integrator, args.samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = scene.dim
    w.writerow(["s"] + [f"x{i + 1}" for i in range(m)] + [f"v{i + 1}" for i in range(m)])
    for i, s in enumerate(path.s):
        w.writerow([_fmt(s)] + [_fmt(a) for a in path.positions[i]] + [_fmt(a) for a in path.velocities[i]])
    _emit(buf.getvalue(), args.output)
    return 0


def _cmd_normal_form(args) -> int:
    kind = GermKind.of(args.kind, args.dim)
    t, s, pts = germ_grid(kind, (-1.0, 1.0), (-1.0, 1.0), args.n_t, args.n_s)
    coords = tuple(int(c) for c in _floats(args.coords, "--coords")) if args.coords else (1, 2, 3)[: kind.dim]
    summary = export_mesh(pts, args.output, args.projection, coords, t=t, s=s)
    sys.stdout.write(json_text({"kind": "normal-form", "germ": kind.name, **summary}))
    return 0


_SPEC_KEYS = {f.name for f in fields(PerturbationSpec)}


def _load_spec(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ParseError(f"{path}: no such spec file") from None
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}") from None
    data = data.get("montecarlo", data)
    for k in data:
        if k not in _SPEC_KEYS:
            raise ValidationError(f"montecarlo.{k}", f"unknown key; expected one of {', '.join(sorted(_SPEC_KEYS))}")
    if "domain" in data:
        data["domain"] = tuple(data["domain"])
    return data


def _cmd_montecarlo(args) -> int:
    params = _load_spec(args.spec) if args.spec else {}
    for key in ("seed", "dim", "degree", "amplitude", "n_curves", "samples", "connection"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    try:
        spec = PerturbationSpec(**params)
    except TypeError as exc:
        raise ValidationError("montecarlo", str(exc)) from None
    report = montecarlo_types(spec, workers=args.workers)
    if args.csv:
        write_text(args.csv, report.csv_text())
    summary = report.summary()
    summary.pop("seconds", None)  # keep artifacts byte-identical across runs
    _emit(json_text(summary), args.json)
    return 0


def _cmd_codim(args) -> int:
    try:
        entries = tuple(int(x) for x in args.type.split(","))
    except ValueError:
        raise ValidationError("--type", f"expected comma-separated integers, got {args.type!r}") from None
    print(codim(entries, args.dim))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nablatan", allow_abbrev=False, description="Tangent surfaces of directed curves under affine connections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="classify the singularity at t0")
    c.add_argument("scene")
    c.add_argument("--t0", type=float, default=0.0)
    c.add_argument("-o", "--output")
    c.set_defaults(func=_cmd_classify)

    c = sub.add_parser("scan", help="locate and classify special points along the curve")
    c.add_argument("scene")
    c.add_argument("--t-min", type=float)
    c.add_argument("--t-max", type=float)
    c.add_argument("--samples", type=int, default=201)
    c.add_argument("-o", "--output")
    c.set_defaults(func=_cmd_scan)

    c = sub.add_parser("mesh", help="sample the tangent surface and write OBJ + CSV")
    c.add_argument("scene")
    c.add_argument("-o", "--output")
    c.add_argument("--n-t", type=int)
    c.add_argument("--n-s", type=int)
    c.add_argument("--projection", choices=("coords", "pca"))
    c.add_argument("--coords", help="1-based coordinate triple, e.g. 1,2,4")
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=_cmd_mesh)

    c = sub.add_parser("geodesic", help="sample one geodesic as CSV")
    c.add_argument("scene")
    c.add_argument("--x", required=True, help="start point, comma separated")
    c.add_argument("--v", required=True, help="initial velocity, comma separated")
    c.add_argument("--s-end", type=float, default=1.0)
    c.add_argument("--samples", type=int, default=101)
    c.add_argument("-o", "--output")
    c.set_defaults(func=_cmd_geodesic)

    c = sub.add_parser("normal-form", help="write a model germ mesh")
    c.add_argument("--kind", required=True, choices=GERM_NAMES)
    c.add_argument("--dim", type=int)
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--n-t", type=int, default=51)
    c.add_argument("--n-s", type=int, default=51)
    c.add_argument("--projection", choices=("coords", "pca"), default="coords")
    c.add_argument("--coords")
    c.set_defaults(func=_cmd_normal_form)

    c = sub.add_parser("montecarlo", help="tabulate nabla-types of random curves")
    c.add_argument("--spec", help="TOML file with a [montecarlo] table")
    c.add_argument("--seed", type=int)
    c.add_argument("--dim", type=int)
    c.add_argument("--degree", type=int)
    c.add_argument("--amplitude", type=float)
    c.add_argument("--n-curves", type=int)
    c.add_argument("--samples", type=int)
    c.add_argument("--connection")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--csv", help="per-sample CSV path")
    c.add_argument("--json", help="summary JSON path (stdout by default)")
    c.set_defaults(func=_cmd_montecarlo)

    c = sub.add_parser("codim", help="codimension of a nabla-type")
    c.add_argument("--type", required=True, help="e.g. 1,2,4")
    c.add_argument("--dim", type=int)
    c.set_defaults(func=_cmd_codim)
    return p


def _error_json(exc: NablaTanError) -> str:
    body = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    for key in ("field", "line"):
        if getattr(exc, key, None) is not None:
            body[key] = getattr(exc, key)
    return json.dumps(body, sort_keys=True)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NablaTanError as exc:
        sys.stderr.write(_error_json(exc) + "\n")
        return exc.exit_code
    except OSError as exc:
        err = IoError(str(exc))
        sys.stderr.write(_error_json(err) + "\n")
        return err.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))
