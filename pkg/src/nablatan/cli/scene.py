"""TOML scene files.

A scene names a dimension, a connection, an optional curve and the numerical
settings.  Christoffel symbols are written as dotted keys, ``Gamma.1.2.3 =
"x1*x2"`` inside ``[connection]`` meaning the symbol with upper index 1 and
lower indices 2, 3.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import tomli
import tomli_w

from ..connection import ChristoffelField, coordinate_names, symmetrize
from ..curve import DEFAULT_ORDER, RANK_REL_TOL, ZERO_ATOL, DirectedCurve
from ..errors import IoError, NablaTanError, ParseError, ValidationError
from ..geodesic import IntegratorOptions
from ..presets import PRESETS, make_preset
from ..symbolics.expr import parse_expr

__all__ = [
    "Scene",
    "ConnectionSpec",
    "CurveSpec",
    "Numerics",
    "GridSpec",
    "OutputSpec",
    "load_scene",
    "parse_scene",
    "write_scene",
    "scene_to_dict",
]


@dataclass(frozen=True)
class ConnectionSpec:
    preset: str | None = "flat"
    gamma: tuple = ()  # ((l, m, n, source), ...) 1-based, sorted
    symmetrize: bool = True
    seed: int = 0
    amplitude: float = 0.3


@dataclass(frozen=True)
class CurveSpec:
    gamma: tuple
    frame: tuple | None = None
    factor: str | None = None
    domain: tuple = (-1.0, 1.0)
    name: str = "curve"


@dataclass(frozen=True)
class Numerics:
    jet_order: int = DEFAULT_ORDER
    rank_rel_tol: float = RANK_REL_TOL
    zero_rel_tol: float = 1e-9
    zero_atol: float = ZERO_ATOL
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)


@dataclass(frozen=True)
class GridSpec:
    t_range: tuple | None = None  # defaults to the curve domain
    s_range: tuple = (-1.0, 1.0)
    n_t: int = 51
    n_s: int = 51


@dataclass(frozen=True)
class OutputSpec:
    mesh: str | None = None
    report: str | None = None
    projection: str = "coords"
    coords: tuple = (1, 2, 3)


@dataclass(frozen=True)
class Scene:
    dim: int
    connection: ConnectionSpec = field(default_factory=ConnectionSpec)
    curve: CurveSpec | None = None
    numerics: Numerics = field(default_factory=Numerics)
    grid: GridSpec = field(default_factory=GridSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    name: str = "scene"

    def build_connection(self) -> ChristoffelField:
        c = self.connection
        if c.gamma:
            entries = {(l, m, n): src for l, m, n, src in c.gamma}
            field_ = ChristoffelField.from_entries(self.dim, entries, name=c.preset or "custom")
        else:
            field_ = make_preset(c.preset, self.dim, c.seed, c.amplitude)
        return symmetrize(field_) if c.symmetrize else field_

    def build_curve(self) -> DirectedCurve:
        if self.curve is None:
            raise ValidationError("curve", "the scene has no [curve] table")
        cv = self.curve
        return DirectedCurve.from_strings(cv.gamma, cv.frame, cv.factor, cv.domain, cv.name)


# --- loading -----------------------------------------------------------------------------


_TOP = {"dim", "name", "connection", "curve", "numerics", "grid", "output"}
_SECTIONS = {
    "connection": {"preset", "Gamma", "symmetrize", "seed", "amplitude"},
    "curve": {"gamma", "frame", "factor", "domain", "name"},
    "numerics": {"jet_order", "rank_rel_tol", "zero_rel_tol", "zero_atol", "integrator"},
    "grid": {"t_range", "s_range", "n_t", "n_s"},
    "output": {"mesh", "report", "projection", "coords"},
}
_INTEGRATOR = {f.name for f in fields(IntegratorOptions)}


class _Source:
    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line(self, dotted: str) -> int | None:
        """Best-effort line number of a dotted key."""
        parts = dotted.split(".")
        key = parts[-1]
        start = 0
        for depth in range(len(parts) - 1, 0, -1):
            header = re.compile(r"^\s*\[\s*" + r"\s*\.\s*".join(map(re.escape, parts[:depth])) + r"\s*\]")
            hit = next((i for i, l in enumerate(self.lines) if header.match(l)), None)
            if hit is not None:
                start = hit
                key = ".".join(parts[depth:])
                break
        pat = re.compile(r'^\s*"?' + re.escape(key).replace(r"\.", r'"?\s*\.\s*"?') + r'"?\s*=')
        for i in range(start, len(self.lines)):
            if pat.match(self.lines[i]):
                return i + 1
        for i, l in enumerate(self.lines):
            if parts[-1] in l:
                return i + 1
        return None


def _fail(src: _Source, key: str, message: str):
    raise ValidationError(key, message, src.line(key))


def _check_keys(src, table: dict, allowed: set, prefix: str):
    for k in table:
        if k not in allowed:
            _fail(src, f"{prefix}{k}", f"unknown key; expected one of {', '.join(sorted(allowed))}")


def _typed(src, key, value, kind, positive=False):
    ok = isinstance(value, kind) and not (kind in (int, float) and isinstance(value, bool))
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value, ok = float(value), True
    if not ok:
        _fail(src, key, f"expected {kind.__name__}, got {type(value).__name__}")
    if positive and not value > 0:
        _fail(src, key, "must be positive")
    return value


def _pair(src, key, value):
    if not (isinstance(value, list) and len(value) == 2):
        _fail(src, key, "expected a two-element array [lo, hi]")
    lo, hi = (_typed(src, key, v, float) for v in value)
    if not lo < hi:
        _fail(src, key, f"empty interval [{lo}, {hi}]")
    return (lo, hi)


def _expr(src, key, value, variables):
    if not isinstance(value, str):
        _fail(src, key, f"expected an expression string, got {type(value).__name__}")
    try:
        parse_expr(value, variables)
    except NablaTanError as exc:
        _fail(src, key, str(exc))
    return value


def _connection(src, dim, table) -> ConnectionSpec:
    _check_keys(src, table, _SECTIONS["connection"], "connection.")
    preset = table.get("preset")
    if preset is not None and preset not in PRESETS:
        _fail(src, "connection.preset", f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    raw = table.get("Gamma", {})
    if not isinstance(raw, dict):
        _fail(src, "connection.Gamma", "expected dotted keys Gamma.l.m.n")
    entries = []
    names = coordinate_names(dim)
    for l, row in raw.items():
        for m, col in (row.items() if isinstance(row, dict) else [(None, None)]):
            for n, value in (col.items() if isinstance(col, dict) else [(None, None)]):
                key = f"connection.Gamma.{l}.{m}.{n}"
                idx = []
                for part in (l, m, n):
                    if part is None or not str(part).isdigit():
                        _fail(src, key, "Christoffel keys are Gamma.l.m.n with integer indices")
                    idx.append(int(part))
                if not all(1 <= i <= dim for i in idx):
                    _fail(src, key, f"index out of range 1..{dim}")
                entries.append((*idx, _expr(src, key, value, names)))
    if entries and preset not in (None, "flat"):
        _fail(src, "connection.preset", "give either a non-flat preset or Gamma entries, not both")
    if not entries and preset is None:
        preset = "flat"
    return ConnectionSpec(
        preset if not entries else (preset or None),
        tuple(sorted(entries)),
        _typed(src, "connection.symmetrize", table.get("symmetrize", True), bool),
        _typed(src, "connection.seed", table.get("seed", 0), int),
        _typed(src, "connection.amplitude", table.get("amplitude", 0.3), float, positive=True),
    )


def _curve(src, dim, table) -> CurveSpec:
    _check_keys(src, table, _SECTIONS["curve"], "curve.")
    if "gamma" not in table:
        _fail(src, "curve.gamma", "missing curve components")
    exprs = {}
    for key in ("gamma", "frame"):
        if key not in table:
            continue
        value = table[key]
        if not isinstance(value, list) or len(value) != dim:
            _fail(src, f"curve.{key}", f"expected {dim} expression strings")
        exprs[key] = tuple(_expr(src, f"curve.{key}", v, ["t"]) for v in value)
    factor = table.get("factor")
    if factor is not None:
        if "frame" not in exprs:
            _fail(src, "curve.factor", "a factor needs a frame")
        factor = _expr(src, "curve.factor", factor, ["t"])
    domain = _pair(src, "curve.domain", table.get("domain", [-1.0, 1.0]))
    spec = CurveSpec(exprs["gamma"], exprs.get("frame"), factor, domain,
                     _typed(src, "curve.name", table.get("name", "curve"), str))
    curve = DirectedCurve.from_strings(spec.gamma, spec.frame, spec.factor, spec.domain, spec.name)
    try:
        curve.check()
    except ValidationError as exc:
        _fail(src, exc.field, str(exc).split(": ", 1)[-1])
    except NablaTanError as exc:
        _fail(src, "curve", f"curve cannot be evaluated on its domain: {exc}")
    return spec


def _numerics(src, table) -> Numerics:
    _check_keys(src, table, _SECTIONS["numerics"], "numerics.")
    integ = table.get("integrator", {})
    if not isinstance(integ, dict):
        _fail(src, "numerics.integrator", "expected a table")
    _check_keys(src, integ, _INTEGRATOR, "numerics.integrator.")
    kinds = {"method": str, "atol": float, "rtol": float, "max_steps": int, "initial_step": float,
             "blowup": float, "jet_error": str}
    opts = {k: _typed(src, f"numerics.integrator.{k}", v, kinds[k]) for k, v in integ.items()}
    try:
        options = IntegratorOptions(**opts)
    except ValidationError as exc:
        _fail(src, exc.field.replace("integrator.", "numerics.integrator."), str(exc).split(": ", 1)[-1])
    order = _typed(src, "numerics.jet_order", table.get("jet_order", DEFAULT_ORDER), int)
    if order < 5:
        _fail(src, "numerics.jet_order", "must be >= 5 (the criteria use five covariant derivatives)")
    return Numerics(
        order,
        _typed(src, "numerics.rank_rel_tol", table.get("rank_rel_tol", RANK_REL_TOL), float, positive=True),
        _typed(src, "numerics.zero_rel_tol", table.get("zero_rel_tol", 1e-9), float, positive=True),
        _typed(src, "numerics.zero_atol", table.get("zero_atol", ZERO_ATOL), float, positive=True),
        options,
    )


def _grid(src, table) -> GridSpec:
    _check_keys(src, table, _SECTIONS["grid"], "grid.")
    n_t = _typed(src, "grid.n_t", table.get("n_t", 51), int)
    n_s = _typed(src, "grid.n_s", table.get("n_s", 51), int)
    for key, n in (("grid.n_t", n_t), ("grid.n_s", n_s)):
        if n < 2:
            _fail(src, key, "need at least 2 samples")
    t_range = table.get("t_range")
    return GridSpec(
        None if t_range is None else _pair(src, "grid.t_range", t_range),
        _pair(src, "grid.s_range", table.get("s_range", [-1.0, 1.0])),
        n_t,
        n_s,
    )


def _output(src, dim, table) -> OutputSpec:
    _check_keys(src, table, _SECTIONS["output"], "output.")
    proj = _typed(src, "output.projection", table.get("projection", "coords"), str)
    if proj not in ("coords", "pca"):
        _fail(src, "output.projection", "expected 'coords' or 'pca'")
    coords = table.get("coords", [1, 2, 3][: max(1, min(3, dim))])
    if not (isinstance(coords, list) and 1 <= len(coords) <= 3):
        _fail(src, "output.coords", "expected up to three coordinate indices")
    coords = tuple(_typed(src, "output.coords", c, int) for c in coords)
    if not all(1 <= c <= dim for c in coords) or len(set(coords)) != len(coords):
        _fail(src, "output.coords", f"indices must be distinct and within 1..{dim}")
    mesh = table.get("mesh")
    report = table.get("report")
    return OutputSpec(
        None if mesh is None else _typed(src, "output.mesh", mesh, str),
        None if report is None else _typed(src, "output.report", report, str),
        proj,
        coords,
    )


def parse_scene(text: str, origin: str = "<scene>") -> Scene:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{origin}: {exc}") from None
    src = _Source(text)
    _check_keys(src, data, _TOP, "")
    if "dim" not in data:
        raise ValidationError("dim", "missing scene dimension", None)
    dim = _typed(src, "dim", data["dim"], int)
    if dim < 2:
        _fail(src, "dim", "dimension must be >= 2")
    for sec in ("connection", "curve", "numerics", "grid", "output"):
        if sec in data and not isinstance(data[sec], dict):
            _fail(src, sec, "expected a table")
    return Scene(
        dim,
        _connection(src, dim, data.get("connection", {})),
        _curve(src, dim, data["curve"]) if "curve" in data else None,
        _numerics(src, data.get("numerics", {})),
        _grid(src, data.get("grid", {})),
        _output(src, dim, data.get("output", {})),
        _typed(src, "name", data.get("name", "scene"), str),
    )


def load_scene(path) -> Scene:
    """Read and validate a scene file, applying defaults."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{p}: no such scene file") from None
    except OSError as exc:
        raise ParseError(f"{p}: {exc.strerror or exc}") from None
    return parse_scene(text, str(p))


# --- writing -----------------------------------------------------------------------------


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items() if v is not None}
    return value


def scene_to_dict(scene: Scene) -> dict:
    conn = {"symmetrize": scene.connection.symmetrize, "seed": scene.connection.seed,
            "amplitude": scene.connection.amplitude}
    if scene.connection.preset is not None:
        conn["preset"] = scene.connection.preset
    if scene.connection.gamma:
        tree: dict = {}
        for l, m, n, src in scene.connection.gamma:
            tree.setdefault(str(l), {}).setdefault(str(m), {})[str(n)] = src
        conn["Gamma"] = tree
    num = asdict(scene.numerics)
    out = {
        "dim": scene.dim,
        "name": scene.name,
        "connection": conn,
        "numerics": _plain(num),
        "grid": _plain(asdict(scene.grid)),
        "output": _plain(asdict(scene.output)),
    }
    if scene.curve is not None:
        out["curve"] = _plain(asdict(scene.curve))
    return out


def write_scene(scene: Scene, path=None) -> str:
    """TOML text of the scene; written to ``path`` when given."""
    text = tomli_w.dumps(scene_to_dict(scene))
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"{path}: {exc.strerror or exc}") from None
    return text
