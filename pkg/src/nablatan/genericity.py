"""Monte Carlo check that random directed curves only show the generic nabla-types.

Curves are drawn as pairs ``(c, u)`` of random polynomials and ``gamma`` is the
exact antiderivative of ``c u``.  Types are tabulated at random parameters and
at the located special points (roots of ``c`` and of ``det(D1, ..., Dm)``).
This is a finite-dimensional proxy for an open-dense statement about curve
spaces, and is reported as such.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .classify import Singularity, classify_frame_chain, codim
from .connection import ChristoffelField, field_chain, symmetrize
from .curve import RANK_REL_TOL, ZERO_ATOL, DirectedCurve, nabla_type_from_vectors, vanishing_order
from .errors import ResampleLimit, Undetermined, ValidationError
from .presets import PRESETS, RNG_ALGORITHM, make_preset, random_poly, rng_for

__all__ = [
    "PerturbationSpec",
    "PolyCurve",
    "TypeHistogram",
    "MonteCarloReport",
    "generic_types",
    "random_poly_curve",
    "random_directed_curve",
    "montecarlo_types",
]

NEAR_FACTOR = 10.0
JET_ORDER = 8
MAX_RESAMPLE = 200


@dataclass(frozen=True)
class PerturbationSpec:
    seed: int = 0
    dim: int = 3
    degree: int = 4
    amplitude: float = 1.0
    n_curves: int = 100
    samples: int = 5
    connection: str = "flat"
    gamma_amplitude: float = 0.3
    domain: tuple = (-1.0, 1.0)
    scan_samples: int = 96
    rel_tol: float = RANK_REL_TOL

    def __post_init__(self):
        if self.dim < 3:
            raise ValidationError("montecarlo.dim", "dimension must be >= 3")
        if self.degree < self.dim + 1:
            raise ValidationError("montecarlo.degree", f"degree must be >= dim + 1 = {self.dim + 1}")
        if self.amplitude < 0:
            raise ValidationError("montecarlo.amplitude", "must be >= 0")
        if self.connection == "random-poly" and not self.gamma_amplitude > 0:
            raise ValidationError("montecarlo.gamma_amplitude", "must be > 0")
        if self.connection not in PRESETS:
            raise ValidationError("montecarlo.connection", f"unknown preset {self.connection!r}")
        if self.n_curves < 0 or self.samples < 0:
            raise ValidationError("montecarlo.n_curves", "counts must be >= 0")
        if not self.domain[0] < self.domain[1]:
            raise ValidationError("montecarlo.domain", "empty interval")

    @property
    def degenerate(self) -> bool:
        """Zero amplitude gives constant frames, so every chain collapses."""
        return self.amplitude == 0


def generic_types(m: int) -> tuple:
    """The nabla-types expected for generic curves in dimension m."""
    return (
        tuple(range(1, m + 1)),
        tuple(range(1, m)) + (m + 1,),
        tuple(range(2, m + 2)),
    )


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Directed curve with polynomial data (ascending coefficients in t)."""

    gamma: np.ndarray  # (m, deg + 1)
    frame: np.ndarray
    factor: np.ndarray
    root: float | None  # planted simple root of c
    domain: tuple
    name: str = ""

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def jets(self, t, order: int) -> np.ndarray:
        """Taylor coefficients of gamma at ``t`` (scalar or 1-d array): (m, ..., order+1)."""
        return _taylor(self.gamma, t, order)

    def factor_roots(self) -> list:
        c = np.trim_zeros(self.factor, "b")
        if c.size <= 1:
            return []
        lo, hi = self.domain
        out = []
        for r in P.polyroots(c):
            if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)) and lo <= r.real <= hi:
                out.append(float(r.real))
        return sorted(out)

    def to_directed(self) -> DirectedCurve:
        return DirectedCurve.from_strings(
            [_poly_source(p) for p in self.gamma],
            [_poly_source(p) for p in self.frame],
            _poly_source(self.factor),
            self.domain,
            self.name,
        )


def _poly_source(coef) -> str:
    terms = []
    for j, a in enumerate(coef):
        a = float(a)
        if a == 0.0:
            continue
        num = f"({a!r})"
        terms.append(num if j == 0 else f"{num}*t" if j == 1 else f"{num}*t^{j}")
    return " + ".join(terms) if terms else "0"


def _taylor(coef: np.ndarray, t, order: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    c = np.asarray(coef, dtype=float)
    out = []
    fact = 1.0
    for j in range(order + 1):
        if j:
            fact *= j
        out.append(P.polyval(t, c.T) / fact if c.shape[-1] else np.zeros(c.shape[:-1] + t.shape))
        c = P.polyder(c, axis=-1) if c.shape[-1] > 1 else np.zeros(c.shape[:-1] + (1,))
    return np.stack(out, axis=-1)


def _base_point(spec: PerturbationSpec) -> np.ndarray:
    x = np.zeros(spec.dim)
    if spec.connection == "hyperbolic-halfspace":
        x[-1] = 3.0
    return x


def random_poly_curve(spec: PerturbationSpec, index: int) -> PolyCurve:
    """Curve number ``index`` of the spec; the draw depends only on (seed, index)."""
    rng = rng_for(spec.seed, index)
    m, d, a = spec.dim, spec.degree, spec.amplitude
    lo, hi = spec.domain
    grid = np.linspace(lo, hi, 257)
    for _ in range(MAX_RESAMPLE):
        base = rng.normal(size=m)
        base /= np.linalg.norm(base)
        u = np.zeros((m, d + 1))
        u[:, 0] = base
        u[:, 1:] += a * rng.uniform(-1.0, 1.0, size=(m, d))
        if np.linalg.norm(P.polyval(grid, u.T), axis=0).min() < 0.1:
            continue
        c0 = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        q = np.concatenate([[c0], a * rng.uniform(-0.5, 0.5, size=2)])
        planted = bool(rng.integers(2))
        root = None
        if planted:
            root = float(rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)))
            if np.abs(P.polyval(grid, q)).min() < 0.1:
                continue
            c = P.polymul([-root, 1.0], q)
        else:
            c = q
        gamma = np.stack([P.polyint(P.polymul(c, ui)) for ui in u])
        gamma[:, 0] += _base_point(spec)
        if spec.connection == "hyperbolic-halfspace" and P.polyval(grid, gamma[-1]).min() < 0.5:
            continue
        return PolyCurve(gamma, u, np.asarray(c, dtype=float), root, (lo, hi), f"random(seed={spec.seed},index={index})")
    raise ResampleLimit(f"no admissible curve after {MAX_RESAMPLE} draws (seed={spec.seed}, index={index})")


def random_directed_curve(spec: PerturbationSpec, index: int) -> DirectedCurve:
    return random_poly_curve(spec, index).to_directed()


def _connection(spec: PerturbationSpec, index: int) -> ChristoffelField:
    if spec.connection == "random-poly":
        return symmetrize(random_poly(spec.dim, spec.seed, spec.gamma_amplitude, index=index))
    return _shared_preset(spec.connection, spec.dim)


@lru_cache(maxsize=16)
def _shared_preset(name: str, dim: int) -> ChristoffelField:
    return symmetrize(make_preset(name, dim))


# --- tabulation ---------------------------------------------------------------------------


@dataclass
class TypeHistogram:
    counts: Counter = field(default_factory=Counter)
    undetermined: int = 0
    non_generic: int = 0
    near_degenerate: int = 0
    classes: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.undetermined

    def support(self) -> set:
        return set(self.counts)

    def to_dict(self) -> dict:
        return {
            "types": {",".join(map(str, k)): v for k, v in sorted(self.counts.items())},
            "undetermined": self.undetermined,
            "non_generic": self.non_generic,
            "near_degenerate": self.near_degenerate,
            "classes": dict(sorted(self.classes.items())),
            "total": self.total,
        }


@dataclass(frozen=True)
class Sample:
    curve: int
    t: float
    source: str  # random | factor | determinant
    entries: tuple
    kind: str
    margin: float
    direct: tuple = ()  # type read off the velocity chain itself

    @property
    def near_degenerate(self) -> bool:
        return self.margin < NEAR_FACTOR or tuple(self.direct) != tuple(self.entries)


@dataclass
class MonteCarloReport:
    spec: PerturbationSpec
    histogram: TypeHistogram
    located: TypeHistogram
    random: TypeHistogram
    samples: list
    seconds: float = 0.0

    @property
    def generic(self) -> tuple:
        return generic_types(self.spec.dim)

    @property
    def outside(self) -> set:
        return self.histogram.support() - set(self.generic)

    def fraction_generic(self) -> float:
        det = sum(self.histogram.counts.values())
        inside = sum(v for k, v in self.histogram.counts.items() if k in self.generic)
        return inside / det if det else 1.0

    def random_fraction_top(self) -> float:
        det = sum(self.random.counts.values())
        return self.random.counts.get(self.generic[0], 0) / det if det else 1.0

    def worst_margin(self) -> float:
        finite = [s.margin for s in self.samples if all(b is not None for b in s.entries)]
        return min(finite) if finite else math.inf

    def summary(self) -> dict:
        codims = {}
        for k in sorted(self.histogram.counts):
            codims[",".join(map(str, k))] = codim(k)
        worst = self.worst_margin()
        return {
            "schema_version": 1,
            "kind": "montecarlo",
            "note": (
                "Monte Carlo proxy: random polynomial directed curves stand in for an open dense "
                "set of smooth curves; support inclusion is a heuristic check, not a proof."
            ),
            "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.spec).items()},
            "rng": RNG_ALGORITHM,
            "generic_types": [list(t) for t in self.generic],
            "histogram": self.histogram.to_dict(),
            "random_points": self.random.to_dict(),
            "located_points": self.located.to_dict(),
            "codim": codims,
            "outside_generic": sorted(",".join(map(str, k)) for k in self.outside),
            "fraction_generic": self.fraction_generic(),
            "fraction_codim0_at_random_t": self.random_fraction_top(),
            "worst_margin": None if math.isinf(worst) else worst,
            "seconds": round(self.seconds, 3),
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["curve", "t", "source", "type", "class", "margin", "velocity_type", "near_degenerate"])
        for s in self.samples:
            w.writerow([
                s.curve, repr(s.t), s.source, _type_str(s.entries), s.kind,
                "inf" if math.isinf(s.margin) else f"{s.margin:.6g}", _type_str(s.direct), int(s.near_degenerate),
            ])
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _type_str(entries) -> str:
    return " ".join("?" if b is None else str(b) for b in entries)


def _dt(g):
    n = g.shape[-1]
    return g[..., 1:] * np.arange(1, n, dtype=float)


def _det(field_, curve, ts):
    """``det(u, nabla u, ..., nabla^(m-1) u)``; equals ``det(D1..Dm) / c^m`` without the zeros of c."""
    m = curve.dim
    t = np.asarray(ts, dtype=float)
    D = field_chain(field_, curve.jets(t, m), _taylor(curve.frame, t, m - 1), m)
    return np.linalg.det(np.moveaxis(D, (0, 1), (-1, -2)))


def _det_roots(field_, curve, n):
    lo, hi = curve.domain
    ts = np.linspace(lo, hi, n)
    vals = _det(field_, curve, ts)
    out = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            out.append(float(ts[i]))
        elif a * b < 0:
            out.append(brentq(lambda t: float(_det(field_, curve, [t])[0]), ts[i], ts[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        out.append(float(ts[-1]))
    return out


def _one_curve(spec: PerturbationSpec, index: int) -> list:
    curve = random_poly_curve(spec, index)
    field_ = _connection(spec, index)
    rng = rng_for(spec.seed, index, 1)
    lo, hi = spec.domain
    points = [(float(t), "random") for t in rng.uniform(lo, hi, size=spec.samples)]
    roots = curve.factor_roots()
    points += [(t, "factor") for t in roots]
    for t in _det_roots(field_, curve, spec.scan_samples):
        if all(abs(t - r) > 1e-6 for r in roots):
            points.append((t, "determinant"))
    if not points:
        return []
    ts = np.array([p[0] for p in points])
    m = spec.dim
    g = curve.jets(ts, JET_ORDER)
    frame = field_chain(field_, g, _taylor(curve.frame, ts, JET_ORDER - 1), JET_ORDER)
    velocity = field_chain(field_, g, _dt(g), JET_ORDER)
    cj = _taylor(curve.factor[None], ts, JET_ORDER)[0]
    c_scale = max(np.abs(P.polyval(np.linspace(lo, hi, 65), curve.factor)).max(), 1.0)
    out = []
    for j, (t, src) in enumerate(points):
        try:
            ell = vanishing_order(cj[j], ZERO_ATOL * c_scale)
        except Undetermined:
            out.append(Sample(index, t, src, (None,) * m, Singularity.NON_GENERIC.value, math.inf, (None,) * m))
            continue
        # type(c u) = type(u) shifted by ord(c); the frame chain stays well conditioned near roots of c
        ut = nabla_type_from_vectors(frame[:, :, j], spec.rel_tol, t, m)
        nt = ut.shifted(ell)
        direct = nabla_type_from_vectors(velocity[:, :, j], spec.rel_tol, t, m)
        kind = classify_frame_chain(frame[:4, :, j], ell + 1, spec.rel_tol).kind.value
        out.append(Sample(index, t, src, nt.entries, kind, ut.margin, direct.entries))
    return out


def montecarlo_types(spec: PerturbationSpec, workers: int = 1) -> MonteCarloReport:
    """Tabulate nabla-types and classes over ``spec.n_curves`` random curves.

    Curves are independent trials keyed by (seed, index), so the report does
    not depend on ``workers``.
    """
    start = time.perf_counter()
    idx = range(spec.n_curves)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_curve = list(pool.map(lambda i: _one_curve(spec, i), idx))
    else:
        per_curve = [_one_curve(spec, i) for i in idx]
    samples = [s for chunk in per_curve for s in chunk]
    hist, located, rand = TypeHistogram(), TypeHistogram(), TypeHistogram()
    for s in samples:
        for h in (hist, rand if s.source == "random" else located):
            if all(b is not None for b in s.entries):
                h.counts[tuple(s.entries)] += 1
            else:
                h.undetermined += 1
            if s.kind == Singularity.NON_GENERIC.value:
                h.non_generic += 1
            if s.near_degenerate:
                h.near_degenerate += 1
            h.classes[s.kind] += 1
    return MonteCarloReport(spec, hist, located, rand, samples, time.perf_counter() - start)
