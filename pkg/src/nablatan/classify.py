"""Singularity classes of tangent surfaces from ranks of covariant jets.

Every decision is recorded as a :class:`RankDecision` (vectors tested, singular
values, threshold) so a verdict can be re-derived from its evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .connection import ChristoffelField, chain_from_jets, curve_jets, field_chain, symmetrize
from .curve import (
    ABS_FLOOR,
    DEFAULT_ORDER,
    RANK_REL_TOL,
    DirectedCurve,
    NablaType,
    frame_jets,
    nabla_type_from_vectors,
)
from .errors import DimensionMismatch, FrameUnavailable, MalformedType, NablaTanError
from .surface import frame_chain
from .symbolics import jets
from .symbolics.expr import eval_array
from .symbolics.jets import JetVector

__all__ = [
    "Singularity",
    "RankDecision",
    "SingularityClass",
    "ClassificationReport",
    "ScanEvent",
    "rank_tol",
    "classify_chain",
    "classify_point",
    "classification_report",
    "classify_via_frames",
    "classify_frame_chain",
    "scan_curve",
    "codim",
    "ZERO_REL_TOL",
]

ZERO_REL_TOL = 1e-9


class Singularity(str, Enum):
    CUSPIDAL_EDGE = "CuspidalEdge"
    FOLDED_UMBRELLA = "FoldedUmbrella"
    SWALLOWTAIL = "Swallowtail"
    OPEN_SWALLOWTAIL = "OpenSwallowtail"
    NON_GENERIC = "NonGeneric"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class RankDecision:
    label: str
    rank: int
    singular_values: tuple
    threshold: float

    @property
    def full(self) -> bool:
        return self.rank == self.size

    @property
    def size(self) -> int:
        return len(self.label.split(","))

    def to_dict(self) -> dict:
        return {
            "vectors": self.label,
            "rank": self.rank,
            "singular_values": list(self.singular_values),
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class SingularityClass:
    kind: Singularity
    evidence: tuple = ()
    rel_tol: float = RANK_REL_TOL
    reason: str = ""

    def __str__(self):
        return self.kind.value

    def to_dict(self) -> dict:
        return {
            "class": self.kind.value,
            "reason": self.reason,
            "rel_tol": self.rel_tol,
            "ranks": [d.to_dict() for d in self.evidence],
        }


def _svals(vectors, rel_tol: float, abs_floor: float = ABS_FLOOR) -> np.ndarray:
    """Singular values of the set after dropping negligible vectors and normalising the rest.

    Independence of a set of vectors does not change when one of them is
    rescaled, so each vector is brought to unit length first.  Chains such as
    ``D_k = (c u)^(k)`` near a zero of ``c`` otherwise mix very different
    lengths and lose a genuine direction below the threshold.  Vectors shorter
    than ``rel_tol`` times the longest (or below ``abs_floor``) count as zero.
    """
    a = np.atleast_2d(np.asarray(vectors, dtype=float))
    if a.size == 0:
        return np.zeros(0)
    norms = np.linalg.norm(a, axis=1)
    keep = (norms > rel_tol * norms.max()) & (norms >= abs_floor)
    if not keep.any():
        return np.zeros(min(a.shape))
    b = a[keep] / norms[keep, None]
    sv = np.linalg.svd(b.T, compute_uv=False)
    return np.concatenate([sv, np.zeros(min(a.shape) - sv.size)])


def rank_tol(vectors, rel_tol: float = RANK_REL_TOL, abs_floor: float = ABS_FLOOR) -> int:
    """Numerical rank of a set of vectors (see :func:`_svals` for the scaling)."""
    sv = _svals(vectors, rel_tol, abs_floor)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def _decide(label: str, vectors, rel_tol: float) -> RankDecision:
    sv = _svals(vectors, rel_tol)
    thr = rel_tol * sv[0] if sv.size else 0.0
    rank = 0 if sv.size == 0 or sv[0] == 0.0 else int(np.sum(sv > thr))
    return RankDecision(label, rank, tuple(float(x) for x in sv), float(thr))


def _d1_zero(chain: np.ndarray, zero_tol: float) -> bool:
    norms = np.linalg.norm(chain[:5], axis=1)
    return bool(norms[0] < zero_tol * norms.max())


def classify_chain(chain, rel_tol: float = RANK_REL_TOL, zero_tol: float = ZERO_REL_TOL) -> SingularityClass:
    """Decision tree on ``chain[k-1] = D_k`` (k = 1..5, rows in R^m)."""
    D = np.asarray(chain, dtype=float)
    m = D.shape[1]
    if m < 3:
        raise DimensionMismatch("classification needs dimension >= 3")
    if D.shape[0] < (4 if m == 3 else 5):
        raise DimensionMismatch("chain too short for the classification criteria")
    if np.linalg.norm(D[:5], axis=1).max() < ABS_FLOOR:
        return SingularityClass(Singularity.NON_GENERIC, (), rel_tol, "covariant chain negligible up to D5")
    ev = []

    def test(*ks):
        d = _decide(",".join(f"D{k}" for k in ks), [D[k - 1] for k in ks], rel_tol)
        ev.append(d)
        return d.rank

    d1z = _d1_zero(D, zero_tol)
    if test(1, 2, 3) == 3:
        return SingularityClass(Singularity.CUSPIDAL_EDGE, tuple(ev), rel_tol)
    if m == 3:
        if not d1z and test(1, 2, 4) == 3:
            return SingularityClass(Singularity.FOLDED_UMBRELLA, tuple(ev), rel_tol)
        if d1z and test(2, 3, 4) == 3:
            return SingularityClass(Singularity.SWALLOWTAIL, tuple(ev), rel_tol)
    elif d1z and test(2, 3, 4, 5) == 4:
        return SingularityClass(Singularity.OPEN_SWALLOWTAIL, tuple(ev), rel_tol)
    pattern = ", ".join(f"rank{{{d.label}}}={d.rank}" for d in ev)
    reason = f"D1 {'~ 0' if d1z else '!= 0'}; {pattern}: outside the classified patterns"
    return SingularityClass(Singularity.NON_GENERIC, tuple(ev), rel_tol, reason)


def _curve_array(gamma, t0: float, order: int) -> np.ndarray:
    if isinstance(gamma, DirectedCurve):
        return gamma.jets(t0, order)
    if isinstance(gamma, JetVector):
        return gamma.coeffs
    return curve_jets(list(gamma), t0, order)


def _chain(field_: ChristoffelField, gamma, t0: float, order: int) -> np.ndarray:
    g = _curve_array(gamma, t0, order)
    if g.shape[0] != field_.dim:
        raise DimensionMismatch(f"curve has {g.shape[0]} components, connection dimension is {field_.dim}")
    return chain_from_jets(field_, g, min(order, g.shape[-1] - 1))


def classify_point(field_: ChristoffelField, gamma, t0: float, rel_tol: float = RANK_REL_TOL,
                   zero_tol: float = ZERO_REL_TOL, order: int = DEFAULT_ORDER) -> SingularityClass:
    """Class of the tangent surface at ``gamma(t0)``; the connection is symmetrized first."""
    return classify_chain(_chain(symmetrize(field_), gamma, t0, order)[:5], rel_tol, zero_tol)


@dataclass(frozen=True)
class ClassificationReport:
    t0: float
    degeneracy_order: int | None
    nabla_type: NablaType
    verdict: SingularityClass
    chain: np.ndarray = field(compare=False)
    rel_tol: float = RANK_REL_TOL
    zero_tol: float = ZERO_REL_TOL
    connection: str = ""
    curve: str = ""

    @property
    def kind(self) -> Singularity:
        return self.verdict.kind

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "class": self.verdict.kind.value,
            "reason": self.verdict.reason,
            "degeneracy_order": self.degeneracy_order,
            "nabla_type": [b for b in self.nabla_type.entries],
            "nabla_type_margin": None if math.isinf(self.nabla_type.margin) else self.nabla_type.margin,
            "chain": [list(map(float, v)) for v in self.chain],
            "ranks": [d.to_dict() for d in self.verdict.evidence],
            "tolerances": {"rank_rel_tol": self.rel_tol, "zero_rel_tol": self.zero_tol},
            "connection": self.connection,
            "curve": self.curve,
        }


def classification_report(field_: ChristoffelField, gamma, t0: float, rel_tol: float = RANK_REL_TOL,
                          zero_tol: float = ZERO_REL_TOL, order: int = DEFAULT_ORDER) -> ClassificationReport:
    sym = symmetrize(field_)
    chain = _chain(sym, gamma, t0, order)
    verdict = classify_chain(chain[:5], rel_tol, zero_tol)
    norms = np.linalg.norm(chain, axis=1)
    k = None
    if norms.max() >= ABS_FLOOR:
        k = int(np.nonzero(norms > zero_tol * norms[:5].max())[0][0]) + 1
    # the velocity chain D_k is nabla^(k-1) of gamma'
    ntype = nabla_type_from_vectors(chain, rel_tol, t0, field_.dim)
    name = gamma.name if isinstance(gamma, DirectedCurve) else ""
    return ClassificationReport(float(t0), k, ntype, verdict, chain[:5], rel_tol, zero_tol, field_.name, name)


def classify_via_frames(field_: ChristoffelField, curve: DirectedCurve, t0: float, rel_tol: float = RANK_REL_TOL,
                        zero_tol: float = ZERO_REL_TOL) -> SingularityClass:
    """Class from the frontal frame ``u, nabla u`` and its eta-derivatives at ``(t0, 0)``."""
    sym = symmetrize(field_)
    m = curve.dim
    if m < 3:
        raise DimensionMismatch("classification needs dimension >= 3")
    chain = _chain(sym, curve, t0, DEFAULT_ORDER)
    norms = np.linalg.norm(chain[:5], axis=1)
    if norms.max() < ABS_FLOOR:
        raise FrameUnavailable(f"covariant chain negligible at t0={t0}")
    k = int(np.nonzero(norms > zero_tol * norms.max())[0][0]) + 1
    try:
        U = frame_chain(sym, curve, t0, 4, rel_tol)
    except NablaTanError as exc:
        raise FrameUnavailable(f"no frame at t0={t0}: {exc}") from exc
    return classify_frame_chain(U, k, rel_tol)


def classify_frame_chain(U, k: int, rel_tol: float = RANK_REL_TOL) -> SingularityClass:
    """Frontal-frame criteria on ``U = (u, nabla u, nabla^2 u, nabla^3 u)`` at a point of degeneracy order k."""
    U = np.asarray(U, dtype=float)
    m = U.shape[1]
    ev = []

    def test(labels, vecs):
        d = _decide(",".join(labels), vecs, rel_tol)
        ev.append(d)
        return d.rank

    u, nu, e2, e3 = U[:4]
    if k == 1:
        if test(("u", "Du", "D2u"), (u, nu, e2)) == 3:
            return SingularityClass(Singularity.CUSPIDAL_EDGE, tuple(ev), rel_tol)
        if m == 3 and test(("u", "Du", "D3u"), (u, nu, e3)) == 3:
            return SingularityClass(Singularity.FOLDED_UMBRELLA, tuple(ev), rel_tol)
    elif k == 2:
        if m == 3 and test(("V1", "V2", "E2"), (u, nu, e2)) == 3:
            return SingularityClass(Singularity.SWALLOWTAIL, tuple(ev), rel_tol)
        if m >= 4 and test(("V1", "V2", "E2", "E3"), (u, nu, e2, e3)) == 4:
            return SingularityClass(Singularity.OPEN_SWALLOWTAIL, tuple(ev), rel_tol)
    pattern = ", ".join(f"rank{{{d.label}}}={d.rank}" for d in ev)
    return SingularityClass(Singularity.NON_GENERIC, tuple(ev), rel_tol, f"degeneracy order {k}; {pattern}")


# --- scanning -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanEvent:
    t: float
    verdict: SingularityClass
    source: str  # "factor" (degenerate point) or "determinant"

    def to_dict(self) -> dict:
        out = {"t": self.t, "source": self.source}
        out.update(self.verdict.to_dict())
        return out


def _sign_roots(fn, ts, vals, xtol):
    roots = []
    zero = vals == 0.0
    i = 0
    n = len(ts)
    while i < n:
        if zero[i]:
            j = i
            while j + 1 < n and zero[j + 1]:
                j += 1
            roots.append(float(ts[(i + j) // 2]) if (j - i) % 2 == 0 else 0.5 * (ts[i] + ts[j]))
            i = j + 1
            continue
        if i + 1 < n and not zero[i + 1] and np.sign(vals[i]) != np.sign(vals[i + 1]):
            roots.append(float(brentq(fn, ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
        i += 1
    return roots


def _determinant(field_, curve, ts):
    """``det(D1, ..., Dm)``, or ``det(u, ..., nabla^(m-1) u)`` when the curve carries a frame.

    The two differ by the factor ``c^m``; the frame version keeps the
    determinant roots apart from the degenerate points.
    """
    m = curve.dim
    t = np.asarray(ts, dtype=float)
    g = curve.jets(t, m)
    if curve.frame is not None:
        u, _ = frame_jets(curve, t, m - 1)
        D = field_chain(field_, g, u, m)
    else:
        D = chain_from_jets(field_, g, m)
    return np.linalg.det(np.moveaxis(D, (0, 1), (-1, -2)))


def _factor_values(curve, ts, order=0):
    tj = jets.variable(np.asarray(ts, dtype=float), order)
    return np.broadcast_to(eval_array(curve.factor, {curve.variable: tj}, order), tj.shape)[..., 0]


def _degenerate_points(curve, ts, xtol):
    """Parameters where the curve stops: roots of c, or zeros of |gamma'|."""
    if curve.factor is not None:
        vals = _factor_values(curve, ts)
        return _sign_roots(lambda t: float(_factor_values(curve, t)), ts, vals, xtol)
    if curve.frame is not None:
        _, c = frame_jets(curve, np.asarray(ts, dtype=float), 0)
        fn = lambda t: float(frame_jets(curve, float(t), 0)[1][0])  # noqa: E731
        return _sign_roots(fn, ts, c[..., 0], xtol)

    def slope(t):
        g = curve.jets(np.asarray(t, dtype=float), 2)
        v = jets.derivative(g)
        return np.sum(v[..., 0] * v[..., 1], axis=0)

    def speed(t):
        return np.linalg.norm(jets.derivative(curve.jets(np.asarray(t, dtype=float), 1))[..., 0], axis=0)

    vals = slope(ts)
    out = []
    scale = max(float(speed(ts).max()), ABS_FLOOR)
    for i in range(len(ts) - 1):
        a, b = vals[i], vals[i + 1]
        if a < 0 < b:
            r = brentq(lambda t: float(slope(t)), ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        elif a == 0 and (i == 0 or vals[i - 1] < 0) and b > 0:
            r = float(ts[i])
        else:
            continue
        if float(speed(r)) < 1e-8 * scale:
            out.append(float(r))
    if vals[-1] == 0 and len(vals) > 1 and vals[-2] < 0 and float(speed(ts[-1])) < 1e-8 * scale:
        out.append(float(ts[-1]))
    return out


def scan_curve(field_: ChristoffelField, curve: DirectedCurve, t_range=None, n_samples: int = 201,
               rel_tol: float = RANK_REL_TOL, zero_tol: float = ZERO_REL_TOL, xtol: float = 1e-12,
               merge_tol: float = 1e-6) -> list:
    """Locate and classify the points where the cuspidal-edge criterion can fail.

    Candidates are roots of ``c`` (degenerate points of the curve) and sign
    changes of ``det(D1, ..., Dm)``.  Determinant roots within ``merge_tol`` of
    a degenerate point are merged into it.  Returns events sorted by t.
    """
    sym = symmetrize(field_)
    lo, hi = curve.domain if t_range is None else (float(t_range[0]), float(t_range[1]))
    ts = np.linspace(lo, hi, max(n_samples, 2))
    degenerate = _degenerate_points(curve, ts, xtol)
    det_vals = _determinant(sym, curve, ts)
    scale = np.abs(det_vals).max()
    det_vals = np.where(np.abs(det_vals) <= 1e-14 * scale, 0.0, det_vals) if scale > 0 else det_vals
    det_roots = _sign_roots(lambda t: float(_determinant(sym, curve, [t])[0]), ts, det_vals, xtol)
    events = [(t, "factor") for t in degenerate]
    for r in det_roots:
        if all(abs(r - t) > merge_tol for t in degenerate):
            events.append((r, "determinant"))
    events.sort()
    return [ScanEvent(t, classify_point(sym, curve, t, rel_tol, zero_tol), src) for t, src in events]


def codim(a, m: int | None = None) -> int:
    """``a_1 - 1 + sum_{i >= 2} (a_i - a_1 - i + 1)`` for a determinate type."""
    entries = a.entries if isinstance(a, NablaType) else tuple(a)
    if not entries:
        raise MalformedType("empty type")
    if any(b is None for b in entries):
        raise MalformedType(f"type {entries} has undetermined entries")
    try:
        vals = [int(b) for b in entries]
    except (TypeError, ValueError):
        raise MalformedType(f"type entries must be integers: {entries}") from None
    if any(v != b for v, b in zip(vals, entries)):
        raise MalformedType(f"type entries must be integers: {entries}")
    if vals[0] < 1 or any(x >= y for x, y in zip(vals, vals[1:])):
        raise MalformedType(f"type {tuple(vals)} is not a strictly increasing sequence of positive integers")
    if m is not None and len(vals) != m:
        raise MalformedType(f"type {tuple(vals)} has {len(vals)} entries, expected m={m}")
    a1 = vals[0]
    return a1 - 1 + sum(vals[i - 1] - a1 - i + 1 for i in range(2, len(vals) + 1))
