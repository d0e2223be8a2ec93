"""Directed curves, degenerate-point frames and nabla-types."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .connection import ChristoffelField, curve_jets, field_chain
from .errors import DegeneracyMismatch, DimensionMismatch, OrderExhausted, Undetermined, ValidationError
from .symbolics import jets
from .symbolics.expr import Expr, eval_array, parse_expr, to_source
from .symbolics.jets import JetScalar, JetVector

__all__ = [
    "DirectedCurve",
    "NablaType",
    "ZERO_ATOL",
    "RANK_REL_TOL",
    "vanishing_order",
    "degeneracy_order",
    "frame_from_degenerate",
    "frame_jets",
    "field_nabla_type",
    "curve_nabla_type",
    "nabla_type_from_vectors",
]

ZERO_ATOL = 1e-12
RANK_REL_TOL = 1e-9
ABS_FLOOR = 1e-14
DEFAULT_ORDER = 8


@dataclass(frozen=True, eq=False)
class DirectedCurve:
    """Curve ``gamma`` with optional frame ``u`` and factor ``c``, ``gamma' = c u``.

    Without a frame the direction field is derived point by point from the
    covariant chain (see :func:`frame_jets`).
    """

    gamma: tuple
    frame: tuple | None = None
    factor: Expr | None = None
    domain: tuple = (-1.0, 1.0)
    name: str = "curve"
    variable: str = "t"

    def __post_init__(self):
        if self.frame is not None and len(self.frame) != len(self.gamma):
            raise DimensionMismatch(f"frame has {len(self.frame)} components, curve has {len(self.gamma)}")
        if self.factor is not None and self.frame is None:
            raise ValidationError("curve.factor", "a factor needs a frame")
        lo, hi = self.domain
        if not lo < hi:
            raise ValidationError("curve.domain", f"empty interval [{lo}, {hi}]")

    @classmethod
    def from_strings(cls, gamma, frame=None, factor=None, domain=(-1.0, 1.0), name="curve", variable="t"):
        v = [variable]
        return cls(
            tuple(parse_expr(s, v) for s in gamma),
            None if frame is None else tuple(parse_expr(s, v) for s in frame),
            None if factor is None else parse_expr(factor, v),
            (float(domain[0]), float(domain[1])),
            name,
            variable,
        )

    @property
    def dim(self) -> int:
        return len(self.gamma)

    @property
    def has_frame(self) -> bool:
        return self.frame is not None

    def sources(self) -> dict:
        out = {"gamma": [to_source(e) for e in self.gamma]}
        if self.frame is not None:
            out["frame"] = [to_source(e) for e in self.frame]
        if self.factor is not None:
            out["factor"] = to_source(self.factor)
        return out

    def jets(self, t0, order: int) -> np.ndarray:
        return curve_jets(self.gamma, t0, order, self.variable)

    def point(self, t: float) -> np.ndarray:
        return self.jets(t, 0)[:, 0]

    def check(self, samples: int = 200, tol: float = 1e-10, seed: int = 0) -> None:
        """Check ``gamma' = c u`` and ``u != 0`` at random points of the domain."""
        rng = np.random.default_rng(seed)
        ts = rng.uniform(*self.domain, size=samples)
        if self.frame is None:
            vel = jets.derivative(self.jets(ts, 1))[..., 0]
            if not np.any(np.linalg.norm(vel, axis=0) > ZERO_ATOL):
                raise ValidationError("curve.gamma", "velocity vanishes at every sample; no direction can be derived")
            return
        u, c = frame_jets(self, ts, 0, field=None)
        u = u[..., 0]
        c = c[..., 0]
        if np.any(np.linalg.norm(u, axis=0) <= ZERO_ATOL):
            raise ValidationError("curve.frame", "frame vanishes at a sample point")
        vel = jets.derivative(self.jets(ts, 1))[..., 0]
        err = np.abs(vel - c * u).max(axis=0)
        scale = np.maximum(1.0, np.abs(vel).max(axis=0))
        if np.any(err > tol * scale):
            worst = int(np.argmax(err / scale))
            raise ValidationError(
                "curve.frame",
                f"gamma' != c*u at t={ts[worst]:.6g} (residual {err[worst]:.3g})",
            )


@dataclass(frozen=True)
class NablaType:
    """Strictly increasing orders ``(b_1, ..., b_m)``; ``None`` marks an entry beyond reach."""

    entries: tuple
    t0: float = 0.0
    margin: float = field(default=math.inf, compare=False)

    def __post_init__(self):
        known = [b for b in self.entries if b is not None]
        if any(b < 1 for b in known) or any(a >= b for a, b in zip(known, known[1:])):
            raise ValueError(f"nabla-type entries must be positive and strictly increasing: {self.entries}")

    @property
    def determinate(self) -> bool:
        return all(b is not None for b in self.entries)

    def shifted(self, ell: int) -> "NablaType":
        return NablaType(tuple(None if b is None else b + ell for b in self.entries), self.t0, self.margin)

    def __str__(self):
        return "(" + ", ".join("?" if b is None else str(b) for b in self.entries) + ")"


# --- orders and frames ----------------------------------------------------------------


def vanishing_order(c: JetScalar, atol: float = ZERO_ATOL) -> int:
    """Index of the first coefficient above ``atol``."""
    coeffs = c.coeffs if isinstance(c, JetScalar) else np.asarray(c, dtype=float)
    if coeffs.size < 2:
        raise OrderExhausted("vanishing order needs a jet of order >= 1")
    big = np.nonzero(np.abs(coeffs) > atol)[0]
    if big.size == 0:
        raise Undetermined(f"all {coeffs.size} coefficients are below {atol:g}")
    return int(big[0])


def degeneracy_order(vectors: np.ndarray, rel_tol: float = RANK_REL_TOL) -> int:
    """First k with ``|D_k| > rel_tol * max_j |D_j|`` for a chain ``vectors[k-1] = D_k``."""
    norms = np.linalg.norm(np.asarray(vectors, dtype=float), axis=1)
    top = norms.max() if norms.size else 0.0
    if top < ABS_FLOOR:
        raise Undetermined("covariant chain is negligible up to the available order")
    return int(np.nonzero(norms > rel_tol * top)[0][0]) + 1


def frame_from_degenerate(gamma, t0: float, k: int, atol: float = ZERO_ATOL, order: int = DEFAULT_ORDER):
    """Frame ``u = gamma' / (k (t - t0)^(k-1))`` by coefficient shifting.

    ``gamma`` is a :class:`JetVector` at ``t0`` or a sequence of expressions.
    Returns ``(u, c)`` as jets of order ``K - k`` where ``K`` is the curve jet order,
    with ``c = k (t - t0)^(k-1)``.
    """
    if k < 1:
        raise ValueError("degeneracy order k must be >= 1")
    if isinstance(gamma, JetVector):
        g = gamma.coeffs
        t0 = gamma.t0
    else:
        g = curve_jets(gamma, t0, order)
    vel = jets.derivative(g)
    if vel.shape[-1] < k:
        raise OrderExhausted(f"k={k} needs a curve jet of order >= {k}")
    low = np.abs(vel[..., : k - 1])
    if low.size and np.any(low > atol):
        j = int(np.nonzero(low.max(axis=0) > atol)[0][0])
        raise DegeneracyMismatch(f"gamma^({j + 1})(t0) is not negligible, so the degeneracy order is below {k}")
    if not np.any(np.abs(vel[..., k - 1]) > atol):
        raise DegeneracyMismatch(f"gamma^({k})(t0) vanishes, so the degeneracy order exceeds {k}")
    u = vel[..., k - 1 :] / k
    c = np.zeros(u.shape[-1])
    if k - 1 < c.size:
        c[k - 1] = k
    return JetVector(u, t0), JetScalar(c, t0)


def frame_jets(curve: DirectedCurve, t0, order: int, field: ChristoffelField | None = None,
               rel_tol: float = RANK_REL_TOL, atol: float = ZERO_ATOL):
    """Frame and factor jets ``(u, c)`` at ``t0`` (scalar or array), as raw arrays.

    Declared frames are evaluated directly; a missing factor is recovered as
    ``<gamma', u> / <u, u>``.  Without a frame the degeneracy order is read
    from the covariant chain at each base point and the frame is built by
    :func:`frame_from_degenerate`.
    """
    t0 = np.asarray(t0, dtype=float)
    var = curve.variable
    if curve.frame is not None:
        tj = jets.variable(t0, order)
        env = {var: tj}
        u = np.stack([np.broadcast_to(eval_array(e, env, order), tj.shape) for e in curve.frame])
        if curve.factor is not None:
            c = np.broadcast_to(eval_array(curve.factor, env, order), tj.shape).copy()
        else:
            vel = jets.derivative(curve.jets(t0, order + 1))
            num = sum(jets.mul(vel[i], u[i]) for i in range(curve.dim))
            den = sum(jets.mul(u[i], u[i]) for i in range(curve.dim))
            c = jets.div(num, den)
        return u, c
    if field is None:
        field = ChristoffelField.flat(curve.dim)
    full = order + DEFAULT_ORDER
    if t0.ndim == 0:
        return _derived_frame(curve, float(t0), order, full, field, rel_tol, atol)
    us, cs = zip(*(_derived_frame(curve, float(t), order, full, field, rel_tol, atol) for t in t0.ravel()))
    u = np.stack(us, axis=1).reshape((curve.dim,) + t0.shape + (order + 1,))
    c = np.stack(cs).reshape(t0.shape + (order + 1,))
    return u, c


def _derived_frame(curve, t0, order, full, field, rel_tol, atol):
    g = curve.jets(t0, full)
    chain = field_chain(field, g, jets.derivative(g), DEFAULT_ORDER)
    k = degeneracy_order(chain, rel_tol)
    u, c = frame_from_degenerate(JetVector(g, t0), t0, k, atol=atol)
    return u.coeffs[:, : order + 1], c.coeffs[: order + 1]


# --- nabla-types ---------------------------------------------------------------------------


def nabla_type_from_vectors(vectors, rel_tol: float = RANK_REL_TOL, t0: float = 0.0, dim: int | None = None) -> NablaType:
    """Type of a chain ``vectors[j] = (nabla^j w)(t0)``.

    Ranks are taken on the Taylor-normalised vectors ``nabla^j w / j!`` against
    one threshold ``rel_tol * sigma_max`` of the whole chain, which keeps the
    prefix ranks monotone.  ``margin`` is the smallest factor by which any
    singular value clears the threshold (on either side).
    """
    v = np.asarray(vectors, dtype=float)
    count, m = v.shape
    dim = m if dim is None else dim
    scaled = v / np.array([math.factorial(j) for j in range(count)], dtype=float)[:, None]
    top = np.linalg.svd(scaled.T, compute_uv=False)[0] if count else 0.0
    if top < ABS_FLOOR:
        return NablaType((None,) * dim, t0, math.inf)
    thr = rel_tol * top
    ranks = []
    margin = math.inf
    for k in range(1, count + 1):
        sv = np.linalg.svd(scaled[:k].T, compute_uv=False)
        ranks.append(int(np.sum(sv > thr)))
        pos = sv[sv > 0]
        if pos.size:
            margin = min(margin, float(np.min(np.maximum(pos / thr, thr / pos))))
    entries = []
    for i in range(1, dim + 1):
        hit = next((k for k, r in enumerate(ranks, start=1) if r >= i), None)
        entries.append(hit)
    return NablaType(tuple(entries), float(t0), margin)


def _as_array(x, t0, order=DEFAULT_ORDER):
    if isinstance(x, JetVector):
        return x.coeffs, x.t0
    if isinstance(x, DirectedCurve):
        return x.jets(t0, order), t0
    if isinstance(x, np.ndarray):
        return x, t0
    return curve_jets(list(x), t0, order), t0


def field_nabla_type(w, gamma, field: ChristoffelField, t0: float = 0.0, kmax: int | None = None,
                     rel_tol: float = RANK_REL_TOL) -> NablaType:
    """nabla-type of the field ``w`` along ``gamma`` at ``t0`` (jets or expressions)."""
    g, t0 = _as_array(gamma, t0)
    wa, _ = _as_array(w, t0)
    if g.shape[0] != field.dim or wa.shape[0] != field.dim:
        raise DimensionMismatch("field, curve and connection dimensions differ")
    avail = min(g.shape[-1], wa.shape[-1])
    kmax = avail if kmax is None else min(kmax, avail)
    vectors = field_chain(field, g, wa, kmax)
    return nabla_type_from_vectors(vectors, rel_tol, t0, field.dim)


def curve_nabla_type(field: ChristoffelField, gamma, t0: float = 0.0, kmax: int | None = None,
                     rel_tol: float = RANK_REL_TOL, order: int = DEFAULT_ORDER) -> NablaType:
    """nabla-type of the velocity field ``gamma'``."""
    g, t0 = _as_array(gamma, t0, order)
    vel = jets.derivative(g)
    return field_nabla_type(vel, g, field, t0, kmax, rel_tol)
