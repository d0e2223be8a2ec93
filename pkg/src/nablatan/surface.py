"""Tangent surfaces ``f(t, s) = phi(gamma(t), u(t), s)``, singular locus and frontal frames."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connection import ChristoffelField, field_chain, symmetrize
from .curve import RANK_REL_TOL, ZERO_ATOL, DirectedCurve, frame_jets
from .errors import DimensionMismatch, NablaTanError, NearSingularQuotient
from .geodesic import S_SWITCH, IntegratorOptions, solve_batch

__all__ = [
    "TangentSurfaceGrid",
    "SingularLocus",
    "FrontalFrame",
    "eval_surface",
    "singular_locus",
    "frontal_frame",
    "frontal_limit",
    "frame_chain",
    "eta_derivatives",
    "wedge",
]


@dataclass(frozen=True, eq=False)
class TangentSurfaceGrid:
    """Samples on a rectangular (t, s) grid; arrays are indexed ``[i_t, j_s, ...]``."""

    t: np.ndarray
    s: np.ndarray
    points: np.ndarray  # (n_t, n_s, m)
    df_dt: np.ndarray
    df_ds: np.ndarray
    sigma_min: np.ndarray  # (n_t, n_s)
    sigma_max: np.ndarray
    frame: np.ndarray  # (n_t, m) values of u
    factor: np.ndarray  # (n_t,) values of c
    failed: np.ndarray  # (n_t,) bool
    errors: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.points.shape[-1]

    @property
    def shape(self) -> tuple:
        return (self.t.size, self.s.size)

    def jacobian(self) -> np.ndarray:
        """Columns (df/dt, df/ds) stacked as (n_t, n_s, m, 2)."""
        return np.stack([self.df_dt, self.df_ds], axis=-1)

    def valid(self) -> "TangentSurfaceGrid":
        """Grid restricted to the columns that integrated successfully."""
        keep = ~self.failed
        return TangentSurfaceGrid(
            self.t[keep], self.s, self.points[keep], self.df_dt[keep], self.df_ds[keep],
            self.sigma_min[keep], self.sigma_max[keep], self.frame[keep], self.factor[keep],
            self.failed[keep], {},
        )


def _grid(lo, hi, n):
    g = np.linspace(lo, hi, n)
    g[np.abs(g) < 1e-14 * max(abs(lo), abs(hi), 1.0)] = 0.0
    return g


def _columns(field_, gamma, u, s, opts):
    pos, vel = solve_batch(field_, gamma, u, s, opts)
    # (n_s, m, n_t, 2) -> (n_t, n_s, m)
    return (
        np.transpose(pos[..., 0], (2, 0, 1)),
        np.transpose(pos[..., 1], (2, 0, 1)),
        np.transpose(vel[..., 0], (2, 0, 1)),
    )


def eval_surface(field_: ChristoffelField, curve: DirectedCurve, t_range=None, s_range=(-1.0, 1.0),
                 n_t: int = 51, n_s: int = 51, opts: IntegratorOptions | None = None,
                 rel_tol: float = RANK_REL_TOL, atol: float = ZERO_ATOL,
                 chunk_size: int | None = None, workers: int = 1) -> TangentSurfaceGrid:
    """Sample the tangent surface; ``df/dt`` and ``df/ds`` come from t-jets of order 1.

    Columns (fixed t) are integrated in batches of ``chunk_size`` (all at once by
    default).  ``workers`` spreads batches over threads; the result depends on
    ``chunk_size`` only, never on ``workers``.  A batch that fails is retried
    column by column and failing columns are marked in ``failed``.
    """
    if curve.dim != field_.dim:
        raise DimensionMismatch(f"curve dimension {curve.dim} != connection dimension {field_.dim}")
    t_range = curve.domain if t_range is None else t_range
    t = _grid(float(t_range[0]), float(t_range[1]), n_t)
    s = _grid(float(s_range[0]), float(s_range[1]), n_s)
    m = curve.dim
    points = np.full((n_t, n_s, m), np.nan)
    df_dt = np.full_like(points, np.nan)
    df_ds = np.full_like(points, np.nan)
    frame = np.full((n_t, m), np.nan)
    factor = np.full(n_t, np.nan)
    failed = np.zeros(n_t, dtype=bool)
    errors: dict = {}

    gam = curve.jets(t, 1)
    u = np.full((m, n_t, 2), np.nan)
    c = np.full((n_t, 2), np.nan)
    try:
        u[:], c[:] = frame_jets(curve, t, 1, field_, rel_tol, atol)
    except NablaTanError:
        for i, ti in enumerate(t):
            try:
                ui, ci = frame_jets(curve, float(ti), 1, field_, rel_tol, atol)
                u[:, i], c[i] = ui, ci
            except NablaTanError as exc:
                failed[i] = True
                errors[i] = str(exc)
    frame[:] = u[..., 0].T
    factor[:] = c[..., 0]

    ok = np.nonzero(~failed)[0]
    size = len(ok) if not chunk_size else chunk_size
    chunks = [ok[i : i + size] for i in range(0, len(ok), max(size, 1))]

    def work(idx):
        try:
            return idx, _columns(field_, gam[:, idx], u[:, idx], s, opts), None
        except NablaTanError:
            parts = []
            for i in idx:
                try:
                    parts.append((np.array([i]), _columns(field_, gam[:, [i]], u[:, [i]], s, opts), None))
                except NablaTanError as exc:
                    parts.append((np.array([i]), None, str(exc)))
            return parts

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(idx) for idx in chunks]
    flat = []
    for r in results:
        flat.extend(r if isinstance(r, list) else [r])
    for idx, cols, err in flat:
        if cols is None:
            failed[idx] = True
            for i in idx:
                errors[int(i)] = err
            continue
        points[idx], df_dt[idx], df_ds[idx] = cols

    jac = np.stack([df_dt, df_ds], axis=-1)
    sv = np.full((n_t, n_s, 2), np.nan)
    good = ~failed
    if good.any():
        sv[good] = np.linalg.svd(jac[good], compute_uv=False)
    return TangentSurfaceGrid(t, s, points, df_dt, df_ds, sv[..., 1], sv[..., 0], frame, factor, failed, errors)


@dataclass(frozen=True)
class SingularLocus:
    points: tuple  # ((t, s), ...)
    indices: tuple  # ((i_t, j_s), ...)
    max_abs_s: float
    rel_tol: float


def singular_locus(grid: TangentSurfaceGrid, rel_tol: float = 1e-6) -> SingularLocus:
    """Grid nodes with ``sigma_min <= rel_tol * sigma_max`` (failed columns skipped)."""
    flag = grid.sigma_min <= rel_tol * grid.sigma_max
    flag &= ~grid.failed[:, None]
    ii, jj = np.nonzero(flag)
    pts = tuple((float(grid.t[i]), float(grid.s[j])) for i, j in zip(ii, jj))
    idx = tuple((int(i), int(j)) for i, j in zip(ii, jj))
    max_s = max((abs(s) for _, s in pts), default=0.0)
    return SingularLocus(pts, idx, max_s, rel_tol)


@dataclass(frozen=True)
class FrontalFrame:
    t: float
    s: float
    V1: np.ndarray  # df/ds
    V2: np.ndarray  # F
    eta: tuple  # (1, -c(t))


def wedge(a, b) -> np.ndarray:
    """Bivector ``a ^ b`` as the antisymmetric matrix ``a b^T - b a^T``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.multiply.outer(a, b) - np.multiply.outer(b, a)


def frame_chain(field_: ChristoffelField, curve: DirectedCurve, t0: float, count: int,
                rel_tol: float = RANK_REL_TOL, atol: float = ZERO_ATOL) -> np.ndarray:
    """``u, nabla u, ..., nabla^(count-1) u`` at ``t0``; shape (count, m)."""
    u, _ = frame_jets(curve, float(t0), count - 1, field_, rel_tol, atol)
    g = curve.jets(float(t0), count)
    return field_chain(field_, g, u, count)


def frontal_frame(field_: ChristoffelField, curve: DirectedCurve, t: float, s: float,
                  opts: IntegratorOptions | None = None, s_switch: float = S_SWITCH) -> FrontalFrame:
    """``V1 = df/ds`` and ``V2 = F = (df/dt - c df/ds) / s`` at (t, s).

    At ``s = 0`` the quotient is replaced by its limit ``(nabla u)(t)``.
    """
    t = float(t)
    s = float(s)
    if 0.0 < abs(s) < s_switch:
        raise NearSingularQuotient(f"|s| = {abs(s):.3g} is below the quotient threshold {s_switch:g}; use s = 0")
    u, c = frame_jets(curve, t, 1, field_)
    c0 = float(c[0])
    if s == 0.0:
        nu = field_chain(field_, curve.jets(t, 1), u, 2)
        return FrontalFrame(t, s, u[:, 0].copy(), nu[1], (1.0, -c0))
    pos, vel = solve_batch(field_, curve.jets(t, 1), u, [s], opts)
    f_t = pos[0, :, 1]
    f_s = vel[0, :, 0]
    return FrontalFrame(t, s, f_s, (f_t - c0 * f_s) / s, (1.0, -c0))


def frontal_limit(field_: ChristoffelField, curve: DirectedCurve, t: float, s0: float = 1e-3,
                  opts: IntegratorOptions | None = None) -> np.ndarray:
    """``lim_{s -> 0} F(t, s)`` extrapolated from quotients at ``+-s0`` and ``+-2 s0``.

    Averaging ``s`` and ``-s`` removes the odd terms of ``F`` in ``s``; one
    Richardson step then removes the ``s^2`` term, leaving ``O(s0^4)``.  This
    never touches the ``s = 0`` shortcut, so it checks the quotient branch.
    """
    if s0 < S_SWITCH:
        raise NearSingularQuotient(f"s0 = {s0:g} is below the quotient threshold {S_SWITCH:g}")
    avg = []
    for h in (s0, 2 * s0):
        avg.append(0.5 * (frontal_frame(field_, curve, t, h, opts).V2 + frontal_frame(field_, curve, t, -h, opts).V2))
    return (4.0 * avg[0] - avg[1]) / 3.0


def eta_derivatives(field_: ChristoffelField, curve: DirectedCurve, t0: float,
                    rel_tol: float = RANK_REL_TOL, atol: float = ZERO_ATOL):
    """``(E2, E3) = ((nabla^2 u)(t0), (nabla^3 u)(t0))`` under the torsion-free part of the connection."""
    chain = frame_chain(symmetrize(field_), curve, t0, 4, rel_tol, atol)
    return chain[2], chain[3]
