"""Geodesic flow ``phi(x, v, s)`` of a connection.

The first-order system ``x' = v``, ``v'^l = -G^l_mn(x) v^m v^n`` is integrated
with states that are jets in the curve parameter ``t``: every arithmetic
operation of the Runge-Kutta scheme runs in truncated Taylor arithmetic, so
coefficient 1 of the final position is ``df/dt`` with no differencing.  Plain
real initial data are order-0 jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .connection import ChristoffelField
from .errors import BlowUp, DimensionMismatch, DomainError, StepLimitExceeded, ValidationError
from .symbolics import jets
from .symbolics.jets import JetVector

__all__ = [
    "IntegratorOptions",
    "GeodesicState",
    "GeodesicPath",
    "S_SWITCH",
    "integrate_geodesic",
    "geodesic_jet",
    "geodesic_remainder",
    "geodesic_taylor",
    "solve_batch",
]

S_SWITCH = 1e-4
METHODS = ("dopri5", "rk4")


@dataclass(frozen=True)
class IntegratorOptions:
    method: str = "dopri5"
    atol: float = 1e-10
    rtol: float = 1e-10
    max_steps: int = 100_000
    initial_step: float | None = None  # fixed step for rk4 (default 1e-2)
    blowup: float = 1e8
    jet_error: str = "value"  # "value": step control on coefficient 0 only; "all": every coefficient

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError("integrator.method", f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.atol > 0 and self.rtol > 0):
            raise ValidationError("integrator.atol", "tolerances must be positive")
        if self.max_steps < 1:
            raise ValidationError("integrator.max_steps", "must be >= 1")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValidationError("integrator.initial_step", "must be positive")
        if not self.blowup > 0:
            raise ValidationError("integrator.blowup", "must be positive")
        if self.jet_error not in ("value", "all"):
            raise ValidationError("integrator.jet_error", "must be 'value' or 'all'")


@dataclass(frozen=True)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    s: float


@dataclass(frozen=True)
class GeodesicPath:
    """Samples of the flow; ``positions[i]`` belongs to ``s[i]``.

    For jet-valued runs the trailing axis holds t-jet coefficients.
    """

    s: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    t0: float | None = None

    def states(self) -> list:
        return [GeodesicState(p, v, float(s)) for s, p, v in zip(self.s, self.positions, self.velocities)]

    def at(self, i: int) -> GeodesicState:
        return GeodesicState(self.positions[i], self.velocities[i], float(self.s[i]))


# --- Dormand-Prince 5(4) --------------------------------------------------------------------

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _rhs(field: ChristoffelField, y: np.ndarray) -> np.ndarray:
    m = field.dim
    x, v = y[:m], y[m:]
    if field.is_flat:
        acc = np.zeros_like(v)
    else:
        acc = -field.contract(field.evaluate_jets(x), v, v)
    return np.concatenate([v, acc])


def _combine(y, h, ks, coefs):
    out = y
    for a, k in zip(coefs, ks):
        if a:
            out = out + (h * a) * k
    return out


class _Run:
    def __init__(self, field, opts):
        self.field = field
        self.opts = opts
        self.steps = 0
        self.done_s: list = []
        self.done_y: list = []

    def f(self, y):
        with np.errstate(all="ignore"):
            try:
                return _rhs(self.field, y)
            except DomainError as exc:
                raise BlowUp(f"connection not evaluable along the geodesic: {exc}", self._partial()) from exc

    def _partial(self):
        if not self.done_y:
            return None
        return np.array(self.done_s), np.stack(self.done_y)

    def check(self, s, y):
        head = y[..., 0]
        if not np.all(np.isfinite(y)) or np.max(np.abs(head)) > self.opts.blowup:
            raise BlowUp(f"state left the bound {self.opts.blowup:g} near s={s:.6g}", self._partial())

    def count(self, s):
        self.steps += 1
        if self.steps > self.opts.max_steps:
            raise StepLimitExceeded(f"more than {self.opts.max_steps} steps (reached s={s:.6g})", self._partial())

    def _scale(self, y, y_new):
        o = self.opts
        if o.jet_error == "value":
            y, y_new = y[..., :1], y_new[..., :1]
        return o.atol + o.rtol * np.maximum(np.abs(y), np.abs(y_new))

    def initial_step(self, y, f0, direction, span):
        o = self.opts
        if o.initial_step is not None:
            return min(o.initial_step, span)
        sel = (lambda a: a[..., :1]) if o.jet_error == "value" else (lambda a: a)
        sc = o.atol + o.rtol * np.abs(sel(y))
        d0 = np.sqrt(np.mean((sel(y) / sc) ** 2))
        d1 = np.sqrt(np.mean((sel(f0) / sc) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = y + direction * h0 * f0
        f1 = self.f(y1)
        d2 = np.sqrt(np.mean((sel(f1 - f0) / sc) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span)

    def dopri(self, y, s, target, h):
        direction = 1.0 if target > s else -1.0
        k1 = self.f(y)
        if h is None:
            h = self.initial_step(y, k1, direction, abs(target - s))
        while direction * (target - s) > 0:
            remaining = abs(target - s)
            last = h >= remaining * (1 - 1e-12)
            step = remaining if last else h
            dh = direction * step
            ks = [k1]
            for i in range(1, 7):
                yi = _combine(y, dh, ks, _A[i])
                ks.append(self.f(yi))
            y_new = _combine(y, dh, ks[:6], _B)
            err_vec = _combine(np.zeros_like(y), dh, ks, _E)
            sc = self._scale(y, y_new)
            e = err_vec[..., :1] if self.opts.jet_error == "value" else err_vec
            err = float(np.max(np.abs(e) / sc)) if e.size else 0.0
            self.count(s)
            if not np.isfinite(err):
                h = step * 0.2
                continue
            if err <= 1.0:
                s = target if last else s + dh
                y = y_new
                k1 = ks[6]
                self.check(s, y)
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h = step * fac if not last else max(h, step * fac)
            else:
                h = step * max(0.2, 0.9 * err ** -0.2)
        return y, h

    def rk4(self, y, s, target):
        h = self.opts.initial_step or 1e-2
        span = target - s
        n = max(1, math.ceil(abs(span) / h - 1e-9))
        dh = span / n
        for i in range(n):
            k1 = self.f(y)
            k2 = self.f(y + (dh / 2) * k1)
            k3 = self.f(y + (dh / 2) * k2)
            k4 = self.f(y + dh * k3)
            y = y + (dh / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            self.count(s + (i + 1) * dh)
            self.check(s + (i + 1) * dh, y)
        return y

    def run(self, y0, targets):
        y = y0
        s = 0.0
        h = None
        out = []
        for target in targets:
            if target != s:
                if self.opts.method == "rk4":
                    y = self.rk4(y, s, target)
                else:
                    y, h = self.dopri(y, s, target, h)
                s = target
            out.append(y)
            self.done_s.append(s)
            self.done_y.append(y)
        return out


def solve_batch(field: ChristoffelField, x0: np.ndarray, v0: np.ndarray, s_values, opts: IntegratorOptions | None = None):
    """Integrate jet-valued initial data of shape (m, ..., K+1).

    Returns ``(positions, velocities)`` of shape (n_s, m, ..., K+1) in the order
    of ``s_values``.  Forward and backward branches start from s = 0 separately.
    """
    opts = opts or IntegratorOptions()
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if x0.shape[0] != field.dim or v0.shape[0] != field.dim:
        raise DimensionMismatch(f"state dimension {x0.shape[0]} does not match connection dimension {field.dim}")
    x0, v0 = np.broadcast_arrays(x0, v0)
    s_values = np.asarray(s_values, dtype=float).ravel()
    n = s_values.size
    pos = np.empty((n,) + x0.shape)
    vel = np.empty((n,) + x0.shape)
    if field.is_flat:
        for i, s in enumerate(s_values):
            pos[i] = x0 + s * v0 if s != 0.0 else x0
            vel[i] = v0
        return pos, vel
    y0 = np.concatenate([x0, v0])
    m = field.dim
    for sign in (1.0, -1.0):
        idx = [i for i in range(n) if (s_values[i] > 0 if sign > 0 else s_values[i] < 0)]
        idx.sort(key=lambda i: abs(s_values[i]))
        if not idx:
            continue
        results = _Run(field, opts).run(y0, [s_values[i] for i in idx])
        for i, y in zip(idx, results):
            pos[i] = y[:m]
            vel[i] = y[m:]
    for i in np.nonzero(s_values == 0.0)[0]:
        pos[i] = x0
        vel[i] = v0
    return pos, vel


def integrate_geodesic(field: ChristoffelField, x, v, s_end: float = 1.0, opts: IntegratorOptions | None = None,
                       n_samples: int = 2, s_values=None) -> GeodesicPath:
    """Geodesic through ``x`` with velocity ``v``, sampled on ``linspace(0, s_end, n_samples)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if s_values is None:
        s_values = np.linspace(0.0, s_end, max(n_samples, 2))
    s_values = np.asarray(s_values, dtype=float)
    pos, vel = solve_batch(field, x[:, None], v[:, None], s_values, opts)
    return GeodesicPath(s_values, pos[..., 0], vel[..., 0])


def geodesic_jet(field: ChristoffelField, gamma: JetVector, u: JetVector, s_values,
                 opts: IntegratorOptions | None = None) -> GeodesicPath:
    """``f(t, s) = phi(gamma(t), u(t), s)`` as t-jets at ``gamma.t0``, for each s.

    ``positions[i]`` has shape (m, K+1): coefficient 0 is the surface point,
    coefficient 1 is ``df/dt``; ``velocities[i][:, 0]`` is ``df/ds``.
    """
    if gamma.order != u.order or gamma.t0 != u.t0:
        raise ValueError("curve and frame jets must share order and base point")
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    pos, vel = solve_batch(field, gamma.coeffs, u.coeffs, s_values, opts)
    return GeodesicPath(s_values, pos, vel, gamma.t0)


def geodesic_taylor(field: ChristoffelField, x, v, order: int) -> np.ndarray:
    """Taylor coefficients in s of ``phi(x, v, s)`` up to ``order``; shape (m, order+1)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    coef = np.zeros((field.dim, order + 1))
    coef[:, 0] = x
    if order >= 1:
        coef[:, 1] = v
    for p in range(2, order + 1):
        phi = coef[:, :p]
        dphi = jets.derivative(phi)
        if field.is_flat:
            break
        gvals = field.evaluate_jets(jets.truncate(phi, p - 2))
        acc = -field.contract(gvals, dphi, dphi)
        coef[:, p] = acc[:, p - 2] / (p * (p - 1))
    return coef


def geodesic_remainder(field: ChristoffelField, x, v, s: float, opts: IntegratorOptions | None = None,
                       s_switch: float = S_SWITCH) -> np.ndarray:
    """``h`` in ``phi(x, v, s) = x + s v + s^2 h / 2``.

    For ``|s| <= s_switch`` the quotient is replaced by its first-order Taylor
    expansion ``-G(x)(v, v) + s h_1`` taken from the series of the flow.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if field.is_flat:
        return np.zeros_like(x)
    if abs(s) > s_switch:
        path = integrate_geodesic(field, x, v, s_values=[s], opts=opts)
        return 2.0 * (path.positions[0] - x - s * v) / (s * s)
    coef = geodesic_taylor(field, x, v, 3)
    return 2.0 * coef[:, 2] + 2.0 * s * coef[:, 3]
