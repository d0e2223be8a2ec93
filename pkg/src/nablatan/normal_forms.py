"""Model germs of tangent-surface singularities and the flat model curves that sweep them.

Each germ is written in tangent-surface shape, ``gamma(t) + s u(t)`` for a flat
model curve, so the surface pipeline reproduces it node for node.  Trailing
coordinates beyond the fourth are zero.  The Whitney cusp is the plane map
``(u, t) -> (u, t^3 + u t)``; :func:`germ_eval` takes ``u`` from the ``s`` slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import DirectedCurve
from .errors import DimensionMismatch, ValidationError

__all__ = ["GermKind", "GERM_NAMES", "germ_eval", "germ_grid", "model_curve"]

GERM_NAMES = ("CuspidalEdge", "FoldedUmbrella", "Swallowtail", "OpenSwallowtail", "WhitneyCusp")

_DEFAULT_DIM = {"CuspidalEdge": 3, "FoldedUmbrella": 3, "Swallowtail": 3, "OpenSwallowtail": 4, "WhitneyCusp": 2}


@dataclass(frozen=True)
class GermKind:
    name: str
    dim: int

    def __post_init__(self):
        if self.name not in GERM_NAMES:
            raise ValidationError("kind", f"unknown germ {self.name!r}; choose from {', '.join(GERM_NAMES)}")
        fixed = {"FoldedUmbrella": 3, "Swallowtail": 3, "WhitneyCusp": 2}
        if self.name in fixed and self.dim != fixed[self.name]:
            raise DimensionMismatch(f"{self.name} lives in dimension {fixed[self.name]}, not {self.dim}")
        low = {"CuspidalEdge": 3, "OpenSwallowtail": 4}
        if self.name in low and self.dim < low[self.name]:
            raise DimensionMismatch(f"{self.name} needs dimension >= {low[self.name]}, got {self.dim}")

    @classmethod
    def of(cls, name: str, dim: int | None = None) -> "GermKind":
        if name not in GERM_NAMES:
            raise ValidationError("kind", f"unknown germ {name!r}; choose from {', '.join(GERM_NAMES)}")
        return cls(name, _DEFAULT_DIM[name] if dim is None else int(dim))

    def __str__(self):
        return f"{self.name}({self.dim})"


def germ_eval(kind: GermKind, t, s) -> np.ndarray:
    """Germ value(s); ``t`` and ``s`` broadcast, the result has a trailing axis of length m."""
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    name = kind.name
    if name == "WhitneyCusp":
        comps = [s, t**3 + s * t]
    elif name == "CuspidalEdge":
        comps = [t + s, t**2 + 2 * s * t, t**3 + 3 * s * t**2]
    elif name == "FoldedUmbrella":
        comps = [t + s, t**2 + 2 * s * t, t**4 + 4 * s * t**3]
    else:
        comps = [t**2 + s, t**3 + 1.5 * s * t, t**4 + 2 * s * t**2]
        if name == "OpenSwallowtail":
            comps.append(t**5 + 2.5 * s * t**3)
    comps += [np.zeros_like(t)] * (kind.dim - len(comps))
    return np.stack(comps, axis=-1)


def germ_grid(kind: GermKind, t_range=(-1.0, 1.0), s_range=(-1.0, 1.0), n_t: int = 51, n_s: int = 51):
    """``(t, s, points)`` with points of shape (n_t, n_s, m)."""
    t = np.linspace(*t_range, n_t)
    s = np.linspace(*s_range, n_s)
    T, S = np.meshgrid(t, s, indexing="ij")
    return t, s, germ_eval(kind, T, S)


_MODELS = {
    "CuspidalEdge": (["t", "t^2", "t^3"], ["1", "2*t", "3*t^2"], "1"),
    "FoldedUmbrella": (["t", "t^2", "t^4"], ["1", "2*t", "4*t^3"], "1"),
    "Swallowtail": (["t^2", "t^3", "t^4"], ["1", "3/2*t", "2*t^2"], "2*t"),
    "OpenSwallowtail": (["t^2", "t^3", "t^4", "t^5"], ["1", "3/2*t", "2*t^2", "5/2*t^3"], "2*t"),
}


def model_curve(kind: GermKind) -> DirectedCurve:
    """Flat model curve with frame and factor whose tangent surface is the germ."""
    if kind.name not in _MODELS:
        raise ValidationError("kind", f"{kind.name} is not the tangent surface of a space curve")
    gamma, frame, factor = _MODELS[kind.name]
    pad = ["0"] * (kind.dim - len(gamma))
    return DirectedCurve.from_strings(gamma + pad, frame + pad, factor, (-1.0, 1.0), name=f"model:{kind}")
