"""Shipped connections.

``hyperbolic-halfspace`` and ``sphere-stereographic`` are the Levi-Civita
connections of the conformally flat metrics ``|dx|^2 / x_m^2`` and
``4 |dx|^2 / (1 + |x|^2)^2``.  For a metric ``exp(2 phi) |dx|^2`` the symbols are
``G^l_mn = d^l_m phi_n + d^l_n phi_m - d_mn phi_l`` with ``phi_i = d phi / d x_i``.
"""

from __future__ import annotations

import numpy as np

from .connection import ChristoffelField, coordinate_names
from .errors import ValidationError
from .symbolics.expr import BinOp, Neg, Num, Var, parse_expr

PRESETS = ("flat", "hyperbolic-halfspace", "sphere-stereographic", "random-poly")

RNG_ALGORITHM = "numpy Generator(Philox4x64-10) seeded by SeedSequence"


def rng_for(*key: int) -> np.random.Generator:
    """Counter-based generator for an integer key path (reproducible, splittable)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def _conformal(dim: int, grad_phi: list, name: str) -> ChristoffelField:
    """``grad_phi`` holds parsed partials of phi (or None); entries share these nodes."""
    entries = {}
    for l in range(dim):
        for m in range(dim):
            for n in range(dim):
                plus = [grad_phi[k] for k, hit in ((n, l == m), (m, l == n)) if hit and grad_phi[k] is not None]
                minus = grad_phi[l] if m == n else None
                e = None
                for term in plus:
                    e = term if e is None else BinOp("+", e, term)
                if minus is not None:
                    e = Neg(minus) if e is None else BinOp("-", e, minus)
                if e is not None:
                    entries[(l + 1, m + 1, n + 1)] = e
    return ChristoffelField.from_entries(dim, entries, name=name)


def hyperbolic_halfspace(dim: int = 3) -> ChristoffelField:
    names = coordinate_names(dim)
    grad = [None] * (dim - 1) + [parse_expr(f"-1/{names[-1]}", names)]
    return _conformal(dim, grad, "hyperbolic-halfspace")


def sphere_stereographic(dim: int = 3) -> ChristoffelField:
    names = coordinate_names(dim)
    denom = parse_expr("1 + " + " + ".join(f"{x}^2" for x in names), names)
    grad = [BinOp("/", BinOp("*", Num(-2.0), Var(x)), denom) for x in names]
    return _conformal(dim, grad, "sphere-stereographic")


def random_poly(dim: int, seed: int = 0, amplitude: float = 0.3, degree: int = 2, index: int = 0) -> ChristoffelField:
    """Seeded random polynomial symbols, generally with torsion."""
    rng = rng_for(seed, index, 7919)
    names = coordinate_names(dim)
    monomials = [()]
    if degree >= 1:
        monomials += [(i,) for i in range(dim)]
    if degree >= 2:
        monomials += [(i, j) for i in range(dim) for j in range(i, dim)]
    entries = {}
    for l in range(dim):
        for m in range(dim):
            for n in range(dim):
                coef = rng.uniform(-amplitude, amplitude, size=len(monomials))
                parts = []
                for c, mono in zip(coef, monomials):
                    factor = "*".join(names[i] for i in mono)
                    parts.append(f"({float(c)!r})" + (f"*{factor}" if factor else ""))
                entries[(l + 1, m + 1, n + 1)] = " + ".join(parts)
    return ChristoffelField.from_entries(dim, entries, name=f"random-poly(seed={seed},index={index})")


def make_preset(name: str, dim: int, seed: int = 0, amplitude: float = 0.3) -> ChristoffelField:
    if name == "flat":
        return ChristoffelField.flat(dim)
    if name == "hyperbolic-halfspace":
        return hyperbolic_halfspace(dim)
    if name == "sphere-stereographic":
        return sphere_stereographic(dim)
    if name == "random-poly":
        return random_poly(dim, seed=seed, amplitude=amplitude)
    raise ValidationError("connection.preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
