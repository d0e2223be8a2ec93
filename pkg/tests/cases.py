"""Random test-case generators shared by unit and acceptance tests."""

import math

import numpy as np

from conftest import exprs, lit
from nablatan.connection import curve_jets, field_chain, symmetrize
from nablatan.curve import field_nabla_type, frame_from_degenerate
from nablatan.presets import make_preset
from nablatan.symbolics import JetVector, jets

BASE = {"flat": (0.0, 0.0, 0.0), "hyperbolic-halfspace": (0.1, -0.2, 1.5),
        "sphere-stereographic": (0.2, 0.1, -0.3), "random-poly": (0.1, 0.2, -0.1)}


def poly_src(coeffs, start=0, const=None):
    terms = [] if const is None else [lit(const)]
    terms += [f"{lit(c)}*t^{j}" for j, c in enumerate(coeffs, start=start)]
    return " + ".join(terms) if terms else "0"


def connection(preset, seed=0):
    f = make_preset(preset, 3, seed=seed, amplitude=0.3)
    return symmetrize(f) if preset == "random-poly" else f


def degenerate_curve(rng, k, preset, extra=3):
    """Expressions for base + sum_{j >= k} a_j t^j with a_k != 0."""
    a = rng.normal(size=(3, extra))
    return exprs([poly_src(a[i], start=k, const=BASE[preset][i]) for i in range(3)])


def lemma_constants_residual(field_, gamma_exprs, k, ell, order=10):
    """Relative error of (nabla^ell u)(0) against ell!/(k (k+ell-1)!) (nabla^(k+ell) gamma)(0)."""
    g = curve_jets(gamma_exprs, 0.0, order)
    u, _ = frame_from_degenerate(JetVector(g, 0.0), 0.0, k)
    U = field_chain(field_, g, u.coeffs, ell + 1)[ell]
    D = field_chain(field_, g, jets.derivative(g), k + ell)[k + ell - 1]
    want = math.factorial(ell) / (k * math.factorial(k + ell - 1)) * D
    return np.linalg.norm(U - want) / max(np.linalg.norm(want), 1e-300)


def shift_case(rng, preset, ell, seed=0):
    """(type(c u), type(u) shifted by ord c) for random u, c, curve at t0 = 0."""
    field_ = connection(preset, seed)
    b = BASE[preset]
    gamma = exprs([poly_src(rng.normal(size=4), start=1, const=b[i]) for i in range(3)])
    u_coef = rng.normal(size=(3, 5))
    u = [poly_src(u_coef[i]) for i in range(3)]
    c_coef = rng.uniform(0.5, 1.5, size=3) * rng.choice([-1, 1], size=3)
    c = poly_src(c_coef, start=ell)
    w = [f"({c})*({ui})" for ui in u]
    tw = field_nabla_type(exprs(w), gamma, field_, 0.0)
    tu = field_nabla_type(exprs(u), gamma, field_, 0.0)
    return tw, tu.shifted(ell)
