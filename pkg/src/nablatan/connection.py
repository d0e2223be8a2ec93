"""Affine connections in one coordinate chart and covariant derivatives along curves.

A connection is given by its Christoffel symbols ``gamma[l][m][n]`` (0-based
here; the scene format is 1-based), each an expression in ``x1..xm``.
All derivative information of the symbols along a curve is obtained by jet
composition, never by symbolic differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, OrderExhausted
from .symbolics import jets
from .symbolics.expr import (
    BinOp,
    Expr,
    Num,
    eval_array,
    eval_scalar,
    free_variables,
    is_zero,
    parse_expr,
    to_polynomial,
)
from .symbolics.jets import JetVector

__all__ = [
    "ChristoffelField",
    "CovariantChain",
    "coordinate_names",
    "symmetrize",
    "covariant_derivative_field",
    "covariant_chain",
    "chain_from_jets",
    "field_chain",
    "curve_jets",
]


def coordinate_names(dim: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(dim))


_ZERO = Num(0.0)


@dataclass(frozen=True, eq=False)
class ChristoffelField:
    dim: int
    gamma: tuple
    name: str = "custom"
    torsion_free: bool = field(init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionMismatch(f"connection dimension must be >= 2, got {self.dim}")
        g = self.gamma
        if len(g) != self.dim or any(len(row) != self.dim or any(len(col) != self.dim for col in row) for row in g):
            raise DimensionMismatch(f"Christoffel array must be {self.dim}x{self.dim}x{self.dim}")
        allowed = set(coordinate_names(self.dim))
        for lam, mu, nu, e in self._entries():
            extra = free_variables(e) - allowed
            if extra:
                raise DimensionMismatch(
                    f"Gamma^{lam + 1}_{mu + 1}{nu + 1} uses {sorted(extra)} outside {sorted(allowed)}"
                )
        symmetric = all(g[l][m][n] == g[l][n][m] for l in range(self.dim) for m in range(self.dim) for n in range(m))
        object.__setattr__(self, "torsion_free", symmetric)
        object.__setattr__(
            self, "_nonzero", tuple((l, m, n, e) for l, m, n, e in self._entries() if not is_zero(e))
        )

    def _entries(self):
        for l in range(self.dim):
            for m in range(self.dim):
                for n in range(self.dim):
                    yield l, m, n, self.gamma[l][m][n]

    @classmethod
    def from_entries(cls, dim: int, entries: Mapping, name: str = "custom", one_based: bool = True):
        """Build from a sparse ``{(l, m, n): expr}`` mapping; missing symbols are zero."""
        names = coordinate_names(dim)
        g = [[[_ZERO] * dim for _ in range(dim)] for _ in range(dim)]
        off = 1 if one_based else 0
        for key, value in entries.items():
            l, m, n = (int(i) - off for i in key)
            if not all(0 <= i < dim for i in (l, m, n)):
                raise DimensionMismatch(f"index {tuple(key)} out of range for dimension {dim}")
            g[l][m][n] = parse_expr(value, names) if isinstance(value, str) else value
        return cls(dim, tuple(tuple(tuple(col) for col in row) for row in g), name)

    @classmethod
    def flat(cls, dim: int):
        return cls.from_entries(dim, {}, name="flat")

    @property
    def variables(self) -> tuple[str, ...]:
        return coordinate_names(self.dim)

    @property
    def is_flat(self) -> bool:
        """True when every symbol is the literal 0 (no evaluation involved)."""
        return not self._nonzero

    @property
    def nonzero(self) -> tuple:
        return self._nonzero

    def evaluate(self, x) -> np.ndarray:
        """Symbols at a point as an (m, m, m) array."""
        x = np.asarray(x, dtype=float)
        env = dict(zip(self.variables, map(float, x)))
        out = np.zeros((self.dim,) * 3)
        for l, m, n, e in self._nonzero:
            out[l, m, n] = eval_scalar(e, env)
        return out

    def evaluate_jets(self, x: np.ndarray) -> np.ndarray:
        """Symbols composed with position jets ``x`` of shape (m, ..., K+1).

        Returns the dense array of shape (m, m, m, ..., K+1).  Polynomial
        connections go through a compiled monomial basis.
        """
        poly = self._polynomial()
        if poly is not None:
            monomials, coef = poly
            return np.tensordot(coef, _monomial_jets(monomials, x), axes=([3], [0]))
        order = x.shape[-1] - 1
        env = {name: x[i] for i, name in enumerate(self.variables)}
        cache: dict = {}
        out = np.zeros((self.dim,) * 3 + x.shape[1:])
        for l, m, n, e in self._nonzero:
            out[l, m, n] = eval_array(e, env, order, cache)
        return out

    def _polynomial(self):
        if "_poly" not in self.__dict__:
            object.__setattr__(self, "_poly", _compile_polynomial(self))
        return self.__dict__["_poly"]

    @staticmethod
    def contract(values: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Jet of ``Gamma^l_{mn} a^m b^n`` given dense symbol jets ``values``."""
        order = min(a.shape[-1], b.shape[-1]) - 1
        a = a[..., : order + 1]
        b = b[..., : order + 1]
        g = values[..., : order + 1]
        ab = jets.mul(a[:, None], b[None, :])
        return jets.mul(g, ab[None]).sum(axis=(1, 2))

    def with_name(self, name: str) -> "ChristoffelField":
        return ChristoffelField(self.dim, self.gamma, name)


def _compile_polynomial(field: ChristoffelField):
    polys = []
    for l, m, n, e in field.nonzero:
        p = to_polynomial(e, field.variables)
        if p is None:
            return None
        polys.append(((l, m, n), p))
    monomials = sorted({k for _, p in polys for k in p}, key=lambda k: (sum(k), k))
    index = {k: i for i, k in enumerate(monomials)}
    coef = np.zeros((field.dim,) * 3 + (len(monomials),))
    for (l, m, n), p in polys:
        for k, v in p.items():
            coef[l, m, n, index[k]] = v
    return monomials, coef


def _monomial_jets(monomials, x: np.ndarray) -> np.ndarray:
    """Jets of ``prod x_i^k_i`` for each exponent tuple; shape (len, ..., K+1)."""
    one = jets.constant(np.ones(x.shape[1:-1]), x.shape[-1] - 1)
    memo = {(0,) * x.shape[0]: one}

    def get(k):
        hit = memo.get(k)
        if hit is None:
            i = max(j for j, e in enumerate(k) if e)
            parent = k[:i] + (k[i] - 1,) + k[i + 1 :]
            hit = memo[k] = jets.mul(get(parent), x[i])
        return hit

    if not monomials:
        return np.zeros((0,) + x.shape[1:])
    return np.stack([get(k) for k in monomials])


def symmetrize(field: ChristoffelField) -> ChristoffelField:
    """Torsion-free part: entries ``(G^l_mn + G^l_nm) / 2``.

    Entries that are already structurally equal are kept as they are, so a
    symmetric field is returned unchanged.
    """
    d = field.dim
    g = field.gamma
    out = [[[None] * d for _ in range(d)] for _ in range(d)]
    for l in range(d):
        for m in range(d):
            for n in range(m, d):
                a, b = g[l][m][n], g[l][n][m]
                if a == b:
                    e = a
                elif is_zero(a):
                    e = BinOp("*", Num(0.5), b)
                elif is_zero(b):
                    e = BinOp("*", Num(0.5), a)
                else:
                    e = BinOp("*", Num(0.5), BinOp("+", a, b))
                out[l][m][n] = out[l][n][m] = e
    name = field.name if field.torsion_free else f"sym({field.name})"
    return ChristoffelField(d, tuple(tuple(tuple(col) for col in row) for row in out), name)


# --- covariant derivatives along curves -------------------------------------------------


def _covariant_step(field: ChristoffelField, gvals, velocity: np.ndarray, w: np.ndarray) -> np.ndarray:
    dw = jets.derivative(w)
    order = dw.shape[-1] - 1
    if gvals is None:
        return dw
    return dw + field.contract(gvals, jets.truncate(velocity, order), jets.truncate(w, order))


def covariant_derivative_field(
    w: JetVector, gamma: JetVector, gamma_prime: JetVector, field: ChristoffelField
) -> JetVector:
    """Jet of ``(w^l)' + Gamma^l_mn(gamma) (gamma')^m w^n``, one order lower than ``w``."""
    if w.order < 1:
        raise OrderExhausted("covariant derivative needs a jet of order >= 1")
    if not (w.dim == gamma.dim == gamma_prime.dim == field.dim):
        raise DimensionMismatch("field, curve and connection dimensions differ")
    order = w.order - 1
    if gamma.order < order or gamma_prime.order < order:
        raise OrderExhausted("curve jets are shorter than the field jet")
    gvals = None if field.is_flat else field.evaluate_jets(jets.truncate(gamma.coeffs, order))
    return JetVector(_covariant_step(field, gvals, gamma_prime.coeffs, w.coeffs), w.t0)


def field_chain(field: ChristoffelField, gamma: np.ndarray, w: np.ndarray, count: int) -> np.ndarray:
    """Values of ``w, nabla w, ..., nabla^(count-1) w`` at the base point(s).

    ``gamma`` and ``w`` are coefficient arrays of shape (m, ..., K+1).
    Returns shape (count, m, ...).
    """
    n = min(gamma.shape[-1], w.shape[-1])
    if count > n:
        raise OrderExhausted(f"{count} covariant derivatives need jets of order >= {count - 1}")
    w = w[..., :n]
    velocity = jets.derivative(gamma)
    gvals = field.evaluate_jets(gamma) if not field.is_flat else None
    out = [w[..., 0]]
    cur = w
    for _ in range(count - 1):
        cur = _covariant_step(field, gvals, velocity, cur)
        out.append(cur[..., 0])
    return np.stack(out)


def curve_jets(gamma: Sequence[Expr], t0, order: int, variable: str = "t") -> np.ndarray:
    """Coefficient array (m, ..., K+1) of the curve expressions at ``t0`` (scalar or array)."""
    tj = jets.variable(np.asarray(t0, dtype=float), order)
    env = {variable: tj}
    comps = [np.broadcast_to(eval_array(e, env, order), tj.shape) for e in gamma]
    return np.stack(comps)


@dataclass(frozen=True)
class CovariantChain:
    t0: float
    vectors: np.ndarray  # row k-1 holds (nabla^k gamma)(t0)

    @property
    def order(self) -> int:
        return self.vectors.shape[0]

    def D(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.order:
            raise OrderExhausted(f"chain holds D[1..{self.order}], asked for D[{k}]")
        return self.vectors[k - 1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)


def chain_from_jets(field: ChristoffelField, gamma: np.ndarray, count: int) -> np.ndarray:
    """``(nabla^k gamma)`` for k = 1..count from a position jet; shape (count, m, ...)."""
    velocity = jets.derivative(gamma)
    return field_chain(field, gamma, velocity, count)


def covariant_chain(field: ChristoffelField, gamma, t0: float, order: int, variable: str = "t") -> CovariantChain:
    """D[1..order] with ``D[1] = gamma'(t0)`` and ``D[k+1] = nabla D[k]``.

    ``gamma`` is a sequence of expressions in ``variable`` or a :class:`JetVector`.
    """
    if isinstance(gamma, JetVector):
        arr = gamma.coeffs
        if arr.shape[-1] - 1 < order:
            raise OrderExhausted(f"chain of order {order} needs a curve jet of order {order}")
        arr = arr[..., : order + 1]
    else:
        if len(gamma) != field.dim:
            raise DimensionMismatch(f"curve has {len(gamma)} components, connection dimension is {field.dim}")
        arr = curve_jets(gamma, t0, order, variable)
    vectors = chain_from_jets(field, arr, order)
    return CovariantChain(float(t0), np.array(vectors))

