"""Truncated Taylor arithmetic.

A jet of order K is stored as the coefficient array ``(c_0, ..., c_K)`` along
the last axis, with ``c_j = f^(j)(t0) / j!``.  Leading axes are free batch
axes, so one call can push a whole grid of base points through a formula.

The array-level functions below do the work; :class:`JetScalar` and
:class:`JetVector` are thin immutable wrappers for the public API.

Constant terms are always produced by the same numpy ufunc that the scalar
evaluator uses, so an order-0 jet reproduces scalar evaluation bit for bit.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from ..errors import DomainError, OrderExhausted

__all__ = [
    "JetScalar",
    "JetVector",
    "constant",
    "variable",
    "mul",
    "div",
    "power",
    "exp",
    "log",
    "sin",
    "cos",
    "tan",
    "tanh",
    "sqrt",
    "absolute",
    "derivative",
    "truncate",
]


def constant(value, order: int) -> np.ndarray:
    out = np.zeros(np.shape(value) + (order + 1,))
    out[..., 0] = value
    return out


def variable(t0, order: int) -> np.ndarray:
    """Jet of the identity function at ``t0`` (``t0`` may be an array)."""
    out = constant(t0, order)
    if order >= 1:
        out[..., 1] = 1.0
    return out


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"jet orders differ: {a.shape[-1] - 1} vs {b.shape[-1] - 1}")
    return a, b


def mul(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    n = a.shape[-1]
    out = a[..., 0:1] * b
    for i in range(1, n):
        out[..., i:] = out[..., i:] + a[..., i : i + 1] * b[..., : n - i]
    return out


def div(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    b0 = b[..., 0]
    if np.any(b0 == 0.0):
        raise DomainError("division by a jet with zero constant term")
    n = a.shape[-1]
    shape = np.broadcast_shapes(a.shape, b.shape)
    q = np.zeros(shape)
    q[..., 0] = a[..., 0] / b0
    for j in range(1, n):
        acc = a[..., j] - sum(b[..., i] * q[..., j - i] for i in range(1, j + 1))
        q[..., j] = acc / b0
    return q


def _power_int(a: np.ndarray, n: int) -> np.ndarray:
    result = None
    base = a
    k = n
    while k:
        if k & 1:
            result = base if result is None else mul(result, base)
        k >>= 1
        if k:
            base = mul(base, base)
    if result is None:
        return constant(np.ones(a.shape[:-1]), a.shape[-1] - 1)
    result = np.array(result, dtype=float)
    result[..., 0] = np.power(a[..., 0], float(n))
    return result


def power(a, r: float) -> np.ndarray:
    """``a ** r`` for a constant real exponent."""
    a = np.asarray(a, dtype=float)
    order = a.shape[-1] - 1
    a0 = a[..., 0]
    r = float(r)
    if r.is_integer():
        n = int(r)
        if n >= 0:
            return _power_int(a, n)
        if np.any(a0 == 0.0):
            raise DomainError("zero raised to a negative power")
        p = div(constant(np.ones(a.shape[:-1]), order), _power_int(a, -n))
        p[..., 0] = np.power(a0, r)
        return p
    if np.any(a0 < 0.0):
        raise DomainError("negative base with non-integer exponent")
    if np.any(a0 == 0.0):
        if r < 0.0:
            raise DomainError("zero raised to a negative power")
        if order >= 1:
            raise DomainError("non-integer power of a jet vanishing at the base point")
    p = np.zeros(a.shape)
    p[..., 0] = np.power(a0, r)
    for j in range(1, order + 1):
        acc = sum(((r + 1.0) * i - j) * a[..., i] * p[..., j - i] for i in range(1, j + 1))
        p[..., j] = acc / (j * a0)
    return p


def exp(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    e = np.zeros(a.shape)
    e[..., 0] = np.exp(a[..., 0])
    for j in range(1, a.shape[-1]):
        e[..., j] = sum(i * a[..., i] * e[..., j - i] for i in range(1, j + 1)) / j
    return e


def log(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a0 = a[..., 0]
    if np.any(a0 <= 0.0):
        raise DomainError("log of a non-positive value")
    out = np.zeros(a.shape)
    out[..., 0] = np.log(a0)
    for j in range(1, a.shape[-1]):
        acc = a[..., j] - sum(i * out[..., i] * a[..., j - i] for i in range(1, j)) / j
        out[..., j] = acc / a0
    return out


def _sincos(a: np.ndarray):
    s = np.zeros(a.shape)
    c = np.zeros(a.shape)
    s[..., 0] = np.sin(a[..., 0])
    c[..., 0] = np.cos(a[..., 0])
    for j in range(1, a.shape[-1]):
        s[..., j] = sum(i * a[..., i] * c[..., j - i] for i in range(1, j + 1)) / j
        c[..., j] = -sum(i * a[..., i] * s[..., j - i] for i in range(1, j + 1)) / j
    return s, c


def sin(a) -> np.ndarray:
    return _sincos(np.asarray(a, dtype=float))[0]


def cos(a) -> np.ndarray:
    return _sincos(np.asarray(a, dtype=float))[1]


def _riccati(a: np.ndarray, value0: np.ndarray, sign: float) -> np.ndarray:
    # y' = (1 + sign * y^2) a'  covers tan (sign=+1) and tanh (sign=-1)
    y = np.zeros(a.shape)
    w = np.zeros(a.shape)
    y[..., 0] = value0
    w[..., 0] = 1.0 + sign * value0 * value0
    for j in range(1, a.shape[-1]):
        y[..., j] = sum(i * a[..., i] * w[..., j - i] for i in range(1, j + 1)) / j
        w[..., j] = sign * sum(y[..., p] * y[..., j - p] for p in range(j + 1))
    return y


def tan(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if np.any(np.cos(a[..., 0]) == 0.0):
        raise DomainError("tan at a pole")
    return _riccati(a, np.tan(a[..., 0]), 1.0)


def tanh(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return _riccati(a, np.tanh(a[..., 0]), -1.0)


def sqrt(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a0 = a[..., 0]
    if np.any(a0 < 0.0):
        raise DomainError("sqrt of a negative value")
    if a.shape[-1] > 1 and np.any(a0 == 0.0):
        raise DomainError("sqrt of a jet vanishing at the base point")
    r = np.zeros(a.shape)
    r[..., 0] = np.sqrt(a0)
    for j in range(1, a.shape[-1]):
        acc = a[..., j] - sum(r[..., i] * r[..., j - i] for i in range(1, j))
        r[..., j] = acc / (2.0 * r[..., 0])
    return r


def absolute(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a0 = a[..., 0]
    if a.shape[-1] > 1 and np.any(a0 == 0.0):
        raise DomainError("abs is not differentiable at 0")
    out = np.sign(a0)[..., None] * a
    out[..., 0] = np.abs(a0)
    return out


def derivative(a) -> np.ndarray:
    """Shift-and-scale: jet of f' from jet of f, one order lower."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n < 2:
        raise OrderExhausted("cannot differentiate an order-0 jet")
    return a[..., 1:] * np.arange(1, n, dtype=float)


def truncate(a, order: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if order > a.shape[-1] - 1:
        raise OrderExhausted(f"jet of order {a.shape[-1] - 1} cannot be raised to order {order}")
    return a[..., : order + 1]


# --- wrappers -----------------------------------------------------------------------


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class JetScalar:
    """Order-K jet of a scalar function of one parameter at ``t0``."""

    __slots__ = ("coeffs", "t0")

    def __init__(self, coeffs, t0: float = 0.0):
        coeffs = _frozen(coeffs)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise ValueError("JetScalar needs a non-empty 1-d coefficient sequence")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "t0", float(t0))

    def __setattr__(self, name, value):
        raise AttributeError("JetScalar is immutable")

    @classmethod
    def constant(cls, value: float, order: int, t0: float = 0.0) -> "JetScalar":
        return cls(constant(float(value), order), t0)

    @classmethod
    def variable(cls, t0: float, order: int) -> "JetScalar":
        return cls(variable(float(t0), order), t0)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivatives(self) -> np.ndarray:
        """Plain derivatives ``f^(j)(t0)`` for j = 0..K."""
        return self.coeffs * np.array([factorial(j) for j in range(self.order + 1)], dtype=float)

    def derivative(self) -> "JetScalar":
        return JetScalar(derivative(self.coeffs), self.t0)

    def truncate(self, order: int) -> "JetScalar":
        return JetScalar(truncate(self.coeffs, order), self.t0)

    def _coerce(self, other):
        if isinstance(other, JetScalar):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other.coeffs
        return constant(float(other), self.order)

    def __add__(self, other):
        return JetScalar(self.coeffs + self._coerce(other), self.t0)

    __radd__ = __add__

    def __sub__(self, other):
        return JetScalar(self.coeffs - self._coerce(other), self.t0)

    def __rsub__(self, other):
        return JetScalar(self._coerce(other) - self.coeffs, self.t0)

    def __mul__(self, other):
        if isinstance(other, JetScalar):
            return JetScalar(mul(self.coeffs, other.coeffs), self.t0)
        return JetScalar(self.coeffs * float(other), self.t0)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return JetScalar(div(self.coeffs, self._coerce(other)), self.t0)

    def __rtruediv__(self, other):
        return JetScalar(div(self._coerce(other), self.coeffs), self.t0)

    def __neg__(self):
        return JetScalar(-self.coeffs, self.t0)

    def __pow__(self, r):
        if isinstance(r, JetScalar):
            return JetScalar(exp(mul(r.coeffs, log(self.coeffs))), self.t0)
        return JetScalar(power(self.coeffs, float(r)), self.t0)

    def __repr__(self):
        return f"JetScalar({self.coeffs.tolist()}, t0={self.t0})"


class JetVector:
    """m jets sharing order and base point; ``coeffs`` has shape (m, K+1)."""

    __slots__ = ("coeffs", "t0")

    def __init__(self, coeffs, t0: float = 0.0):
        coeffs = _frozen(coeffs)
        if coeffs.ndim != 2:
            raise ValueError("JetVector coefficients must have shape (m, K+1)")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "t0", float(t0))

    def __setattr__(self, name, value):
        raise AttributeError("JetVector is immutable")

    @classmethod
    def from_components(cls, components) -> "JetVector":
        components = list(components)
        orders = {c.order for c in components}
        bases = {c.t0 for c in components}
        if len(orders) != 1 or len(bases) != 1:
            raise ValueError("components must share order and base point")
        return cls(np.stack([c.coeffs for c in components]), components[0].t0)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def order(self) -> int:
        return self.coeffs.shape[1] - 1

    def __getitem__(self, i) -> JetScalar:
        return JetScalar(self.coeffs[i], self.t0)

    def __iter__(self):
        return (self[i] for i in range(self.dim))

    def __len__(self):
        return self.dim

    def value(self) -> np.ndarray:
        return np.array(self.coeffs[:, 0])

    def coefficient(self, j: int) -> np.ndarray:
        return np.array(self.coeffs[:, j])

    def derivative(self) -> "JetVector":
        return JetVector(derivative(self.coeffs), self.t0)

    def truncate(self, order: int) -> "JetVector":
        return JetVector(truncate(self.coeffs, order), self.t0)

    def scale(self, jet: JetScalar) -> "JetVector":
        return JetVector(mul(self.coeffs, jet.coeffs[None, :]), self.t0)

    def __add__(self, other: "JetVector"):
        return JetVector(self.coeffs + other.coeffs, self.t0)

    def __sub__(self, other: "JetVector"):
        return JetVector(self.coeffs - other.coeffs, self.t0)

    def __repr__(self):
        return f"JetVector({self.coeffs.tolist()}, t0={self.t0})"
