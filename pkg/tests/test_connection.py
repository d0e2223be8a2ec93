import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import exprs, lit
from nablatan.connection import (
    ChristoffelField,
    covariant_chain,
    covariant_derivative_field,
    curve_jets,
    field_chain,
    symmetrize,
)
from nablatan.errors import DimensionMismatch, OrderExhausted
from nablatan.geodesic import integrate_geodesic
from nablatan.presets import make_preset
from nablatan.symbolics import JetVector, jets


def sample_points(rng, n, dim=3, z=(0.5, 2.0)):
    x = rng.uniform(-1, 1, size=(n, dim))
    x[:, -1] = rng.uniform(*z, size=n)
    return x


def test_symmetrize_formula_instance():
    f = ChristoffelField.from_entries(3, {(1, 1, 2): "1"})
    assert not f.torsion_free
    s = symmetrize(f)
    G = s.evaluate(np.zeros(3))
    assert G[0, 0, 1] == G[0, 1, 0] == 0.5
    assert np.count_nonzero(G) == 2 and s.torsion_free


def test_symmetrize_fixed_point(hyperbolic, rng):
    s = symmetrize(hyperbolic)
    for x in sample_points(rng, 20):
        np.testing.assert_array_equal(s.evaluate(x), hyperbolic.evaluate(x))


@pytest.mark.parametrize("seed", range(5))
def test_symmetrize_symmetric_and_idempotent(seed, rng):
    f = make_preset("random-poly", 3, seed=seed)
    s = symmetrize(f)
    ss = symmetrize(s)
    for x in sample_points(rng, 100, z=(-1, 1)):
        G = s.evaluate(x)
        np.testing.assert_allclose(G, np.swapaxes(G, 1, 2), atol=1e-12)
        np.testing.assert_allclose(ss.evaluate(x), G, atol=1e-12)
        F = f.evaluate(x)
        np.testing.assert_allclose(G, 0.5 * (F + np.swapaxes(F, 1, 2)), atol=1e-12)


def test_variable_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        ChristoffelField.from_entries(2, {(1, 2, 3): "1"})
    with pytest.raises(Exception):
        ChristoffelField.from_entries(2, {(1, 1, 2): "x3"})


def test_flat_covariant_derivative_is_shift():
    w = JetVector(np.arange(15.0).reshape(3, 5))
    g = JetVector(np.ones((3, 5)))
    out = covariant_derivative_field(w, g, JetVector(jets.derivative(g.coeffs)), ChristoffelField.flat(3))
    np.testing.assert_array_equal(out.coeffs, jets.derivative(w.coeffs))


def test_order_checks():
    f = ChristoffelField.flat(3)
    with pytest.raises(OrderExhausted):
        covariant_derivative_field(JetVector(np.ones((3, 1))), JetVector(np.ones((3, 1))), JetVector(np.ones((3, 1))), f)
    with pytest.raises(OrderExhausted):
        field_chain(f, np.ones((3, 3)), np.ones((3, 3)), 4)
    with pytest.raises(OrderExhausted):
        covariant_chain(f, exprs(["t", "t", "t"]), 0.0, 3).D(4)


def _hyp_jets(w_src, t0, order):
    g = curve_jets(exprs(["0", "0", "exp(t)"]), t0, order)
    w = curve_jets(exprs(w_src), t0, order)
    return JetVector(g, t0), JetVector(jets.derivative(g)[:, :order], t0), JetVector(w, t0)


# frozen from tests/oracles/derive.py: along (0, 0, e^t) in the half-space model,
# nabla gamma' = (0, 0, 0) and nabla (1, t, e^t) = (-1, 1 - t, 0)
@pytest.mark.parametrize("t0", [-0.5, 0.0, 0.7])
def test_hyperbolic_vertical_closed_form(hyperbolic, t0):
    K = 6
    g, gp, _ = _hyp_jets(["1", "t", "exp(t)"], t0, K)
    out = covariant_derivative_field(JetVector(jets.derivative(g.coeffs), t0), g, gp, hyperbolic)
    np.testing.assert_allclose(out.coeffs, 0.0, atol=1e-12)
    _, _, w = _hyp_jets(["1", "t", "exp(t)"], t0, K)
    out = covariant_derivative_field(w, g, gp, hyperbolic)
    want = curve_jets(exprs(["-1", "1 - t", "0"]), t0, K - 1)
    np.testing.assert_allclose(out.coeffs, want, atol=1e-12)


# frozen from tests/oracles/derive.py: D_1..D_5 for (t, t^2, 2 + t^3) at 0, half-space model
HYPERBOLIC_CHAIN = [[1, 0, 0], [0, 2, 1 / 2], [-1 / 4, 0, 6], [-12, -1 / 2, 47 / 8], [-127 / 16, -60, -33 / 2]]


def test_hyperbolic_chain_exact(hyperbolic):
    ch = covariant_chain(hyperbolic, exprs(["t", "t^2", "2 + t^3"]), 0.0, 5)
    np.testing.assert_allclose(ch.vectors, HYPERBOLIC_CHAIN, rtol=1e-14, atol=1e-14)


def test_flat_chain_examples(flat3):
    ch = covariant_chain(flat3, exprs(["t", "t^2", "t^3"]), 0.0, 5)
    np.testing.assert_array_equal(ch.vectors, [[1, 0, 0], [0, 2, 0], [0, 0, 6], [0, 0, 0], [0, 0, 0]])
    ch = covariant_chain(flat3, exprs(["t^2", "t^3", "t^4"]), 0.0, 4)
    np.testing.assert_array_equal(ch.D(1), [0, 0, 0])
    np.testing.assert_array_equal(ch.D(2), [2, 0, 0])
    np.testing.assert_array_equal(ch.D(3), [0, 6, 0])
    np.testing.assert_array_equal(ch.D(4), [0, 0, 24])


@given(st.lists(st.integers(-4, 4), min_size=9, max_size=9), st.floats(-1, 1))
def test_flat_chain_collapses_to_coordinate_derivatives(coeffs, t0):
    srcs = [" + ".join(f"({c})*t^{j}" for j, c in enumerate(coeffs[i::3], start=i + 1)) for i in range(3)]
    K = 8
    ch = covariant_chain(ChristoffelField.flat(3), exprs(srcs), t0, K)
    g = curve_jets(exprs(srcs), t0, K)
    want = np.stack([math.factorial(k) * g[:, k] for k in range(1, K + 1)])
    np.testing.assert_array_equal(ch.vectors, want)


@given(st.floats(-0.5, 0.5), st.floats(-0.4, 0.4))
def test_chain_naturality_under_translation(t0, a):
    H = make_preset("hyperbolic-halfspace", 3)
    base = ["sin(t)", "t^2 - t", "2 + cos(t)*t/3"]
    shifted = [s.replace("t", f"(t + ({a!r}))") for s in base]
    c1 = covariant_chain(H, exprs(base), t0 + a, 6).vectors
    c2 = covariant_chain(H, exprs(shifted), t0, 6).vectors
    np.testing.assert_allclose(c1, c2, atol=1e-10, rtol=1e-10)


def test_geodesic_velocity_is_parallel(hyperbolic, sphere):
    # sample the integrated geodesic densely, fit jets by the ODE itself: nabla gamma' is
    # exactly the residual of the geodesic equation, checked at the sampled points
    for field_, x, v in ((hyperbolic, [0.1, -0.2, 1.3], [0.4, 0.3, -0.2]), (sphere, [0.2, 0.1, -0.3], [0.5, -0.4, 0.3])):
        path = integrate_geodesic(field_, x, v, 1.0, n_samples=11)
        for xs, vs in zip(path.positions, path.velocities):
            acc = -np.einsum("lmn,m,n->l", field_.evaluate(xs), vs, vs)
            g = np.stack([xs, vs, acc / 2], axis=1)  # second-order jet of the geodesic
            w = jets.derivative(g)
            nabla = field_chain(field_, g, w, 2)[1]
            assert np.linalg.norm(nabla) < 1e-12


@pytest.mark.parametrize("k", [2, 3])
@pytest.mark.parametrize("preset", ["flat", "hyperbolic-halfspace", "sphere-stereographic"])
def test_degenerate_point_coordinate_and_covariant_derivatives_agree(k, preset, rng):
    # when nabla^i gamma(t0) = 0 for i < k, gamma^(k)(t0) = nabla^k gamma(t0) and the same at k + 1
    F = make_preset(preset, 3)
    for _ in range(10):
        a = rng.normal(size=(3, 3))
        base = [0.2, -0.1, 1.5]
        srcs = [f"{lit(base[i])} + {lit(a[i, 0])}*t^{k} + {lit(a[i, 1])}*t^{k + 1} + {lit(a[i, 2])}*t^{k + 2}" for i in range(3)]
        ch = covariant_chain(F, exprs(srcs), 0.0, k + 1).vectors
        g = curve_jets(exprs(srcs), 0.0, k + 1)
        coord = np.stack([math.factorial(j) * g[:, j] for j in range(1, k + 2)])
        np.testing.assert_allclose(ch[: k - 1], 0.0, atol=1e-14)
        np.testing.assert_allclose(ch[k - 1 :], coord[k - 1 :], rtol=1e-12, atol=1e-12)


def test_polynomial_and_generic_evaluation_agree(rng):
    f = make_preset("random-poly", 3, seed=3)
    # force the per-entry path by wrapping one entry in a non-polynomial call
    g = ChristoffelField.from_entries(3, {(1, 2, 3): "exp(0*x1)"})
    x = jets.variable(rng.uniform(-1, 1, size=(3, 4)), 5)
    dense = f.evaluate_jets(x)
    assert dense.shape == (3, 3, 3, 4, 6)
    ref = np.stack([f.evaluate(x[:, i, 0]) for i in range(4)], axis=-1)
    np.testing.assert_allclose(dense[..., 0], ref, atol=1e-14)
    np.testing.assert_allclose(g.evaluate_jets(x)[0, 1, 2, :, 0], 1.0)
