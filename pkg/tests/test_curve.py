import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cases import connection, degenerate_curve, lemma_constants_residual, shift_case
from conftest import curve, exprs
from nablatan.connection import ChristoffelField
from nablatan.curve import (
    DirectedCurve,
    NablaType,
    curve_nabla_type,
    degeneracy_order,
    field_nabla_type,
    frame_from_degenerate,
    frame_jets,
    nabla_type_from_vectors,
    vanishing_order,
)
from nablatan.errors import DegeneracyMismatch, Undetermined, ValidationError
from nablatan.symbolics import JetScalar, jets
from nablatan.symbolics.expr import to_source


def test_vanishing_order_examples():
    assert vanishing_order(JetScalar.variable(0.0, 8)) == 1
    assert vanishing_order(JetScalar(np.array([1.0, 1.0] + [0.0] * 7))) == 0
    with pytest.raises(Undetermined):
        vanishing_order(JetScalar(np.zeros(9)))


def test_frame_from_degenerate_swallowtail():
    u, c = frame_from_degenerate(exprs(["t^2", "t^3", "t^4"]), 0.0, 2)
    np.testing.assert_array_equal(u.coeffs[:, :3], [[1, 0, 0], [0, 1.5, 0], [0, 0, 2]])
    np.testing.assert_array_equal(u.coeffs[:, 3:], 0.0)
    np.testing.assert_array_equal(c.coeffs[:3], [0, 2, 0])


def test_frame_from_degenerate_immersed_is_velocity():
    g = exprs(["sin(t)", "t^2", "exp(t)"])
    u, c = frame_from_degenerate(g, 0.3, 1)
    from nablatan.connection import curve_jets
    np.testing.assert_array_equal(u.coeffs, jets.derivative(curve_jets(g, 0.3, 8)))
    assert c.coeffs[0] == 1 and not c.coeffs[1:].any()


def test_frame_from_degenerate_mismatch():
    with pytest.raises(DegeneracyMismatch):
        frame_from_degenerate(exprs(["t", "t^2", "t^3"]), 0.0, 2)
    with pytest.raises(DegeneracyMismatch):
        frame_from_degenerate(exprs(["t^3", "t^4", "t^5"]), 0.0, 2)


def test_lemma_constants_swallowtail_model(flat3):
    g = exprs(["t^2", "t^3", "t^4"])
    for ell in range(3):
        assert lemma_constants_residual(flat3, g, 2, ell) < 1e-14


@pytest.mark.parametrize("preset", ["flat", "hyperbolic-halfspace", "sphere-stereographic"])
@pytest.mark.parametrize("k", [2, 3])
def test_lemma_constants_random(preset, k, rng):
    F = connection(preset)
    for _ in range(5):
        g = degenerate_curve(rng, k, preset)
        for ell in range(4):
            assert lemma_constants_residual(F, g, k, ell) < 1e-6


def test_degeneracy_order_detection():
    assert degeneracy_order(np.array([[0, 0, 0], [2, 0, 0.0]])) == 2
    with pytest.raises(Undetermined):
        degeneracy_order(np.zeros((4, 3)))


def test_field_type_examples(flat3):
    g = exprs(["t", "t^2", "t^3"])
    assert field_nabla_type(exprs(["1", "t", "t^2"]), g, flat3).entries == (1, 2, 3)
    assert field_nabla_type(exprs(["1", "t", "t^3"]), g, flat3).entries == (1, 2, 4)


@pytest.mark.parametrize("src,want", [
    (["t", "t^2", "t^3"], (1, 2, 3)),
    (["t^2", "t^3", "t^4"], (2, 3, 4)),
    (["t", "t^2", "t^4"], (1, 2, 4)),
])
def test_curve_type_examples(flat3, src, want):
    assert curve_nabla_type(flat3, exprs(src), 0.0).entries == want


def test_undetermined_entries(flat3):
    t = field_nabla_type(exprs(["1", "t", "0"]), exprs(["t", "0", "0"]), flat3)
    assert t.entries == (1, 2, None) and not t.determinate
    assert field_nabla_type(exprs(["0", "0", "0"]), exprs(["t", "0", "0"]), flat3).entries == (None,) * 3


def test_nabla_type_validation():
    with pytest.raises(ValueError):
        NablaType((1, 1, 2))
    with pytest.raises(ValueError):
        NablaType((0, 1, 2))
    assert NablaType((1, 2, 4)).shifted(2).entries == (3, 4, 6)


@pytest.mark.parametrize("preset", ["flat", "hyperbolic-halfspace", "random-poly"])
@given(seed=st.integers(0, 2**31), ell=st.integers(0, 2))
def test_shift_law(preset, seed, ell):
    tw, want = shift_case(np.random.default_rng(seed), preset, ell, seed=seed % 7)
    assert tw.entries == want.entries


@given(seed=st.integers(0, 2**31))
def test_frame_scaling_invariance(seed):
    rng = np.random.default_rng(seed)
    F = connection("hyperbolic-halfspace")
    g = exprs(["t", "t^2 - t", "1.5 + t^3"])
    u = rng.normal(size=(3, 4))
    b = rng.normal(size=3)
    b[0] = np.sign(b[0] or 1.0) * (0.5 + abs(b[0]))
    usrc = [" + ".join(f"({float(a)!r})*t^{j}" for j, a in enumerate(row)) for row in u]
    bsrc = " + ".join(f"({float(a)!r})*t^{j}" for j, a in enumerate(b))
    t1 = field_nabla_type(exprs(usrc), g, F)
    t2 = field_nabla_type(exprs([f"({bsrc})*({s})" for s in usrc]), g, F)
    assert t1.entries == t2.entries


@given(st.lists(st.floats(-3, 3), min_size=12, max_size=12))
def test_types_strictly_increasing(vals):
    v = np.array(vals).reshape(4, 3)
    t = nabla_type_from_vectors(v)
    known = [b for b in t.entries if b is not None]
    assert all(a < b for a, b in zip(known, known[1:]))


def test_directed_curve_check():
    curve(["t^2", "t^3", "t^4"], ["1", "3/2*t", "2*t^2"], "2*t").check()
    with pytest.raises(ValidationError):
        curve(["t^2", "t^3", "t^4"], ["1", "t", "2*t^2"], "2*t").check()
    with pytest.raises(ValidationError):
        curve(["t", "t", "t"], ["t", "t", "t"], "1").check()
    with pytest.raises(ValidationError):
        curve(["0", "0", "0"]).check()
    with pytest.raises(ValidationError):
        DirectedCurve.from_strings(["t", "t", "t"], None, "1")


def test_frame_jets_recover_missing_factor():
    cv = curve(["t^2", "t^3", "t^4"], ["1", "3/2*t", "2*t^2"])
    u, c = frame_jets(cv, 0.25, 3)
    np.testing.assert_allclose(c, [0.5, 2.0, 0.0, 0.0], atol=1e-14)


def test_derived_frame_matches_declared(flat3):
    declared = curve(["t^2", "t^3", "t^4"], ["1", "3/2*t", "2*t^2"], "2*t")
    derived = curve(["t^2", "t^3", "t^4"])
    ud, cd = frame_jets(derived, 0.0, 3, flat3)
    uu, cc = frame_jets(declared, 0.0, 3)
    np.testing.assert_allclose(ud, uu, atol=1e-14)
    np.testing.assert_allclose(cd, cc, atol=1e-14)


def test_sources_round_trip():
    cv = curve(["t^2", "t^3", "t^4"], ["1", "3/2*t", "2*t^2"], "2*t")
    src = cv.sources()
    assert src["factor"] == to_source(cv.factor) and len(src["frame"]) == 3
    again = DirectedCurve.from_strings(src["gamma"], src["frame"], src["factor"])
    assert again.gamma == cv.gamma and again.frame == cv.frame


def test_flat_field_any_dim():
    f = ChristoffelField.flat(5)
    g = exprs(["t", "t^2", "t^3", "t^4", "t^5"])
    assert curve_nabla_type(f, g, 0.0).entries == (1, 2, 3, 4, 5)
