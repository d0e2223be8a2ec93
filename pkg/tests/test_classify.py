import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cases import BASE, connection, poly_src
from conftest import curve, exprs, lit
from nablatan.classify import (
    Singularity,
    classification_report,
    classify_chain,
    classify_frame_chain,
    classify_point,
    classify_via_frames,
    codim,
    rank_tol,
    scan_curve,
)
from nablatan.connection import ChristoffelField, symmetrize
from nablatan.curve import NablaType
from nablatan.errors import DimensionMismatch, MalformedType
from nablatan.genericity import PerturbationSpec, _connection, _det_roots, random_poly_curve
from nablatan.normal_forms import GermKind, model_curve
from nablatan.presets import make_preset
from nablatan.symbolics.expr import to_source

CE, FU, SW, OS, NG = (Singularity.CUSPIDAL_EDGE, Singularity.FOLDED_UMBRELLA, Singularity.SWALLOWTAIL,
                      Singularity.OPEN_SWALLOWTAIL, Singularity.NON_GENERIC)


# --- rank ---------------------------------------------------------------------------------


def test_rank_examples():
    assert rank_tol(np.eye(3)) == 3
    assert rank_tol([[1, 0, 0], [2, 0, 0], [0, 0, 0]]) == 1
    assert rank_tol([[1, 0, 0], [0, 1, 0], [1, 1e-12, 0]], rel_tol=1e-6) == 2


def test_rank_zero_and_scaling():
    assert rank_tol(np.zeros((3, 3))) == 0
    assert rank_tol([[1e-20, 0, 0]]) == 0
    # lengths do not matter above the relative floor; below it a vector counts as zero
    assert rank_tol([[1e4, 0, 0], [0, 1e-4, 0], [0, 0, 1]]) == 3
    assert rank_tol([[1e8, 0, 0], [0, 1e-4, 0], [0, 0, 1]]) == 2


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_rank_of_random_frames(r, seed):
    rng = np.random.default_rng(seed)
    basis = rng.normal(size=(r, 5))
    vecs = np.vstack([basis, rng.normal(size=(2, r)) @ basis])
    scales = 10.0 ** rng.uniform(-3, 3, size=(r + 2, 1))
    assert rank_tol(vecs * scales) == r


# --- fixtures -----------------------------------------------------------------------------


@pytest.mark.parametrize("name,kind", [("CuspidalEdge", CE), ("FoldedUmbrella", FU), ("Swallowtail", SW),
                                       ("OpenSwallowtail", OS)])
def test_model_curves(name, kind):
    k = GermKind.of(name)
    field_ = ChristoffelField.flat(k.dim)
    cv = model_curve(k)
    assert classify_point(field_, cv, 0.0).kind is kind
    assert classify_via_frames(field_, cv, 0.0).kind is kind


def test_immersed_curve_in_four_dimensions():
    assert classify_point(ChristoffelField.flat(4), curve(["t", "t^2", "t^3", "t^4"]), 0.0).kind is CE


def test_cuspidal_edge_away_from_special_points(flat3):
    cv = curve(["t", "t^2", "t^4 - t^3"])
    assert classify_point(flat3, cv, 0.6).kind is CE
    # det(D1, D2, D3) = 12 (4t - 1) vanishes at t = 1/4
    assert classify_point(flat3, cv, 0.25).kind is FU


def test_planar_curve_is_non_generic(flat3):
    verdict = classify_point(flat3, curve(["t", "t^2", "0"]), 0.0)
    assert verdict.kind is NG
    assert "outside the classified patterns" in verdict.reason


def test_constant_curve_is_non_generic(flat3):
    verdict = classify_point(flat3, curve(["1", "2", "3"]), 0.0)
    assert verdict.kind is NG and verdict.evidence == ()


def test_degeneracy_three_is_non_generic(flat3):
    assert classify_point(flat3, curve(["t^3", "t^4", "t^5"]), 0.0).kind is NG
    cv = curve(["t^3", "t^4", "t^5"], ["1", "4/3*t", "5/3*t^2"], "3*t^2")
    assert classify_via_frames(flat3, cv, 0.0).kind is NG


def test_dimension_two_rejected():
    with pytest.raises(DimensionMismatch):
        classify_point(ChristoffelField.flat(2), curve(["t", "t^2"]), 0.0)
    with pytest.raises(DimensionMismatch):
        classify_chain(np.zeros((3, 3)))


def test_curved_fixtures(hyperbolic):
    assert classify_point(hyperbolic, curve(["t", "t^2", "2 + t^3"]), 0.0).kind is CE
    sw = curve(["t^2", "t^3", "1.5 + t^4"], ["1", "3/2*t", "2*t^2"], "2*t")
    assert classify_point(hyperbolic, sw, 0.0).kind is SW
    assert classify_via_frames(hyperbolic, sw, 0.0).kind is SW


def test_chain_decision_tree():
    e = np.eye(3)
    assert classify_chain([e[0], e[1], e[2], e[0]]).kind is CE
    assert classify_chain([e[0], e[1], e[0], e[2]]).kind is FU
    assert classify_chain([0 * e[0], e[0], e[1], e[2]]).kind is SW
    e4 = np.eye(4)
    assert classify_chain([0 * e4[0], e4[0], e4[1], e4[2], e4[3]]).kind is OS
    assert classify_chain([0 * e4[0], e4[0], e4[1], e4[2], e4[2]]).kind is NG


def test_frame_chain_criteria():
    e = np.eye(3)
    assert classify_frame_chain([e[0], e[1], e[2], e[0]], 1).kind is CE
    assert classify_frame_chain([e[0], e[1], e[0], e[2]], 1).kind is FU
    assert classify_frame_chain([e[0], e[1], e[2], e[0]], 2).kind is SW
    assert classify_frame_chain([e[0], e[1], e[2], e[0]], 3).kind is NG
    e4 = np.eye(4)
    assert classify_frame_chain(e4, 2).kind is OS


def test_evidence_is_recorded(flat3):
    verdict = classify_point(flat3, model_curve(GermKind.of("Swallowtail")), 0.0)
    labels = [d.label for d in verdict.evidence]
    assert labels == ["D1,D2,D3", "D2,D3,D4"]
    assert verdict.evidence[-1].full and not verdict.evidence[0].full
    d = verdict.to_dict()
    assert d["class"] == "Swallowtail" and d["ranks"][1]["rank"] == 3


def test_report(flat3):
    rep = classification_report(flat3, model_curve(GermKind.of("Swallowtail")), 0.0)
    assert rep.kind is SW
    assert rep.degeneracy_order == 2
    assert rep.nabla_type.entries == (2, 3, 4)
    d = rep.to_dict()
    assert d["class"] == "Swallowtail" and d["nabla_type"] == [2, 3, 4]
    assert len(d["chain"]) == 5 and d["tolerances"]["rank_rel_tol"] == rep.rel_tol


@pytest.mark.parametrize("gamma,entries,kind", [
    (["t", "t^2", "t^3"], (1, 2, 3), CE),
    (["t", "t^2", "t^4"], (1, 2, 4), FU),
    (["t^2", "t^3", "t^4"], (2, 3, 4), SW),
])
def test_type_matches_class(flat3, gamma, entries, kind):
    rep = classification_report(flat3, curve(gamma), 0.0)
    assert rep.nabla_type.entries == entries and rep.kind is kind


# --- agreement ----------------------------------------------------------------------------


@pytest.mark.parametrize("conn", ["flat", "hyperbolic-halfspace", "random-poly"])
def test_classifiers_agree_on_random_curves(conn):
    spec = PerturbationSpec(seed=3, connection=conn)
    n = 0
    for i in range(12):
        pc = random_poly_curve(spec, i)
        cv = pc.to_directed()
        field_ = _connection(spec, i)
        for t0 in [0.3] + pc.factor_roots() + _det_roots(field_, pc, 96):
            assert classify_point(field_, cv, t0).kind is classify_via_frames(field_, cv, t0).kind, (i, t0)
            n += 1
    assert n > 30


# --- scans --------------------------------------------------------------------------------


def test_scan_immersed_has_no_events(flat3):
    assert scan_curve(flat3, curve(["t", "t^2", "t^3"])) == []


def test_scan_finds_folded_umbrella(flat3):
    (ev,) = scan_curve(flat3, curve(["t", "t^2", "t^4 - t^3"]))
    assert ev.source == "determinant" and ev.verdict.kind is FU
    assert abs(ev.t - 0.25) < 1e-12


def test_scan_finds_swallowtail(flat3):
    (ev,) = scan_curve(flat3, model_curve(GermKind.of("Swallowtail")))
    assert ev.source == "factor" and ev.t == 0.0 and ev.verdict.kind is SW
    assert ev.to_dict()["class"] == "Swallowtail"


def test_scan_without_frame_finds_cusp(flat3):
    events = scan_curve(flat3, curve(["t^2", "t^3", "t^4"]), n_samples=200)
    assert [e.verdict.kind for e in events] == [SW]
    assert abs(events[0].t) < 1e-8


def test_scan_subrange(flat3):
    cv = curve(["t", "t^2", "t^4 - t^3"])
    assert scan_curve(flat3, cv, (0.5, 1.0)) == []


# --- codimension --------------------------------------------------------------------------


@pytest.mark.parametrize("a,c", [((1, 2, 3), 0), ((1, 2, 4), 1), ((2, 3, 4), 1), ((1, 3, 4), 2),
                                 ((1, 2, 3, 4), 0), ((1, 2, 3, 5), 1), ((2, 3, 4, 5), 1), ((3, 4, 5), 2)])
def test_codim_table(a, c):
    assert codim(a) == c
    assert codim(NablaType(a)) == c


@pytest.mark.parametrize("bad", [(), (0, 1, 2), (1, 1, 2), (2, 1, 3), (1, None, 3), (1.5, 2, 3)])
def test_codim_malformed(bad):
    with pytest.raises(MalformedType):
        codim(bad)


def test_codim_dimension_check():
    with pytest.raises(MalformedType):
        codim((1, 2, 3), m=4)


@given(st.lists(st.integers(1, 9), min_size=3, max_size=6, unique=True))
def test_codim_nonnegative_and_zero_only_at_identity(raw):
    a = tuple(sorted(raw))
    c = codim(a)
    assert c >= 0
    assert (c == 0) == (a == tuple(range(1, len(a) + 1)))


# --- invariances --------------------------------------------------------------------------


def _linear_change(field_: ChristoffelField, A, x0, name="changed"):
    """Symbols in coordinates y = A x + x0 (the second-derivative term vanishes for affine maps)."""
    m = field_.dim
    Ainv = np.linalg.inv(A)
    back = [" + ".join(f"{lit(Ainv[i, j])}*(Y{j + 1} - {lit(x0[j])})" for j in range(m)) for i in range(m)]
    sub = {}
    for l, mu, nu, e in field_.nonzero:
        src = re.sub(r"\bx(\d+)\b", lambda mt: f"({back[int(mt.group(1)) - 1]})", to_source(e))
        sub[(l, mu, nu)] = src
    entries = {}
    for a in range(m):
        for b in range(m):
            for c in range(m):
                terms = [f"{lit(A[a, l] * Ainv[mu, b] * Ainv[nu, c])}*({s})" for (l, mu, nu), s in sub.items()
                         if abs(A[a, l] * Ainv[mu, b] * Ainv[nu, c]) > 0]
                if terms:
                    entries[(a + 1, b + 1, c + 1)] = " + ".join(terms).replace("Y", "x")
    return ChristoffelField.from_entries(m, entries, name=name)


def _mapped_curve(gamma_src, A, x0, frame_src=None, factor=None):
    m = len(gamma_src)
    g = [" + ".join([lit(x0[i])] + [f"{lit(A[i, j])}*({gamma_src[j]})" for j in range(m)]) for i in range(m)]
    f = None if frame_src is None else [
        " + ".join(f"{lit(A[i, j])}*({frame_src[j]})" for j in range(m)) for i in range(m)]
    return curve(g, f, factor)


def _random_matrix(rng, m):
    while True:
        A = rng.normal(size=(m, m))
        if np.linalg.cond(A) < 20:
            return A


def test_affine_change_flat(rng, flat3):
    for _ in range(50):
        a = rng.normal(size=(3, 4))
        src = [poly_src(a[i], start=1) for i in range(3)]
        A, x0 = _random_matrix(rng, 3), rng.normal(size=3)
        t0 = float(rng.uniform(-0.8, 0.8))
        assert classify_point(flat3, curve(src), t0).kind is classify_point(flat3, _mapped_curve(src, A, x0), t0).kind


@pytest.mark.parametrize("preset", ["hyperbolic-halfspace", "random-poly"])
def test_affine_change_curved(rng, preset):
    field_ = connection(preset, seed=4)
    b = BASE[preset]
    for _ in range(4 if preset == "hyperbolic-halfspace" else 1):  # transformed random symbols are large
        A, x0 = _random_matrix(rng, 3), rng.normal(size=3)
        moved = _linear_change(field_, A, x0)
        for k in (1, 2):
            a = rng.normal(size=(3, 3))
            src = [poly_src(a[i], start=k, const=b[i]) for i in range(3)]
            before = classify_point(field_, curve(src), 0.0)
            after = classify_point(moved, _mapped_curve(src, A, x0), 0.0)
            assert before.kind is after.kind
            assert before.kind is (CE if k == 1 else SW)


def test_frame_rescaling(flat3, hyperbolic):
    # u -> (1 + t^2) u, c -> c / (1 + t^2) leaves the direction field unchanged
    g = ["t^2", "t^3", "1.5 + t^4"]
    u = ["1", "3/2*t", "2*t^2"]
    scaled = [f"(1 + t^2)*({x})" for x in u]
    for field_ in (flat3, hyperbolic):
        a = classify_via_frames(field_, curve(g, u, "2*t"), 0.0)
        b = classify_via_frames(field_, curve(g, scaled, "2*t/(1 + t^2)"), 0.0)
        assert a.kind is b.kind is SW


def test_torsion_is_ignored(rng):
    raw = make_preset("random-poly", 3, seed=8, amplitude=0.3)
    assert not raw.torsion_free
    for _ in range(20):
        a = rng.normal(size=(3, 4))
        k = int(rng.integers(1, 3))
        gamma = exprs([poly_src(a[i], start=k, const=0.1 * i) for i in range(3)])
        t0 = float(rng.uniform(-0.3, 0.3)) if k == 1 else 0.0
        assert classify_point(raw, gamma, t0).kind is classify_point(symmetrize(raw), gamma, t0).kind
