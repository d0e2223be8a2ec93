import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nablatan.classify import classify_point, codim
from nablatan.errors import ValidationError
from nablatan.genericity import (
    PerturbationSpec,
    generic_types,
    montecarlo_types,
    random_directed_curve,
    random_poly_curve,
)
from nablatan.presets import make_preset


def test_generic_types():
    assert generic_types(3) == ((1, 2, 3), (1, 2, 4), (2, 3, 4))
    assert generic_types(4) == ((1, 2, 3, 4), (1, 2, 3, 5), (2, 3, 4, 5))
    assert [codim(a) for a in generic_types(5)] == [0, 1, 1]


@pytest.mark.parametrize("kw", [dict(dim=2), dict(degree=3), dict(amplitude=-1.0), dict(connection="torus"),
                                dict(n_curves=-1), dict(domain=(1.0, 0.0))])
def test_spec_validation(kw):
    with pytest.raises(ValidationError):
        PerturbationSpec(**kw)


def test_draws_are_keyed_by_seed_and_index():
    spec = PerturbationSpec(seed=9)
    a = random_poly_curve(spec, 4)
    b = random_poly_curve(PerturbationSpec(seed=9, n_curves=3), 4)
    np.testing.assert_array_equal(a.gamma, b.gamma)
    assert not np.array_equal(a.gamma, random_poly_curve(spec, 5).gamma)
    assert not np.array_equal(a.gamma, random_poly_curve(PerturbationSpec(seed=10), 4).gamma)


@given(st.integers(0, 10**6), st.integers(0, 50))
def test_curve_is_directed(seed, index):
    pc = random_poly_curve(PerturbationSpec(seed=seed), index)
    pc.to_directed().check(samples=20)
    if pc.root is not None:
        assert any(abs(r - pc.root) < 1e-9 for r in pc.factor_roots())


def test_planted_root_shift_law():
    # at a simple root of c the type of gamma' = c u is the type of u shifted by one
    spec = PerturbationSpec(seed=2, n_curves=30, samples=0)
    report = montecarlo_types(spec)
    factor = [s for s in report.samples if s.source == "factor"]
    assert factor
    for s in factor:
        assert s.entries == (2, 3, 4) and s.kind == "Swallowtail"


def test_located_roots_match_direct_classifier():
    spec = PerturbationSpec(seed=6, n_curves=10, samples=0)
    report = montecarlo_types(spec)
    flat = make_preset("flat", 3)
    for s in report.samples:
        cv = random_directed_curve(spec, s.curve)
        assert classify_point(flat, cv, s.t).kind.value == s.kind


def test_zero_amplitude_is_degenerate():
    spec = PerturbationSpec(seed=1, amplitude=0.0, n_curves=5)
    assert spec.degenerate
    report = montecarlo_types(spec)
    assert report.histogram.counts == {}
    assert report.histogram.undetermined == report.histogram.total > 0


@pytest.mark.parametrize("conn", ["flat", "hyperbolic-halfspace", "random-poly"])
def test_support_is_generic(conn):
    report = montecarlo_types(PerturbationSpec(seed=5, n_curves=40, connection=conn))
    assert report.outside == set()
    assert report.histogram.support() <= set(generic_types(3))
    assert report.random_fraction_top() >= 0.99
    assert report.fraction_generic() == 1.0


def test_four_dimensional_support():
    report = montecarlo_types(PerturbationSpec(seed=1, dim=4, degree=5, n_curves=30))
    assert report.histogram.support() <= set(generic_types(4))
    assert report.located.counts.get((2, 3, 4, 5), 0) > 0


def test_reproducible_and_worker_independent():
    spec = PerturbationSpec(seed=12, n_curves=16)
    a = montecarlo_types(spec)
    b = montecarlo_types(spec, workers=4)
    assert a.csv_text() == b.csv_text()
    sa, sb = a.summary(), b.summary()
    sa.pop("seconds"), sb.pop("seconds")
    assert sa == sb


def test_summary_and_csv():
    report = montecarlo_types(PerturbationSpec(seed=0, n_curves=8))
    s = json.loads(report.json_text())
    assert s["kind"] == "montecarlo" and s["schema_version"] == 1
    assert set(s["codim"].values()) <= {0, 1}
    assert s["histogram"]["total"] == len(report.samples)
    rows = report.csv_text().splitlines()
    assert rows[0].startswith("curve,t,source,type,class")
    assert len(rows) == len(report.samples) + 1
    assert "proxy" in s["note"]
