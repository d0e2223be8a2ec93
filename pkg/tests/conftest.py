import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nablatan.connection import ChristoffelField, symmetrize
from nablatan.curve import DirectedCurve
from nablatan.presets import make_preset
from nablatan.symbolics.expr import parse_expr

settings.register_profile(
    "nablatan", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("nablatan")


def exprs(sources, variables=("t",)):
    return [parse_expr(s, list(variables)) for s in sources]


def curve(gamma, frame=None, factor=None, domain=(-1.0, 1.0)):
    return DirectedCurve.from_strings(gamma, frame, factor, domain)


@pytest.fixture(scope="session")
def flat3():
    return ChristoffelField.flat(3)


@pytest.fixture(scope="session")
def hyperbolic():
    return make_preset("hyperbolic-halfspace", 3)


@pytest.fixture(scope="session")
def sphere():
    return make_preset("sphere-stereographic", 3)


@pytest.fixture(scope="session")
def random_field():
    return symmetrize(make_preset("random-poly", 3, seed=11, amplitude=0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def lit(x) -> str:
    """Parenthesised literal for building expression strings from numpy scalars."""
    return f"({float(x)!r})"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results):
        terminalreporter.write_line(line)
