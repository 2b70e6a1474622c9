import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from kacsobolev.sobolev import AtomicSignedMeasure

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def zero_mass_measures(draw, dims=(2, 3), max_atoms=8, min_atoms=2, spread=5.0):
    """Atomic measures with weights summing to zero and distinct atoms."""
    d = draw(st.sampled_from(dims))
    n = draw(st.integers(min_atoms, max_atoms))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    x = rng.uniform(-spread, spread, size=(n, d))
    a = rng.normal(size=n)
    a -= a.mean()
    return AtomicSignedMeasure(x, a)


def random_zero_mass(rng, d, n, spread=2.0):
    x = rng.normal(scale=spread, size=(n, d))
    a = rng.normal(size=n)
    a -= a.mean()
    return AtomicSignedMeasure(x, a)


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
