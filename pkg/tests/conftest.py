import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from openkrylov.pauli import OperatorMap

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PAULI = "IXYZ"


@st.composite
def operator_maps(draw, n_sites=None, max_terms=6, grade=None):
    n = draw(st.integers(1, 6)) if n_sites is None else n_sites
    k = draw(st.integers(1, max_terms))
    labels = draw(st.lists(st.text(PAULI, min_size=n, max_size=n), min_size=k, max_size=k))
    coeffs = draw(st.lists(st.floats(-2, 2, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
                           min_size=k, max_size=k))
    g = draw(st.integers(0, 3)) if grade is None else grade
    return OperatorMap.from_terms(list(zip(labels, coeffs)), n, grade=g)


@st.composite
def map_pairs(draw, max_terms=6):
    n = draw(st.integers(1, 6))
    return draw(operator_maps(n, max_terms)), draw(operator_maps(n, max_terms))


def dense_ip(a, b):
    """Normalized Hilbert-Schmidt inner product."""
    return np.trace(a.conj().T @ b) / a.shape[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
