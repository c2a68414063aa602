import json
import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from openkrylov.ideal import (
    boundary_polynomial,
    boundary_residual,
    chain_vector,
    hermite_vector,
    interior_residuals,
    meixner,
    meixner_recurrence,
    meixner_vector,
    modified_hermite,
    verify_boundary_roots,
    verify_dissipative_toy,
    verify_hermite_eigenvectors,
    verify_linear_chain_structure,
    verify_meixner_eigenvectors,
)
from openkrylov.open_chain import build_liouvillian, linear_coefficients, spectrum, sqrt_coefficients

complexes = st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False)
# the defining Meixner sum cancels to ~1e-30 absolute, so keep clear of omega = 0
nonzero = complexes.filter(lambda z: abs(z) > 1e-3)


def test_meixner_low_orders():
    assert meixner(0, 2.5 - 1j) == 1
    for x in (0.3, -2 + 1j, 5j):
        assert meixner(1, x) == pytest.approx(x, abs=1e-14)


def test_meixner_m2_against_direct_sum():
    # evaluate the defining sum independently at 50 digits
    with mp.workdps(50):
        a = (-1j * mp.mpc(-1j) - 1) / 2
        s = sum(mp.mpf(2) ** k * mp.binomial(2, k) * mp.binomial(a, k) for k in range(3))
        ref = complex((1j) ** 2 * 2 * s)
    assert meixner(2, -1j) == pytest.approx(ref, abs=1e-14)
    # recurrence: M_2 = x^2 - 1
    assert meixner(2, -1j) == pytest.approx((-1j) ** 2 - 1, abs=1e-14)


@given(complexes, st.integers(0, 30))
def test_recurrence_matches_formula(x, n):
    ref = meixner(n, x)
    assert abs(meixner_recurrence(n, x) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_hermite_low_orders():
    assert modified_hermite(0, 3.0) == 1
    assert modified_hermite(1, 3.0) == 3.0
    for x in (0.5, 2 - 1j):
        assert modified_hermite(2, x) == pytest.approx(x * x - 1)


@given(complexes)
def test_hermite_vector_satisfies_interior_rows(omega):
    phi = hermite_vector(omega, 41)
    assert np.max(interior_residuals(phi, omega, sqrt_coefficients(41))) <= 1e-8


@given(nonzero)
def test_meixner_vector_satisfies_interior_rows(omega):
    phi = meixner_vector(omega, 41)
    assert np.max(interior_residuals(phi, omega, linear_coefficients(41))) <= 1e-8


def test_trivial_roots_of_p():
    for l in (1, 5, 20):
        for root in (-1j, -3j):
            m = [meixner_recurrence(l, root), meixner_recurrence(l - 1, root)]
            scale = abs(root + 2j * (l + 1)) * abs(m[0]) + (2 * l + 1) * l * abs(m[1])
            assert abs(boundary_polynomial(root, l)) <= 1e-12 * scale
    for l in (1, 5, 20, 64, 500):
        assert boundary_residual(-1j, l)[0] <= 1e-12
        assert boundary_residual(-3j, l)[0] <= 1e-12


def test_p_vanishes_on_spectrum_l20():
    modes = spectrum(build_liouvillian(linear_coefficients(21), 20))
    assert max(boundary_residual(m.omega, 20)[0] for m in modes) <= 1e-6


def test_p_overflow_is_reported():
    with pytest.raises(OverflowError):
        boundary_polynomial(40.0 + 3j, 400)
    res, _ = boundary_residual(40.0 + 3j, 400)
    assert np.isfinite(res)


def test_chain_vector_normalization():
    b = np.full(400, 0.01)
    # grows ~5000x per site: rescaling kicks in, the raw recursion still fits in a double
    raw, _ = chain_vector(50.0, b, 40, normalize=False)
    phi, log_scale = chain_vector(50.0, b, 40)
    assert log_scale > 0
    np.testing.assert_allclose(phi * np.exp(log_scale), raw, rtol=1e-12)
    far, _ = chain_vector(50.0, b, 400)
    assert np.all(np.isfinite(far))


def test_linear_structure_l20():
    rep = verify_linear_chain_structure(20)
    assert rep.passed, rep.to_json()


def test_linear_structure_rescaled_alpha():
    rep = verify_linear_chain_structure(20, alpha=2.0)
    assert rep.passed, rep.to_json()
    om = np.array([m.omega for m in spectrum(build_liouvillian(linear_coefficients(21, 2.0), 20))])
    assert np.min(np.abs(om + 2j)) < 1e-6 and np.min(np.abs(om + 6j)) < 1e-6


def test_minus_3i_eigenvector_indexing():
    modes = spectrum(build_liouvillian(linear_coefficients(21), 20))
    m = min(modes, key=lambda m: abs(m.omega + 3j))
    phi = m.phi.real / m.phi.real[0]
    np.testing.assert_allclose(phi, 2 * np.arange(21) + 1, rtol=1e-8)


def test_root_sets_coincide_up_to_64():
    for l in (8, 33, 64):
        assert verify_boundary_roots(l).passed


def test_meixner_and_hermite_reports():
    assert verify_meixner_eigenvectors(40).passed
    assert verify_hermite_eigenvectors(40).passed


def test_report_json():
    doc = json.loads(verify_boundary_roots(10).to_json())
    assert doc["case"] == "boundary_polynomial" and doc["passed"]
    assert {"name", "deviation", "tolerance", "passed"} <= set(doc["checks"][0])


def test_dissipative_toy_gamma_07():
    assert verify_dissipative_toy(0.7).passed


def test_interior_residual_with_subnormal_omega():
    # odd entries underflow to subnormals; they must not dominate the residual
    omega = 5e-324 + 0j
    assert np.max(interior_residuals(hermite_vector(omega, 41), omega, sqrt_coefficients(41))) <= 1e-8
