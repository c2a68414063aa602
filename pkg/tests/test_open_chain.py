import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from openkrylov.open_chain import (
    GROWING,
    PERPETUAL,
    TRANSIENT,
    autocorrelation,
    build_liouvillian,
    classify,
    default_time_grid,
    delta_state,
    eigenvector_csv,
    evolve,
    linear_coefficients,
    spectrum,
    spectrum_csv,
    sqrt_coefficients,
    trajectory_csv,
)

positive_b = st.integers(2, 30).flatmap(
    lambda m: arrays(float, m, elements=st.floats(0.05, 5.0)))


def test_l1_open_matrix():
    L = build_liouvillian([2.0, 3.0], 1, "open")
    np.testing.assert_array_equal(L.matrix, 1j * np.array([[0, -2.0], [5.0, -6.0]]))


def test_kind_requirements():
    with pytest.raises(ValueError, match="needs 21"):
        build_liouvillian(np.ones(20), 20, "open")
    with pytest.raises(ValueError, match="unknown kind"):
        build_liouvillian(np.ones(5), 3, "periodic")
    with pytest.raises(ValueError, match="gamma"):
        build_liouvillian(np.ones(5), 3, "diagonal_dissipative")


def test_linear_chain_trivial_roots():
    om = np.array([m.omega for m in spectrum(build_liouvillian(linear_coefficients(21), 20))])
    assert np.min(np.abs(om + 1j)) < 1e-8
    assert np.min(np.abs(om + 3j)) < 1e-8


def test_linear_chain_band():
    om = np.array([m.omega for m in spectrum(build_liouvillian(linear_coefficients(21), 20))])
    rest = om[(np.abs(om + 1j) > 1e-6) & (np.abs(om + 3j) > 1e-6)]
    assert np.max(np.abs(rest.imag + 2)) <= 1e-6


def test_dirichlet_constant_chain():
    om = np.sort([m.omega.real for m in spectrum(build_liouvillian(np.ones(9), 9, "dirichlet"))])
    ref = np.sort(-2 * np.cos(np.arange(1, 11) * np.pi / 11))
    np.testing.assert_allclose(om, ref, atol=1e-12)


def test_classify_examples():
    assert classify(12 - 0.001j, 0.01) == PERPETUAL
    assert classify(-1j, 0.5) == TRANSIENT
    assert classify(0j, 1e-6) == PERPETUAL
    assert classify(0.3 + 0.2j, 0.01) == GROWING


def test_dense_ceiling():
    with pytest.raises(ValueError, match="ceiling"):
        spectrum(build_liouvillian(np.ones(21), 20), ceiling=10)


@given(positive_b)
def test_open_spectrum_mirror_symmetric(b):
    om = np.array([m.omega for m in spectrum(build_liouvillian(b, len(b) - 1))])
    mirror = -np.conj(om)
    dist = np.abs(om[:, None] - mirror[None, :]).min(axis=1)
    assert dist.max() <= 1e-8 * max(1.0, np.abs(om).max())


@given(positive_b)
def test_dirichlet_spectrum_real(b):
    om = np.array([m.omega for m in spectrum(build_liouvillian(b, len(b), "dirichlet"))])
    assert np.abs(om.imag).max() <= 1e-10 * max(1.0, np.abs(om).max())


@given(positive_b)
def test_residuals_small(b):
    assert max(m.residual for m in spectrum(build_liouvillian(b, len(b) - 1))) <= 1e-8


@given(positive_b, st.integers(0, 2**31 - 1))
def test_interior_rows_follow_chain_equation(b, seed):
    l = len(b) - 1
    M = build_liouvillian(b, l).generator
    phi = np.random.default_rng(seed).normal(size=l + 1)
    out = M @ phi
    for n in range(1, l):
        assert out[n] == pytest.approx(b[n - 1] * phi[n - 1] - b[n] * phi[n + 1], abs=1e-12)


@given(positive_b)
def test_dirichlet_evolution_preserves_norm(b):
    L = build_liouvillian(b, len(b), "dirichlet")
    for method in ("expm", "ode"):
        states = evolve(L, np.linspace(0, 3, 7), method=method)
        norms = np.array([np.linalg.norm(s.phi) for s in states])
        assert np.abs(norms - 1).max() <= 1e-8


def test_initial_state_and_zero_generator():
    L = build_liouvillian(np.zeros(6), 5, "dirichlet")
    states = evolve(L, [0.0, 1.0, 7.5])
    assert autocorrelation(states)[0] == 1.0
    for s in states:
        np.testing.assert_array_equal(s.phi, delta_state(6).phi)


def test_two_site_cosine():
    L = build_liouvillian([1.7], 1, "dirichlet")
    t = np.linspace(0, 4, 9)
    for method in ("expm", "ode"):
        phi0 = autocorrelation(evolve(L, t, method=method))
        np.testing.assert_allclose(phi0, np.cos(1.7 * t), atol=1e-9)


def test_sqrt_chain_expm_vs_ode():
    L = build_liouvillian(sqrt_coefficients(200), 200, "dirichlet")
    t = np.linspace(0, 5, 11)
    ref = np.array([sla.expm(L.generator * tt)[:, 0] for tt in t])
    for method in ("expm", "ode"):
        got = np.array([s.phi for s in evolve(L, t, method=method)])
        assert np.abs(got - ref).max() <= 1e-8


def test_open_matches_long_dirichlet_before_wavefront():
    t = np.linspace(0, 2, 41)
    short = evolve(build_liouvillian(linear_coefficients(21), 20, "open"), t)
    long = evolve(build_liouvillian(linear_coefficients(200), 200, "dirichlet"), t)
    assert np.abs(autocorrelation(short) - autocorrelation(long)).max() <= 1e-6


def test_evolve_rejects_bad_grids():
    L = build_liouvillian(np.ones(3), 3, "dirichlet")
    with pytest.raises(ValueError):
        evolve(L, [])
    with pytest.raises(ValueError):
        evolve(L, [0.0], method="euler")


def test_default_grid_step():
    L = build_liouvillian(linear_coefficients(21), 20)
    t = default_time_grid(L, 5.0)
    assert t[0] == 0 and t[-1] == 5.0
    assert np.diff(t).max() <= 0.05 / 21 + 1e-15


def test_csv_writers():
    L = build_liouvillian(linear_coefficients(4), 3)
    modes = spectrum(L)
    assert spectrum_csv(modes).splitlines()[0] == "re_omega,im_omega,class,mean_position,residual"
    assert len(eigenvector_csv(modes).splitlines()) == 1 + 4 * 4
    lines = trajectory_csv(evolve(L, [0, 0.5]), sites=(0, 1)).splitlines()
    assert lines[0] == "t,m,amplitude" and lines[1] == "0.0,0,1.0"


def test_mode_position_metrics():
    modes = spectrum(build_liouvillian(linear_coefficients(21), 20))
    for m in modes:
        assert 0 <= m.mean_position <= 20
        assert m.cumulative_mass[-1] == pytest.approx(1.0)


def test_linear_band_is_shifted_hermitian_chain():
    # away from -i and -3i the open spectrum is a Hermitian chain of l - 1
    # sites with couplings sqrt(n (n + 2)), shifted down by 2i
    l = 20
    om = np.array([m.omega for m in spectrum(build_liouvillian(linear_coefficients(l + 1), l))])
    band = np.sort(om[np.abs(om.imag + 2) < 1e-6].real)
    c = np.sqrt(np.arange(1, l - 1) * np.arange(3, l + 1.0))
    ref = np.linalg.eigvalsh(np.diag(c, 1) + np.diag(c, -1))
    assert len(band) == l - 1
    np.testing.assert_allclose(band, ref, atol=1e-10)
