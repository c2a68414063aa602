import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given

from conftest import operator_maps
from openkrylov.lanczos import RingGeometry, lanczos_run
from openkrylov.models import build_seed, build_xxz, raising_product, translation_sum
from openkrylov.open_chain import SpectralMode, build_liouvillian, spectrum
from openkrylov.pauli import OperatorMap, dumps, loads, to_dense, translation_reduce
from openkrylov.quench import (
    ModeOperator,
    QuenchResult,
    RefinementError,
    eigen_residual,
    iterative_refine,
    plus_state_weight,
    quench_trajectory,
    reconstruct_mode_operator,
    select_tracked_mode,
)


def plus_state(n):
    return np.full(2**n, 2 ** (-n / 2))


def test_weight_examples():
    assert plus_state_weight(translation_reduce(translation_sum({"X": 1.0}, 8))) == 1.0
    assert plus_state_weight(translation_reduce(translation_sum({"Z": 1.0}, 8))) == 0.0
    q3 = translation_reduce(translation_sum(raising_product(3), 8))
    assert plus_state_weight(q3) == 0.25


def test_q3_weight_dense_n6():
    q3 = translation_sum(raising_product(3), 6)
    psi = plus_state(6)
    dense = np.vdot(psi, to_dense(q3) @ psi).real / 6
    assert abs(plus_state_weight(q3) / 6 - dense) <= 1e-12


@given(operator_maps(grade=0))
def test_weight_matches_dense(a):
    psi = plus_state(a.n_sites)
    assert abs(plus_state_weight(a) - np.vdot(psi, to_dense(a) @ psi).real) <= 1e-12


def test_weight_grade_two_and_odd():
    a = OperatorMap.from_terms({"XX": 0.3}, grade=2)
    assert plus_state_weight(a) == -0.3
    with pytest.raises(ValueError):
        plus_state_weight(a.with_grade(1))


@pytest.mark.parametrize("seed", ["Q1", "Q3"])
def test_quench_matches_state_evolution(seed):
    n = 8
    H, O = build_xxz(-0.5, 2.0, n), build_seed(seed, n)
    chain = lanczos_run(H, O, 16, geometry=RingGeometry(n, False), keep_basis=True)
    L = build_liouvillian(chain.b, 16, "dirichlet")
    # the truncated chain is exact until its wavefront reaches site 16
    t = np.linspace(0, 0.25, 6)
    res = quench_trajectory(chain, L, t)
    Hd, Od = to_dense(H, as_sparse=True).tocsc(), to_dense(O, as_sparse=True)
    ref = []
    for tt in t:
        psi = spla.expm_multiply(-1j * Hd * tt, plus_state(n)) if tt else plus_state(n)
        ref.append(np.vdot(psi, Od @ psi).real / n)
    assert np.abs(res.expectation - ref).max() <= 1e-6
    assert res.expectation[0] == res.weights[0]


def test_quench_t0_is_seed_weight():
    n = 24
    H, O = build_xxz(-0.5, 2.0, n), build_seed("Q3", n)
    chain = lanczos_run(H, O, 6, geometry=RingGeometry(n), keep_basis=True)
    res = quench_trajectory(chain, build_liouvillian(chain.b, 6), [0.0, 0.1])
    assert res.expectation[0] == plus_state_weight(translation_reduce(O))
    text = res.to_csv()
    assert text.splitlines()[4] == "t,expectation"


def test_quench_needs_basis():
    n = 12
    chain = lanczos_run(build_xxz(-0.5, 2.0, n), build_seed("Q1", n), 3, geometry=RingGeometry(n))
    with pytest.raises(ValueError, match="keep_basis"):
        quench_trajectory(chain, build_liouvillian(chain.b, 3), [0.0])


def two_site_case():
    H = OperatorMap.from_terms({"ZI": 1.0, "IZ": 1.0})
    A = OperatorMap.from_terms({"XX": 0.5, "YY": -0.5})
    return H, A


def test_reconstruct_trivial_chain():
    H, A = two_site_case()
    chain = lanczos_run(H, A, 1, keep_basis=True)
    mode = spectrum(build_liouvillian(chain.b, 0, "dirichlet"))[0]
    op = reconstruct_mode_operator(chain, mode)
    assert op.real.allclose(A / A.norm()) and len(op.imag) == 0


def test_reconstructed_exact_mode_is_eigenoperator():
    H, A = two_site_case()
    chain = lanczos_run(H, A, 3, keep_basis=True)
    for mode in spectrum(build_liouvillian(chain.b, 1, "dirichlet")):
        op = reconstruct_mode_operator(chain, mode)
        assert abs(abs(mode.omega) - 4) < 1e-12
        assert eigen_residual(H, op) < 1e-12
        # [H, A] = -omega A, checked against the dense matrices
        Ad = to_dense(op.real) + 1j * to_dense(op.imag)
        Hd = to_dense(H)
        np.testing.assert_allclose(Hd @ Ad - Ad @ Hd, -mode.omega * Ad, atol=1e-12)


def test_support_histogram():
    op = ModeOperator(1.0, OperatorMap.from_terms({"XXI": 0.6, "XIZ": 0.8}), OperatorMap.zero(3),
                      RingGeometry(3, False))
    # XIZ wraps around the 3-ring into a window of two sites
    assert op.support_histogram() == pytest.approx({2: 1.0})
    assert op.mean_span() == pytest.approx(2.0)


def test_refine_closes_on_exact_eigenoperator():
    H, A = two_site_case()
    res = iterative_refine(H, A / A.norm(), 3, 5)
    assert len(res.omegas) == 1 and abs(res.omegas[0] - 4) < 1e-12
    assert "closed" in res.stopped and res.stabilizing
    assert res.operator.allclose(A / A.norm())


def test_refine_rounds_must_be_positive():
    H, A = two_site_case()
    with pytest.raises(ValueError):
        iterative_refine(H, A, 0, 5)


def test_refine_without_candidates():
    modes = [SpectralMode(w, np.array([p]), 0.0, "transient") for w, p in ((-1j, 0.5), (1 - 1j, 0.9), (-3j, 1.0))]
    assert select_tracked_mode(modes, near_real_fraction=0.5) is None
    assert select_tracked_mode(modes).omega == 1 - 1j
    grow = [SpectralMode(0.1j, np.array([1.0]), 0.0, "growing")] + modes
    assert select_tracked_mode(grow).omega == 1 - 1j


def test_refine_error_type():
    assert issubclass(RefinementError, RuntimeError)


def test_refined_operator_serializes():
    H, A = two_site_case()
    res = iterative_refine(H, A, 1, 5)
    assert loads(dumps(res.operator)) == res.operator


def test_quench_result_csv_header():
    from openkrylov.pauli import EXACT

    r = QuenchResult(np.array([0.0]), np.array([0.25]), "Q3", 10, "open", EXACT)
    lines = r.to_csv().splitlines()
    assert lines[0] == "# seed: Q3" and lines[-1] == "0.0,0.25"
