import numpy as np
import pytest

from openkrylov.lanczos import (
    KrylovChain,
    RingGeometry,
    SeedConservedError,
    fit_growth_rate,
    lanczos_run,
    locality_bound_check,
    read_chain_csv,
    truncation_drift,
)
from openkrylov.models import build_chaotic, build_seed, build_xxz
from openkrylov.pauli import EXACT, OperatorMap, TruncationPolicy, inner_product, to_dense


def dense_lanczos(H, O, steps):
    """Operator Lanczos on sparse matrices, normalized trace inner product."""
    Hd = to_dense(H, as_sparse=True).tocsr()
    dim = Hd.shape[0]

    def ip(a, b):
        return np.vdot(a, b).real / dim

    cur = O.toarray() if hasattr(O, "toarray") else O
    cur = cur / np.sqrt(ip(cur, cur))
    prev, b = None, []
    for _ in range(steps):
        new = Hd @ cur - (Hd.T @ cur.T).T  # [H, cur]; H is real symmetric here
        if prev is not None:
            new = new - b[-1] * prev
        bn = np.sqrt(ip(new, new))
        b.append(bn)
        prev, cur = cur, new / bn
    return np.array(b)


def test_dense_oracle_chaotic_n10():
    n = 10
    H, O = build_chaotic(n), build_seed("chaotic_O0", n)
    chain = lanczos_run(H, O, 7, geometry=RingGeometry(n, translation_reduced=False))
    ref = dense_lanczos(H, to_dense(O, as_sparse=True).toarray(), 8)
    np.testing.assert_allclose(chain.b[:8], ref, rtol=0, atol=1e-10)


def test_translation_reduced_matches_full_ring():
    H, O = build_chaotic(16), build_seed("chaotic_O0", 16)
    full = lanczos_run(H, O, 6, geometry=RingGeometry(16, False))
    reduced = lanczos_run(H, O, 6, geometry=RingGeometry(16, True))
    # strings stay shorter than the ring for these steps, so both are exact
    np.testing.assert_allclose(reduced.b, full.b, atol=1e-12)


def test_conserved_seed_raises():
    H = build_chaotic(6)
    with pytest.raises(SeedConservedError):
        lanczos_run(H, H / H.norm(), 3)


def test_exact_closure_recorded():
    H = OperatorMap.from_terms({"ZI": 1.0, "IZ": 1.0})
    A = OperatorMap.from_terms({"XX": 0.5, "YY": -0.5})
    chain = lanczos_run(H, A, 5, keep_basis=True)
    assert chain.closed and len(chain.b) == 1 and abs(chain.b[0] - 4.0) < 1e-14
    assert np.all(chain.b > 0)


def test_orthonormal_basis_at_depth_40():
    H, O = build_chaotic(6), build_seed("chaotic_O0", 6)
    chain = lanczos_run(H, O, 40, geometry=RingGeometry(6, False), keep_basis=True)
    B = chain.basis
    G = np.array([[inner_product(a, b) for b in B] for a in B])
    assert np.max(np.abs(G - np.eye(len(B)))) <= 1e-8
    assert np.all(chain.b > 0)


def test_deterministic():
    H, O = build_xxz(-0.5, 2.0, 30), build_seed("Q3", 30)
    pol = TruncationPolicy(max_strings=500)
    a = lanczos_run(H, O, 12, pol, RingGeometry(30))
    b = lanczos_run(H, O, 12, pol, RingGeometry(30))
    assert a.b.tobytes() == b.b.tobytes()
    assert a.to_csv() == b.to_csv()


def test_extra_coefficient_and_csv_roundtrip():
    H, O = build_xxz(-0.5, 2.0, 20), build_seed("Q1", 20)
    chain = lanczos_run(H, O, 5, geometry=RingGeometry(20), seed_label="Q1", model_label="xxz")
    assert len(chain.b) == 6 and chain.depth == 5
    text = chain.to_csv()
    assert "# seed: Q1" in text and "# policy:" in text and "# geometry:" in text
    np.testing.assert_array_equal(read_chain_csv(text), chain.b)


def test_string_cap_respected():
    H, O = build_chaotic(30), build_seed("chaotic_O0", 30)
    chain = lanczos_run(H, O, 15, TruncationPolicy(max_strings=200), RingGeometry(30))
    assert max(chain.string_counts) <= 200


def test_drift_shrinks_with_looser_cap():
    H, O = build_chaotic(30), build_seed("chaotic_O0", 30)
    chains = [lanczos_run(H, O, 12, TruncationPolicy(max_strings=c), RingGeometry(30)) for c in (100, 1000, 10000)]
    exact = lanczos_run(H, O, 12, EXACT, RingGeometry(30))
    drift = truncation_drift(chains + [exact])
    assert drift.shape == (3, 13)
    assert drift[-1].max() < drift[0].max()


def test_growth_rate_fit():
    b = 0.36 * np.arange(1, 31) + 0.5
    lam, c = fit_growth_rate(b, 10, 30)
    assert abs(lam - 0.36) < 1e-12 and abs(c - 0.5) < 1e-10


def test_locality_one_site_seed():
    H = build_xxz(-0.5, 2.0, 12)
    O = build_seed("Q1", 12)
    chain = lanczos_run(H, O, 3, geometry=RingGeometry(12), keep_basis=True)
    rep = locality_bound_check(chain, seed_locality=1)
    assert rep.ok and rep.supports[3] <= 4


def test_locality_profile_monotone():
    H, O = build_xxz(-0.5, 2.0, 30), build_seed("Q3", 30)
    chain = lanczos_run(H, O, 10, geometry=RingGeometry(30), keep_basis=True)
    rep = locality_bound_check(chain, seed_locality=3)
    assert rep.ok
    assert all(a <= b for a, b in zip(rep.supports, rep.supports[1:]))


def test_locality_without_basis_is_error_report():
    chain = KrylovChain(np.array([1.0]), None, "", EXACT, RingGeometry(4))
    rep = locality_bound_check(chain, 1)
    assert not rep.ok and "basis" in rep.error


def test_required_sites():
    assert RingGeometry(64).required_sites(40, 3) == 3 + 41 + 1
