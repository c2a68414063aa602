"""
Operator Lanczos recursion in the Pauli-string representation.

The Krylov basis is stored as Hermitian operators ``Ohat_n`` with real
coefficients. The conventional basis is ``O_n = i^n Ohat_n`` (the grade of
each element is kept in :attr:`KrylovChain.grade_sequence`). With
``K = -i[H, .]`` the recursion reads::

    b_n Ohat_n = K Ohat_{n-1} + b_{n-1} Ohat_{n-2},   b_n = ||...||

and the Heisenberg-evolved seed is ``O(t) = sum_n phi_n(t) Ohat_n`` with
``d phi_n / dt = b_n phi_{n-1} - b_{n+1} phi_{n+1}``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .pauli import (
    EXACT,
    OperatorMap,
    TruncationPolicy,
    commutator,
    inner_product,
    linear_combination,
    ti_commutator,
    translation_reduce,
    _spans,
    _rotate,
)

log = logging.getLogger(__name__)

CLOSURE_TOL = 1e-10


class SeedConservedError(ValueError):
    """Raised when ``[H, O0] = 0``."""


@dataclass(frozen=True)
class RingGeometry:
    """Ring the operators live on.

    With ``translation_reduced`` the Hamiltonian and seed must be translation
    invariant; only one string per translation orbit is kept and inner
    products are per site. Results then coincide with the infinite chain as
    long as no string grows past ``n_sites``.
    """

    n_sites: int
    translation_reduced: bool = True

    def required_sites(self, depth: int, seed_support: int, interaction_range: int = 2) -> int:
        """Smallest ring on which strings do not wrap after ``depth + 1`` steps."""
        return seed_support + (depth + 1) * (interaction_range - 1) + 1

    def as_dict(self) -> dict:
        return {"n_sites": self.n_sites, "translation_reduced": self.translation_reduced}


@dataclass
class KrylovChain:
    """Lanczos coefficients ``b_1..b_m`` and optionally the basis ``Ohat_0..``."""

    b: np.ndarray
    basis: list[OperatorMap] | None
    seed_label: str
    truncation: TruncationPolicy
    geometry: RingGeometry
    grade_sequence: list[int] = field(default_factory=list)
    string_counts: list[int] = field(default_factory=list)
    closed: bool = False
    seed_norm: float = 1.0
    model_label: str = ""

    @property
    def depth(self) -> int:
        """Largest truncation site ``l`` the chain supports (needs ``b_{l+1}``)."""
        return len(self.b) - 1

    def paper_basis(self, n: int) -> OperatorMap:
        """``O_n = i^n Ohat_n`` with the grade made explicit."""
        if self.basis is None:
            raise ValueError("basis not retained")
        return self.basis[n].with_grade(self.grade_sequence[n])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# model: {self.model_label}\n")
        buf.write(f"# seed: {self.seed_label}\n")
        pol = self.truncation.as_dict()
        buf.write("# policy: " + " ".join(f"{k}={v}" for k, v in pol.items()) + "\n")
        geo = self.geometry.as_dict()
        buf.write("# geometry: " + " ".join(f"{k}={v}" for k, v in geo.items()) + "\n")
        buf.write(f"# closed: {self.closed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "b_n", "n_strings"])
        counts = self.string_counts + [""] * (len(self.b) - len(self.string_counts))
        for n, (bn, cnt) in enumerate(zip(self.b, counts), start=1):
            w.writerow([n, repr(float(bn)), cnt])
        return buf.getvalue()


def read_chain_csv(text: str) -> np.ndarray:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(rows)
    return np.array([float(r["b_n"]) for r in reader])


def _make_liouvillian(H: OperatorMap, geometry: RingGeometry, policy: TruncationPolicy):
    if geometry.translation_reduced:
        density = translation_reduce(H)

        def apply(op):
            return ti_commutator(density, op, policy, max_span=geometry.n_sites).with_grade(0)
    else:
        def apply(op):
            return commutator(H, op, policy).with_grade(0)
    return apply


def _orthogonalize(v: OperatorMap, against: list[OperatorMap], passes: int = 2) -> OperatorMap:
    # classical Gram-Schmidt applied twice; each pass merges all projections at once
    for _ in range(passes):
        coeffs = [-inner_product(q, v) for q in against]
        v = linear_combination([v, *against], [1.0, *coeffs])
    return v


def lanczos_run(
    H: OperatorMap,
    O0: OperatorMap,
    depth: int,
    policy: TruncationPolicy = EXACT,
    geometry: RingGeometry | None = None,
    keep_basis: bool = False,
    seed_label: str = "",
    model_label: str = "",
    reorthogonalize: bool = True,
    closure_tol: float = CLOSURE_TOL,
    seed_reduced: bool = False,
) -> KrylovChain:
    """Run ``depth + 1`` Lanczos steps and return ``b_1..b_{depth+1}``.

    Parameters
    ----------
    H, O0 : OperatorMap
        Hermitian Hamiltonian and seed on the full ring (grade 0).
    depth : int
        Truncation site ``l``. One coefficient beyond it is always computed
        because the open boundary consumes ``b_{l+1}``.
    policy : TruncationPolicy
        Pruning applied to every new Krylov vector.
    geometry : RingGeometry, optional
        Defaults to the full (non-reduced) ring of ``H.n_sites``.
    keep_basis : bool
        Keep ``Ohat_0..Ohat_depth``; also switches on full
        reorthogonalization against all of them.
    seed_reduced : bool
        ``O0`` is already a set of orbit representatives (translation-reduced
        geometry only), e.g. an operator reconstructed from an earlier run.

    Returns
    -------
    KrylovChain
        ``closed`` is set when some ``b_n`` falls below ``closure_tol * b_1``;
        the chain then stops early with an exactly invariant subspace.

    Raises
    ------
    SeedConservedError
        If the seed commutes with ``H``.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if H.n_sites != O0.n_sites:
        raise ValueError(f"site count mismatch: {H.n_sites} vs {O0.n_sites}")
    if H.grade % 2 or O0.grade % 2:
        raise ValueError("H and O0 must be Hermitian (even grade)")
    H = H.with_grade(0) if H.grade == 0 else -H.with_grade(0)
    O0 = O0.with_grade(0) if O0.grade == 0 else -O0.with_grade(0)
    geometry = geometry or RingGeometry(H.n_sites, translation_reduced=False)
    if geometry.n_sites != H.n_sites:
        raise ValueError("geometry does not match operator size")

    apply = _make_liouvillian(H, geometry, policy)
    if seed_reduced and not geometry.translation_reduced:
        raise ValueError("seed_reduced requires a translation-reduced geometry")
    seed = translation_reduce(O0) if geometry.translation_reduced and not seed_reduced else O0
    seed_norm = seed.norm()
    if seed_norm == 0:
        raise ValueError("seed operator is zero")
    cur = seed / seed_norm
    prev = None
    basis = [cur]
    b: list[float] = []
    counts = [len(cur)]
    closed = False

    for n in range(1, depth + 2):
        new = apply(cur)
        if prev is not None:
            new = new + prev * b[-1]
        if reorthogonalize:
            window = basis if keep_basis else basis[-2:]
            new = _orthogonalize(new, window)
        new = new.prune(policy)
        bn = new.norm()
        if n == 1 and bn <= 1e-13 * max(H.norm(), 1.0):
            raise SeedConservedError("seed is conserved; Krylov space is trivial")
        if n > 1 and bn < closure_tol * b[0]:
            log.info("Lanczos closed exactly at n=%d (b_n=%.3e)", n, bn)
            closed = True
            break
        b.append(bn)
        prev, cur = cur, new / bn
        if n <= depth:
            if keep_basis:
                basis.append(cur)
            else:
                basis = [prev, cur]
            counts.append(len(cur))
        log.debug("n=%d b=%.12g strings=%d", n, bn, len(new))

    return KrylovChain(
        b=np.array(b),
        basis=basis if keep_basis else None,
        seed_label=seed_label,
        truncation=policy,
        geometry=geometry,
        grade_sequence=[n % 4 for n in range(len(basis) if keep_basis else len(b))],
        string_counts=counts,
        closed=closed,
        seed_norm=seed_norm,
        model_label=model_label,
    )


def truncation_drift(chains: list[KrylovChain]) -> np.ndarray:
    """Per-``n`` change of ``b_n`` between consecutive truncation levels.

    ``chains`` should be ordered from loosest to tightest policy; row ``k`` of
    the result is ``|b^(k+1) - b^(k)|`` over the common length.
    """
    m = min(len(c.b) for c in chains)
    return np.array([np.abs(chains[k + 1].b[:m] - chains[k].b[:m]) for k in range(len(chains) - 1)])


def fit_growth_rate(b: np.ndarray, n_min: int, n_max: int) -> tuple[float, float]:
    """Least-squares line ``b_n ~ lambda n + c`` over ``n_min <= n <= n_max`` (1-based)."""
    n = np.arange(1, len(b) + 1)
    sel = (n >= n_min) & (n <= n_max)
    if sel.sum() < 2:
        raise ValueError("need at least two coefficients in the fit window")
    slope, intercept = np.polyfit(n[sel], b[sel], 1)
    return float(slope), float(intercept)


# ---------------------------------------------------------------------------
# Locality
# ---------------------------------------------------------------------------


def ring_spans(op: OperatorMap) -> np.ndarray:
    """Smallest contiguous window (around the ring) covering each string."""
    n = op.n_sites
    best = _spans(op.supports)
    for r in range(1, n):
        best = np.minimum(best, _spans(_rotate(op.supports, r, n)))
    return best


@dataclass
class LocalityReport:
    supports: list[int]
    bounds: list[int]
    ok: bool
    error: str = ""

    def as_dict(self) -> dict:
        return {"supports": self.supports, "bounds": self.bounds, "ok": self.ok, "error": self.error}


def locality_bound_check(chain: KrylovChain, seed_locality: int, interaction_range: int = 1) -> LocalityReport:
    """Check that ``Ohat_n`` spans at most ``n * interaction_range + seed_locality`` sites.

    ``interaction_range`` is how far one commutator with ``H`` can extend a
    string (1 for nearest-neighbour couplings).
    """
    if not chain.basis:
        return LocalityReport([], [], False, "basis not retained; rerun with keep_basis=True")
    supports, bounds = [], []
    for n, op in enumerate(chain.basis):
        sp = ring_spans(op) if not chain.geometry.translation_reduced else op.spans()
        supports.append(int(sp.max()) if len(sp) else 0)
        bounds.append(n * interaction_range + seed_locality)
    ok = all(s <= bd for s, bd in zip(supports, bounds))
    return LocalityReport(supports, bounds, ok)
