"""
Quenches from the product state |+>^N and extraction of dynamical symmetries.

The chain amplitudes ``phi_n(t)`` describe ``e^{-iHt} O e^{iHt}``. The
Heisenberg operator ``e^{iHt} O e^{-iHt}`` (what an expectation value in
the evolved state needs) is ``sum_n (-1)^n phi_n(t) Ohat_n``. In the same
basis a chain eigenvector ``v`` with eigenvalue ``omega`` gives the operator
``A = sum_n (-1)^n v_n Ohat_n`` with ``[H, A] ~ -omega A``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .lanczos import KrylovChain, RingGeometry, lanczos_run, ring_spans
from .open_chain import GROWING, OpenLiouvillian, SpectralMode, build_liouvillian, evolve, spectrum
from .pauli import (
    EXACT,
    OperatorMap,
    TruncationPolicy,
    commutator,
    ti_commutator,
    translation_reduce,
)

log = logging.getLogger(__name__)


def plus_state_weight(a: OperatorMap) -> float:
    """``<+|^N A |+>^N``: sum of coefficients of strings made of ``X`` and ``I`` only.

    For translation-reduced representatives this is the value per site.
    """
    if a.grade % 2:
        raise ValueError("expectation of an anti-Hermitian (odd grade) operator is imaginary")
    w = float(np.sum(a.coeffs[a.zs == 0]))
    return -w if a.grade == 2 else w


@dataclass
class QuenchResult:
    times: np.ndarray
    expectation: np.ndarray
    seed_label: str
    l: int
    kind: str
    policy: TruncationPolicy
    weights: np.ndarray = field(repr=False, default=None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed: {self.seed_label}\n# l: {self.l}\n# kind: {self.kind}\n")
        buf.write("# policy: " + " ".join(f"{k}={v}" for k, v in self.policy.as_dict().items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "expectation"])
        for t, e in zip(self.times, self.expectation):
            w.writerow([repr(float(t)), repr(float(e))])
        return buf.getvalue()


def krylov_weights(chain: KrylovChain) -> np.ndarray:
    """Per-site ``|+>`` weights of ``Ohat_n`` times the seed norm."""
    if chain.basis is None:
        raise ValueError("quench needs the Krylov basis; rerun Lanczos with keep_basis=True")
    per_site = 1.0 if chain.geometry.translation_reduced else 1.0 / chain.geometry.n_sites
    return np.array([plus_state_weight(op) for op in chain.basis]) * per_site * chain.seed_norm


def quench_trajectory(chain: KrylovChain, L: OpenLiouvillian, times, method: str = "auto") -> QuenchResult:
    """Per-site ``<psi(t)| O_0 |psi(t)>`` for ``|psi(0)> = |+>^N``.

    ``O_0`` is the seed as passed to Lanczos (not renormalized).
    """
    w = krylov_weights(chain)
    if L.size > len(w):
        raise ValueError(f"chain basis has {len(w)} elements, Liouvillian needs {L.size}")
    w = w[: L.size]
    signs = (-1.0) ** np.arange(L.size)
    states = evolve(L, times, method=method)
    exp = np.array([float(np.real(np.dot(signs * w, s.phi))) for s in states])
    return QuenchResult(np.asarray(times, dtype=float), exp, chain.seed_label, L.l, L.kind,
                        chain.truncation, w)


# ---------------------------------------------------------------------------
# Mode operators
# ---------------------------------------------------------------------------


@dataclass
class ModeOperator:
    """``A = real + i imag`` with both parts Hermitian."""

    omega: complex
    real: OperatorMap
    imag: OperatorMap
    geometry: RingGeometry

    def norm(self) -> float:
        return float(np.hypot(self.real.norm(), self.imag.norm()))

    def hermitian_part(self) -> OperatorMap:
        return self.real

    def support_histogram(self) -> dict[int, float]:
        """Squared-coefficient mass of ``A`` by string span."""
        hist: dict[int, float] = {}
        for part in (self.real, self.imag):
            sp = part.spans() if self.geometry.translation_reduced else ring_spans(part)
            for s, c in zip(sp, part.coeffs):
                hist[int(s)] = hist.get(int(s), 0.0) + float(c * c)
        return dict(sorted(hist.items()))

    def mean_span(self) -> float:
        h = self.support_histogram()
        tot = sum(h.values())
        return sum(k * v for k, v in h.items()) / tot if tot else 0.0


def reconstruct_mode_operator(chain: KrylovChain, mode: SpectralMode,
                              policy: TruncationPolicy = EXACT) -> ModeOperator:
    """Operator ``sum_n (-1)^n phi_n Ohat_n`` of a chain eigenmode."""
    if chain.basis is None:
        raise ValueError("reconstruction needs the Krylov basis; rerun Lanczos with keep_basis=True")
    if len(mode.phi) > len(chain.basis):
        raise ValueError("mode is longer than the retained basis")
    n_sites = chain.basis[0].n_sites
    re = OperatorMap.zero(n_sites)
    im = OperatorMap.zero(n_sites)
    for n, v in enumerate(mode.phi):
        s = (-1) ** n
        if v.real:
            re = re + chain.basis[n] * (s * v.real)
        if v.imag:
            im = im + chain.basis[n] * (s * v.imag)
    return ModeOperator(mode.omega, re.prune(policy), im.prune(policy), chain.geometry)


def _real_commutator(H: OperatorMap, A: OperatorMap, geometry: RingGeometry) -> OperatorMap:
    """``-i [H, A]`` in the geometry's representation."""
    if geometry.translation_reduced:
        return ti_commutator(translation_reduce(H), A, max_span=geometry.n_sites).with_grade(0)
    return commutator(H, A).with_grade(0)


def eigen_residual(H: OperatorMap, op: ModeOperator) -> float:
    """``||[H, A] + omega A|| / ||A||``."""
    wr, wi = op.omega.real, op.omega.imag
    kr = _real_commutator(H, op.real, op.geometry)
    ki = _real_commutator(H, op.imag, op.geometry)
    # [H, R + iS] = i K(R) - K(S)
    real = -ki + op.real * wr - op.imag * wi
    imag = kr + op.real * wi + op.imag * wr
    return float(np.hypot(real.norm(), imag.norm()) / op.norm())


# ---------------------------------------------------------------------------
# Iterative refinement
# ---------------------------------------------------------------------------


class RefinementError(RuntimeError):
    pass


@dataclass
class RefineResult:
    operator: OperatorMap
    omegas: list[complex]
    residuals: list[float]
    chains: list[KrylovChain] = field(repr=False, default_factory=list)
    stopped: str = ""

    @property
    def stabilizing(self) -> bool:
        """Whether ``|omega_{r+1} - omega_r|`` shrinks round over round."""
        steps = np.abs(np.diff(self.omegas))
        return bool(np.all(np.diff(steps) <= 0)) if len(steps) > 1 else True


def select_tracked_mode(modes: list[SpectralMode], near_real_fraction: float = 1.0) -> SpectralMode | None:
    """Mode with the largest ``|phi_0|`` among those with ``|Im omega|`` below
    ``near_real_fraction`` times the spectrum's median ``|Im omega|``.

    Growing modes are never candidates. Ties between a mode and its mirror
    ``-conj(omega)`` go to ``Re omega >= 0``.
    """
    im = np.array([abs(m.omega.imag) for m in modes])
    cut = near_real_fraction * float(np.median(im)) if len(im) else 0.0
    cands = [m for m in modes if abs(m.omega.imag) <= cut and m.cls != GROWING]
    if not cands:
        return None
    return max(cands, key=lambda m: (round(abs(m.phi[0]), 10), m.omega.real >= 0, -abs(m.omega.imag)))


def iterative_refine(H: OperatorMap, A0: OperatorMap, rounds: int, depth: int,
                     policy: TruncationPolicy = EXACT, geometry: RingGeometry | None = None,
                     near_real_fraction: float = 1.0) -> RefineResult:
    """Re-seed Lanczos with the reconstructed near-perpetual mode.

    Each round builds the open chain of the current seed, picks the mode
    with the largest seed overlap (see :func:`select_tracked_mode`), and
    reseeds with the Hermitian part of its operator. In a
    translation-reduced geometry the returned operator is a set of orbit
    representatives.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    geometry = geometry or RingGeometry(H.n_sites, translation_reduced=False)
    seed = A0
    omegas, residuals, chains = [], [], []
    stopped = ""
    current = A0
    for r in range(rounds):
        chain = lanczos_run(H, seed, depth, policy, geometry, keep_basis=True, seed_label=f"refine[{r}]",
                            seed_reduced=r > 0 and geometry.translation_reduced)
        chains.append(chain)
        if chain.closed:
            # exact invariant subspace: the first two basis vectors carry the symmetry
            l = len(chain.b)
            L = build_liouvillian(chain.b, l, "dirichlet") if l else None
            modes = spectrum(L) if L is not None else []
        else:
            L = build_liouvillian(chain.b, depth, "open")
            modes = spectrum(L)
        mode = select_tracked_mode(modes, near_real_fraction) if not chain.closed else \
            max(modes, key=lambda m: (round(abs(m.phi[0]), 10), m.omega.real >= 0))
        if mode is None:
            stopped = f"no near-real mode in round {r}"
            log.warning(stopped)
            break
        op = reconstruct_mode_operator(chain, mode, policy)
        omegas.append(mode.omega)
        residuals.append(eigen_residual(H, op))
        log.info("refine round %d: omega=%s residual=%.3e", r, mode.omega, residuals[-1])
        current = op.real / op.real.norm()
        if chain.closed:
            stopped = f"Krylov chain closed in round {r}"
            break
        seed = current
    if not omegas:
        raise RefinementError(stopped or "refinement produced no mode")
    return RefineResult(current, omegas, residuals, chains, stopped)

