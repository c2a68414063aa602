"""
Closed-form checks for the exactly solvable chains ``b_n = alpha n`` and ``b_n = sqrt(n)``.

For ``b_n = n`` the open-chain eigenvectors are ``phi_n = i^n M_n(omega) / n!``
with the Meixner-type polynomials

    M_n(x) = i^n n! sum_k 2^k C(n, k) C((-i x - 1) / 2, k),

which obey ``M_{n+1} = x M_n - n^2 M_{n-1}``. The eigenvalues are the roots of

    P(omega) = (omega + 2i(l+1)) M_l(omega) - (2l+1) l M_{l-1}(omega).

For ``b_n = sqrt(n)`` the same role is played by the monic polynomials
``H_{n+1} = x H_n - n H_{n-1}`` with ``phi_n = i^n H_n(omega) / sqrt(n!)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import mpmath as mp
import numpy as np

from .open_chain import (
    build_liouvillian,
    dissipative_toy,
    linear_coefficients,
    spectrum,
    sqrt_coefficients,
)


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


def meixner(n: int, x: complex) -> complex:
    """Evaluate the defining sum of ``M_n(x)``.

    The alternating sum cancels badly in double precision, so it is carried
    out with mpmath at a working precision that grows with ``n``.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    with mp.workdps(30 + 2 * n):
        a = (-1j * mp.mpc(x) - 1) / 2
        total = mp.mpc(0)
        gen_binom = mp.mpc(1)
        for k in range(n + 1):
            if k:
                gen_binom *= (a - (k - 1)) / k
            total += mp.mpf(2) ** k * mp.binomial(n, k) * gen_binom
        val = (1j) ** n * mp.factorial(n) * total
        return complex(val)


def meixner_sequence(n_max: int, x: complex) -> np.ndarray:
    """``M_0(x)..M_{n_max}(x)`` from the three-term recurrence."""
    out = np.zeros(n_max + 1, dtype=complex)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for n in range(1, n_max):
        out[n + 1] = x * out[n] - n * n * out[n - 1]
    return out


def meixner_recurrence(n: int, x: complex) -> complex:
    return complex(meixner_sequence(n, x)[n])


def modified_hermite_sequence(n_max: int, x: complex) -> np.ndarray:
    """Monic ``H_0..H_{n_max}`` with ``H_{n+1} = x H_n - n H_{n-1}``."""
    out = np.zeros(n_max + 1, dtype=complex)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    for n in range(1, n_max):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def modified_hermite(n: int, x: complex) -> complex:
    if n < 0:
        raise ValueError("degree must be nonnegative")
    return complex(modified_hermite_sequence(n, x)[n])


# ---------------------------------------------------------------------------
# Chain eigenvectors
# ---------------------------------------------------------------------------


def chain_vector(omega: complex, b, size: int, normalize: bool = True) -> tuple[np.ndarray, float]:
    """Solve the interior rows of ``L phi = omega phi`` from ``phi_0 = 1``.

    Uses ``phi_{n+1} = (b_n phi_{n-1} + i omega phi_n) / b_{n+1}``. With
    ``normalize`` the vector is rescaled whenever it grows, and the log of
    the accumulated scale is returned alongside it.
    """
    b = np.asarray(b, dtype=float)
    phi = np.zeros(size, dtype=complex)
    phi[0] = 1.0
    log_scale = 0.0
    prev = 0.0
    for n in range(size - 1):
        bn = b[n - 1] if n else 0.0
        phi[n + 1] = (bn * prev + 1j * omega * phi[n]) / b[n]
        prev = phi[n]
        if normalize:
            big = abs(phi[n + 1])
            if big > 1e100:
                phi[: n + 2] /= big
                prev /= big
                log_scale += np.log(big)
    return phi, log_scale


def meixner_vector(omega: complex, size: int) -> np.ndarray:
    """``phi_n = i^n M_n(omega) / n!`` from the defining sum (small sizes)."""
    return np.array([(1j) ** n * meixner(n, omega) / float(mp.factorial(n)) for n in range(size)])


def hermite_vector(omega: complex, size: int) -> np.ndarray:
    """``phi_n = i^n H_n(omega) / sqrt(n!)``."""
    h = modified_hermite_sequence(size - 1, omega)
    n = np.arange(size)
    fact = np.array([float(mp.sqrt(mp.factorial(k))) for k in n])
    return (1j) ** n * h / fact


def interior_residuals(phi: np.ndarray, omega: complex, b) -> np.ndarray:
    """Relative residual of rows ``0..len(phi)-2`` of ``M phi = -i omega phi``."""
    b = np.asarray(b, dtype=float)
    m = len(phi)
    out = np.zeros(m - 1)
    # rows made only of subnormal numbers carry a few bits at most; measure
    # them against the smallest normal double instead of their own size
    floor = np.finfo(float).tiny
    for n in range(m - 1):
        left = b[n - 1] * phi[n - 1] if n else 0.0
        right = b[n] * phi[n + 1]
        mid = -1j * omega * phi[n]
        scale = abs(left) + abs(right) + abs(mid)
        out[n] = abs(left - right - mid) / max(scale, floor)
    return out


# ---------------------------------------------------------------------------
# Boundary polynomial
# ---------------------------------------------------------------------------


def boundary_polynomial(omega: complex, l: int) -> complex:
    """``P(omega)`` for the open chain ``b_n = n`` truncated at ``l``.

    Evaluated with the Meixner recurrence; raises ``OverflowError`` when the
    unscaled value is not representable (use :func:`boundary_residual`).
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    with np.errstate(over="ignore", invalid="ignore"):
        m = meixner_sequence(l, omega)
        val = (omega + 2j * (l + 1)) * m[l] - (2 * l + 1) * l * m[l - 1]
    if not np.isfinite(val):
        raise OverflowError(f"P overflows at l={l}; use boundary_residual")
    return complex(val)


def boundary_residual(omega: complex, l: int) -> tuple[float, bool]:
    """Scale-free ``|P(omega)|`` and whether running normalization was needed.

    Divides ``P`` by ``|omega + 2i(l+1)| |M_l| + (2l+1) l |M_{l-1}|`` and
    evaluates through the normalized eigenvector recursion so ``l`` in the
    thousands does not overflow.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    phi, log_scale = chain_vector(omega, linear_coefficients(l + 1), l + 1)
    # P = (l!/i^l) [(omega + 2i(l+1)) phi_l - i (2l+1) phi_{l-1}]
    a = (omega + 2j * (l + 1)) * phi[l]
    c = 1j * (2 * l + 1) * phi[l - 1]
    scale = abs(a) + abs(c)
    return (float(abs(a - c) / scale) if scale else 0.0), log_scale > 0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class Report:
    case: str
    l: int
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, deviation, tolerance, detail=""):
        deviation = float(deviation)
        self.checks.append(Check(name, deviation, tolerance, bool(deviation <= tolerance), detail))

    def to_json(self) -> str:
        return json.dumps({"case": self.case, "l": self.l, "passed": self.passed,
                           "checks": [asdict(c) for c in self.checks]}, indent=2)


def _alignment(u: np.ndarray, v: np.ndarray) -> float:
    """Sine of the angle between ``u`` and ``v``; zero when they are parallel."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return float(np.linalg.norm(u - v * np.vdot(v, u)))


def verify_linear_chain_structure(l: int, alpha: float = 1.0, tol: float = 1e-6,
                                  residual_tol: float = 1e-8) -> Report:
    """Trivial roots, their eigenvectors and the ``Im omega = -2 alpha`` band.

    The eigenvector of ``-3i alpha`` is compared with ``2n + 1`` for
    ``n = 0..l``, i.e. ``2n - 1`` when sites are counted from 1.
    """
    if l < 2:
        raise ValueError("l must be >= 2")
    L = build_liouvillian(linear_coefficients(l + 1, alpha), l, "open")
    modes = spectrum(L)
    rep = Report("linear", l)
    om = np.array([m.omega for m in modes])
    i1 = int(np.argmin(np.abs(om + 1j * alpha)))
    i3 = int(np.argmin(np.abs(om + 3j * alpha)))
    n = np.arange(l + 1)
    rep.add("root_minus_i", abs(om[i1] + 1j * alpha), tol * alpha)
    rep.add("eigvec_minus_i_constant", _alignment(modes[i1].phi, np.ones(l + 1)), residual_tol)
    rep.add("root_minus_3i", abs(om[i3] + 3j * alpha), tol * alpha)
    rep.add("eigvec_minus_3i_linear", _alignment(modes[i3].phi, 2 * n + 1.0), residual_tol)
    rep.add("max_residual", max(m.residual for m in modes), residual_tol)
    rest = np.delete(om, [i1, i3])
    dev = np.abs(rest.imag + 2 * alpha)
    worst = int(np.argmax(dev))
    rep.add("band_im_minus_2alpha", dev[worst] / alpha, tol,
            detail=f"worst eigenvalue {complex(rest[worst])!r}")
    return rep


def verify_boundary_roots(l: int, tol: float = 1e-6) -> Report:
    """Every open-chain eigenvalue of ``b_n = n`` is a root of ``P``."""
    L = build_liouvillian(linear_coefficients(l + 1), l, "open")
    modes = spectrum(L)
    rep = Report("boundary_polynomial", l)
    res = [boundary_residual(m.omega, l)[0] for m in modes]
    worst = int(np.argmax(res))
    rep.add("max_scaled_P", res[worst], tol, detail=f"at omega={modes[worst].omega!r}")
    for root in (-1j, -3j):
        rep.add(f"P({root})", boundary_residual(root, l)[0], tol)
    return rep


def verify_meixner_eigenvectors(l: int, tol: float = 1e-8) -> Report:
    """Meixner vectors satisfy the interior rows and match the numerical eigenvectors."""
    b = linear_coefficients(l + 1)
    modes = spectrum(build_liouvillian(b, l, "open"))
    rep = Report("linear_meixner", l)
    res, align = [], []
    for m in modes:
        v = meixner_vector(m.omega, l + 1)
        res.append(float(np.max(interior_residuals(v, m.omega, b))))
        align.append(_alignment(v, m.phi))
    rep.add("interior_rows", max(res), tol)
    rep.add("eigenvector_alignment", max(align), tol)
    return rep


def verify_hermite_eigenvectors(l: int, tol: float = 1e-8) -> Report:
    """Same checks for ``b_n = sqrt(n)`` with modified Hermite vectors."""
    b = sqrt_coefficients(l + 1)
    modes = spectrum(build_liouvillian(b, l, "open"))
    rep = Report("sqrt_hermite", l)
    res, align = [], []
    for m in modes:
        v = hermite_vector(m.omega, l + 1)
        res.append(float(np.max(interior_residuals(v, m.omega, b))))
        align.append(_alignment(v, m.phi))
    rep.add("interior_rows", max(res), tol)
    rep.add("eigenvector_alignment", max(align), tol)
    return rep


def verify_dissipative_toy(gamma: float, l: int = 60, n_modes: int = 10, tol: float = 1e-4) -> Report:
    """Slowest eigenvalues of the diagonal-dissipative chain against ``-(2k+1) i``."""
    modes = spectrum(dissipative_toy(gamma, l))
    om = np.array([m.omega for m in modes[:n_modes]])
    target = -1j * (2 * np.arange(n_modes) + 1)
    dev = np.abs(om - target)
    worst = int(np.argmax(dev))
    rep = Report(f"dissipative_toy(gamma={gamma})", l)
    rep.add("slow_eigenvalues", dev[worst], tol,
            detail=f"mode {worst}: {complex(om[worst])!r} vs {complex(target[worst])!r}")
    return rep
