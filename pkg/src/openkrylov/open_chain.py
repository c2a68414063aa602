"""
Truncated Krylov-chain generators, their spectra and time evolution.

The chain amplitudes obey ``d phi / dt = M phi`` with a real tridiagonal
``M`` (``M[n, n-1] = b_n``, ``M[n-1, n] = -b_n``). The Liouvillian is
``L = i M`` so that ``phi(t) = exp(-i L t) phi(0)`` and an eigenmode
``L phi = omega phi`` evolves as ``exp(-i omega t)``.

Truncation at site ``l`` comes in three flavours:

``dirichlet``
    ``phi_{l+1} = 0``; ``L`` is Hermitian.
``open``
    linear extrapolation ``phi_{l+1} = 2 phi_l - phi_{l-1}``, giving last
    row ``(b_l + b_{l+1}) phi_{l-1} - 2 b_{l+1} phi_l``.
``diagonal_dissipative``
    Dirichlet cut plus a decay ``-gamma (2n + 1)`` on the diagonal of ``M``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.sparse import diags

KINDS = ("dirichlet", "open", "diagonal_dissipative")
DENSE_CEILING = 4096
EXPM_MAX_SIZE = 513


class EvolutionError(RuntimeError):
    pass


@dataclass
class OpenLiouvillian:
    """Truncated-chain Liouvillian of size ``l + 1``."""

    b: np.ndarray
    l: int
    kind: str = "open"
    gamma: float | None = None
    generator: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.generator = _generator(self.b, self.l, self.kind, self.gamma)

    @property
    def size(self) -> int:
        return self.l + 1

    @property
    def matrix(self) -> np.ndarray:
        """Complex ``(l+1) x (l+1)`` Liouvillian ``i M``."""
        return 1j * self.generator

    @property
    def b_max(self) -> float:
        return float(np.max(np.abs(self.b[: self.l + 1]))) if self.l >= 0 and len(self.b) else 0.0


def required_coefficients(l: int, kind: str) -> int:
    return l + 1 if kind == "open" else l


def _generator(b, l, kind, gamma):
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if l < 0:
        raise ValueError("truncation site l must be nonnegative")
    need = required_coefficients(l, kind)
    if len(b) < need:
        raise ValueError(f"kind={kind} at l={l} needs {need} coefficients b_1..b_{need}, got {len(b)}")
    if kind == "open" and l < 1:
        raise ValueError("open boundary needs l >= 1")
    M = np.zeros((l + 1, l + 1))
    idx = np.arange(1, l + 1)
    M[idx, idx - 1] = b[:l]
    M[idx - 1, idx] = -b[:l]
    if kind == "open":
        M[l, l - 1] = b[l - 1] + b[l]
        M[l, l] = -2.0 * b[l]
    elif kind == "diagonal_dissipative":
        if gamma is None:
            raise ValueError("diagonal_dissipative needs gamma")
        M[np.arange(l + 1), np.arange(l + 1)] -= gamma * (2 * np.arange(l + 1) + 1)
    return M


def build_liouvillian(b, l: int, kind: str = "open", gamma: float | None = None) -> OpenLiouvillian:
    """Truncated Liouvillian from Lanczos coefficients ``b = (b_1, b_2, ...)``.

    ``open`` needs ``b_1..b_{l+1}``; the other kinds need ``b_1..b_l``.
    """
    return OpenLiouvillian(np.asarray(b, dtype=float), l, kind, gamma)


def linear_coefficients(m: int, alpha: float = 1.0) -> np.ndarray:
    """``b_n = alpha n`` for ``n = 1..m``."""
    return alpha * np.arange(1, m + 1, dtype=float)


def sqrt_coefficients(m: int) -> np.ndarray:
    """``b_n = sqrt(n)`` for ``n = 1..m``."""
    return np.sqrt(np.arange(1, m + 1, dtype=float))


def dissipative_toy(gamma: float, l: int) -> OpenLiouvillian:
    """Linear chain ``b_n = sqrt(1 - gamma^2) n`` with diagonal decay ``gamma (2n+1)``."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return build_liouvillian(np.sqrt(1 - gamma**2) * np.arange(1, l + 1.0), l,
                             "diagonal_dissipative", gamma)


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


PERPETUAL, TRANSIENT, GROWING = "perpetual", "transient", "growing"


def classify(omega: complex, eps_perpetual: float) -> str:
    """``perpetual`` if ``|Im omega| <= eps``, else ``transient`` (decaying) or ``growing``."""
    im = complex(omega).imag
    if abs(im) <= eps_perpetual:
        return PERPETUAL
    return TRANSIENT if im < 0 else GROWING


@dataclass
class SpectralMode:
    omega: complex
    phi: np.ndarray
    residual: float
    cls: str = ""

    @property
    def mean_position(self) -> float:
        """Krylov-position locality ``sum_n n |phi_n|^2``."""
        p = np.abs(self.phi) ** 2
        return float(np.dot(np.arange(len(p)), p))

    @property
    def cumulative_mass(self) -> np.ndarray:
        return np.cumsum(np.abs(self.phi) ** 2)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = 0 if abs(v[0]) > 1e-8 * np.max(np.abs(v)) else int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def default_eps(omegas) -> float:
    """``1e-2`` times the median ``|Im omega|``."""
    im = np.abs(np.imag(np.asarray(omegas)))
    med = float(np.median(im)) if len(im) else 0.0
    return 1e-2 * med if med > 0 else 1e-10


def spectrum(L: OpenLiouvillian, eps_perpetual: float | None = None, balance: bool = True,
             ceiling: int = DENSE_CEILING) -> list[SpectralMode]:
    """All eigenmodes of ``L`` sorted by ``Im omega`` (descending) then ``Re omega``.

    The real generator is balanced and diagonalized with LAPACK; eigenvalues
    of ``L`` are ``i`` times those of ``M``. Each mode carries the residual
    ``||L phi - omega phi||`` relative to ``||L||_1``.
    """
    if L.size > ceiling:
        raise ValueError(f"chain of size {L.size} exceeds the dense ceiling {ceiling}")
    M = L.generator
    if balance:
        Mb, T = sla.matrix_balance(M, permute=False, separate=False)
    else:
        Mb, T = M, np.eye(L.size)
    try:
        mu, V = sla.eig(Mb)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(M, 1)
        raise np.linalg.LinAlgError(f"eigensolver failed (1-norm condition ~ {cond:.3e}): {exc}") from exc
    V = T @ V if balance else V
    omegas = 1j * mu
    eps = default_eps(omegas) if eps_perpetual is None else eps_perpetual
    Lm = L.matrix
    norm = max(np.linalg.norm(Lm, 1), 1e-300)
    modes = []
    for k in range(L.size):
        phi = _fix_phase(V[:, k])
        res = float(np.linalg.norm(Lm @ phi - omegas[k] * phi) / norm)
        modes.append(SpectralMode(complex(omegas[k]), phi, res, classify(omegas[k], eps)))
    modes.sort(key=lambda m: (-round(m.omega.imag, 9), m.omega.real))
    return modes


def eigenvalues(L: OpenLiouvillian) -> np.ndarray:
    """Eigenvalues only, in :func:`spectrum` order."""
    return np.array([m.omega for m in spectrum(L)])


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    phi: np.ndarray
    time: float


def delta_state(size: int) -> ChainState:
    phi = np.zeros(size)
    phi[0] = 1.0
    return ChainState(phi, 0.0)


def default_time_grid(L: OpenLiouvillian, t_max: float) -> np.ndarray:
    """Uniform grid with step ``0.05 / b_max``."""
    dt = 0.05 / max(L.b_max, 1e-12)
    n = int(np.ceil(t_max / dt))
    return np.linspace(0.0, t_max, n + 1)


def evolve(L: OpenLiouvillian, times, phi0: ChainState | None = None, method: str = "auto",
           rtol: float = 1e-10) -> list[ChainState]:
    """Propagate chain amplitudes to each requested time.

    ``method="expm"`` steps with dense matrix exponentials between
    consecutive times (cached per step length); ``"ode"`` uses an adaptive
    8th-order Runge-Kutta integrator at relative tolerance ``rtol``.
    ``"auto"`` picks ``expm`` up to size 513.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a nonempty 1-d sequence")
    phi0 = phi0 or delta_state(L.size)
    if len(phi0.phi) != L.size:
        raise ValueError(f"initial state has length {len(phi0.phi)}, chain has {L.size} sites")
    if method == "auto":
        method = "expm" if L.size <= EXPM_MAX_SIZE else "ode"
    t0 = phi0.time
    order = np.argsort(times, kind="stable")
    if np.any(times < t0):
        raise ValueError("times must not precede the initial state")
    M = L.generator
    out: list[ChainState | None] = [None] * len(times)
    if method == "expm":
        cache: dict[float, np.ndarray] = {}
        cur, tcur = np.asarray(phi0.phi), t0
        for k in order:
            dt = float(times[k] - tcur)
            if dt:
                U = cache.get(dt)
                if U is None:
                    U = cache.setdefault(dt, sla.expm(M * dt))
                cur = U @ cur
                tcur = float(times[k])
            out[k] = ChainState(cur.copy(), float(times[k]))
    elif method == "ode":
        Ms = diags([np.diag(M, -1), np.diag(M), np.diag(M, 1)], [-1, 0, 1], format="csr")
        if L.kind == "open":
            Ms = Ms.tolil()
            Ms[L.l, L.l - 1] = M[L.l, L.l - 1]
            Ms = Ms.tocsr()
        y0 = np.asarray(phi0.phi)
        ts = times[order]
        sol = solve_ivp(lambda t, y: Ms @ y, (t0, float(ts[-1]) if ts[-1] > t0 else t0), y0,
                        method="DOP853", t_eval=ts, rtol=rtol, atol=rtol * 1e-3)
        if sol.status != 0:
            raise EvolutionError(f"integrator failed at rtol={rtol}: {sol.message}")
        for j, k in enumerate(order):
            out[k] = ChainState(sol.y[:, j].copy(), float(ts[j]))
    else:
        raise ValueError(f"unknown method {method!r}")
    return out  # type: ignore[return-value]


def autocorrelation(states: list[ChainState], m: int = 0) -> np.ndarray:
    """Amplitude ``phi_m(t)`` for each state.

    With the Hermitian Krylov basis this is the overlap of ``O_0(t)`` with
    ``Ohat_m``; the conventional ``O_m = i^m Ohat_m`` picks up a factor ``i^m``.
    """
    if states and m >= len(states[0].phi):
        raise ValueError(f"Krylov index {m} beyond chain of size {len(states[0].phi)}")
    return np.array([s.phi[m] for s in states])


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def spectrum_csv(modes: list[SpectralMode]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re_omega", "im_omega", "class", "mean_position", "residual"])
    for m in modes:
        w.writerow([repr(m.omega.real), repr(m.omega.imag), m.cls, repr(m.mean_position), repr(m.residual)])
    return buf.getvalue()


def eigenvector_csv(modes: list[SpectralMode]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "n", "re_phi", "im_phi"])
    for k, m in enumerate(modes):
        for n, v in enumerate(m.phi):
            w.writerow([k, n, repr(v.real), repr(v.imag)])
    return buf.getvalue()


def trajectory_csv(states: list[ChainState], sites=(0,)) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "m", "amplitude"])
    for s in states:
        for m in sites:
            w.writerow([repr(s.time), m, repr(float(np.real(s.phi[m])))])
    return buf.getvalue()
