"""
Pauli-string algebra on bitmasks.

A string on ``n`` sites is a pair of integer masks ``(x, z)``; site ``j``
carries ``X`` if only bit ``j`` of ``x`` is set, ``Z`` if only bit ``j`` of
``z`` is set and ``Y`` if both are. Strings are Hermitian, i.e. the string
``(x, z)`` denotes ``i^{|x & z|} X^x Z^z``.

An :class:`OperatorMap` is a sparse real combination of strings multiplied by
an overall power of ``i`` (its *grade*). The commutator of two Hermitian
operators is ``i`` times a Hermitian operator, so tracking the grade keeps
every stored coefficient real.

Site ``j`` is bit ``j`` of the masks and character ``j`` of a label, so
``"XZ"`` is ``X`` on site 0 and ``Z`` on site 1. In dense matrices site 0 is
the leftmost Kronecker factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

MAX_SITES = 64
DENSE_MAX_SITES = 12

_U64 = np.uint64
_ONE = np.uint64(1)
_ZERO = np.uint64(0)

_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_CHAR = {v: k for k, v in _CHAR_BITS.items()}


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def _bit_length(s: np.ndarray) -> np.ndarray:
    s = s.copy()
    for k in (1, 2, 4, 8, 16, 32):
        s |= s >> _U64(k)
    return _popcount(s)


def _spans(s: np.ndarray) -> np.ndarray:
    low = s & (~s + _ONE)
    return np.where(s == 0, 0, _bit_length(s) - _popcount(low - _ONE))


def _full_mask(n_sites: int) -> np.uint64:
    if n_sites == 64:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << n_sites) - 1)


def _check_sites(n_sites: int) -> None:
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in [1, {MAX_SITES}], got {n_sites}")


# ---------------------------------------------------------------------------
# Single strings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class PauliString:
    """One tensor product of ``I, X, Y, Z`` on ``n_sites`` spins."""

    n_sites: int
    x_mask: int
    z_mask: int

    def __post_init__(self):
        _check_sites(self.n_sites)
        full = (1 << self.n_sites) - 1
        if self.x_mask < 0 or self.z_mask < 0 or (self.x_mask | self.z_mask) & ~full:
            raise ValueError("mask bits set outside the chain")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for j, ch in enumerate(label.upper()):
            try:
                bx, bz = _CHAR_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli character {ch!r} in {label!r}") from None
            x |= bx << j
            z |= bz << j
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)

    @property
    def label(self) -> str:
        return "".join(
            _BITS_CHAR[((self.x_mask >> j) & 1, (self.z_mask >> j) & 1)]
            for j in range(self.n_sites)
        )

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def weight(self) -> int:
        """Number of non-identity sites."""
        return (self.x_mask | self.z_mask).bit_count()

    @property
    def span(self) -> int:
        """Length of the contiguous window between the outermost non-identity sites."""
        s = self.x_mask | self.z_mask
        if s == 0:
            return 0
        return s.bit_length() - ((s & -s).bit_length() - 1)

    def commutes_with(self, other: "PauliString") -> bool:
        return ((self.x_mask & other.z_mask).bit_count()
                + (self.z_mask & other.x_mask).bit_count()) % 2 == 0

    def __str__(self) -> str:
        return self.label


_PHASES = (1, 1j, -1, -1j)


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product ``a @ b`` as ``(phase, string)`` with phase in ``{1, i, -1, -i}``.

    >>> multiply(PauliString.from_label("X"), PauliString.from_label("Y"))
    (1j, PauliString(n_sites=1, x_mask=0, z_mask=1))
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    cx, cz = a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask
    e = ((a.x_mask & a.z_mask).bit_count() + (b.x_mask & b.z_mask).bit_count()
         - (cx & cz).bit_count() + 2 * (a.z_mask & b.x_mask).bit_count())
    return _PHASES[e % 4], PauliString(a.n_sites, cx, cz)


def _product_exponent(ax, az, bx, bz):
    """Power of ``i`` in the product of Hermitian strings (vectorized)."""
    cx, cz = ax ^ bx, az ^ bz
    e = (_popcount(ax & az) + _popcount(bx & bz) - _popcount(cx & cz)
         + 2 * _popcount(az & bx))
    return cx, cz, e % 4


# ---------------------------------------------------------------------------
# Truncation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationPolicy:
    """How operator sums are pruned after each algebraic step.

    The default instance is lossless.
    """

    coeff_threshold: float = 0.0
    max_strings: int | None = None
    max_weight: int | None = None

    def __post_init__(self):
        if self.coeff_threshold < 0:
            raise ValueError("coeff_threshold must be nonnegative")
        if self.max_strings is not None and self.max_strings < 1:
            raise ValueError("max_strings must be positive")
        if self.max_weight is not None and self.max_weight < 0:
            raise ValueError("max_weight must be nonnegative")

    @property
    def is_exact(self) -> bool:
        return self.coeff_threshold == 0 and self.max_strings is None and self.max_weight is None

    def as_dict(self) -> dict:
        return {
            "coeff_threshold": self.coeff_threshold,
            "max_strings": self.max_strings,
            "max_weight": self.max_weight,
        }


EXACT = TruncationPolicy()


# ---------------------------------------------------------------------------
# Sparse operator sums
# ---------------------------------------------------------------------------


def _aggregate(xs, zs, cs):
    """Sum duplicate strings; return arrays sorted by ``(x, z)`` without exact zeros."""
    if len(cs) == 0:
        return xs[:0], zs[:0], cs[:0]
    order = np.lexsort((zs, xs))
    xs, zs, cs = xs[order], zs[order], cs[order]
    new = np.empty(len(xs), dtype=bool)
    new[0] = True
    np.not_equal(xs[1:], xs[:-1], out=new[1:])
    new[1:] |= zs[1:] != zs[:-1]
    starts = np.flatnonzero(new)
    cs = np.add.reduceat(cs, starts)
    xs, zs = xs[starts], zs[starts]
    keep = cs != 0.0
    return xs[keep], zs[keep], cs[keep]


class OperatorMap:
    """Sparse operator ``i^grade * sum_s c_s s`` with real ``c_s``.

    Terms are stored as three parallel arrays sorted lexicographically by
    ``(x_mask, z_mask)``; instances are immutable.

    Parameters
    ----------
    n_sites : int
        Number of spins, at most 64.
    xs, zs : array_like of uint64
        Masks of the strings. Duplicates are summed.
    coeffs : array_like of float
        Real coefficients.
    grade : int
        Power of ``i`` multiplying the whole sum, taken mod 4.
    """

    __slots__ = ("n_sites", "xs", "zs", "coeffs", "grade")

    def __init__(self, n_sites: int, xs=(), zs=(), coeffs=(), grade: int = 0, *, _canonical=False):
        _check_sites(n_sites)
        xs = np.asarray(xs, dtype=_U64)
        zs = np.asarray(zs, dtype=_U64)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if not (xs.shape == zs.shape == coeffs.shape) or xs.ndim != 1:
            raise ValueError("xs, zs and coeffs must be 1-d arrays of equal length")
        if not _canonical:
            full = _full_mask(n_sites)
            if np.any((xs | zs) & ~full):
                raise ValueError("mask bits set outside the chain")
            xs, zs, coeffs = _aggregate(xs, zs, coeffs)
        for a in (xs, zs, coeffs):
            a.flags.writeable = False
        self.n_sites = n_sites
        self.xs, self.zs, self.coeffs = xs, zs, coeffs
        self.grade = grade % 4

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls, n_sites: int, grade: int = 0) -> "OperatorMap":
        return cls(n_sites, grade=grade)

    @classmethod
    def from_terms(cls, terms: Mapping[PauliString | str, float] | Iterable, n_sites: int | None = None,
                   grade: int = 0) -> "OperatorMap":
        """Build from ``{string_or_label: coeff}`` or an iterable of pairs."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        xs, zs, cs = [], [], []
        for key, c in items:
            p = PauliString.from_label(key) if isinstance(key, str) else key
            if n_sites is None:
                n_sites = p.n_sites
            elif p.n_sites != n_sites:
                raise ValueError("all strings must share n_sites")
            xs.append(p.x_mask)
            zs.append(p.z_mask)
            cs.append(float(c))
        if n_sites is None:
            raise ValueError("n_sites needed for an empty operator")
        return cls(n_sites, xs, zs, cs, grade)

    @classmethod
    def single(cls, label: str, coeff: float = 1.0) -> "OperatorMap":
        return cls.from_terms({label: coeff})

    # -- views ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def terms(self) -> dict[PauliString, float]:
        return {
            PauliString(self.n_sites, int(x), int(z)): float(c)
            for x, z, c in zip(self.xs, self.zs, self.coeffs)
        }

    def coeff(self, key: PauliString | str) -> float:
        p = PauliString.from_label(key) if isinstance(key, str) else key
        hit = np.flatnonzero((self.xs == _U64(p.x_mask)) & (self.zs == _U64(p.z_mask)))
        return float(self.coeffs[hit[0]]) if len(hit) else 0.0

    @property
    def supports(self) -> np.ndarray:
        return self.xs | self.zs

    def weights(self) -> np.ndarray:
        return _popcount(self.supports)

    def spans(self) -> np.ndarray:
        """Contiguous span of each string (no ring wrap-around)."""
        return _spans(self.supports)

    def max_span(self) -> int:
        return int(self.spans().max()) if len(self) else 0

    def with_grade(self, grade: int) -> "OperatorMap":
        return OperatorMap(self.n_sites, self.xs, self.zs, self.coeffs, grade, _canonical=True)

    # -- arithmetic -------------------------------------------------------

    def __mul__(self, k: float) -> "OperatorMap":
        return OperatorMap(self.n_sites, self.xs, self.zs, self.coeffs * float(k), self.grade,
                           _canonical=k != 0)

    __rmul__ = __mul__

    def __truediv__(self, k: float) -> "OperatorMap":
        return self * (1.0 / k)

    def __neg__(self) -> "OperatorMap":
        return self * -1.0

    def _aligned(self, other: "OperatorMap") -> np.ndarray:
        if self.n_sites != other.n_sites:
            raise ValueError(f"site count mismatch: {self.n_sites} vs {other.n_sites}")
        d = (other.grade - self.grade) % 4
        if len(other) == 0 or len(self) == 0:
            return other.coeffs if d != 2 else -other.coeffs
        if d == 0:
            return other.coeffs
        if d == 2:
            return -other.coeffs
        raise ValueError(f"cannot add grades {self.grade} and {other.grade} with real coefficients")

    def __add__(self, other: "OperatorMap") -> "OperatorMap":
        oc = self._aligned(other)
        grade = self.grade if len(self) else other.grade
        if not len(self):
            return other
        return OperatorMap(self.n_sites, np.concatenate([self.xs, other.xs]),
                           np.concatenate([self.zs, other.zs]),
                           np.concatenate([self.coeffs, oc]), grade)

    def __sub__(self, other: "OperatorMap") -> "OperatorMap":
        return self + (-other)

    def norm(self) -> float:
        """Normalized Frobenius norm ``sqrt(Tr(A^dag A) / 2^N)``."""
        return float(np.sqrt(np.dot(self.coeffs, self.coeffs)))

    def prune(self, policy: TruncationPolicy = EXACT) -> "OperatorMap":
        if policy.is_exact:
            return self
        keep = np.abs(self.coeffs) >= policy.coeff_threshold
        if policy.max_weight is not None:
            keep &= self.weights() <= policy.max_weight
        xs, zs, cs = self.xs[keep], self.zs[keep], self.coeffs[keep]
        if policy.max_strings is not None and len(cs) > policy.max_strings:
            # largest |c| first; ties by mask order for reproducibility
            order = np.lexsort((zs, xs, -np.abs(cs)))[: policy.max_strings]
            order.sort()
            xs, zs, cs = xs[order], zs[order], cs[order]
        return OperatorMap(self.n_sites, xs, zs, cs, self.grade, _canonical=True)

    def allclose(self, other: "OperatorMap", atol: float = 1e-12) -> bool:
        diff = self - other if len(other) else self
        return len(diff) == 0 or float(np.max(np.abs(diff.coeffs))) <= atol

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorMap):
            return NotImplemented
        return (self.n_sites == other.n_sites and self.grade == other.grade
                and np.array_equal(self.xs, other.xs) and np.array_equal(self.zs, other.zs)
                and np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None

    def __repr__(self) -> str:
        head = ", ".join(
            f"{c:+.6g} {PauliString(self.n_sites, int(x), int(z)).label}"
            for x, z, c in zip(self.xs[:4], self.zs[:4], self.coeffs[:4])
        )
        more = ", ..." if len(self) > 4 else ""
        return f"OperatorMap(n_sites={self.n_sites}, grade={self.grade}, [{head}{more}])"


# ---------------------------------------------------------------------------
# Bilinear operations
# ---------------------------------------------------------------------------


def _real_commutator_arrays(ax, az, ac, bx, bz, bc):
    """Terms of ``-i [A, B]`` for Hermitian real sums, looping over the shorter side."""
    if len(ac) > len(bc):
        xs, zs, cs = _real_commutator_arrays(bx, bz, bc, ax, az, ac)
        return xs, zs, -cs
    out_x, out_z, out_c = [], [], []
    for x1, z1, c1 in zip(ax, az, ac):
        anti = (_popcount(x1 & bz) + _popcount(z1 & bx)) & 1
        sel = anti.astype(bool)
        if not sel.any():
            continue
        cx, cz, e = _product_exponent(x1, z1, bx[sel], bz[sel])
        # [P, Q] = 2 i^e R with e odd, so -i[P, Q] = 2 (+1 if e == 1 else -1) R
        sign = np.where(e == 1, 2.0, -2.0)
        out_x.append(cx)
        out_z.append(cz)
        out_c.append(sign * c1 * bc[sel])
    if not out_c:
        return ax[:0], az[:0], ac[:0]
    return np.concatenate(out_x), np.concatenate(out_z), np.concatenate(out_c)


def commutator(a: OperatorMap, b: OperatorMap, policy: TruncationPolicy = EXACT) -> OperatorMap:
    """``[A, B]`` with the factor ``i`` carried in the grade.

    Only anticommuting string pairs contribute. The result has grade
    ``a.grade + b.grade + 1``.
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    xs, zs, cs = _real_commutator_arrays(a.xs, a.zs, a.coeffs, b.xs, b.zs, b.coeffs)
    out = OperatorMap(a.n_sites, xs, zs, cs, a.grade + b.grade + 1)
    return out.prune(policy)


def product(a: OperatorMap, b: OperatorMap) -> tuple[OperatorMap, OperatorMap]:
    """Operator product ``A B`` split as ``(R, S)`` with ``A B = i^g (R + i S)``.

    ``g = a.grade + b.grade``; ``R`` is returned with grade ``g`` and ``S``
    with grade ``g + 1`` so that ``R + S`` is the product.
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    rx, rz, rc, sx, sz, sc = [], [], [], [], [], []
    for x1, z1, c1 in zip(a.xs, a.zs, a.coeffs):
        cx, cz, e = _product_exponent(x1, z1, b.xs, b.zs)
        val = c1 * b.coeffs
        even = (e % 2) == 0
        rx.append(cx[even]); rz.append(cz[even]); rc.append(np.where(e[even] == 0, val[even], -val[even]))
        sx.append(cx[~even]); sz.append(cz[~even]); sc.append(np.where(e[~even] == 1, val[~even], -val[~even]))
    g = a.grade + b.grade
    cat = lambda parts, dt: np.concatenate(parts) if parts else np.zeros(0, dt)  # noqa: E731
    real = OperatorMap(a.n_sites, cat(rx, _U64), cat(rz, _U64), cat(rc, float), g)
    imag = OperatorMap(a.n_sites, cat(sx, _U64), cat(sz, _U64), cat(sc, float), g + 1)
    return real, imag


def _overlap(a: OperatorMap, b: OperatorMap) -> float:
    if len(a) == 0 or len(b) == 0:
        return 0.0
    # merge both term lists; a shared string shows up as two adjacent equal keys
    xs = np.concatenate([a.xs, b.xs])
    zs = np.concatenate([a.zs, b.zs])
    cs = np.concatenate([a.coeffs, b.coeffs])
    order = np.lexsort((zs, xs))
    xs, zs, cs = xs[order], zs[order], cs[order]
    same = (xs[1:] == xs[:-1]) & (zs[1:] == zs[:-1])
    return float(np.dot(cs[:-1][same], cs[1:][same]))


def inner_product(a: OperatorMap, b: OperatorMap) -> float:
    """``Tr(A^dag B) / 2^N`` for operators of equal grade (or grades differing by 2).

    Pauli strings are orthonormal under the normalized trace, so this is the
    dot product of shared coefficients. For grades differing by one the
    true overlap is purely imaginary and a ``ValueError`` is raised.
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    d = (b.grade - a.grade) % 4
    if d % 2 and len(a) and len(b):
        raise ValueError("overlap of operators with odd relative grade is imaginary")
    return (-1.0 if d == 2 else 1.0) * _overlap(a, b)


def linear_combination(ops: list[OperatorMap], weights) -> OperatorMap:
    """``sum_k w_k ops[k]`` for operators of one grade, aggregated in a single pass."""
    pairs = [(op, float(w)) for op, w in zip(ops, weights) if w != 0.0 and len(op)]
    if not ops:
        raise ValueError("empty linear combination")
    if any(op.grade != ops[0].grade or op.n_sites != ops[0].n_sites for op in ops):
        raise ValueError("linear_combination needs operators of one grade and size")
    if not pairs:
        return OperatorMap.zero(ops[0].n_sites, ops[0].grade)
    return OperatorMap(ops[0].n_sites, np.concatenate([op.xs for op, _ in pairs]),
                       np.concatenate([op.zs for op, _ in pairs]),
                       np.concatenate([op.coeffs * w for op, w in pairs]), ops[0].grade)


# ---------------------------------------------------------------------------
# Dense oracle
# ---------------------------------------------------------------------------


def string_matrix(p: PauliString, as_sparse: bool = False):
    """Matrix of one Hermitian string. Site 0 is the most significant bit."""
    n = p.n_sites
    if n > DENSE_MAX_SITES:
        raise ValueError(f"dense construction refused for {n} > {DENSE_MAX_SITES} sites")
    m = _string_matrices(n, np.array([p.x_mask], dtype=_U64), np.array([p.z_mask], dtype=_U64),
                         np.array([1.0]), as_sparse)
    return m


def _string_matrices(n, xs, zs, cs, as_sparse):
    dim = 1 << n
    # reverse bit order: mask bit j -> row bit (n-1-j)
    v = np.arange(dim, dtype=np.int64)
    rev = np.zeros(dim, dtype=np.int64)
    for j in range(n):
        rev |= ((v >> j) & 1) << (n - 1 - j)
    rows = np.arange(dim, dtype=np.int64)
    data, ri, ci = [], [], []
    for x, z, c in zip(xs, zs, cs):
        xr, zr = int(rev[int(x)]), int(rev[int(z)])
        ny = (int(x) & int(z)).bit_count()
        # <r| X^x Z^z |r ^ x> ... acting: (X^x Z^z)|s> = (-1)^{|z & s|} |s ^ x>
        cols = rows ^ xr
        sign = 1.0 - 2.0 * (np.bitwise_count(cols & zr) & 1)
        data.append(c * (1j ** ny) * sign)
        ri.append(rows)
        ci.append(cols)
    if not data:
        mat = sparse.csr_matrix((dim, dim), dtype=complex)
    else:
        mat = sparse.coo_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(dim, dim)
        ).tocsr()
    return mat if as_sparse else mat.toarray()


def to_dense(a: OperatorMap, as_sparse: bool = False):
    """Matrix of ``a`` (including its grade) on the ``2^N`` Hilbert space.

    Refuses above 12 sites. ``as_sparse=True`` returns a CSR matrix instead,
    which is the practical choice at the upper end of the range.
    """
    if a.n_sites > DENSE_MAX_SITES:
        raise ValueError(
            f"dense construction refused: {a.n_sites} sites exceeds the {DENSE_MAX_SITES}-site guard"
        )
    m = _string_matrices(a.n_sites, a.xs, a.zs, a.coeffs, as_sparse)
    return m * (1j ** a.grade)


# ---------------------------------------------------------------------------
# Translation invariance
# ---------------------------------------------------------------------------


def _rotate(v: np.ndarray, r: int, n: int) -> np.ndarray:
    if r % n == 0:
        return v
    r %= n
    full = _full_mask(n)
    return ((v << _U64(r)) | (v >> _U64(n - r))) & full


def canonical_shift(xs: np.ndarray, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift strings so their lowest non-identity site is site 0."""
    s = xs | zs
    low = s & (~s + _ONE)
    tz = np.where(s == 0, 0, _popcount(low - _ONE)).astype(_U64)
    return xs >> tz, zs >> tz


def translation_reduce(a: OperatorMap) -> OperatorMap:
    """One representative per ring-translation orbit of a translation-invariant operator.

    Representatives start at site 0 and are chosen as the rotation with the
    smallest span. The coefficient of a representative is the (common)
    coefficient of the orbit members, so the per-site norm of ``a`` is the
    norm of the result.
    """
    n = a.n_sites
    best_x, best_z = a.xs.copy(), a.zs.copy()
    if len(a):
        best_span = _spans(best_x | best_z)
        for r in range(1, n):
            rx, rz = _rotate(a.xs, r, n), _rotate(a.zs, r, n)
            sp = _spans(rx | rz)
            better = sp < best_span
            best_x[better], best_z[better], best_span[better] = rx[better], rz[better], sp[better]
    cx, cz = canonical_shift(best_x, best_z)
    order = np.lexsort((cz, cx))
    cx, cz, cc = cx[order], cz[order], a.coeffs[order]
    if len(cc):
        new = np.ones(len(cc), dtype=bool)
        new[1:] = (cx[1:] != cx[:-1]) | (cz[1:] != cz[:-1])
        starts = np.flatnonzero(new)
        counts = np.diff(np.append(starts, len(cc)))
        sums = np.add.reduceat(cc, starts)
        cx, cz = cx[starts], cz[starts]
        # identity has a single-member orbit; everything else has n members
        orbit = np.where((cx | cz) == 0, 1, n)
        if np.any(counts != orbit) and not np.allclose(sums / counts, cc[starts]):
            raise ValueError("operator is not translation invariant")
        cc = sums / counts
    return OperatorMap(n, cx, cz, cc, a.grade)


def translation_expand(reps: OperatorMap, n_sites: int | None = None) -> OperatorMap:
    """Inverse of :func:`translation_reduce`: sum every representative over all ring translations."""
    n = n_sites or reps.n_sites
    if reps.max_span() > n:
        raise ValueError(f"representative span {reps.max_span()} exceeds ring of {n} sites")
    xs, zs, cs = [], [], []
    ident = (reps.xs | reps.zs) == 0
    for r in range(n):
        xs.append(_rotate(reps.xs[~ident], r, n))
        zs.append(_rotate(reps.zs[~ident], r, n))
        cs.append(reps.coeffs[~ident])
    xs.append(reps.xs[ident]); zs.append(reps.zs[ident]); cs.append(reps.coeffs[ident])
    return OperatorMap(n, np.concatenate(xs), np.concatenate(zs), np.concatenate(cs), reps.grade)


def translate(a: OperatorMap, shift: int) -> OperatorMap:
    """Rotate every string by ``shift`` sites around the ring."""
    n = a.n_sites
    return OperatorMap(n, _rotate(a.xs, shift, n), _rotate(a.zs, shift, n), a.coeffs, a.grade)


def ti_commutator(density: OperatorMap, reps: OperatorMap, policy: TruncationPolicy = EXACT,
                  max_span: int | None = None) -> OperatorMap:
    """Commutator of translation-invariant sums given by their representatives.

    ``density`` holds one representative per Hamiltonian term class (e.g. the
    strings ``XX``, ``Z`` starting at site 0); ``reps`` holds canonical
    representatives of the operator. The result is the representative set of
    ``[sum_i T_i h, sum_j T_j o]`` per site, with grade bookkeeping as in
    :func:`commutator`. This is exact for the infinite chain as long as the
    spans fit in ``max_span`` (default ``reps.n_sites``).
    """
    n = reps.n_sites
    if density.n_sites != n:
        raise ValueError(f"site count mismatch: {density.n_sites} vs {n}")
    limit = n if max_span is None else max_span
    if len(reps) == 0 or len(density) == 0:
        return OperatorMap(n, grade=density.grade + reps.grade + 1)
    h_span = density.spans()
    pad = int(h_span.max()) - 1
    w = reps.max_span()
    if w + 2 * pad > MAX_SITES:
        raise ValueError(f"operator span {w} too large for 64-bit masks")
    ox, oz, oc = reps.xs << _U64(pad), reps.zs << _U64(pad), reps.coeffs
    out_x, out_z, out_c = [], [], []
    for hx, hz, hc, r in zip(density.xs, density.zs, density.coeffs, h_span):
        for off in range(pad + 1 - int(r), pad + w):
            sx, sz = hx << _U64(off), hz << _U64(off)
            anti = ((_popcount(sx & oz) + _popcount(sz & ox)) & 1).astype(bool)
            if not anti.any():
                continue
            cx, cz, e = _product_exponent(sx, sz, ox[anti], oz[anti])
            out_x.append(cx)
            out_z.append(cz)
            out_c.append(np.where(e == 1, 2.0, -2.0) * hc * oc[anti])
    if not out_c:
        return OperatorMap(n, grade=density.grade + reps.grade + 1)
    xs, zs = canonical_shift(np.concatenate(out_x), np.concatenate(out_z))
    cs = np.concatenate(out_c)
    res = OperatorMap(MAX_SITES, xs, zs, cs)
    if res.max_span() > limit:
        raise ValueError(
            f"string span {res.max_span()} exceeds {limit} sites; the ring would wrap "
            "(use more sites or a max_weight truncation)"
        )
    return OperatorMap(n, res.xs, res.zs, res.coeffs, density.grade + reps.grade + 1,
                       _canonical=True).prune(policy)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dumps(a: OperatorMap) -> str:
    """Text form: header lines then one ``coeff label`` line per term.

    Coefficients are written with ``repr`` so reading back is lossless.
    """
    lines = [f"# n_sites {a.n_sites}", f"# grade {a.grade}"]
    for x, z, c in zip(a.xs, a.zs, a.coeffs):
        lines.append(f"{float(c)!r} {PauliString(a.n_sites, int(x), int(z)).label}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> OperatorMap:
    n_sites = None
    grade = 0
    xs, zs, cs = [], [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "n_sites":
                n_sites = int(parts[1])
            elif len(parts) == 2 and parts[0] == "grade":
                grade = int(parts[1])
            continue
        c, label = line.split()
        p = PauliString.from_label(label)
        if n_sites is not None and p.n_sites != n_sites:
            raise ValueError(f"term {label!r} does not have {n_sites} sites")
        xs.append(p.x_mask)
        zs.append(p.z_mask)
        cs.append(float(c))
    if n_sites is None:
        raise ValueError("missing '# n_sites' header")
    return OperatorMap(n_sites, xs, zs, cs, grade)


def save(a: OperatorMap, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(a))


def load(path) -> OperatorMap:
    with open(path) as fh:
        return loads(fh.read())
