"""
Spin-chain Hamiltonians and seed operators on a periodic ring.

Spin operators are taken as full Pauli matrices (``s^a = sigma^a``) and
``s^+ = (X + iY) / 2``; seeds are rescaled to unit norm per site anyway.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .pauli import OperatorMap, translation_expand

CHAOTIC_ZFIELD = -1.05
CHAOTIC_XFIELD = 0.5
CHAOTIC_SEED_XX = 1.05


def _local(n_sites: int, pattern: dict[int, str]) -> str:
    label = ["I"] * n_sites
    for site, ch in pattern.items():
        label[site % n_sites] = ch
    return "".join(label)


def translation_sum(density: dict[str, float], n_sites: int) -> OperatorMap:
    """``sum_i T_i`` of local strings given by short labels anchored at site 0.

    >>> translation_sum({"XX": 1.0}, 4).terms  # doctest: +SKIP
    """
    terms = {}
    for short, c in density.items():
        if len(short) > n_sites:
            raise ValueError(f"term {short!r} longer than the ring")
        terms[short + "I" * (n_sites - len(short))] = c
    reps = OperatorMap.from_terms(terms, n_sites)
    return translation_expand(reps, n_sites)


def build_xxz(delta: float, h: float, n_sites: int) -> OperatorMap:
    """``sum_i X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1} + h Z_i`` on a ring."""
    if n_sites < 3:
        raise ValueError("XXZ ring needs at least 3 sites")
    density = {"XX": 1.0, "YY": 1.0, "ZZ": float(delta), "Z": float(h)}
    return translation_sum({k: v for k, v in density.items() if v != 0.0}, n_sites)


def build_chaotic(n_sites: int) -> OperatorMap:
    """Tilted-field Ising ring ``sum_i X_i X_{i+1} - 1.05 Z_i + 0.5 X_i``."""
    if n_sites < 2:
        raise ValueError("ring needs at least 2 sites")
    return translation_sum({"XX": 1.0, "Z": CHAOTIC_ZFIELD, "X": CHAOTIC_XFIELD}, n_sites)


def raising_product(k: int) -> dict[str, float]:
    """Pauli expansion of ``(s^+)^{(x)k} + h.c.`` on ``k`` consecutive sites.

    ``(X + iY)^{(x)k} / 2^k`` plus its conjugate keeps only strings with an
    even number of ``Y``; each gets ``2 (-1)^{#Y / 2} / 2^k``.
    """
    out = {}
    for ys in itertools.product((False, True), repeat=k):
        ny = sum(ys)
        if ny % 2:
            continue
        label = "".join("Y" if y else "X" for y in ys)
        out[label] = 2.0 * (-1) ** (ny // 2) / 2**k
    return out


def raising_quadrature(k: int) -> dict[str, float]:
    """Pauli expansion of ``-i[(s^+)^{(x)k} - h.c.]``: the odd-``#Y`` strings.

    Together with :func:`raising_product` it gives
    ``(s^+)^{(x)k} = (P + i Q) / 2``.
    """
    out = {}
    for ys in itertools.product((False, True), repeat=k):
        ny = sum(ys)
        if ny % 2 == 0:
            continue
        label = "".join("Y" if y else "X" for y in ys)
        out[label] = 2.0 * (-1) ** ((ny - 1) // 2) / 2**k
    return out


SEEDS = ("Q1", "Q3", "Q5", "chaotic_O0")


def seed_density(name: str) -> dict[str, float]:
    """Unnormalized local density of a named seed."""
    if name == "Q1":
        return raising_product(1)
    if name == "Q3":
        return raising_product(3)
    if name == "Q5":
        # not defined in the source; extended from the Q1/Q3 pattern
        return raising_product(5)
    if name == "chaotic_O0":
        return {"XX": CHAOTIC_SEED_XX, "Z": 1.0}
    raise ValueError(f"unknown seed {name!r}; choose from {', '.join(SEEDS)}")


def build_seed(name: str, n_sites: int, normalize: bool = True) -> OperatorMap:
    """Seed operator summed over the ring, with unit norm per site by default."""
    density = seed_density(name)
    span = max(len(k) for k in density)
    if n_sites < span:
        raise ValueError(f"seed {name} needs at least {span} sites")
    op = translation_sum(density, n_sites)
    if normalize:
        op = op / (op.norm() / n_sites**0.5)
    return op


@dataclass
class ModelSpec:
    """Parameters of one of the supported models."""

    family: str
    n_sites: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in ("xxz", "chaotic_ising"):
            raise ValueError(f"unknown model family {self.family!r}")
        for k, v in self.params.items():
            if not isinstance(v, (int, float)) or v != v or v in (float("inf"), float("-inf")):
                raise ValueError(f"parameter {k} must be a finite number")

    def build(self) -> OperatorMap:
        if self.family == "xxz":
            return build_xxz(self.params.get("delta", -0.5), self.params.get("h", 2.0), self.n_sites)
        return build_chaotic(self.n_sites)

    @property
    def label(self) -> str:
        if self.family == "xxz":
            return f"xxz(delta={self.params.get('delta', -0.5)},h={self.params.get('h', 2.0)})"
        return "chaotic_ising"
