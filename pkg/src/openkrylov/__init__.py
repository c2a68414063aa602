"""Krylov-chain dynamics of spin-chain operators with an absorbing (open) boundary."""

from .lanczos import KrylovChain, RingGeometry, SeedConservedError, fit_growth_rate, lanczos_run
from .models import ModelSpec, build_chaotic, build_seed, build_xxz
from .open_chain import OpenLiouvillian, SpectralMode, build_liouvillian, evolve, spectrum
from .pauli import EXACT, OperatorMap, PauliString, TruncationPolicy, commutator, inner_product
from .quench import iterative_refine, plus_state_weight, quench_trajectory, reconstruct_mode_operator

__version__ = "0.1.0"

__all__ = [
    "EXACT",
    "KrylovChain",
    "ModelSpec",
    "OpenLiouvillian",
    "OperatorMap",
    "PauliString",
    "RingGeometry",
    "SeedConservedError",
    "SpectralMode",
    "TruncationPolicy",
    "build_chaotic",
    "build_liouvillian",
    "build_seed",
    "build_xxz",
    "commutator",
    "evolve",
    "fit_growth_rate",
    "inner_product",
    "iterative_refine",
    "lanczos_run",
    "plus_state_weight",
    "quench_trajectory",
    "reconstruct_mode_operator",
    "spectrum",
]
