"""
Exact and semiclassical entanglement dynamics of two spins coupled through
``H = lam hbar Jz_A Jz_B``.

Submodules
----------
numerics  : small complex linear algebra, branch-continuous square roots
quantum   : exact reference (partial trace and closed form)
classical : complex classical flow, stability matrices, action pieces
saddle    : roots of the transcendental equation and trajectory sets
entropy   : per-set contributions and the semiclassical linear entropy
cli       : command-line front end
"""

from .classical import critical_tau, stability
from .entropy import FilterPolicy, contribution, purity_q_matrix, semiclassical_entropy
from .quantum import DEFAULT_PARAMS, QuantumParams, exact_entropy, exact_entropy_series
from .saddle import GridSpec, RootRegistry, assemble_set, scan_roots
from .series import EntropySeries

__all__ = [
    "DEFAULT_PARAMS",
    "QuantumParams",
    "EntropySeries",
    "FilterPolicy",
    "GridSpec",
    "RootRegistry",
    "assemble_set",
    "contribution",
    "critical_tau",
    "exact_entropy",
    "exact_entropy_series",
    "purity_q_matrix",
    "scan_roots",
    "semiclassical_entropy",
    "stability",
]

__version__ = "0.1.0"
