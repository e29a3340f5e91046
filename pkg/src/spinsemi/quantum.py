"""
Exact quantum reference for two spins under the phase-coupling Hamiltonian
``H = lam * hbar * Jz_A (x) Jz_B``, started in a product of spin coherent states.

Basis convention: index ``n = 0 .. 2j`` counts raising steps above ``|-j>``,
so the Jz eigenvalue is ``m = n - j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError
from .series import EntropySeries

__all__ = [
    "ConventionError",
    "CoherentLabel",
    "TwoSpinState",
    "QuantumParams",
    "DEFAULT_PARAMS",
    "binomial_weights",
    "coherent_amplitudes",
    "overlap",
    "spin_operators",
    "mean_spin",
    "product_state",
    "evolve_phase_coupling",
    "reduced_purity",
    "population_weights",
    "closed_form_purity",
    "exact_entropy",
    "exact_entropy_series",
]


class ConventionError(RuntimeError):
    """Closed-form entropy and partial-trace entropy disagree."""


def _check_spin(j: float) -> int:
    two_j = 2 * j
    if j <= 0 or abs(two_j - round(two_j)) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer, got {j}")
    return int(round(two_j))


@dataclass(frozen=True)
class CoherentLabel:
    s: complex
    j: float

    def __post_init__(self):
        _check_spin(self.j)

    @property
    def dim(self) -> int:
        return _check_spin(self.j) + 1


@dataclass(frozen=True)
class QuantumParams:
    """Spin size, initial coherent labels, coupling (1/time) and hbar."""

    j: float
    s0A: complex
    s0B: complex
    lam: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        _check_spin(self.j)
        if self.lam == 0:
            raise ValueError("coupling lam must be non-zero")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def dim(self) -> int:
        return _check_spin(self.j) + 1

    @property
    def period(self) -> float:
        """Revival period 2 pi / lam."""
        return 2 * math.pi / self.lam

    def time(self, tau):
        """Physical time for dimensionless time ``tau`` (real or complex)."""
        return tau * self.period

    @property
    def qA(self) -> float:
        return abs(self.s0A) ** 2

    @property
    def qB(self) -> float:
        return abs(self.s0B) ** 2


DEFAULT_PARAMS = QuantumParams(j=4.5, s0A=1.0 + 0j, s0B=1.0 + 0j, lam=1.0)


@dataclass
class TwoSpinState:
    """Amplitudes psi[n_A, n_B] of a pure two-spin state."""

    amplitudes: np.ndarray
    j: float

    def __post_init__(self):
        d = _check_spin(self.j) + 1
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (d, d):
            raise DimensionError(f"expected a ({d}, {d}) amplitude array, got {self.amplitudes.shape}")

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


def binomial_weights(two_j: int) -> np.ndarray:
    """C(2j, n) for n = 0..2j; exact integers below 2j = 30, log-gamma above."""
    n = np.arange(two_j + 1)
    if two_j < 30:
        return np.array([math.comb(two_j, k) for k in n], dtype=float)
    logs = np.array([math.lgamma(two_j + 1) - math.lgamma(k + 1) - math.lgamma(two_j - k + 1) for k in n])
    return np.exp(logs)


def coherent_amplitudes(label: CoherentLabel) -> np.ndarray:
    """a_n = sqrt(C(2j, n)) s^n / (1 + |s|^2)^j, n = 0..2j."""
    two_j = _check_spin(label.j)
    s = complex(label.s)
    n = np.arange(two_j + 1)
    if two_j < 30:
        a = np.sqrt(binomial_weights(two_j)) * s ** n / (1 + abs(s) ** 2) ** label.j
        return a.astype(complex)
    # log-space keeps large-j amplitudes finite
    logb = 0.5 * np.log(binomial_weights(two_j))
    if s == 0:
        a = np.zeros(two_j + 1, dtype=complex)
        a[0] = 1.0
        return a
    log_a = logb + n * np.log(s) - label.j * np.log1p(abs(s) ** 2)
    return np.exp(log_a)


def overlap(a: CoherentLabel, b: CoherentLabel) -> complex:
    """<a|b> = (1 + a.s* b.s)^{2j} / [(1 + |b.s|^2)^j (1 + |a.s|^2)^j]."""
    if a.j != b.j:
        raise DimensionError(f"overlap between spins j={a.j} and j={b.j}")
    sa, sb = complex(a.s), complex(b.s)
    two_j = _check_spin(a.j)
    return (1 + sa.conjugate() * sb) ** two_j / ((1 + abs(sb) ** 2) ** a.j * (1 + abs(sa) ** 2) ** a.j)


def spin_operators(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Jx, Jy, Jz) in the raising-count basis."""
    two_j = _check_spin(j)
    m = np.arange(two_j + 1) - j
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1))
    jp = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), k=-1).astype(complex)
    jm = jp.conj().T
    return (jp + jm) / 2, (jp - jm) / 2j, jz


def mean_spin(label: CoherentLabel) -> np.ndarray:
    a = coherent_amplitudes(label)
    return np.array([np.vdot(a, op @ a).real for op in spin_operators(label.j)])


def product_state(params: QuantumParams) -> TwoSpinState:
    a = coherent_amplitudes(CoherentLabel(params.s0A, params.j))
    b = coherent_amplitudes(CoherentLabel(params.s0B, params.j))
    return TwoSpinState(np.outer(a, b), params.j)


def evolve_phase_coupling(state: TwoSpinState, params: QuantumParams, T: float) -> TwoSpinState:
    """Multiply psi[n_A, n_B] by exp(-i lam T m_A m_B)."""
    if state.j != params.j:
        raise DimensionError(f"state has j={state.j}, params have j={params.j}")
    m = np.arange(params.dim) - params.j
    phase = np.exp(-1j * params.lam * T * np.outer(m, m))
    return TwoSpinState(state.amplitudes * phase, state.j)


def reduced_purity(state: TwoSpinState, keep: str = "A") -> float:
    """
    Tr[rho_A^2] with rho_A = Tr_B |psi><psi| (``keep="B"`` traces out A instead).

    Raises ValueError if the state norm is off by more than 1e-8.
    """
    psi = state.amplitudes
    if abs(state.norm - 1) > 1e-8:
        raise ValueError(f"state is not normalised (norm {state.norm:.12g})")
    if keep == "B":
        psi = psi.T
    elif keep != "A":
        raise ValueError("keep must be 'A' or 'B'")
    rho = psi @ psi.conj().T
    purity = np.trace(rho @ rho)
    return float(purity.real)


def population_weights(s: complex, j: float) -> np.ndarray:
    """c_n = C(2j, n) |s|^{2n} / (1 + |s|^2)^{2j}: Jz populations of a coherent state."""
    two_j = _check_spin(j)
    q = abs(s) ** 2
    n = np.arange(two_j + 1)
    return binomial_weights(two_j) * q ** n / (1 + q) ** two_j


def closed_form_purity(params: QuantumParams, T) -> complex:
    """
    Four-index sum  sum c_nA c_mA c_nB c_mB exp(-i lam T (n_A - m_A)(n_B - m_B)).

    Returned as complex so a wrong coefficient convention shows up as an
    imaginary part instead of being rounded away.
    """
    cA = population_weights(params.s0A, params.j)
    cB = population_weights(params.s0B, params.j)
    n = np.arange(params.dim)
    dA = (n[:, None] - n[None, :]).ravel()
    dB = dA
    wA = np.outer(cA, cA).ravel()
    wB = np.outer(cB, cB).ravel()
    phase = np.exp(-1j * params.lam * T * np.outer(dA, dB))
    return complex(wA @ phase @ wB)


def exact_entropy(params: QuantumParams, tau: float) -> float:
    """1 - purity of the reduced state at dimensionless time tau, by partial trace."""
    state = evolve_phase_coupling(product_state(params), params, params.time(tau))
    return 1.0 - reduced_purity(state)


def exact_entropy_series(params: QuantumParams, tau_grid, tol: float = 1e-10) -> EntropySeries:
    """
    Exact linear entropy on ``tau_grid`` by partial trace, cross-checked
    point by point against the closed-form four-index sum.

    Raises
    ------
    ConventionError
        if the two evaluations differ by more than ``tol``
    """
    tau = np.asarray(tau_grid, dtype=float)
    psi0 = product_state(params)
    out = np.empty_like(tau)
    for i, t in enumerate(tau):
        T = params.time(t)
        s_trace = 1.0 - reduced_purity(evolve_phase_coupling(psi0, params, T))
        s_closed = 1.0 - closed_form_purity(params, T)
        if abs(s_closed - s_trace) > tol:
            raise ConventionError(
                f"closed form {s_closed} vs partial trace {s_trace} at tau={t}"
            )
        out[i] = s_trace
    return EntropySeries(tau=tau, exact=out)
