"""
Classical description of the phase-coupling model in the (u, v) variables.

The Hamiltonian function is

    H(u, v) = lam hbar j^2 a_A a_B,   a_X = (1 - u_X v_X) / (1 + u_X v_X),

and the flow is exactly solvable because each product u_X v_X is conserved:

    u_A(t) = u_A' exp(+lam_B t),   v_A(t) = v_A' exp(-lam_B t),
    lam_B  = i lam j a_B                       (and A <-> B).

Vectors of phase-space variables are ordered (u_A, u_B, v_A, v_B) and the
stability matrix is stored as the four 2x2 blocks M_uu, M_uv, M_vu, M_vv.
Times may be complex.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .numerics import det, finite_difference_jacobian
from .quantum import QuantumParams

__all__ = [
    "ChartSingularityError",
    "PhasePoint",
    "AnalyticTrajectory",
    "StabilityBlocks",
    "ActionIngredients",
    "real_point",
    "exponents",
    "classical_hamiltonian",
    "vector_field",
    "flow",
    "stability",
    "action_ingredients",
    "solve_forward_bvp",
    "solve_backward_bvp",
    "action_from_labels",
    "verify_variaS",
    "det_M_star",
    "det_M_star_closed_form",
    "critical_time",
    "critical_tau",
]

I_A = np.diag([1.0 + 0j, 0j])
I_B = np.diag([0j, 1.0 + 0j])
FLIP = np.diag([-1.0 + 0j, 1.0 + 0j])

_CHART_EPS = 1e-14


class ChartSingularityError(ArithmeticError):
    """1 + u v vanished: the stereographic chart is singular there."""


@dataclass(frozen=True)
class PhasePoint:
    uA: complex
    uB: complex
    vA: complex
    vB: complex

    def __post_init__(self):
        for name, p in (("A", self.uA * self.vA), ("B", self.uB * self.vB)):
            if abs(1 + p) < _CHART_EPS:
                raise ChartSingularityError(f"1 + u v = 0 for part {name}")

    @classmethod
    def from_vector(cls, z) -> "PhasePoint":
        uA, uB, vA, vB = (complex(c) for c in z)
        return cls(uA, uB, vA, vB)

    def as_vector(self) -> np.ndarray:
        return np.array([self.uA, self.uB, self.vA, self.vB], dtype=complex)

    @property
    def pA(self) -> complex:
        return self.uA * self.vA

    @property
    def pB(self) -> complex:
        return self.uB * self.vB

    def is_real_sector(self, tol: float = 1e-12) -> bool:
        return (abs(self.vA - self.uA.conjugate()) <= tol * max(1.0, abs(self.uA))
                and abs(self.vB - self.uB.conjugate()) <= tol * max(1.0, abs(self.uB)))


def real_point(params: QuantumParams) -> PhasePoint:
    """Centre of the initial coherent state, u' = s0, v' = s0*."""
    s0A, s0B = complex(params.s0A), complex(params.s0B)
    return PhasePoint(s0A, s0B, s0A.conjugate(), s0B.conjugate())


def _ratio(p: complex) -> complex:
    return (1 - p) / (1 + p)


def exponents(p: PhasePoint, params: QuantumParams) -> tuple[complex, complex]:
    """(lam_A, lam_B) with lam_X = i lam j (1 - u_X v_X) / (1 + u_X v_X)."""
    c = 1j * params.lam * params.j
    return c * _ratio(p.pA), c * _ratio(p.pB)


def classical_hamiltonian(p: PhasePoint, params: QuantumParams) -> complex:
    """H(u, v) = lam hbar j^2 a_A a_B."""
    return params.lam * params.hbar * params.j ** 2 * _ratio(p.pA) * _ratio(p.pB)


def vector_field(p: PhasePoint, params: QuantumParams) -> np.ndarray:
    """Time derivative (du_A, du_B, dv_A, dv_B)/dt from the equations of motion."""
    lamA, lamB = exponents(p, params)
    return np.array([lamB * p.uA, lamA * p.uB, -lamB * p.vA, -lamA * p.vB])


def flow(p0: PhasePoint, params: QuantumParams, t) -> PhasePoint:
    lamA, lamB = exponents(p0, params)
    eA, eB = cmath.exp(lamA * t), cmath.exp(lamB * t)
    return PhasePoint(p0.uA * eB, p0.uB * eA, p0.vA / eB, p0.vB / eA)


@dataclass(frozen=True)
class AnalyticTrajectory:
    initial: PhasePoint
    T: complex
    params: QuantumParams

    @property
    def lambdas(self) -> tuple[complex, complex]:
        return exponents(self.initial, self.params)

    def at(self, t) -> PhasePoint:
        return flow(self.initial, self.params, t)

    @property
    def final(self) -> PhasePoint:
        return flow(self.initial, self.params, self.T)


@dataclass(frozen=True)
class StabilityBlocks:
    Muu: np.ndarray
    Muv: np.ndarray
    Mvu: np.ndarray
    Mvv: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.Muu, self.Muv], [self.Mvu, self.Mvv]])

    @classmethod
    def from_full(cls, m) -> "StabilityBlocks":
        m = np.asarray(m, dtype=complex)
        return cls(m[:2, :2], m[:2, 2:], m[2:, :2], m[2:, 2:])

    def star(self) -> "StabilityBlocks":
        """Blocks with the off-diagonal ones left-multiplied by diag(-1, 1)."""
        return StabilityBlocks(self.Muu, FLIP @ self.Muv, FLIP @ self.Mvu, self.Mvv)


def stability(p0: PhasePoint, params: QuantumParams, T) -> StabilityBlocks:
    """
    Analytic Jacobian of the flow with respect to (u_A', u_B', v_A', v_B').

    Besides the diagonal exponential factors, each final coordinate of part A
    depends on the initial data of part B through lam_B, and vice versa.
    """
    lamA, lamB = exponents(p0, params)
    c = 1j * params.lam * params.j
    # d lam_X / d u_X' and d lam_X / d v_X'
    gA = -2 * c / (1 + p0.pA) ** 2
    gB = -2 * c / (1 + p0.pB) ** 2
    dlamA_du, dlamA_dv = gA * p0.vA, gA * p0.uA
    dlamB_du, dlamB_dv = gB * p0.vB, gB * p0.uB

    eA, eB = cmath.exp(lamA * T), cmath.exp(lamB * T)
    uA, uB = p0.uA * eB, p0.uB * eA
    vA, vB = p0.vA / eB, p0.vB / eA

    Muu = np.array([[eB, uA * T * dlamB_du], [uB * T * dlamA_du, eA]])
    Muv = np.array([[0, uA * T * dlamB_dv], [uB * T * dlamA_dv, 0]], dtype=complex)
    Mvu = np.array([[0, -vA * T * dlamB_du], [-vB * T * dlamA_du, 0]], dtype=complex)
    Mvv = np.array([[1 / eB, -vA * T * dlamB_dv], [-vB * T * dlamA_dv, 1 / eA]])
    return StabilityBlocks(Muu, Muv, Mvu, Mvv)


@dataclass(frozen=True)
class ActionIngredients:
    """
    Closed-form pieces of the complex action along one trajectory.

    action_integral : int_0^T (i hbar j chi - H) dt
    g_correction    : (i hbar xi / 4) int_0^T (div_A + div_B) dt
    lambda_tilde    : ln(1 + u'v') + ln(1 + u''v''), summed over parts
    """

    action_integral: complex
    g_correction: complex
    lambda_tilde: complex
    chiA: complex
    chiB: complex
    xi: int
    hbar: float
    j: float

    @property
    def action(self) -> complex:
        """xi * action_integral - i hbar j lambda_tilde."""
        return self.xi * self.action_integral - 1j * self.hbar * self.j * self.lambda_tilde


def _check_xi(xi) -> int:
    if xi in (1, "+"):
        return 1
    if xi in (-1, "-"):
        return -1
    raise ValueError(f"xi must be +1 or -1, got {xi!r}")


def action_ingredients(traj: AnalyticTrajectory, params: QuantumParams, xi) -> ActionIngredients:
    xi = _check_xi(xi)
    p0 = traj.initial
    lamA, lamB = exponents(p0, params)
    T = traj.T
    hbar, j = params.hbar, params.j
    chiA = 2 * lamB * p0.pA / (1 + p0.pA)
    chiB = 2 * lamA * p0.pB / (1 + p0.pB)
    integral = (1j * hbar * j * (chiA + chiB) - classical_hamiltonian(p0, params)) * T
    g = 1j * hbar * xi * (lamA + lamB) * T / 2
    pf = traj.final
    lam_tilde = (cmath.log(1 + p0.pA) + cmath.log(1 + pf.pA)
                 + cmath.log(1 + p0.pB) + cmath.log(1 + pf.pB))
    return ActionIngredients(integral, g, lam_tilde, chiA, chiB, xi, hbar, j)


# -- boundary-value problems used by the derivative diagnostics --------------

def _newton(residual, jacobian, z0, tol=1e-14, maxiter=50):
    z = np.asarray(z0, dtype=complex)
    for _ in range(maxiter):
        r = residual(z)
        if np.max(np.abs(r)) <= tol * max(1.0, float(np.max(np.abs(z)))):
            return z
        z = z - np.linalg.solve(jacobian(z), r)
    r = residual(z)
    if np.max(np.abs(r)) > 1e-10 * max(1.0, float(np.max(np.abs(z)))):
        raise RuntimeError("boundary-value Newton iteration did not converge")
    return z


def solve_forward_bvp(u_init, v_final, params, T, v_guess) -> PhasePoint:
    """Initial point with u' = u_init whose flow reaches v'' = v_final at time T."""
    u_init = np.asarray(u_init, dtype=complex)
    v_final = np.asarray(v_final, dtype=complex)

    def point(v):
        return PhasePoint(u_init[0], u_init[1], v[0], v[1])

    def residual(v):
        pf = flow(point(v), params, T)
        return np.array([pf.vA, pf.vB]) - v_final

    def jac(v):
        return stability(point(v), params, T).Mvv

    return point(_newton(residual, jac, v_guess))


def solve_backward_bvp(v_init, u_final, params, T, u_guess) -> PhasePoint:
    """Initial point with v' = v_init whose flow reaches u'' = u_final at time T."""
    v_init = np.asarray(v_init, dtype=complex)
    u_final = np.asarray(u_final, dtype=complex)

    def point(u):
        return PhasePoint(u[0], u[1], v_init[0], v_init[1])

    def residual(u):
        pf = flow(point(u), params, T)
        return np.array([pf.uA, pf.uB]) - u_final

    def jac(u):
        return stability(point(u), params, T).Muu

    return point(_newton(residual, jac, u_guess))


def action_from_labels(labels, params, T, xi, guess) -> tuple[complex, PhasePoint]:
    """
    Action as a function of its boundary labels.

    xi=+1: labels = (u_A', u_B', v_A'', v_B''), guess = initial v'.
    xi=-1: labels = (v_A', v_B', u_A'', u_B''), guess = initial u'.
    """
    xi = _check_xi(xi)
    labels = np.asarray(labels, dtype=complex)
    if xi == 1:
        p0 = solve_forward_bvp(labels[:2], labels[2:], params, T, guess)
    else:
        p0 = solve_backward_bvp(labels[:2], labels[2:], params, T, guess)
    traj = AnalyticTrajectory(p0, T, params)
    return action_ingredients(traj, params, xi).action, p0


def _gradient_rhs(p0: PhasePoint, params, T, xi) -> np.ndarray:
    """Right-hand sides of the first-derivative relations of the action."""
    c = -2j * params.hbar * params.j
    pf = flow(p0, params, T)
    if xi == 1:
        # d/du', d/dv''
        return c * np.array([p0.vA / (1 + p0.pA), p0.vB / (1 + p0.pB),
                             pf.uA / (1 + pf.pA), pf.uB / (1 + pf.pB)])
    # d/dv', d/du''
    return c * np.array([p0.uA / (1 + p0.pA), p0.uB / (1 + p0.pB),
                         pf.vA / (1 + pf.pA), pf.vB / (1 + pf.pB)])


def _second_derivative_rhs(p0: PhasePoint, params, T, xi) -> tuple[np.ndarray, np.ndarray]:
    """
    (mixed, final-final) second-derivative blocks of (i/hbar) S predicted from
    the stability matrix.
    """
    j = params.j
    pf = flow(p0, params, T)
    M = stability(p0, params, T)
    ab_i = np.diag([2 * j / (1 + p0.pA) ** 2, 2 * j / (1 + p0.pB) ** 2])
    ab_f = np.diag([2 * j / (1 + pf.pA) ** 2, 2 * j / (1 + pf.pB) ** 2])
    if xi == 1:
        mixed = ab_i @ np.linalg.inv(M.Mvv)
        c = np.diag([pf.uA ** 2, pf.uB ** 2]) @ ab_f
        final = ab_f @ M.Muv @ np.linalg.inv(M.Mvv) - c
    else:
        mixed = ab_i @ np.linalg.inv(M.Muu)
        d = np.diag([pf.vA ** 2, pf.vB ** 2]) @ ab_f
        final = ab_f @ M.Mvu @ np.linalg.inv(M.Muu) - d
    return mixed, final


def verify_variaS(traj: AnalyticTrajectory, params: QuantumParams, xi, h: float = 1e-5) -> dict:
    """
    Finite-difference check of the action's derivative relations.

    The action is re-evaluated as a function of its boundary labels by
    solving the two-point problem around ``traj``; its numerical gradient is
    compared with the closed-form first derivatives, and the numerical
    Jacobian of that gradient with the stability-matrix expressions for the
    second derivatives. Residuals are scaled by max(1, |expected|).

    Returns
    -------
    dict with keys ``gradient``, ``mixed``, ``final`` (max scaled residuals)
    and ``max``.
    """
    xi = _check_xi(xi)
    T = traj.T
    p0 = traj.initial
    pf = traj.final
    if xi == 1:
        labels0 = np.array([p0.uA, p0.uB, pf.vA, pf.vB])
        guess0 = np.array([p0.vA, p0.vB])
    else:
        labels0 = np.array([p0.vA, p0.vB, pf.uA, pf.uB])
        guess0 = np.array([p0.uA, p0.uB])

    def action(labels):
        return np.array([action_from_labels(labels, params, T, xi, guess0)[0]])

    def gradient(labels):
        _, q0 = action_from_labels(labels, params, T, xi, guess0)
        return _gradient_rhs(q0, params, T, xi)

    def scaled(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))

    expected_grad = _gradient_rhs(p0, params, T, xi)
    fd_grad = finite_difference_jacobian(action, labels0, h)[0]
    hess = finite_difference_jacobian(gradient, labels0, h) * (1j / params.hbar)
    mixed_rhs, final_rhs = _second_derivative_rhs(p0, params, T, xi)
    # rows: derivative of the initial-label gradient wrt final labels,
    # and of the final-label gradient wrt final labels
    mixed_fd = hess[:2, 2:]
    final_fd = hess[2:, 2:]
    report = {
        "gradient": scaled(fd_grad, expected_grad),
        "mixed": scaled(mixed_fd, mixed_rhs),
        "final": scaled(final_fd, final_rhs),
    }
    report["max"] = max(report.values())
    return report


# -- quasi-real diagnostics ---------------------------------------------------

def det_M_star(p0: PhasePoint, params: QuantumParams, T, check: bool = True) -> complex:
    """
    Determinant of the stability matrix of the real trajectory with its
    off-diagonal blocks sign-flipped in the part-A row.

    With ``check`` the value is compared against the closed form.
    """
    if not p0.is_real_sector():
        raise ValueError("det_M_star is defined for real-sector initial points")
    value = det(stability(p0, params, T).star().full())
    if check:
        closed = det_M_star_closed_form(params, T)
        if abs(value - closed) > 1e-10 * max(1.0, abs(closed)):
            raise ArithmeticError(f"det M* = {value} disagrees with closed form {closed}")
    return value


def det_M_star_closed_form(params: QuantumParams, T) -> complex:
    """1 + 16 j^2 lam^2 |s0A|^2 |s0B|^2 T^2 / ((1 + |s0A|^2)^2 (1 + |s0B|^2)^2)."""
    qA, qB = params.qA, params.qB
    return 1 + 16 * params.j ** 2 * params.lam ** 2 * qA * qB * T ** 2 / ((1 + qA) ** 2 * (1 + qB) ** 2)


def critical_time(params: QuantumParams) -> complex:
    """Positive-imaginary root of det M* = 0."""
    qA, qB = params.qA, params.qB
    return 1j * (1 + qA) * (1 + qB) / (4 * params.j * abs(params.lam) * math.sqrt(qA * qB))


def critical_tau(params: QuantumParams) -> complex:
    return critical_time(params) / params.period
