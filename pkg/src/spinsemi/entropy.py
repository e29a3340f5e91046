"""
Semiclassical linear entropy from sets of four entangled trajectories.

Each set contributes

    value = sqrt(A / det F) * exp{(i/hbar) [F_1 - F_2 + F_3 - F_4]},

and S_sc = 1 - sum(value). Trajectories 1 and 3 enter forward propagators,
2 and 4 backward ones.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from .classical import (
    I_A,
    I_B,
    StabilityBlocks,
    action_ingredients,
    stability,
)
from .numerics import BranchTracker, det, sqrt_continuous
from .quantum import QuantumParams
from .saddle import TrajectorySet
from .series import EntropySeries

__all__ = [
    "CausticError",
    "SetContribution",
    "FORWARD",
    "set_stability",
    "build_F_matrix",
    "amplitude_factor",
    "sqrt_amplitude_factor",
    "log_sqrt_amplitude_factor",
    "phase_exponent",
    "contribution",
    "build_Q_matrix",
    "purity_q_matrix",
    "family_terms",
    "FilterPolicy",
    "image_kind",
    "family_value",
    "semiclassical_entropy",
]

logger = logging.getLogger(__name__)

# xi for trajectories k = 1..4
FORWARD = (1, -1, 1, -1)
CAUSTIC_TOL = 1e-8


class CausticError(ArithmeticError):
    """det F (or det Q) vanished: the Gaussian approximation breaks down."""


@dataclass
class SetContribution:
    x1A: complex
    det_F: complex
    amplitude: complex
    phase: complex
    value: complex
    filtered: bool = False
    reason: str = ""


def set_stability(tset: TrajectorySet, params: QuantumParams) -> list[StabilityBlocks]:
    return [stability(tr.initial, params, tr.T) for tr in tset.trajectories]


def build_F_matrix(tset: TrajectorySet, params: QuantumParams, blocks=None) -> np.ndarray:
    """
    8x8 matrix

        [ -Muv1     I_B Muu2   0          I_A Muu4 ]
        [ I_B Mvv1  -Mvu2      I_A Mvv3   0        ]
        [ 0         I_A Muu2   -Muv3      I_B Muu4 ]
        [ I_A Mvv1  0          I_B Mvv3   -Mvu4    ]
    """
    m = blocks or set_stability(tset, params)
    z = np.zeros((2, 2), dtype=complex)
    return np.block([
        [-m[0].Muv, I_B @ m[1].Muu, z, I_A @ m[3].Muu],
        [I_B @ m[0].Mvv, -m[1].Mvu, I_A @ m[2].Mvv, z],
        [z, I_A @ m[1].Muu, -m[2].Muv, I_B @ m[3].Muu],
        [I_A @ m[0].Mvv, z, I_B @ m[2].Mvv, -m[3].Mvu],
    ])


def amplitude_factor(tset: TrajectorySet, params: QuantumParams) -> complex:
    """
    A = A_A A_B with
    A_X = prod_k (1 + u''v'')/(1 + u'v') * ((1 + u'v')/(1 + |s0X|^2))^{2j}.
    """
    two_j = int(round(2 * params.j))
    log_total = 0j
    for tr in tset.trajectories:
        p0, pf = tr.initial, tr.final
        for pi, pff, q in ((p0.pA, pf.pA, params.qA), (p0.pB, pf.pB, params.qB)):
            log_total += cmath.log(1 + pff) + (two_j - 1) * cmath.log(1 + pi) - two_j * math.log1p(q)
    if log_total.real > 700:
        return complex(math.inf, 0.0)
    return cmath.exp(log_total)


def sqrt_amplitude_factor(tset: TrajectorySet, params: QuantumParams) -> complex:
    """
    Square root of A with its branch fixed by the saddle structure.

    At a saddle the products u v pair up (1 with 4 and 2 with 3 in part A,
    1 with 2 and 3 with 4 in part B), so A is a perfect square of
    prod_pairs ((1 + uv)/(1 + |s0|^2))^{2j}; 2j is an integer, so this root is
    single-valued.
    """
    two_j = int(round(2 * params.j))
    t = [tr.initial for tr in tset.trajectories]
    a = ((1 + t[0].pA) * (1 + t[1].pA) / (1 + params.qA) ** 2) ** two_j
    b = ((1 + t[0].pB) * (1 + t[2].pB) / (1 + params.qB) ** 2) ** two_j
    return a * b


def log_sqrt_amplitude_factor(tset: TrajectorySet, params: QuantumParams) -> complex:
    """A logarithm of sqrt_amplitude_factor; exp() of it is branch-independent."""
    two_j = int(round(2 * params.j))
    t = [tr.initial for tr in tset.trajectories]
    return two_j * (cmath.log(1 + t[0].pA) + cmath.log(1 + t[1].pA) - 2 * math.log1p(params.qA)
                    + cmath.log(1 + t[0].pB) + cmath.log(1 + t[2].pB) - 2 * math.log1p(params.qB))


def phase_exponent(tset: TrajectorySet, params: QuantumParams) -> complex:
    """
    (i/hbar) sum_k xi_k [int (i hbar j chi_k - H) dt + G_k(xi=+)].

    Equivalently (i/hbar)[F_1 - F_2 + F_3 - F_4] with every F_k built from
    the forward-sign correction, which is what the sum of
    (i/hbar)(S_k + G_k) over the four propagators produces.
    """
    total = 0j
    for xi, tr in zip(FORWARD, tset.trajectories):
        ing = action_ingredients(tr, params, +1)
        total += xi * (ing.action_integral + ing.g_correction)
    return 1j / params.hbar * total


def contribution(tset: TrajectorySet, params: QuantumParams,
                 tracker: BranchTracker | None = None) -> SetContribution:
    """
    Contribution of one set to the reduced-state purity.

    The square root of det F is taken continuously through ``tracker``
    (principal root when no tracker is given).

    Raises
    ------
    CausticError
        if |det F| < 1e-8
    """
    f_det = det(build_F_matrix(tset, params))
    if abs(f_det) < CAUSTIC_TOL:
        raise CausticError(f"det F = {f_det:.3g} at x1A={tset.x1A}")
    root = sqrt_continuous(f_det, tracker) if tracker is not None else cmath.sqrt(f_det)
    amp = amplitude_factor(tset, params)
    phase = phase_exponent(tset, params)
    # sqrt(A) and exp(phase) can over/underflow separately; combine in log space
    value = cmath.exp(log_sqrt_amplitude_factor(tset, params) + phase) / root
    return SetContribution(tset.x1A, f_det, amp, phase, value)


# -- Gaussian (Q-matrix) form -------------------------------------------------

def _part_matrices(point, j):
    a = 2 * j / (1 + point.pA) ** 2 * I_A
    b = 2 * j / (1 + point.pB) ** 2 * I_B
    return a, b


def build_Q_matrix(tset: TrajectorySet, params: QuantumParams, blocks=None) -> np.ndarray:
    """
    Negative Hessian of the purity exponent with respect to the eight free
    final coordinates (v1'', u2'', v3'', u4''), built from second derivatives
    of the actions expressed through the stability blocks.
    """
    j = params.j
    m = blocks or set_stability(tset, params)
    finals = [tr.final for tr in tset.trajectories]
    ab = [_part_matrices(f, j) for f in finals]
    R = []
    for k, (xi, f, mk) in enumerate(zip(FORWARD, finals, m)):
        a, b = ab[k]
        if xi == 1:
            c = f.uA ** 2 * a + f.uB ** 2 * b
            s_ff = (a + b) @ mk.Muv @ np.linalg.inv(mk.Mvv) - c
            R.append(c + s_ff)
        else:
            d = f.vA ** 2 * a + f.vB ** 2 * b
            s_ff = (a + b) @ mk.Mvu @ np.linalg.inv(mk.Muu) - d
            R.append(d + s_ff)
    A = [x[0] for x in ab]
    B = [x[1] for x in ab]
    z = np.zeros((2, 2), dtype=complex)
    hess = np.block([
        [R[0], -B[1], z, -A[3]],
        [-B[0], R[1], -A[2], z],
        [z, -A[1], R[2], -B[3]],
        [-A[0], z, -B[2], R[3]],
    ])
    return -hess


def _prefactor_D(tr, mk: StabilityBlocks, xi: int, params: QuantumParams) -> complex:
    """e^{Lambda~} / (4 j^2) det((i/hbar) S_{ket, bra})."""
    j = params.j
    p0, pf = tr.initial, tr.final
    a, b = _part_matrices(p0, j)
    if xi == 1:
        mixed = (a + b) @ np.linalg.inv(mk.Mvv)
    else:
        mixed = ((a + b) @ np.linalg.inv(mk.Muu)).T
    e_lam = (1 + p0.pA) * (1 + pf.pA) * (1 + p0.pB) * (1 + pf.pB)
    return e_lam / (4 * j ** 2) * det(mixed)


def purity_q_matrix(tset: TrajectorySet, params: QuantumParams,
                    tracker: BranchTracker | None = None,
                    measure_weight: float | None = None) -> complex:
    """
    Purity contribution of one set from the Gaussian integral over the
    eight final coordinates, before any reduction to the F matrix.

    ``measure_weight`` is the per-pair weight of the coherent-state measure.
    It defaults to 2j, the large-j weight under which the Gaussian result
    is normalised (purity 1 at T = 0); the literal 2j + 1 multiplies every
    set by ((2j + 1)/(2j))^4.
    """
    j, hbar = params.j, params.hbar
    w = 2 * j if measure_weight is None else measure_weight
    m = set_stability(tset, params)
    trajs = tset.trajectories
    finals = [tr.final for tr in trajs]

    q = build_Q_matrix(tset, params, m)
    q_det = det(q)
    # det Q carries the scale of the stability blocks, so only an exact
    # zero is treated as a caustic here
    if q_det == 0 or not cmath.isfinite(q_det):
        raise CausticError(f"det Q = {q_det:.3g} at x1A={tset.x1A}")

    d_prod = 1.0 + 0j
    jac = 1.0 + 0j
    phi = 0j
    for xi, tr, mk, f in zip(FORWARD, trajs, m, finals):
        d_prod *= _prefactor_D(tr, mk, xi, params)
        jac *= (1 + f.pA) * (1 + f.pB)
        ing = action_ingredients(tr, params, xi)
        phi += 1j / hbar * (ing.action + ing.g_correction)
    f1, f2, f3, f4 = finals
    phi -= 4 * j * (cmath.log(1 + params.qA) + cmath.log(1 + params.qB))
    phi -= 2 * j * (cmath.log(1 + f4.uA * f1.vA) + cmath.log(1 + f2.uA * f3.vA)
                    + cmath.log(1 + f2.uB * f1.vB) + cmath.log(1 + f4.uB * f3.vB))

    radicand = (2 * math.pi) ** 8 * d_prod / q_det
    root = sqrt_continuous(radicand, tracker) if tracker is not None else cmath.sqrt(radicand)
    return (w / (2j * math.pi)) ** 4 / jac * cmath.exp(phi) * root


# -- vectorised evaluation over many roots ------------------------------------

def _batch_blocks(uA, uB, vA, vB, params: QuantumParams, T):
    """Stability blocks for arrays of initial points, each of shape (n, 2, 2)."""
    c = 1j * params.lam * params.j
    pA, pB = uA * vA, uB * vB
    lamA, lamB = c * (1 - pA) / (1 + pA), c * (1 - pB) / (1 + pB)
    gA, gB = -2 * c / (1 + pA) ** 2, -2 * c / (1 + pB) ** 2
    eA, eB = np.exp(lamA * T), np.exp(lamB * T)
    ufA, ufB = uA * eB, uB * eA
    vfA, vfB = vA / eB, vB / eA
    n = uA.shape[0]
    Muu = np.zeros((n, 2, 2), dtype=complex)
    Muv = np.zeros_like(Muu)
    Mvu = np.zeros_like(Muu)
    Mvv = np.zeros_like(Muu)
    Muu[:, 0, 0], Muu[:, 1, 1] = eB, eA
    Muu[:, 0, 1], Muu[:, 1, 0] = ufA * T * gB * vB, ufB * T * gA * vA
    Muv[:, 0, 1], Muv[:, 1, 0] = ufA * T * gB * uB, ufB * T * gA * uA
    Mvu[:, 0, 1], Mvu[:, 1, 0] = -vfA * T * gB * vB, -vfB * T * gA * vA
    Mvv[:, 0, 0], Mvv[:, 1, 1] = 1 / eB, 1 / eA
    Mvv[:, 0, 1], Mvv[:, 1, 0] = -vfA * T * gB * uB, -vfB * T * gA * uA
    return Muu, Muv, Mvu, Mvv, lamA, lamB


def family_terms(x1A, params: QuantumParams, T) -> tuple[np.ndarray, np.ndarray]:
    """
    det F and log[sqrt(A) exp(phase)] for an array of roots at once, so that
    ``contribution(...).value == exp(log_weight) / sqrt(det_F)`` up to the
    square-root branch.

    Entries that cannot be evaluated (pole of f_A, chart singularity) are NaN.
    """
    from .saddle import f_map

    x = np.atleast_1d(np.asarray(x1A, dtype=complex))
    j, hbar = params.j, params.hbar
    s0A, s0B = complex(params.s0A), complex(params.s0B)
    cA, cB = s0A.conjugate(), s0B.conjugate()
    with np.errstate(all="ignore"):
        y = f_map(x, "A", params, T)
        one = np.ones_like(x)
        xa = (x, 1 / x, 1 / x, x)
        xb = (y, y, 1 / y, 1 / y)
        points = [
            (s0A * one, s0B * one, xa[0] * cA, xb[0] * cB),
            (xa[1] * s0A, xb[1] * s0B, cA * one, cB * one),
            (s0A * one, s0B * one, xa[2] * cA, xb[2] * cB),
            (xa[3] * s0A, xb[3] * s0B, cA * one, cB * one),
        ]
        blocks = []
        phase = np.zeros_like(x)
        for xi, (uA, uB, vA, vB) in zip(FORWARD, points):
            Muu, Muv, Mvu, Mvv, lamA, lamB = _batch_blocks(uA, uB, vA, vB, params, T)
            blocks.append((Muu, Muv, Mvu, Mvv))
            pA, pB = uA * vA, uB * vB
            chiA = 2 * lamB * pA / (1 + pA)
            chiB = 2 * lamA * pB / (1 + pB)
            ham = params.lam * hbar * j ** 2 * (1 - pA) / (1 + pA) * (1 - pB) / (1 + pB)
            integral = (1j * hbar * j * (chiA + chiB) - ham) * T
            g = 1j * hbar * (lamA + lamB) * T / 2
            phase += xi * (integral + g)
        phase *= 1j / hbar

        two_j = int(round(2 * j))
        p1A, p2A = points[0][0] * points[0][2], points[1][0] * points[1][2]
        p1B, p3B = points[0][1] * points[0][3], points[2][1] * points[2][3]
        log_amp = two_j * (np.log(1 + p1A) + np.log(1 + p2A) - 2 * math.log1p(params.qA)
                           + np.log(1 + p1B) + np.log(1 + p3B) - 2 * math.log1p(params.qB))

        iA, iB = I_A, I_B
        n = x.shape[0]
        F = np.zeros((n, 8, 8), dtype=complex)
        m = blocks
        # block (row, col) -> matrix, following build_F_matrix
        layout = {
            (0, 0): -m[0][1], (0, 1): iB @ m[1][0], (0, 3): iA @ m[3][0],
            (1, 0): iB @ m[0][3], (1, 1): -m[1][2], (1, 2): iA @ m[2][3],
            (2, 1): iA @ m[1][0], (2, 2): -m[2][1], (2, 3): iB @ m[3][0],
            (3, 0): iA @ m[0][3], (3, 2): iB @ m[2][3], (3, 3): -m[3][2],
        }
        for (r, c), blk in layout.items():
            F[:, 2 * r:2 * r + 2, 2 * c:2 * c + 2] = blk
        good = np.all(np.isfinite(F.reshape(n, -1)), axis=1)
        det_F = np.full(n, complex(np.nan, np.nan))
        if good.any():
            det_F[good] = np.linalg.det(F[good])
        log_w = np.where(good, log_amp + phase, complex(np.nan, np.nan))
    return det_F, log_w


# -- entropy series -------------------------------------------------------------

@dataclass(frozen=True)
class FilterPolicy:
    """
    Rules for discarding set contributions at a given tau.

    A set is filtered when |value| > ``max_value``, when |value| exceeds
    ``growth_floor`` and grew faster than exp(``growth_rate`` * dtau) since
    the previous step, or when |det F| < ``caustic_tol``. Sets with
    |value| < ``negligible`` are kept in the sum but not counted as active.
    """

    max_value: float = 1.5
    growth_rate: float = 100.0
    growth_floor: float = 1e-3
    caustic_tol: float = CAUSTIC_TOL
    negligible: float = 1e-10

    def __post_init__(self):
        for name in ("max_value", "growth_rate", "growth_floor", "caustic_tol", "negligible"):
            if getattr(self, name) <= 0:
                raise ValueError(f"filter threshold {name} must be positive")


def image_kind(x: complex, tol: float = 1e-9) -> str:
    """
    Classify a root by its symmetry images: 'real-root' (x = 1, one set),
    'real-axis' (x, 1/x), 'unit-circle' (x, x*) or 'generic' (four sets).
    """
    x = complex(x)
    if abs(x - 1) < 1e-6:
        return "real-root"
    if abs(x.imag) <= tol * max(1.0, abs(x)):
        return "real-axis"
    if abs(abs(x) - 1) <= tol:
        return "unit-circle"
    return "generic"


_IMAGE_COUNT = {"real-root": 1, "real-axis": 2, "unit-circle": 2, "generic": 4}


def family_value(value: complex, kind: str) -> complex:
    """
    Summed contribution of all symmetry images of a root whose own set
    contributes ``value``. The image 1/x reproduces the set with trajectories
    relabelled (same value) and x* gives the conjugate value.
    """
    if kind == "real-root":
        return value
    if kind == "real-axis":
        return 2 * value
    if kind == "unit-circle":
        return complex(2 * value.real)
    return complex(4 * value.real)


def _fine_path(tau: np.ndarray, step: float) -> list[tuple[float, int | None]]:
    """Continuation path through ``tau`` with spacing <= step; grid index or None."""
    path = [(float(tau[0]), 0)]
    for i in range(1, len(tau)):
        a, b = float(tau[i - 1]), float(tau[i])
        n = max(1, int(math.ceil((b - a) / step - 1e-9)))
        for k in range(1, n):
            path.append((a + (b - a) * k / n, None))
        path.append((b, i))
    return path


def semiclassical_entropy(params: QuantumParams, tau_grid, registry=None,
                          policy: FilterPolicy | None = None, step: float = 1e-3,
                          seed_policy: str = "scan+continue", grid=None,
                          with_exact: bool = True) -> EntropySeries:
    """
    S_sc = 1 - sum of unfiltered set contributions along ``tau_grid``.

    Roots are followed by a RootRegistry with continuation steps of at most
    ``step`` (rescanning as configured in the registry); the square root of
    det F is tracked continuously per family between steps. The returned
    series carries the per-family summed contributions in ``breakdown`` and
    a per-family log in ``branches``.

    Parameters
    ----------
    params : QuantumParams
    tau_grid : array_like
        increasing real dimensionless times
    registry : RootRegistry, optional
        built from ``seed_policy`` and ``grid`` when omitted
    policy : FilterPolicy, optional
    step : float
        continuation step in tau
    with_exact : bool
        also fill the exact column
    """
    from .quantum import exact_entropy_series
    from .saddle import RootRegistry, _canonical

    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size < 1 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be a strictly increasing 1-D array")
    if step <= 0:
        raise ValueError("continuation step must be positive")
    policy = policy or FilterPolicy()
    if registry is None:
        registry = RootRegistry(params, seed_policy, grid)

    n = tau.size
    s_sc = np.empty(n, dtype=complex)
    n_active = np.zeros(n, dtype=int)
    breakdown: dict[str, np.ndarray] = {}
    branches: dict[str, dict] = {}
    filtered: dict[str, list[str]] = {}
    trackers: dict[str, BranchTracker] = {}
    prev_abs: dict[str, float] = {}
    logged_dead: set[str] = set()
    prev_tau = None

    for t, gi in _fine_path(tau, step):
        if prev_tau is None:
            registry.start(t)
        else:
            registry.advance(t)
        dt = 0.0 if prev_tau is None else t - prev_tau
        prev_tau = t
        live = registry.active()
        T = params.time(t)
        x = np.array([complex(r.x1A) for r in live], dtype=complex)
        det_F, log_w = family_terms(x, params, T) if x.size else (x, x)

        total = 0j
        active = 0
        for rec, d, lw in zip(live, det_F, log_w):
            bid = rec.branch_id
            tracker = trackers.setdefault(bid, BranchTracker())
            reason = ""
            value = complex(np.nan, np.nan)
            if not (cmath.isfinite(d) and cmath.isfinite(lw)):
                reason = "non-finite"
            else:
                if d != 0:
                    if not tracker.initialized and lw.real - 0.5 * math.log(abs(d)) < math.log(policy.negligible):
                        # sign is immaterial until the set matters; anchor later
                        root = cmath.sqrt(d)
                    else:
                        root = sqrt_continuous(d, tracker)
                if abs(d) < policy.caustic_tol:
                    reason = "caustic"
                else:
                    log_abs = lw.real - math.log(abs(root))
                    if log_abs > math.log(policy.max_value):
                        reason = "divergent"
                        prev_abs[bid] = math.inf
                    else:
                        value = cmath.exp(lw) / root
                        mag = abs(value)
                        last = prev_abs.get(bid)
                        if (last is not None and dt > 0 and mag > policy.growth_floor
                                and (last == 0 or math.log(mag / last) > policy.growth_rate * dt)):
                            reason = "growth"
                        prev_abs[bid] = mag
            kind = image_kind(rec.x1A)
            fam = family_value(value, kind) if not reason else complex(np.nan, np.nan)
            if not reason:
                total += fam
                if abs(value) >= policy.negligible:
                    active += _IMAGE_COUNT[kind]
            if gi is not None:
                arr = breakdown.setdefault(bid, np.full(n, complex(np.nan, np.nan)))
                arr[gi] = fam
                log = branches.setdefault(bid, {"tau": [], "x1A": [], "value": [], "reason": []})
                log["tau"].append(float(t))
                log["x1A"].append(_canonical(complex(rec.x1A)))
                log["value"].append(fam)
                log["reason"].append(reason)
                if reason:
                    filtered.setdefault(bid, []).append(f"{t:.6g}:{reason}")
        if gi is not None:
            s_sc[gi] = 1.0 - total
            n_active[gi] = active
            for bid, rec in registry.records.items():
                if rec.filtered and bid not in logged_dead and bid in branches:
                    logged_dead.add(bid)
                    log = branches[bid]
                    log["tau"].append(float(t))
                    log["x1A"].append(_canonical(complex(rec.x1A)))
                    log["value"].append(complex(np.nan, np.nan))
                    log["reason"].append(rec.reason)
                    filtered.setdefault(bid, []).append(f"{t:.6g}:{rec.reason}")

    exact = exact_entropy_series(params, tau).exact if with_exact else None
    logger.info("semiclassical series: %d points, %d families", n, len(registry.records))
    return EntropySeries(tau=tau, exact=exact, semiclassical=s_sc, n_active=n_active,
                         breakdown=breakdown, filtered=filtered, branches=branches)
