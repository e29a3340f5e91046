"""
Saddle-point sets of four entangled-boundary-condition trajectories.

For the phase-coupling model the final-point constraints reduce to a single
transcendental equation for x = x1A,

    f(x) = f_B(f_A(x)) - x = 0,
    f_X(x) = exp[-2 i j lam q_X T (x^2 - 1) / ((1 + q_X x)(x + q_X))],  q_X = |s0X|^2,

with x1B = f_A(x1A) and the remaining six multipliers fixed by reciprocal
relations. Roots come in families {r, r*, 1/r, 1/r*}; the search covers the
upper half of the unit disc.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .classical import AnalyticTrajectory, PhasePoint, flow
from .quantum import QuantumParams

__all__ = [
    "PoleError",
    "InconsistentRootError",
    "SaddleVariables",
    "RootRecord",
    "TrajectorySet",
    "GridSpec",
    "f_map",
    "f_map_derivative",
    "transcendental_residual",
    "transcendental_derivative",
    "numerical_derivative",
    "newton_root",
    "newton_batch",
    "RootRegistry",
    "poles",
    "near_singularity",
    "scan_roots",
    "continue_roots",
    "expand_symmetry",
    "saddle_variables",
    "assemble_set",
    "ROOT_TOL",
    "DEDUP_RADIUS",
    "POLE_RADIUS",
]

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-10
DEDUP_RADIUS = 1e-6
POLE_RADIUS = 1e-4
FBC_TOL = 1e-8
MATCH_RADIUS = 1e-5
WINDOW_MIN = 1e-4
MAX_NEWTON = 50
POLISH_STEPS = 4
# exp() overflows past ~709; anything beyond is outside the numerical window
_EXP_LIMIT = 700.0


class PoleError(ArithmeticError):
    """Argument at (or numerically on top of) a singularity of f_A / f_B."""


class InconsistentRootError(ArithmeticError):
    """An assembled set violates the final-point constraints."""


def _q(params: QuantumParams, part: str) -> float:
    if part == "A":
        return params.qA
    if part == "B":
        return params.qB
    raise ValueError(f"part must be 'A' or 'B', got {part!r}")


def _exponent(x, q, params, T):
    den = (1 + q * x) * (x + q)
    return -2j * params.j * params.lam * q * T * (x * x - 1) / den, den


def f_map(x, part: str, params: QuantumParams, T):
    """
    f_A or f_B evaluated at ``x``.

    Scalars raise PoleError at a pole or when the exponent overflows;
    arrays return inf there instead.
    """
    q = _q(params, part)
    if np.ndim(x) == 0:
        x = complex(x)
        if (1 + q * x) * (x + q) == 0:
            raise PoleError(f"f_{part} has a pole at x={x}")
        e, den = _exponent(x, q, params, T)
        if not cmath.isfinite(e) or e.real > _EXP_LIMIT:
            raise PoleError(f"f_{part} singular near x={x}")
        return cmath.exp(e)
    x = np.asarray(x, dtype=complex)
    with np.errstate(all="ignore"):
        e, den = _exponent(x, q, params, T)
        bad = (den == 0) | ~np.isfinite(e) | (e.real > _EXP_LIMIT)
        out = np.exp(np.where(bad, 0, e))
    out[bad] = np.inf
    return out


def f_map_derivative(x, part: str, params: QuantumParams, T) -> complex:
    """Analytic derivative of f_A or f_B."""
    q = _q(params, part)
    x = complex(x)
    # d/dx (x^2-1)/((1+qx)(x+q)) = q (x+1)^2 ... simplified below
    den = (1 + q * x) * (x + q)
    dden = q * (x + q) + (1 + q * x)
    drat = (2 * x * den - (x * x - 1) * dden) / den ** 2
    return f_map(x, part, params, T) * (-2j * params.j * params.lam * q * T) * drat


def transcendental_residual(x, params: QuantumParams, T):
    """f(x) = f_B(f_A(x)) - x; works on scalars and arrays."""
    if np.ndim(x) == 0:
        return f_map(f_map(x, "A", params, T), "B", params, T) - complex(x)
    y = f_map(x, "A", params, T)
    finite = np.isfinite(y)
    out = np.full(np.shape(x), np.inf, dtype=complex)
    out[finite] = f_map(y[finite], "B", params, T) - np.asarray(x)[finite]
    return out


def transcendental_derivative(x, params: QuantumParams, T) -> complex:
    y = f_map(x, "A", params, T)
    return f_map_derivative(y, "B", params, T) * f_map_derivative(x, "A", params, T) - 1


def numerical_derivative(x, params: QuantumParams, T) -> complex:
    """Complex central difference with h = 1e-7 max(1, |x|)."""
    x = complex(x)
    h = 1e-7 * max(1.0, abs(x))
    return (transcendental_residual(x + h, params, T) - transcendental_residual(x - h, params, T)) / (2 * h)


def poles(params: QuantumParams) -> list[complex]:
    """Poles of the exponent of f_A: x = -|s0A|^2 and x = -1/|s0A|^2."""
    q = params.qA
    return sorted({complex(-q), complex(-1 / q)}, key=lambda z: z.real)


def near_singularity(x: complex, params: QuantumParams, T, radius: float = POLE_RADIUS) -> bool:
    """
    True when x sits within ``radius`` of a pole of f_A, or when f_A(x) sits
    within ``radius`` of a pole of f_B (an essential singularity of f).
    """
    if any(abs(x - p) < radius for p in poles(params)):
        return True
    try:
        y = f_map(x, "A", params, T)
    except PoleError:
        return True
    qB = params.qB
    return abs(y + qB) < radius or abs(y + 1 / qB) < radius


def _polish(x: complex, fx: complex, params: QuantumParams, T) -> complex:
    """
    Newton steps past the acceptance tolerance while |f| keeps shrinking.

    Images 1/x of small roots have |f(1/x)| ~ |f(x)| / |x|^2, so roots are
    driven to the rounding floor rather than just below ``tol``.
    """
    for _ in range(POLISH_STEPS):
        d = numerical_derivative(x, params, T)
        if d == 0 or not cmath.isfinite(d):
            break
        x_new = x - fx / d
        try:
            f_new = transcendental_residual(x_new, params, T)
        except PoleError:
            break
        if not abs(f_new) < abs(fx):
            break
        x, fx = x_new, f_new
    return x


def _polish_batch(x: np.ndarray, fx: np.ndarray, params: QuantumParams, T) -> np.ndarray:
    """Vectorised ``_polish``."""
    x, fx = x.copy(), fx.copy()
    for _ in range(POLISH_STEPS):
        h = 1e-7 * np.maximum(1.0, np.abs(x))
        d = (transcendental_residual(x + h, params, T) - transcendental_residual(x - h, params, T)) / (2 * h)
        ok = np.isfinite(d) & (d != 0)
        xn = np.where(ok, x - fx / np.where(ok, d, 1.0), x)
        fn = transcendental_residual(xn, params, T)
        better = ok & np.isfinite(fn) & (np.abs(fn) < np.abs(fx))
        if not better.any():
            break
        x = np.where(better, xn, x)
        fx = np.where(better, fn, fx)
    return x


def newton_root(x0: complex, params: QuantumParams, T, tol: float = ROOT_TOL,
                maxiter: int = MAX_NEWTON) -> complex | None:
    """
    Complex Newton iteration on f with a finite-difference derivative.

    Returns None when the iteration fails to reach |f| < tol.
    """
    x = complex(x0)
    for _ in range(maxiter):
        try:
            fx = transcendental_residual(x, params, T)
            if abs(fx) < tol:
                return _polish(x, fx, params, T)
            d = numerical_derivative(x, params, T)
        except PoleError:
            return None
        if d == 0 or not cmath.isfinite(d):
            return None
        step = fx / d
        # damp huge steps so the iterate stays near the seed
        if abs(step) > 0.5:
            step *= 0.5 / abs(step)
        x -= step
        if not cmath.isfinite(x) or abs(x) > 1e6:
            return None
    return None


def newton_batch(seeds, params: QuantumParams, T, tol: float = ROOT_TOL,
                 maxiter: int = MAX_NEWTON) -> np.ndarray:
    """
    Vectorised ``newton_root`` over an array of seeds.

    Returns an array shaped like ``seeds`` with the converged roots and NaN
    where the iteration failed.
    """
    shape = np.shape(seeds)
    x = np.array(seeds, dtype=complex).ravel()
    out = np.full(x.shape, complex(np.nan, np.nan))
    live = np.arange(x.size)
    with np.errstate(all="ignore"):
        for _ in range(maxiter + 1):
            if live.size == 0:
                break
            xl = x[live]
            fx = transcendental_residual(xl, params, T)
            h = 1e-7 * np.maximum(1.0, np.abs(xl))
            d = (transcendental_residual(xl + h, params, T)
                 - transcendental_residual(xl - h, params, T)) / (2 * h)
            ok = np.isfinite(fx) & np.isfinite(d) & (d != 0)
            step = np.where(ok, fx / np.where(ok, d, 1.0), 0.0)
            conv = ok & (np.abs(fx) < tol)
            if conv.any():
                out[live[conv]] = _polish_batch(xl[conv], fx[conv], params, T)
            size = np.abs(step)
            step = np.where(size > 0.5, step * 0.5 / np.where(size > 0.5, size, 1.0), step)
            xn = xl - step
            x[live] = xn
            live = live[ok & ~conv & np.isfinite(xn) & (np.abs(xn) < 1e6)]
    return out.reshape(shape)


@dataclass(frozen=True)
class GridSpec:
    """
    Log-polar grid on r_min <= |x| <= r_max, 0 <= arg x <= pi.

    ``n_radial`` x ``n_angular`` samples for the two-dimensional scan and
    ``n_line`` samples for each of the one-dimensional scans along the real
    axis and the unit circle (used for real or purely imaginary T).
    """

    r_min: float = 1e-3
    r_max: float = 1.0
    n_radial: int = 600
    n_angular: int = 600
    theta_min: float = 0.0
    theta_max: float = math.pi
    n_line: int = 20000

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("grid needs 0 < r_min < r_max")
        if min(self.n_radial, self.n_angular, self.n_line) < 2:
            raise ValueError("grid needs at least two samples per direction")

    def points(self) -> np.ndarray:
        r = np.geomspace(self.r_min, self.r_max, self.n_radial)
        th = np.linspace(self.theta_min, self.theta_max, self.n_angular)
        return r[:, None] * np.exp(1j * th[None, :])


@dataclass
class RootRecord:
    """A converged root x1A with continuation bookkeeping."""

    x1A: complex
    tau: complex
    branch_id: str
    origin: str = "grid-scan"
    filtered: bool = False
    reason: str = ""
    history: list = field(default_factory=list)

    def with_filter(self, reason: str) -> "RootRecord":
        return replace(self, filtered=True, reason=reason)


def _in_search_region(x: complex, tol: float = 1e-9) -> bool:
    return abs(x) <= 1 + tol and x.imag >= -tol


def _canonical(x: complex, tol: float = 1e-9) -> complex:
    """Representative of {x, x*, 1/x, 1/x*} inside the search region."""
    if abs(x) > 1 + tol:
        x = 1 / x
    if x.imag < 0:
        x = x.conjugate()
    return x


def _dedup(roots, radius: float = DEDUP_RADIUS, radii=None) -> list[complex]:
    """
    Greedy de-duplication keeping the first of every cluster.

    ``radii`` optionally widens the radius per root (e.g. to its Newton
    error estimate, which is large at multiple roots).
    """
    roots = [complex(r) for r in roots]
    if len(roots) < 2:
        return roots
    pts = np.column_stack([np.real(roots), np.imag(roots)])
    tree = cKDTree(pts)
    taken = np.zeros(len(roots), dtype=bool)
    out = []
    for i, r in enumerate(roots):
        if taken[i]:
            continue
        out.append(r)
        rad = radius if radii is None else max(radius, radii[i])
        taken[tree.query_ball_point(pts[i], rad)] = True
    return out


def _error_radius(roots, params: QuantumParams, T) -> np.ndarray:
    """10 |f/f'|: a generous bound on the distance to the true root."""
    x = np.asarray(roots, dtype=complex)
    with np.errstate(all="ignore"):
        h = 1e-7 * np.maximum(1.0, np.abs(x))
        d = (transcendental_residual(x + h, params, T) - transcendental_residual(x - h, params, T)) / (2 * h)
        r = 10 * np.abs(transcendental_residual(x, params, T) / d)
    return np.where(np.isfinite(r), r, 0.0)


def _sort_key(x: complex):
    return (round(abs(x), 9), round(cmath.phase(x), 9))


def _grid_seeds(params: QuantumParams, T, grid: GridSpec) -> np.ndarray:
    """Cell centres where both Re f and Im f change sign."""
    z = grid.points()
    f = transcendental_residual(z, params, T)
    finite = np.isfinite(f)
    re_pos = np.where(finite, f.real > 0, False)
    im_pos = np.where(finite, f.imag > 0, False)

    def changes(s):
        corners = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
        return corners.any(axis=0) & ~corners.all(axis=0)

    ok = finite[:-1, :-1] & finite[1:, :-1] & finite[:-1, 1:] & finite[1:, 1:]
    mask = changes(re_pos) & changes(im_pos) & ok
    return (z[:-1, :-1] + z[1:, :-1] + z[:-1, 1:] + z[1:, 1:])[mask] / 4


def _bracket_roots(g, t, values) -> list[float]:
    """Brent refinement of every sign change of the sampled real function g."""
    finite = np.isfinite(values)
    sign = np.sign(values)
    idx = np.flatnonzero(finite[:-1] & finite[1:] & (sign[:-1] * sign[1:] < 0))
    out = []
    for i in idx:
        try:
            out.append(brentq(g, t[i], t[i + 1], xtol=1e-15, maxiter=200))
        except (PoleError, ValueError, RuntimeError, OverflowError):
            continue
    return out


def _real_axis_seeds(params: QuantumParams, T, grid: GridSpec) -> list[complex]:
    """
    Roots on the real segment. For real or imaginary T, f is real there, so they show up
    as sign changes of f along the axis rather than as grid-cell crossings.
    """
    r = np.geomspace(grid.r_min, grid.r_max, grid.n_line)
    t = np.concatenate([-r[::-1], r])
    with np.errstate(all="ignore"):
        values = transcendental_residual(t.astype(complex), params, T).real

    def g(s):
        return transcendental_residual(complex(s), params, T).real

    return [complex(s) for s in _bracket_roots(g, t, values)]


def _unit_circle_seeds(params: QuantumParams, T, grid: GridSpec) -> list[complex]:
    """
    Roots on the upper unit semicircle. For real or imaginary T and |x| = 1, f(x) + x is
    unimodular, so roots are zeros of arg[(f(x) + x) / x].
    """
    a = np.linspace(grid.theta_min, grid.theta_max, grid.n_line)
    x = np.exp(1j * a)
    with np.errstate(all="ignore"):
        values = np.angle((transcendental_residual(x, params, T) + x) / x)
    # a jump through +-pi is a branch cut of arg, not a root
    values = np.where(np.abs(values) < math.pi / 2, values, np.nan)

    def g(s):
        z = cmath.exp(1j * s)
        return cmath.phase((transcendental_residual(z, params, T) + z) / z)

    return [cmath.exp(1j * s) for s in _bracket_roots(g, a, values)]


def _accept(candidates, params: QuantumParams, T, pole_radius: float) -> list[complex]:
    """Canonicalise, re-polish and screen Newton output."""
    cands = [_canonical(complex(c)) for c in np.ravel(candidates) if cmath.isfinite(complex(c))]
    if not cands:
        return []
    polished = newton_batch(np.array(cands), params, T)
    out = []
    for r in polished:
        r = complex(r)
        if not cmath.isfinite(r) or abs(r) < WINDOW_MIN or not _in_search_region(r):
            continue
        if near_singularity(r, params, T, pole_radius):
            continue
        out.append(r)
    return out


def scan_roots(params: QuantumParams, T, grid: GridSpec | None = None, tau=None,
               pole_radius: float = POLE_RADIUS) -> list[RootRecord]:
    """
    Roots of f in the upper half of the unit disc.

    Cells of the grid where both Re f and Im f change sign seed Newton
    iterations. For real or purely imaginary T the real axis and the unit
    circle, on which f reduces to a real function, are searched by
    bracketing as well, and
    when |s0A| = |s0B| every root x also seeds its partner f_A(x) (the set
    with the two spins exchanged). Converged roots are mapped back into the
    search region, deduplicated and returned sorted by modulus. x = 1 is
    always included.
    """
    grid = grid or GridSpec()
    if tau is None:
        tau = T / params.period
    candidates = list(newton_batch(_grid_seeds(params, T, grid), params, T))
    Tc = complex(T)
    if Tc.imag == 0 or Tc.real == 0:
        candidates += _real_axis_seeds(params, T, grid) + _unit_circle_seeds(params, T, grid)
    roots = _accept(candidates, params, T, pole_radius)
    if abs(params.qA - params.qB) < 1e-14 and roots:
        with np.errstate(all="ignore"):
            partners = f_map(np.array(roots), "A", params, T)
        roots += _accept(partners, params, T, pole_radius)
    logger.debug("scan at tau=%s: %d candidates, %d accepted", tau, len(candidates), len(roots))
    roots = [1.0 + 0j] + roots
    roots = sorted(_dedup(roots, radii=_error_radius(roots, params, T)), key=_sort_key)
    records = []
    for r in roots:
        origin = "real-root" if abs(r - 1) < DEDUP_RADIUS else "grid-scan"
        records.append(RootRecord(r, tau, _branch_name(r, tau), origin))
    return records


def _branch_name(x: complex, tau) -> str:
    if abs(x - 1) < DEDUP_RADIUS:
        return "real"
    t = complex(tau)
    ts = f"{t.real:.6f}" if t.imag == 0 else f"{t.real:.6f}{t.imag:+.6f}i"
    return f"b[{ts}]({x.real:+.8f}{x.imag:+.8f}i)"


def continue_roots(records: list[RootRecord], params: QuantumParams, tau_new,
                   max_step: float = 0.2, pole_radius: float = POLE_RADIUS,
                   window: float = WINDOW_MIN) -> list[RootRecord]:
    """
    Advance each root to ``tau_new`` by Newton iteration from its previous
    position.

    Records whose Newton iteration fails, that jump by more than
    ``max_step``, whose new position is about as close to another record's
    previous position as to their own (ambiguous identity), that land near a
    singularity or leave the window ``window <= |x| <= 1/window`` are
    returned filtered with a reason. Lost records keep their previous
    position.
    """
    T_new = params.time(tau_new)
    old = np.array([complex(r.x1A) for r in records], dtype=complex)
    new = newton_batch(old, params, T_new) if old.size else old
    tree = cKDTree(np.column_stack([old.real, old.imag])) if old.size > 1 else None
    out = []
    for i, rec in enumerate(records):
        if rec.branch_id == "real":
            out.append(replace(rec, x1A=1.0 + 0j, tau=tau_new, origin="continuation",
                               filtered=False, reason=""))
            continue
        r = complex(new[i])
        if not cmath.isfinite(r):
            out.append(replace(rec, tau=tau_new, filtered=True, reason="lost: newton diverged"))
            continue
        moved = abs(r - old[i])
        if moved > max_step:
            out.append(replace(rec, tau=tau_new, filtered=True, reason="lost: jumped"))
            continue
        if tree is not None and moved > 1e-12:
            dist, idx = tree.query([r.real, r.imag], k=2)
            other = dist[1] if idx[0] == i else dist[0]
            if other < 2 * moved:
                out.append(replace(rec, tau=tau_new, filtered=True, reason="lost: ambiguous"))
                continue
        if not window <= abs(r) <= 1 / window:
            out.append(replace(rec, x1A=r, tau=tau_new, filtered=True, reason="left window"))
            continue
        if near_singularity(r, params, T_new, pole_radius):
            out.append(replace(rec, x1A=r, tau=tau_new, filtered=True, reason="pole"))
            continue
        out.append(replace(rec, x1A=r, tau=tau_new, origin="continuation",
                           filtered=False, reason=""))
    return out


class RootRegistry:
    """
    Root families followed along a path of (possibly complex) tau values.

    One record per family {r, r*, 1/r, 1/r*}; the stored position is the
    continued representative, which may wander out of the search region.
    Families are only ever appended: lost, merged or filtered families stay
    in ``records`` with ``filtered`` set, and a root that reappears later is
    registered as a new family.

    Parameters
    ----------
    params : QuantumParams
    policy : {"scan+continue", "real-only"}
        "real-only" follows the x = 1 family alone.
    grid : GridSpec, optional
    rescan_every : float
        tau interval between fresh scans
    """

    def __init__(self, params: QuantumParams, policy: str = "scan+continue",
                 grid: GridSpec | None = None, rescan_every: float = 0.02,
                 max_step: float = 0.2, pole_radius: float = POLE_RADIUS):
        if policy not in ("scan+continue", "real-only"):
            raise ValueError(f"unknown seed policy {policy!r}")
        if rescan_every <= 0:
            raise ValueError("rescan interval must be positive")
        self.params = params
        self.policy = policy
        self.grid = grid or GridSpec()
        self.rescan_every = rescan_every
        self.max_step = max_step
        self.pole_radius = pole_radius
        self.records: dict[str, RootRecord] = {}
        self.tau = None
        self._last_scan = None
        self._count = 0

    def active(self) -> list[RootRecord]:
        return [r for r in self.records.values() if not r.filtered]

    def _new_id(self) -> str:
        self._count += 1
        return f"b{self._count:04d}"

    def start(self, tau) -> None:
        self.records = {"real": RootRecord(1.0 + 0j, tau, "real", "real-root")}
        self._count = 0
        self.tau = tau
        self._last_scan = None
        self._rescan()

    def _rescan(self) -> None:
        self._last_scan = self.tau
        if self.policy == "real-only":
            return
        T = self.params.time(self.tau)
        if T == 0:
            return
        found = scan_roots(self.params, T, self.grid, self.tau, self.pole_radius)
        live = self.active()
        known = np.array([_canonical(complex(r.x1A)) for r in live])
        tree = cKDTree(np.column_stack([known.real, known.imag])) if known.size else None
        for rec in found:
            x = complex(rec.x1A)
            if tree is not None and tree.query_ball_point([x.real, x.imag], MATCH_RADIUS):
                continue
            bid = self._new_id()
            self.records[bid] = replace(rec, branch_id=bid)

    def _merge_collisions(self) -> None:
        live = self.active()
        if len(live) < 2:
            return
        pos = np.array([_canonical(complex(r.x1A)) for r in live])
        tree = cKDTree(np.column_stack([pos.real, pos.imag]))
        for i, k in sorted(tree.query_pairs(DEDUP_RADIUS)):
            # keep the older family (real first, then by insertion order)
            older, younger = live[i], live[k]
            if younger.branch_id == "real":
                older, younger = younger, older
            if not self.records[older.branch_id].filtered:
                self.records[younger.branch_id] = replace(
                    self.records[younger.branch_id], filtered=True,
                    reason=f"merged into {older.branch_id}")

    def advance(self, tau_new) -> None:
        """Continue every live family to ``tau_new``; rescan when due."""
        if self.tau is None:
            raise RuntimeError("registry not started")
        stepped = continue_roots(self.active(), self.params, tau_new, self.max_step,
                                 self.pole_radius)
        for rec in stepped:
            self.records[rec.branch_id] = rec
        self.tau = tau_new
        self._merge_collisions()
        if abs(tau_new - self._last_scan) >= self.rescan_every - 1e-12:
            self._rescan()


def expand_symmetry(record: RootRecord, params: QuantumParams | None = None, T=None,
                    radius: float = DEDUP_RADIUS) -> list[RootRecord]:
    """
    The root together with its images x*, 1/x, 1/x*, without duplicates.

    Image records get ``origin='symmetry-image'`` and a branch id derived
    from the parent's. When params and T are given the images are checked
    to be roots.
    """
    x = complex(record.x1A)
    if x == 0:
        raise ZeroDivisionError("x = 0 has no inverse image")
    images = [("", x), ("*", x.conjugate()), ("^-1", 1 / x), ("^-1*", 1 / x.conjugate())]
    out: list[RootRecord] = []
    seen: list[complex] = []
    for tag, z in images:
        if any(abs(z - s) < radius for s in seen):
            continue
        seen.append(z)
        if params is not None and T is not None:
            res = abs(transcendental_residual(z, params, T))
            if res > 1e2 * ROOT_TOL * max(1.0, abs(z)):
                raise InconsistentRootError(f"symmetry image {z} has residual {res:.3g}")
        if tag == "":
            out.append(record)
        else:
            out.append(replace(record, x1A=z, branch_id=record.branch_id + tag,
                               origin="symmetry-image"))
    return out


@dataclass(frozen=True)
class SaddleVariables:
    """Multipliers x_k^A, x_k^B of the unknown initial coordinates (k = 1..4)."""

    xA: tuple
    xB: tuple


def saddle_variables(x1A: complex, params: QuantumParams, T) -> SaddleVariables:
    x1A = complex(x1A)
    x1B = f_map(x1A, "A", params, T)
    xA = (x1A, 1 / x1A, 1 / x1A, x1A)
    xB = (x1B, x1B, 1 / x1B, 1 / x1B)
    return SaddleVariables(xA, xB)


@dataclass(frozen=True)
class TrajectorySet:
    """
    Four trajectories (k = 1..4; 1, 3 forward, 2, 4 backward) and the
    maximum violation of the final-point constraints.
    """

    trajectories: tuple
    residual: float
    x1A: complex
    T: complex

    def __getitem__(self, k: int) -> AnalyticTrajectory:
        """1-based access."""
        return self.trajectories[k - 1]


def _fbc_residual(finals) -> float:
    f1, f2, f3, f4 = finals
    pairs = [
        (f1.vA, f4.vA), (f1.vB, f2.vB), (f2.uA, f3.uA), (f2.uB, f1.uB),
        (f3.vA, f2.vA), (f3.vB, f4.vB), (f4.uA, f1.uA), (f4.uB, f3.uB),
    ]
    return max(abs(a - b) / max(1.0, abs(a)) for a, b in pairs)


def assemble_set(x1A, params: QuantumParams, T, tol: float = FBC_TOL) -> TrajectorySet:
    """
    Build the four trajectories belonging to root ``x1A``.

    Initial conditions u'_1 = u'_3 = s0 and v'_2 = v'_4 = s0* hold exactly;
    the final-point constraints are checked and their residual stored.

    Raises
    ------
    InconsistentRootError
        if the residual exceeds ``tol``
    """
    x = saddle_variables(x1A, params, T)
    s0A, s0B = complex(params.s0A), complex(params.s0B)
    cA, cB = s0A.conjugate(), s0B.conjugate()
    initials = (
        PhasePoint(s0A, s0B, x.xA[0] * cA, x.xB[0] * cB),
        PhasePoint(x.xA[1] * s0A, x.xB[1] * s0B, cA, cB),
        PhasePoint(s0A, s0B, x.xA[2] * cA, x.xB[2] * cB),
        PhasePoint(x.xA[3] * s0A, x.xB[3] * s0B, cA, cB),
    )
    trajs = tuple(AnalyticTrajectory(p, T, params) for p in initials)
    residual = _fbc_residual([flow(p, params, T) for p in initials])
    if residual >= tol:
        raise InconsistentRootError(f"final-point residual {residual:.3g} for x1A={complex(x1A)}")
    return TrajectorySet(trajs, residual, complex(x1A), T)
