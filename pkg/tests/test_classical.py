import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import simpson

from spinsemi.classical import (
    AnalyticTrajectory,
    ChartSingularityError,
    PhasePoint,
    StabilityBlocks,
    action_ingredients,
    classical_hamiltonian,
    critical_tau,
    critical_time,
    det_M_star,
    det_M_star_closed_form,
    exponents,
    flow,
    real_point,
    stability,
    vector_field,
    verify_variaS,
)
from spinsemi.numerics import det, finite_difference_jacobian
from spinsemi.quantum import QuantumParams, binomial_weights

GENERIC = QuantumParams(j=2.5, s0A=0.6 + 0.3j, s0B=1.3 - 0.2j, lam=0.8)


def random_point(rng, scale=0.4, centre=None):
    c = np.ones(4, dtype=complex) if centre is None else centre
    return PhasePoint.from_vector(c + scale * (rng.standard_normal(4) + 1j * rng.standard_normal(4)))


def jz_symbol(u, v, j):
    """<v*|Jz|u> / <v*|u> for unnormalised coherent states, from the matrix elements."""
    two_j = int(2 * j)
    n = np.arange(two_j + 1)
    w = binomial_weights(two_j) * (u * v) ** n
    return np.sum(w * (n - j)) / np.sum(w)


def test_hamiltonian_matches_matrix_element_symbol(rng, params):
    for _ in range(10):
        p = random_point(rng)
        expected = params.lam * params.hbar * jz_symbol(p.uA, p.vA, params.j) * jz_symbol(p.uB, p.vB, params.j)
        assert classical_hamiltonian(p, params) == pytest.approx(expected, rel=1e-12)


def test_hamiltonian_special_points(params):
    assert classical_hamiltonian(PhasePoint(0, 0, 0, 0), params) == pytest.approx(params.j ** 2)
    assert abs(classical_hamiltonian(real_point(params), params)) < 1e-15


def test_chart_singularity():
    with pytest.raises(ChartSingularityError):
        PhasePoint(1.0, 0.0, -1.0, 0.0)


def _eom_rhs(p, params):
    """du/dt = -(i/hbar) (1+uv)^2/(2j) dH/dv, dv/dt = +(i/hbar) (1+uv)^2/(2j) dH/du."""
    z = p.as_vector()

    def ham(w):
        return np.array([classical_hamiltonian(PhasePoint.from_vector(w), params)])

    grad = finite_difference_jacobian(ham, z, 1e-6)[0]
    fa = (1 + p.pA) ** 2 / (2 * params.j)
    fb = (1 + p.pB) ** 2 / (2 * params.j)
    c = 1j / params.hbar
    return np.array([-c * fa * grad[2], -c * fb * grad[3], c * fa * grad[0], c * fb * grad[1]])


def test_flow_satisfies_equations_of_motion(rng, params):
    for _ in range(5):
        p0 = random_point(rng)
        t = 0.3
        h = 1e-6
        deriv = (flow(p0, params, t + h).as_vector() - flow(p0, params, t - h).as_vector()) / (2 * h)
        pt = flow(p0, params, t)
        assert np.max(np.abs(deriv - _eom_rhs(pt, params))) < 1e-6 * max(1, np.max(np.abs(deriv)))
        assert np.allclose(vector_field(pt, params), deriv, atol=1e-6)


def test_flow_conserves_products_and_composes(rng):
    p0 = random_point(rng)
    for t in (0.0, 0.35, 0.7, 0.4 + 0.2j):
        pt = flow(p0, GENERIC, t)
        assert abs(pt.pA - p0.pA) < 1e-12 and abs(pt.pB - p0.pB) < 1e-12
    a = flow(flow(p0, GENERIC, 0.3), GENERIC, 0.45 - 0.1j)
    b = flow(p0, GENERIC, 0.75 - 0.1j)
    assert np.allclose(a.as_vector(), b.as_vector(), atol=1e-12)
    assert flow(p0, GENERIC, 0) == p0


def test_equator_is_fixed_point(params):
    p = real_point(params)
    assert exponents(p, params) == (0, 0)
    assert flow(p, params, 3.7) == p


def test_real_sector_preserved_for_real_time():
    p = real_point(GENERIC)
    assert p.is_real_sector()
    assert flow(p, GENERIC, 2.1).is_real_sector(1e-12)
    assert not flow(p, GENERIC, 2.1j).is_real_sector(1e-6)


@pytest.mark.parametrize("T", [0.1, 0.5, 0.3 - 0.2j])
def test_stability_matches_finite_differences(rng, T):
    for _ in range(5):
        p0 = random_point(rng)
        fd = finite_difference_jacobian(lambda z: flow(PhasePoint.from_vector(z), GENERIC, T).as_vector(),
                                        p0.as_vector(), 1e-6)
        an = stability(p0, GENERIC, T).full()
        assert np.max(np.abs(fd - an)) < 1e-6 * max(1.0, np.max(np.abs(an)))


def test_stability_identity_at_zero_time(rng):
    m = stability(random_point(rng), GENERIC, 0.0).full()
    assert np.allclose(m, np.eye(4))


def test_stability_real_trajectory_cross_term(params):
    T = 0.8
    m = stability(real_point(params), params, T)
    assert np.allclose(np.diag(m.Muu), 1)
    assert m.Muu[0, 1] == pytest.approx(-0.5j * params.lam * params.j * T)


def test_stability_composition(rng):
    p0 = random_point(rng)
    t1, t2 = 0.3, 0.25 + 0.1j
    m1 = stability(p0, GENERIC, t1).full()
    m2 = stability(flow(p0, GENERIC, t1), GENERIC, t2).full()
    assert np.allclose(stability(p0, GENERIC, t1 + t2).full(), m2 @ m1, atol=1e-9)


def test_blocks_round_trip(rng):
    m = stability(random_point(rng), GENERIC, 0.4)
    again = StabilityBlocks.from_full(m.full())
    assert np.array_equal(again.full(), m.full())
    assert np.array_equal(m.star().star().full(), m.full())


@given(st.lists(st.complex_numbers(max_magnitude=0.5, allow_nan=False, allow_infinity=False),
                min_size=4, max_size=4),
       st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False))
def test_det_stability_closed_form_ratio(kick, T):
    p0 = PhasePoint.from_vector(np.ones(4) + np.array(kick))
    pf = flow(p0, GENERIC, T)
    ratio = ((1 + pf.pA) ** 2 * (1 + pf.pB) ** 2) / ((1 + p0.pA) ** 2 * (1 + p0.pB) ** 2)
    m = stability(p0, GENERIC, T).full()
    assert abs(det(m) - ratio) < 1e-10 * max(1.0, np.max(np.abs(m)) ** 4)


def _quadrature(traj, params, n=2001):
    """Composite Simpson along t = s T of the integrands of the action pieces."""
    s = np.linspace(0, 1, n)
    T = traj.T
    h = 1e-6
    chi_terms, ham, div = [], [], []
    for si in s:
        t = si * T
        p = traj.at(t)
        dp = (traj.at(t + h * T).as_vector() - traj.at(t - h * T).as_vector()) / (2 * h * T)
        u_a, u_b, v_a, v_b = p.as_vector()
        chi = (dp[0] * v_a - u_a * dp[2]) / (1 + p.pA) + (dp[1] * v_b - u_b * dp[3]) / (1 + p.pB)
        chi_terms.append(chi)
        ham.append(classical_hamiltonian(p, params))
        # divergence of the flow, from finite differences of the vector field
        jac = finite_difference_jacobian(lambda z: vector_field(PhasePoint.from_vector(z), params),
                                         p.as_vector(), 1e-6)
        div.append(jac[0, 0] - jac[2, 2] + jac[1, 1] - jac[3, 3])
    integral = T * simpson(1j * params.hbar * params.j * np.array(chi_terms) - np.array(ham), x=s)
    g = T * simpson(np.array(div), x=s)
    return integral, g


@pytest.mark.parametrize("T", [0.6, 0.5 + 0.3j])
def test_action_ingredients_against_quadrature(rng, T):
    for _ in range(2):
        traj = AnalyticTrajectory(random_point(rng, 0.3), T, GENERIC)
        integral, div = _quadrature(traj, GENERIC)
        for xi in (1, -1):
            ing = action_ingredients(traj, GENERIC, xi)
            assert abs(ing.action_integral - integral) < 1e-9 * max(1.0, abs(integral))
            expected_g = 1j * GENERIC.hbar * xi / 4 * div
            assert abs(ing.g_correction - expected_g) < 1e-8 * max(1.0, abs(expected_g))


def test_action_ingredients_sign_structure(rng):
    traj = AnalyticTrajectory(random_point(rng), 0.7, GENERIC)
    plus = action_ingredients(traj, GENERIC, "+")
    minus = action_ingredients(traj, GENERIC, "-")
    assert plus.g_correction == pytest.approx(-minus.g_correction)
    assert plus.action_integral == minus.action_integral
    # only the xi-odd part flips; the boundary term -i hbar j Lambda is common
    assert plus.action - minus.action == pytest.approx(2 * plus.action_integral)
    with pytest.raises(ValueError):
        action_ingredients(traj, GENERIC, 0)


def test_action_ingredients_trivial_cases(params):
    traj = AnalyticTrajectory(real_point(params), 1.3, params)
    ing = action_ingredients(traj, params, 1)
    assert ing.action_integral == 0 and ing.g_correction == 0
    assert ing.lambda_tilde == pytest.approx(4 * math.log(2))
    zero = action_ingredients(AnalyticTrajectory(real_point(GENERIC), 0.0, GENERIC), GENERIC, -1)
    assert zero.action_integral == 0 and zero.g_correction == 0


@pytest.mark.parametrize("xi", [1, -1])
def test_variaS_identities(rng, params, xi):
    report = verify_variaS(AnalyticTrajectory(real_point(params), 0.9, params), params, xi)
    assert report["max"] < 1e-8
    traj = AnalyticTrajectory(random_point(rng, 0.3), 0.2, GENERIC)
    assert verify_variaS(traj, GENERIC, xi)["max"] < 1e-6


def test_det_M_star_closed_form(params):
    p0 = real_point(params)
    for tau in np.linspace(0, 1, 21):
        T = params.time(tau)
        assert det_M_star(p0, params, T) == pytest.approx(1 + 20.25 * T ** 2, rel=1e-12)
    assert det_M_star(p0, params, 0.0) == 1
    with pytest.raises(ValueError):
        det_M_star(PhasePoint(1, 1, 0.5, 1), params, 1.0)


def test_critical_time(params):
    assert critical_time(params) == pytest.approx(1j / 4.5)
    assert critical_tau(params) == pytest.approx(1j / (9 * math.pi))
    assert abs(det_M_star_closed_form(params, critical_time(params))) < 1e-12
    p = GENERIC
    assert abs(det_M_star(real_point(p), p, critical_time(p))) < 1e-10
