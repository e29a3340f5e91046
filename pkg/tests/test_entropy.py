import cmath

import numpy as np
import pytest

from spinsemi import entropy
from spinsemi.entropy import (
    CausticError,
    FilterPolicy,
    amplitude_factor,
    build_F_matrix,
    contribution,
    family_terms,
    family_value,
    image_kind,
    log_sqrt_amplitude_factor,
    purity_q_matrix,
    semiclassical_entropy,
    sqrt_amplitude_factor,
)
from spinsemi.numerics import det
from spinsemi.quantum import exact_entropy
from spinsemi.saddle import GridSpec, RootRegistry, assemble_set, scan_roots

SMALL_GRID = GridSpec(n_radial=300, n_angular=300, n_line=10000)


def same_up_to_sign(a, b, rel=1e-6):
    return min(abs(a - b), abs(a + b)) <= rel * max(abs(a), abs(b), 1e-300)


@pytest.fixture(scope="module")
def sets_03():
    from spinsemi.quantum import DEFAULT_PARAMS as p
    T = p.time(0.3)
    out = []
    for rec in scan_roots(p, T, tau=0.3):
        x = complex(rec.x1A)
        out.append((x, assemble_set(x, p, T)))
    return out


def test_F_matrix_at_zero_time_is_a_selector(params):
    tset = assemble_set(1.0, params, 0.0)
    F = build_F_matrix(tset, params)
    assert set(np.unique(F)) <= {0, 1}
    assert np.all(F.sum(axis=0) == 1) and np.all(F.sum(axis=1) == 1)
    assert det(F) == pytest.approx(1)


def test_real_set_is_the_purity_at_short_times(params):
    tau = 1e-4
    value = contribution(assemble_set(1.0, params, params.time(tau)), params).value
    assert abs(value - 1) < 1e-4
    assert abs(value - (1 - exact_entropy(params, tau))) < 1e-6


def test_real_set_at_zero_time_is_one(params):
    assert contribution(assemble_set(1.0, params, 0.0), params).value == pytest.approx(1, abs=1e-14)


def test_sqrt_amplitude_squares_to_amplitude(sets_03, params):
    for x, tset in sets_03[::7]:
        a = amplitude_factor(tset, params)
        r = sqrt_amplitude_factor(tset, params)
        if abs(a) < 1e-250 or not cmath.isfinite(a):
            continue
        assert r * r == pytest.approx(a, rel=1e-9)
        assert cmath.exp(log_sqrt_amplitude_factor(tset, params)) == pytest.approx(r, rel=1e-9)


def test_conjugate_and_inverse_images(sets_03, params):
    T = params.time(0.3)
    checked = 0
    for x, tset in sets_03:
        if abs(x) < 0.05:
            continue
        v = contribution(tset, params).value
        vc = contribution(assemble_set(x.conjugate(), params, T), params).value
        vi = contribution(assemble_set(1 / x, params, T), params).value
        assert same_up_to_sign(vc, v.conjugate())
        assert same_up_to_sign(vi, v)
        checked += 1
    assert checked >= 3


def test_Q_matrix_agrees_with_F_matrix(sets_03, params):
    real = assemble_set(1.0, params, params.time(0.05))
    assert purity_q_matrix(real, params) == pytest.approx(contribution(real, params).value, rel=1e-9)
    for x, tset in sets_03:
        v = contribution(tset, params).value
        q = purity_q_matrix(tset, params)
        assert same_up_to_sign(q, v, 1e-8)


def test_measure_weight_scaling(params):
    real = assemble_set(1.0, params, params.time(0.2))
    default = purity_q_matrix(real, params)
    literal = purity_q_matrix(real, params, measure_weight=2 * params.j + 1)
    assert literal / default == pytest.approx(((2 * params.j + 1) / (2 * params.j)) ** 4)


def test_family_terms_match_per_set_evaluation(sets_03, params):
    T = params.time(0.3)
    xs = np.array([x for x, _ in sets_03])
    det_F, log_w = family_terms(xs, params, T)
    for (x, tset), d, lw in zip(sets_03, det_F, log_w):
        c = contribution(tset, params)
        assert d == pytest.approx(c.det_F, rel=1e-9)
        assert same_up_to_sign(cmath.exp(lw) / cmath.sqrt(d), c.value, 1e-8)


def test_family_terms_flags_poles(params):
    det_F, log_w = family_terms(np.array([-1.0, 1.0]), params, params.time(0.2))
    assert np.isnan(det_F[0]) and np.isfinite(det_F[1])


def test_caustic_raises(params, monkeypatch):
    tset = assemble_set(1.0, params, params.time(0.2))
    monkeypatch.setattr(entropy, "det", lambda m: 0j)
    with pytest.raises(CausticError):
        contribution(tset, params)
    with pytest.raises(CausticError):
        purity_q_matrix(tset, params)


def test_image_kinds_and_family_values():
    assert image_kind(1.0) == "real-root"
    assert image_kind(0.4) == "real-axis"
    assert image_kind(cmath.exp(0.3j)) == "unit-circle"
    assert image_kind(0.3 + 0.2j) == "generic"
    v = 0.2 + 0.1j
    assert family_value(v, "real-root") == v
    assert family_value(v, "real-axis") == 2 * v
    assert family_value(v, "unit-circle") == pytest.approx(0.4)
    assert family_value(v, "generic") == pytest.approx(0.8)


def test_filter_policy_validation():
    FilterPolicy()
    for name in ("max_value", "growth_rate", "growth_floor", "caustic_tol", "negligible"):
        with pytest.raises(ValueError):
            FilterPolicy(**{name: 0})


def test_series_input_validation(params):
    with pytest.raises(ValueError):
        semiclassical_entropy(params, [0.2, 0.1])
    with pytest.raises(ValueError):
        semiclassical_entropy(params, [0.1, 0.2], step=0)


def test_real_only_series_matches_real_set(params):
    tau = np.linspace(0.01, 0.05, 5)
    series = semiclassical_entropy(params, tau, seed_policy="real-only")
    for t, s in zip(tau, series.semiclassical):
        v = contribution(assemble_set(1.0, params, params.time(t)), params).value
        assert s == pytest.approx(1 - v, abs=1e-12)
    assert np.all(series.n_active == 1)
    assert series.sup_error() < 0.0073 + 1e-3


def test_series_bookkeeping(params):
    tau = np.array([0.2, 0.21, 0.22])
    reg = RootRegistry(params, grid=SMALL_GRID, rescan_every=0.01)
    series = semiclassical_entropy(params, tau, registry=reg, step=2e-3)
    for i in range(tau.size):
        total = sum(np.nan_to_num(arr[i]) for arr in series.breakdown.values())
        assert 1 - series.semiclassical[i] == pytest.approx(total, abs=1e-12)
        assert abs(series.semiclassical[i].imag) < 1e-6
    assert set(series.branches) == set(series.breakdown)
    assert np.all(series.n_active >= 1)
    assert series.sup_error() < 0.05
