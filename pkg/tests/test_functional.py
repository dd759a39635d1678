import math

import numpy as np
import pytest

from mflab import (
    RHO_CRITICAL,
    build_torus,
    eval_functional,
    euler_lagrange_residual,
    grad_functional,
    integrate,
    jensen_gap,
    make_field,
    moser_trudinger_ratio,
    normalize_mean_zero,
    normalize_unit_mass,
    tm_sweep,
)
from mflab.errors import DegenerateMass, InvalidParameter
from mflab.fields import random_smooth, truncated_bubble

from conftest import bessel_i0, trapezoid_periodic


def test_value_zero_at_origin(grid64):
    h = make_field(grid64, 1.0)
    u = make_field(grid64, 0.0)
    rep = eval_functional(grid64, h, u, 0.0)
    assert rep.value == 0.0
    assert rep.dirichlet_term == 0.0
    assert rep.mean_term == 0.0
    assert rep.logmass_term == 0.0


def test_decomposition_identity(grid64):
    rng = np.random.default_rng(7)
    h = make_field(grid64, np.exp(random_smooth(grid64, rng, 4, 0.5).values))
    u = random_smooth(grid64, rng, 4, 0.7)
    rep = eval_functional(grid64, h, u, 2.0)
    assert rep.value == rep.dirichlet_term + rep.mean_term - rep.logmass_term
    assert rep.epsilon == 2.0


def test_gauge_invariance(grid64):
    rng = np.random.default_rng(8)
    h = make_field(grid64, np.exp(random_smooth(grid64, rng, 4, 0.5).values))
    for _ in range(3):
        u = random_smooth(grid64, rng, 5, 0.8)
        base = eval_functional(grid64, h, u, 1.0).value
        for c in (-10.0, -1.0, 1.0, 10.0):
            shifted = make_field(grid64, u.values + c)
            val = eval_functional(grid64, h, shifted, 1.0).value
            assert abs(val - base) < 1e-10


def test_cosine_value_against_series_oracle(grid64):
    h = make_field(grid64, 1.0)
    x1, _ = grid64.coords()
    u = make_field(grid64, np.cos(2 * np.pi * x1))
    rep = eval_functional(grid64, h, u, 0.0)
    expected = np.pi**2 - 8 * np.pi * math.log(bessel_i0(1.0))
    assert abs(rep.value - expected) < 1e-10


def test_epsilon_linearity(grid64):
    rng = np.random.default_rng(9)
    h = make_field(grid64, np.exp(random_smooth(grid64, rng, 4, 0.5).values))
    u = random_smooth(grid64, rng, 5, 0.8)
    e1, e2 = 0.5, 5.0
    v1 = eval_functional(grid64, h, u, e1)
    v2 = eval_functional(grid64, h, u, e2)
    ubar = integrate(grid64, u)
    lm = v1.logmass_term / (RHO_CRITICAL - e1)
    expected = (e1 - e2) * (ubar - lm)
    assert abs((v2.value - v1.value) - expected) < 1e-10


def test_constant_test_function_bound(grid64):
    # at u = 0 the value is exactly -(8 pi - eps) log int h dv
    rng = np.random.default_rng(10)
    h = make_field(grid64, np.exp(random_smooth(grid64, rng, 4, 0.5).values))
    rep = eval_functional(grid64, h, make_field(grid64, 0.0), 1.0)
    lg = math.log(integrate(grid64, h))
    assert abs(rep.value + (RHO_CRITICAL - 1.0) * lg) < 1e-12


@pytest.mark.parametrize("eps", [-0.1, RHO_CRITICAL, RHO_CRITICAL + 1, np.inf])
def test_epsilon_validation(grid64, eps):
    h = make_field(grid64, 1.0)
    u = make_field(grid64, 0.0)
    with pytest.raises(InvalidParameter):
        eval_functional(grid64, h, u, eps)


def test_weight_validation(grid64):
    u = make_field(grid64, 0.0)
    x1, _ = grid64.coords()
    with pytest.raises(InvalidParameter):
        eval_functional(grid64, make_field(grid64, np.cos(2 * np.pi * x1)),
                        u, 1.0)  # negative nodes
    with pytest.raises(InvalidParameter):
        eval_functional(grid64, make_field(grid64, 0.0), u, 1.0)


def test_grad_zero_at_critical_point(grid64):
    h = make_field(grid64, 1.0)
    u = make_field(grid64, 0.0)
    g = grad_functional(grid64, h, u, 1.0)
    assert np.max(np.abs(g.values)) < 1e-12


def test_grad_plugin_formula(grid64):
    x1, _ = grid64.coords()
    h = make_field(grid64, 1.0 + 0.5 * np.cos(2 * np.pi * x1))  # int h = 1
    u = make_field(grid64, 0.0)
    eps = 1.5
    g = grad_functional(grid64, h, u, eps)
    expected = (RHO_CRITICAL - eps) * (1.0 - h.values)
    assert np.max(np.abs(g.values - expected)) < 1e-10


def test_grad_mean_zero(grid64, grid64_conformal):
    rng = np.random.default_rng(11)
    for g in (grid64, grid64_conformal):
        h = make_field(g, np.exp(random_smooth(g, rng, 4, 0.5).values))
        u = random_smooth(g, rng, 5, 0.8)
        gr = grad_functional(g, h, u, 1.0)
        assert abs(integrate(g, gr)) < 1e-10


def test_grad_matches_finite_differences(grid64, grid64_conformal):
    rng = np.random.default_rng(12)
    eps = 1.0
    for g in (grid64, grid64_conformal):
        h = make_field(g, np.exp(random_smooth(g, rng, 4, 0.5).values))
        u = random_smooth(g, rng, 5, 0.8)
        gr = grad_functional(g, h, u, eps)
        for _ in range(5):
            d = random_smooth(g, rng, 5, 0.8)
            ip = float(np.sum(g.quad * gr.values * d.values))
            t = 1e-5
            up = make_field(g, u.values + t * d.values)
            um = make_field(g, u.values - t * d.values)
            fd = (eval_functional(g, h, up, eps).value
                  - eval_functional(g, h, um, eps).value) / (2 * t)
            assert abs(fd - ip) / max(abs(ip), abs(fd)) < 1e-6


def test_normalize_mean_zero(grid64, grid64_conformal):
    for g in (grid64, grid64_conformal):
        u = make_field(g, 5.0)
        out = normalize_mean_zero(g, u)
        assert np.max(np.abs(out.values)) < 1e-12
        rng = np.random.default_rng(13)
        v = random_smooth(g, rng, 5, 1.0)
        w = normalize_mean_zero(g, v)
        assert abs(integrate(g, w)) < 1e-12
        again = normalize_mean_zero(g, w)
        assert np.max(np.abs(again.values - w.values)) < 1e-12


def test_normalize_unit_mass(grid64):
    h1 = make_field(grid64, 1.0)
    out = normalize_unit_mass(grid64, h1, make_field(grid64, 0.0))
    assert np.max(np.abs(out.values)) < 1e-14
    h4 = make_field(grid64, 4.0)
    out4 = normalize_unit_mass(grid64, h4, make_field(grid64, 0.0))
    assert np.max(np.abs(out4.values + math.log(4.0))) < 1e-14
    rng = np.random.default_rng(14)
    u = random_smooth(grid64, rng, 5, 1.0)
    h = make_field(grid64, np.exp(random_smooth(grid64, rng, 4, 0.5).values))
    un = normalize_unit_mass(grid64, h, u)
    mass = integrate(grid64, make_field(grid64, h.values * np.exp(un.values)))
    assert abs(mass - 1.0) < 1e-12


def test_tm_ratio_constant_is_one(grid64):
    for c in (0.0, 3.0, -7.0):
        rep = moser_trudinger_ratio(grid64, make_field(grid64, c))
        assert abs(rep.tm_ratio - 1.0) < 1e-12
        assert rep.dirichlet == 0.0


def test_tm_mass_jensen_lower_bound(grid64):
    rng = np.random.default_rng(15)
    for _ in range(5):
        u = random_smooth(grid64, rng, 5, 1.5)
        rep = moser_trudinger_ratio(grid64, u)
        assert rep.mass >= 1.0 - 1e-12


def test_tm_ratio_bubbles_bounded(grid256):
    for lam in (2.0, 4.0, 6.0, 8.0):
        u = truncated_bubble(grid256, lam)
        rep = moser_trudinger_ratio(grid256, u)
        assert math.isfinite(rep.tm_ratio)
        assert 0 < rep.tm_ratio < 10.0


def test_tm_ratio_mode_sweep_finite(grid64):
    x1, _ = grid64.coords()
    for t in np.linspace(0.0, 10.0, 11):
        rep = moser_trudinger_ratio(
            grid64, make_field(grid64, t * np.cos(2 * np.pi * x1)))
        assert math.isfinite(rep.tm_ratio) and rep.tm_ratio > 0


def test_tm_sweep_structure(grid64):
    entries = tm_sweep(grid64)
    labels = [e["label"] for e in entries]
    assert labels.count("bubble") == 4
    assert all(math.isfinite(e["tm_ratio"]) for e in entries)


def test_jensen_gap(grid64):
    assert abs(jensen_gap(grid64, make_field(grid64, 3.0))) < 1e-12
    x1, _ = grid64.coords()
    gap = jensen_gap(grid64, make_field(grid64, np.cos(2 * np.pi * x1)))
    assert abs(gap - math.log(bessel_i0(1.0))) < 1e-10
    rng = np.random.default_rng(16)
    for _ in range(10):
        v = random_smooth(grid64, rng, 6, 1.2)
        assert jensen_gap(grid64, v) >= -1e-12


def test_el_residual_critical_point(grid64):
    h = make_field(grid64, 1.0)
    for eps in (0.0, 1.0, 12.0):
        r = euler_lagrange_residual(grid64, h, make_field(grid64, 0.0), eps)
        assert r < 1e-12


def test_el_residual_against_refinement_oracle(grid64):
    # u = cos(2 pi x1), h = 1, eps = 0: the residual field after unit-mass
    # normalization is R(x1) = -4 pi^2 cos - 8 pi + 8 pi e^{cos}/I0(1)
    h = make_field(grid64, 1.0)
    x1, _ = grid64.coords()
    u = make_field(grid64, np.cos(2 * np.pi * x1))
    got = euler_lagrange_residual(grid64, h, u, 0.0)
    i0 = bessel_i0(1.0)

    def rsq(x):
        c = np.cos(2 * np.pi * x)
        r = -4 * np.pi**2 * c - 8 * np.pi + 8 * np.pi * np.exp(c) / i0
        return r * r

    expected = math.sqrt(trapezoid_periodic(rsq, 16384))
    assert abs(got - expected) < 1e-8


def test_overflow_safety_large_amplitude(grid64):
    # amplitudes around 700 must evaluate without overflow
    h = make_field(grid64, 1.0)
    u = truncated_bubble(grid64, 700.0)
    rep = eval_functional(grid64, h, u, 1.0)
    assert math.isfinite(rep.value)
    un = normalize_unit_mass(grid64, h, u)
    assert np.all(np.isfinite(un.values))
    g = grad_functional(grid64, h, u, 1.0)
    assert np.all(np.isfinite(g.values))
