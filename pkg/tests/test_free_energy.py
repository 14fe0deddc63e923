import math

import numpy as np
import pytest

from ipdsaw.entropy import NotConvergedError, SpectralEntropy
from ipdsaw.free_energy import (
    FREE_ENERGY_COLUMNS,
    classify,
    critical_point,
    excess_free_energy,
    finite_size_bound,
    finite_size_free_energy,
    phi,
    polynomial_critical_point,
    transition_order_fit,
    variational_objective,
)
from ipdsaw.lattice import ModelKind, count_paths
from ipdsaw.walk import gamma, log_c_beta, log_gamma

MODELS = list(ModelKind)


@pytest.fixture(scope="module")
def beta_c():
    return {m: critical_point(m).beta_c for m in MODELS}


def test_two_site_free_energy():
    for beta in (0.4, 1.0, 3.0):
        assert finite_size_free_energy(2, beta, "u").f == pytest.approx(0.0, abs=1e-13)
        assert finite_size_free_energy(2, beta, "nu").f == pytest.approx(0.5 * math.log(4 / 9), abs=1e-13)


def test_finite_size_nondecreasing_along_doubling():
    fs = [finite_size_free_energy(L, 1.0, "nu").f for L in (8, 16, 32)]
    assert fs[0] <= fs[1] + 1e-12 and fs[1] <= fs[2] + 1e-12


@pytest.mark.parametrize("model", MODELS)
def test_upper_bound_f_le_beta(model):
    for beta in (0.3, 1.0, 2.5):
        for L in (2, 10, 50, 120):
            assert finite_size_free_energy(L, beta, model).f <= beta


def test_classify():
    assert classify(0.0) == "collapsed"
    assert classify(5e-10) == "collapsed"
    assert classify(1e-9) == "critical-window"
    assert classify(1e-8) == "critical-window"
    assert classify(1e-7) == "extended"


def test_phi_values():
    assert phi("u", 1.0) == pytest.approx(1 - math.log(1 + math.sqrt(2)))
    assert phi("nu", 1.0) == pytest.approx(1 - math.log(2))


@pytest.mark.parametrize("model", MODELS)
def test_objective_endpoints(model, beta_c):
    beta = 0.9
    g = SpectralEntropy(beta, 64)
    assert variational_objective(0.0, beta, model, g) == 0.0
    assert variational_objective(1.0, beta, model, g) == pytest.approx(
        log_gamma(model, beta) - log_c_beta(beta), abs=1e-12)
    b = beta_c[model]
    vals = variational_objective(np.linspace(0, 1, 101), b, model, SpectralEntropy(b, 64))
    assert np.all(vals <= 1e-12)
    with pytest.raises(ValueError):
        variational_objective(1.5, beta, model, g)


@pytest.mark.parametrize("model", MODELS)
def test_phase_examples(model, beta_c):
    b = beta_c[model]
    hi = excess_free_energy(b + 0.5, model)
    assert hi.f_excess <= 1e-9 and hi.phase == "collapsed"
    lo = excess_free_energy(b - 0.3, model)
    assert lo.f_excess > 0 and lo.phase == "extended"
    assert lo.f == pytest.approx(lo.f_excess + phi(model, b - 0.3))
    assert lo.g_bracket is not None and lo.g_bracket[0] <= (1 - lo.alpha_star) / lo.alpha_star
    assert lo.argmax_diameter >= 0


@pytest.mark.parametrize("model", MODELS)
def test_alpha_star_bounded_away_from_zero(model, beta_c):
    for eps in (0.2, 0.35, 0.5):
        assert excess_free_energy(beta_c[model] - eps, model).alpha_star > 0.01


@pytest.mark.parametrize("model", MODELS)
def test_finite_size_cross_check(model, beta_c):
    """f_L - phi <= f_excess + (1/L) log(c / Gamma) + (1/L) log L at L = 64."""
    for eps in (0.1, 0.3, 0.5):
        beta = beta_c[model] - eps
        pt = excess_free_energy(beta, model)
        fl = finite_size_free_energy(64, beta, model)
        assert fl.f_excess <= pt.f_excess + finite_size_bound(64, beta, model)
        assert fl.f_excess <= pt.f_excess + math.log(math.exp(log_c_beta(beta)) * 64) / 64


@pytest.mark.parametrize("model", MODELS)
def test_finite_size_consistency(model, beta_c):
    for beta in (0.6, beta_c[model], 2.0):
        pt = excess_free_energy(beta, model, SpectralEntropy(beta))
        gaps = [abs(finite_size_free_energy(L, beta, model).f - (phi(model, beta) + pt.f_excess)) for L in (48, 96)]
        assert gaps[1] < gaps[0]


def test_critical_points():
    nu = critical_point("nu")
    assert abs(nu.beta_c - 1.0) < 0.05
    assert nu.beta_c == pytest.approx(1.0007, abs=1e-4)
    assert abs(nu.beta_c - nu.beta_c_polynomial) <= 1e-10
    assert nu.residual < 1e-12
    u = critical_point("u")
    assert u.beta_c == pytest.approx(1.2188, abs=1e-3)
    assert abs(u.beta_c - polynomial_critical_point("u")) <= 1e-10
    assert u.residual < 1e-12
    for cp in (nu, u):
        assert gamma(cp.model, cp.beta_c) == pytest.approx(1.0, abs=1e-12)


def test_cubic_residual():
    x = math.exp(critical_point("nu").beta_c / 2)
    assert abs(3 * x ** 3 - 3 * x ** 2 - 2 * x - 2) < 1e-12


@pytest.mark.parametrize("model", MODELS)
def test_order_fit_spectral(model):
    fit = transition_order_fit(model, [0.1, 0.15, 0.2, 0.3, 0.4],
                               lambda b: SpectralEntropy(b, 128))
    assert 1.3 <= fit.slope <= 1.7
    assert all(a < b for a, b in zip(fit.f_excess, fit.f_excess[1:]))


def test_order_fit_refusals():
    with pytest.raises(ValueError):
        transition_order_fit("nu", [0.01, 0.1])
    with pytest.raises(NotConvergedError):
        transition_order_fit("nu", [0.1, 0.2], lambda b: SpectralEntropy(b, 32), floor=1.0)


def test_row_columns():
    pt = excess_free_energy(0.8, "nu", SpectralEntropy(0.8, 64))
    row = pt.row()
    assert tuple(row) == FREE_ENERGY_COLUMNS
    assert row["L_or_inf"] == "inf"
    assert finite_size_free_energy(10, 0.8, "u").row()["L_or_inf"] == 10


def test_exact_count_used_for_uniform_phi():
    # log Z^u = beta L - log|W_L| + ...: at beta -> large the zigzag dominates
    L = 36
    f = finite_size_free_energy(L, 6.0, "u").f
    assert f <= 6.0
    assert f >= (6.0 * (L - 2 * math.sqrt(L)) - math.log(count_paths(L))) / L
