import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from depgof import (
    Ar1LogVolParams,
    LagCoefficients,
    LogNormalVolBasis,
    ParameterError,
    QuantileGrid,
    StochasticVolParams,
    a_tilde,
    average_self_copula,
    copula_expansion,
    expansion_surface,
    fit_lag_coefficients,
    fit_multifractal,
    gen_ar1_logvol,
    gen_iid_lognormal_vol,
    get_basis,
    marginal_cdf,
    marginal_quantile,
    r_tilde,
    vol_model_cdf,
)


def test_marginal_cdf_symmetry_and_limits():
    x = np.linspace(-8, 8, 41)
    f = marginal_cdf(x)
    assert_allclose(f + marginal_cdf(-x), 1.0, atol=1e-13)
    assert marginal_cdf(0.0) == pytest.approx(0.5, abs=1e-14)
    assert np.all(np.diff(f) > 0)
    assert marginal_cdf(60.0) > 1 - 1e-4


def test_marginal_cdf_against_direct_simulation():
    rng = np.random.default_rng(13)
    draws = rng.standard_normal(2_000_000) * np.exp(rng.standard_normal(2_000_000))
    hits = draws <= 1.0
    se = hits.std(ddof=1) / math.sqrt(hits.size)
    assert abs(marginal_cdf(1.0) - hits.mean()) < 3 * se


def test_marginal_quantile_roundtrip():
    assert marginal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)
    for u in (0.01, 0.3, 0.77, 0.99):
        assert abs(marginal_cdf(marginal_quantile(u)) - u) < 1e-10
        assert_allclose(marginal_quantile(u), -marginal_quantile(1 - u), atol=1e-10)
    with pytest.raises(ParameterError):
        marginal_quantile(0.0)
    with pytest.raises(ParameterError):
        marginal_quantile(1.5)


def test_basis_symmetries(grid, basis):
    a, r = basis.tables(grid)
    assert_allclose(a, -a[::-1], atol=1e-12)
    assert_allclose(r, r[::-1], atol=1e-12)
    assert a_tilde(0.5) == pytest.approx(0.0, abs=1e-13)
    assert_allclose(r_tilde(0.5), 1.0 / math.sqrt(2 * math.pi), atol=1e-9)
    # median consistency of the expansion with the exact arcsin relation
    assert_allclose(r_tilde(0.5) ** 2, 1.0 / (2 * math.pi), atol=1e-6)


def test_trace_table(grid, basis):
    a, r = basis.tables(grid)
    u = grid.points
    i_vals = np.minimum.outer(u, u) - np.outer(u, u)
    tr_i = grid.integrate(u * (1 - u))
    tr_a, tr_r = basis.traces(grid)
    assert_allclose(tr_i, 0.16667, atol=5e-4)
    assert_allclose(tr_a, 0.01176, atol=5e-6)
    assert_allclose(tr_r, 0.07806, atol=5e-6)
    w2 = grid.weight ** 2
    assert_allclose(np.sum(i_vals * i_vals) * w2, 111.139e-4, atol=1e-6)
    assert_allclose(np.sum(i_vals * np.outer(a, a)) * w2, 2.948e-4, atol=1e-6)
    assert_allclose(np.sum(i_vals * np.outer(r, r)) * w2, 79.067e-4, atol=1e-6)
    # Tr(B + B^T) = 2 integral A R du vanishes by parity
    assert abs(2 * grid.integrate(a * r)) < 1e-10


def test_overlaps(grid, basis):
    a, r = basis.tables(grid)
    tr_a, tr_r = basis.traces(grid)
    a2 = abs(grid.integrate(a * grid.sine_mode(2))) / math.sqrt(tr_a)
    r1 = abs(grid.integrate(r * grid.sine_mode(1))) / math.sqrt(tr_r)
    assert abs(a2 - 0.9934) < 1e-3
    assert abs(r1 - 0.9998) < 5e-4


def test_quadrature_doubling_gate(grid):
    a1, r1 = LogNormalVolBasis(nodes=384).tables(grid)
    a2, r2 = LogNormalVolBasis(nodes=768).tables(grid)
    assert np.abs(a1 - a2).max() < 1e-9
    assert np.abs(r1 - r2).max() < 1e-9


def test_copula_expansion_values(basis):
    zero = LagCoefficients(t=1, alpha=0.0, beta=0.0, rho=0.0)
    assert copula_expansion(0.3, 0.8, zero) == 0.0
    alpha_only = LagCoefficients(t=1, alpha=0.1, beta=0.0, rho=0.0)
    assert_allclose(copula_expansion(0.9, 0.9, alpha_only),
                    0.1 * basis.a_tilde(0.9) ** 2, rtol=1e-12)
    beta_only = LagCoefficients(t=1, alpha=0.0, beta=0.04, rho=0.0)
    u, v = 0.2, 0.7
    asym = copula_expansion(u, v, beta_only) - copula_expansion(v, u, beta_only)
    expected = -0.04 * (basis.r_tilde(u) * basis.a_tilde(v)
                        - basis.r_tilde(v) * basis.a_tilde(u))
    assert_allclose(asym, expected, rtol=1e-12)
    # diagonal of the leverage term
    assert_allclose(copula_expansion(0.2, 0.2, beta_only),
                    -0.04 * basis.r_tilde(0.2) * basis.a_tilde(0.2), rtol=1e-12)


def test_expansion_median_matches_blomqvist_relation(basis):
    # at the median the expansion reduces to rho R(1/2)^2 = rho/(2 pi), the
    # linearization of the exact arcsin(rho)/(2 pi) relation
    rho_only = LagCoefficients(t=1, alpha=0.0, beta=0.0, rho=0.3)
    val = copula_expansion(0.5, 0.5, rho_only)
    assert_allclose(val, 0.3 / (2 * math.pi), atol=1e-6)


def test_weak_regime_flag():
    assert not LagCoefficients(t=1, alpha=0.2, beta=0.1, rho=-0.2).outside_weak_regime
    assert LagCoefficients(t=1, alpha=0.4, beta=0.0, rho=0.0).outside_weak_regime


def test_fit_roundtrip_is_exact(grid):
    truth = LagCoefficients(t=3, alpha=0.1, beta=0.02, rho=-0.05)
    surf = expansion_surface(grid, truth)
    fitted, rms = fit_lag_coefficients(surf)
    assert abs(fitted.alpha - truth.alpha) < 1e-8
    assert abs(fitted.beta - truth.beta) < 1e-8
    assert abs(fitted.rho - truth.rho) < 1e-8
    assert rms < 1e-8
    assert fitted.t == 3


def test_fit_product_copula_gives_zero(grid):
    from depgof.copulas import CopulaSurface, product_copula

    surf = CopulaSurface(grid=grid, lag=1, values=product_copula(grid))
    fitted, rms = fit_lag_coefficients(surf)
    assert max(abs(fitted.alpha), abs(fitted.beta), abs(fitted.rho)) < 1e-10
    assert rms < 1e-10


def test_fit_requires_enough_grid_points():
    from depgof.copulas import CopulaSurface, product_copula

    small = QuantileGrid(5)
    surf = CopulaSurface(grid=small, lag=1, values=product_copula(small))
    with pytest.raises(ParameterError):
        fit_lag_coefficients(surf)


def test_fit_recovers_ar1_log_vol_covariance():
    # the empirical lag-1 surface fits its own model basis: the basis scale
    # is the stationary log-vol standard deviation
    grid = QuantileGrid(50)
    params = Ar1LogVolParams(0.88, 0.05)
    model_basis = get_basis(math.sqrt(params.stationary_var))
    panel = [gen_ar1_logvol(params, 2500, seed=300 + r) for r in range(50)]
    surf = average_self_copula(panel, 1, grid)
    fitted, _ = fit_lag_coefficients(surf, basis=model_basis)
    assert abs(fitted.alpha - 0.195) < 0.03
    assert abs(fitted.beta) < 0.03
    assert abs(fitted.rho) < 0.03


def test_multifractal_exact_recovery():
    lags = np.arange(1, 769)
    coeffs = [LagCoefficients(t=int(t), alpha=-0.046 * math.log(t / 1467.0),
                              beta=0.0, rho=0.0) for t in lags]
    fit = fit_multifractal(coeffs)
    assert_allclose(fit.sigma2, 0.046, rtol=1e-10)
    assert_allclose(fit.horizon_t, 1467.0, rtol=1e-9)
    assert fit.extrapolated          # horizon beyond the largest fitted lag
    assert not fit.degenerate
    assert fit.residual < 1e-12


def test_multifractal_flags_constant_alpha():
    coeffs = [LagCoefficients(t=t, alpha=0.05, beta=0.0, rho=0.0) for t in (1, 2, 4, 8)]
    with pytest.warns(RuntimeWarning):
        fit = fit_multifractal(coeffs)
    assert fit.degenerate
    assert abs(fit.sigma2) < 1e-12


def test_multifractal_noisy_recovery():
    rng = np.random.default_rng(14)
    lags = np.arange(1, 257)
    clean = -0.046 * np.log(lags / 1467.0)
    for _ in range(100):
        noisy = clean * (1.0 + 0.05 * rng.standard_normal(lags.size))
        coeffs = [LagCoefficients(t=int(t), alpha=float(a), beta=0.0, rho=0.0)
                  for t, a in zip(lags, noisy)]
        fit = fit_multifractal(coeffs)
        assert abs(fit.sigma2 - 0.046) / 0.046 < 0.10
        assert abs(math.log(fit.horizon_t / 1467.0)) < 0.35


def test_multifractal_input_checks():
    with pytest.raises(ParameterError):
        fit_multifractal([LagCoefficients(t=1, alpha=0.1, beta=0.0, rho=0.0)] * 2)


def test_vol_model_cdf_matches_generator():
    x = gen_iid_lognormal_vol(StochasticVolParams(0.5), 200_000, seed=15)
    xs = np.sort(x)
    f = vol_model_cdf(xs, 0.5)
    ecdf = np.arange(1, xs.size + 1) / xs.size
    assert np.abs(f - ecdf).max() < 0.005
    assert_allclose(vol_model_cdf(0.0, 0.5), 0.5, atol=1e-13)
