"""Effective variance, limit variance, and the lognormal toy identities."""

import math

import numpy as np
import pytest

from ewlab.errors import ConfigurationError, QualityError
from ewlab.fields import TestFunction
from ewlab.mollifier import MollifierSpec
from ewlab.theory import (
    EffectiveVariance,
    estimate_nu_eff_sq,
    sigma_t_sq,
    toy_gaussian_covariance,
    toy_gaussian_sigma_f,
)

M = MollifierSpec()

# ∫∫ R(x) R(y) / (2 pi |x-y|) dx dy, the first-order coefficient of the
# effective variance in beta^2/2 (frozen from two independent quadratures:
# Fourier pi^-2 ∫ phi_hat^4 dk and the real-space Newton potential)
I2 = 0.3718446067595201

# sigma_t^2 for beta^2 nu^2 = 1, unit gaussian g, t = 1 (frozen against the
# closed-form d=3 integral)
SIGMA2_GAUSS_T1 = 3.261851020802206


def test_nu_eff_beta_zero_is_integral_R():
    est = estimate_nu_eff_sq(M, 0.0, T=32.0, n_paths=200, dt=0.05, rng=1)
    assert est.nu_eff_sq == pytest.approx(1.0, abs=1e-6)
    assert est.std_error < 1e-12


def test_nu_eff_perturbative_and_monotone():
    lo = estimate_nu_eff_sq(M, 0.1, T=32.0, n_paths=3000, dt=0.02, rng=2)
    hi = estimate_nu_eff_sq(M, 0.2, T=32.0, n_paths=3000, dt=0.02, rng=2)
    # first-order expansion 1 + (beta^2/2) I2; the truncation at T=32 costs
    # about 1e-4, well inside the test tolerance
    assert lo.nu_eff_sq == pytest.approx(1.0 + 0.5 * 0.01 * I2, abs=5e-4)
    assert hi.nu_eff_sq == pytest.approx(1.0 + 0.5 * 0.04 * I2, abs=2e-3)
    # shared paths make the beta-monotonicity deterministic
    assert hi.nu_eff_sq > lo.nu_eff_sq > 1.0


def test_nu_eff_independent_control():
    est = estimate_nu_eff_sq(
        M, 0.15, T=32.0, n_paths=1500, dt=0.02, rng=3, independent_control=True
    )
    ctrl = est.diagnostics["independent_control"]
    assert ctrl == pytest.approx(est.nu_eff_sq, abs=6 * est.std_error + 5e-4)


def test_nu_eff_validation():
    with pytest.raises(ConfigurationError):
        estimate_nu_eff_sq(M, 0.6, T=32.0, n_paths=100)
    with pytest.raises(ConfigurationError):
        estimate_nu_eff_sq(M, 0.1, T=16.0, n_paths=100)


def test_sigma_t_sq_frozen_value():
    g = TestFunction("gaussian-bump", scale=1.0)
    lv = sigma_t_sq(1.0, g, 1.0, beta=1.0)
    assert lv.sigma_t_sq == pytest.approx(SIGMA2_GAUSS_T1, rel=1e-6)


def test_sigma_t_sq_scalings():
    g = TestFunction("gaussian-bump", scale=1.0)
    base = sigma_t_sq(1.0, g, 1.0, beta=0.2).sigma_t_sq
    assert sigma_t_sq(2.0, g, 1.0, beta=0.2).sigma_t_sq == pytest.approx(2 * base)
    assert sigma_t_sq(1.0, g, 1.0, beta=0.4).sigma_t_sq == pytest.approx(4 * base)
    # amplitude enters quadratically through g_hat^2
    g2 = TestFunction("gaussian-bump", scale=1.0, amplitude=2.0)
    assert sigma_t_sq(1.0, g2, 1.0, beta=0.2).sigma_t_sq == pytest.approx(
        4 * base, rel=1e-12
    )
    # EffectiveVariance carries its own beta
    ev = EffectiveVariance(1.0, 0.0, beta=0.2, truncation_T=64.0,
                           n_paths=0, n_x_nodes=0)
    assert sigma_t_sq(ev, g, 1.0).sigma_t_sq == pytest.approx(base)


def test_sigma_t_sq_small_t_slope():
    # sigma_t^2 ~ beta^2 nu^2 t ∫ g^2 as t -> 0
    g = TestFunction("gaussian-bump", scale=1.0)
    t = 1e-4
    val = sigma_t_sq(1.0, g, t, beta=1.0).sigma_t_sq
    assert val / t == pytest.approx(g.integral_sq(), rel=0.01)


def test_sigma_t_sq_monotone_saturating():
    g = TestFunction("gaussian-bump", scale=0.5)
    vals = [sigma_t_sq(1.0, g, t, beta=0.3).sigma_t_sq for t in (1.0, 4.0, 16.0, 64.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # saturates: increments shrink (the k^-2 tail contributes ~ t^(-1/2))
    assert vals[3] - vals[2] < vals[1] - vals[0]
    with pytest.raises(ConfigurationError):
        sigma_t_sq(1.0, g, 0.0, beta=0.3)


def test_toy_sigma_f_closed_values():
    assert toy_gaussian_sigma_f(lambda y: y) == pytest.approx(1.0, abs=1e-10)
    assert toy_gaussian_sigma_f(np.log) == pytest.approx(1.0, abs=1e-10)
    assert toy_gaussian_sigma_f(lambda y: np.log(y) - y) == pytest.approx(0.0, abs=1e-10)
    assert toy_gaussian_sigma_f(lambda y: y**2) == pytest.approx(2 * math.e, rel=1e-10)
    assert toy_gaussian_sigma_f(lambda y: y**3) == pytest.approx(
        3 * math.e**3, rel=1e-9
    )
    # explicit derivative must agree with the complex-step route
    a = toy_gaussian_sigma_f(lambda y: y**2, lambda y: 2 * y)
    b = toy_gaussian_sigma_f(lambda y: y**2)
    assert a == pytest.approx(b, rel=1e-12)


def test_toy_sigma_f_rejects_rough_f():
    with pytest.raises(QualityError):
        toy_gaussian_sigma_f(lambda y: np.abs(y - 1.0))


def test_toy_covariance():
    for delta in (0.1, 0.04, 0.01):
        assert toy_gaussian_covariance(lambda y: y, delta) == pytest.approx(
            math.expm1(delta) / delta, rel=1e-8
        )
    # log is exactly linear in the Gaussian, so Cov/delta = 1 at every delta
    assert toy_gaussian_covariance(np.log, 0.07) == pytest.approx(1.0, abs=1e-10)
    # small delta approaches sigma_f^2 (= 4 e^2 for f = y^2)
    assert toy_gaussian_covariance(lambda y: y**2, 0.01) == pytest.approx(
        4 * math.e**2, rel=0.05
    )
    with pytest.raises(ConfigurationError):
        toy_gaussian_covariance(lambda y: y, 0.0)
    with pytest.raises(ConfigurationError):
        toy_gaussian_covariance(lambda y: y, 0.2)
