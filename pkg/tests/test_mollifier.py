"""Mollifier normalization, covariance table, and radial Fourier transform."""

import numpy as np
import pytest

from ewlab.errors import ConfigurationError
from ewlab.mollifier import MollifierSpec, covariance_R, integral_R

# frozen reference values, computed by independent quadrature before the
# implementation (scipy tplquad / dblquad cross-checks)
RAW_MASS = 0.05513611090957588  # ∫ exp(-1/(1-|x|^2 a^-2)) dx at a=1/2
NORM_CONST = 18.136933916866614
R_AT_ZERO = 3.9516037456533364  # ∫ phi^2
R_AT_03 = 2.0532894847311  # R(0.3)
PHAT = {3.0: 0.88033347, 2 * np.pi: 0.55425095, 10.883: 0.10839131}


def test_unit_mass_normalization():
    m = MollifierSpec()
    assert m.constant == pytest.approx(NORM_CONST, rel=1e-10)
    assert m.constant == pytest.approx(1.0 / RAW_MASS, rel=1e-12)
    assert m.integral_phi() == pytest.approx(1.0, abs=1e-10)


def test_integral_R_is_one():
    assert integral_R(MollifierSpec()) == pytest.approx(1.0, abs=1e-8)


def test_R_values_and_support():
    m = MollifierSpec()
    t = m.tables()
    assert t.R0 == pytest.approx(R_AT_ZERO, rel=1e-9)
    assert covariance_R(m, 0.3) == pytest.approx(R_AT_03, rel=1e-7)
    # symmetric and supported on |x| < 2 * support_radius
    r = np.linspace(0, 1.5, 50)
    vals = covariance_R(m, r)
    assert np.all(vals[r >= 1.0] == 0.0)
    assert np.all(vals[r < 1.0] >= 0.0)
    assert np.allclose(covariance_R(m, -r), vals)
    # monotone decreasing in radius (away from the support edge, where the
    # values underflow and the spline can wiggle at the 1e-15 level)
    body = covariance_R(m, np.linspace(0, 0.9, 40))
    assert np.all(np.diff(body) < 0)


def test_covariance_accepts_points():
    m = MollifierSpec()
    x = np.array([0.18, -0.12, 0.21])
    assert covariance_R(m, x) == pytest.approx(
        float(covariance_R(m, np.linalg.norm(x)))
    )
    pts = np.random.default_rng(0).normal(size=(7, 3)) * 0.3
    radii = np.linalg.norm(pts, axis=-1)
    assert np.allclose(covariance_R(m, pts), covariance_R(m, radii))


def test_explicit_normalization_scales_R_quadratically():
    base = MollifierSpec()
    doubled = MollifierSpec(normalization=2.0 * base.constant)
    r = np.linspace(0, 0.9, 20)
    assert np.allclose(
        covariance_R(doubled, r), 4.0 * covariance_R(base, r), rtol=1e-12
    )
    assert integral_R(doubled) == pytest.approx(4.0, rel=1e-8)


def test_phi_hat_table():
    t = MollifierSpec().tables()
    assert t.phi_hat(np.array([0.0])) == pytest.approx(1.0, abs=1e-10)
    for k, v in PHAT.items():
        assert t.phi_hat(np.array([k]))[0] == pytest.approx(v, abs=2e-7)
    # beyond the table the transform is treated as zero
    assert t.phi_hat(np.array([500.0]))[0] == 0.0
    # even in k
    ks = np.array([1.0, 4.0])
    assert np.allclose(t.phi_hat(-ks), t.phi_hat(ks))


def test_validation():
    with pytest.raises(ConfigurationError):
        MollifierSpec(profile="tophat")
    with pytest.raises(ConfigurationError):
        MollifierSpec(support_radius=0.0)
    with pytest.raises(ConfigurationError):
        MollifierSpec(dim=2)
    with pytest.raises(ConfigurationError):
        MollifierSpec(normalization=-1.0)
