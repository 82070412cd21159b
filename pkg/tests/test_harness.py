"""Spatially averaged observables and the experiment aggregation steps."""

import math

import numpy as np
import pytest

from ewlab.errors import ConfigurationError, QualityError
from ewlab.fields import LatticeField, LatticeGrid, TestFunction
from ewlab.harness import (
    FluctuationSample,
    apply_f,
    block_smooth,
    compute_X_eps,
    covariance_profile,
    covariance_rows,
    estimate_sigma_f,
    fluctuation_grid,
    normality_report,
    run_covariance_realization,
    run_fluctuation_realization,
    variance_scaling_rows,
)
from ewlab.mollifier import MollifierSpec
from ewlab.rng import RngStreamKey

M = MollifierSpec()


def _ones_field(n=64, spacing=0.5):
    grid = LatticeGrid(3, spacing, n)
    return LatticeField(grid, np.ones(grid.shape))


def test_apply_f():
    u = np.array([0.5, 2.0, 1e-12])
    out, clamped = apply_f(u, "log")
    assert clamped == 1
    assert out[0] == pytest.approx(math.log(0.5))
    out, clamped = apply_f(u, "square")
    assert clamped == 0
    assert np.allclose(out, u * u)
    with pytest.raises(ConfigurationError):
        apply_f(u, "cube")


def test_compute_X_eps_on_flat_field():
    # scale 0.5 keeps the full 7.4-sigma support inside the eps-scaled box
    g = TestFunction("gaussian-bump", scale=0.5)
    field = _ones_field()
    eps = 0.25
    x_id = compute_X_eps(field, g, eps, "identity")
    assert x_id == pytest.approx(g.integral(), rel=1e-6)
    assert compute_X_eps(field, g, eps, "log") == 0.0
    assert compute_X_eps(field, g, eps, "log-minus-y") == pytest.approx(-x_id)
    # amplitude is a plain multiplier of the statistic
    g2 = TestFunction("gaussian-bump", scale=0.5, amplitude=2.0)
    assert compute_X_eps(field, g2, eps, "identity") == pytest.approx(
        2 * x_id, rel=1e-12
    )


def test_compute_X_eps_clamp_budget():
    field = _ones_field(n=16)
    vals = field.values.copy()
    vals.ravel()[:100] = 0.0  # 2.4% of cells, beyond the 0.1% budget
    bad = LatticeField(field.grid, vals)
    g = TestFunction("gaussian-bump", scale=1.0)
    with pytest.raises(QualityError):
        compute_X_eps(bad, g, 0.25, "log")
    # fine for f that does not need positivity
    compute_X_eps(bad, g, 0.25, "identity")


def test_estimate_sigma_f():
    s = estimate_sigma_f("identity", np.ones(32))
    assert (s.value, s.std_error) == (1.0, 0.0)
    # lognormal draws: f = log gives f'(Z) Z = 1 identically
    x = RngStreamKey(5).generator().normal(size=(40, 50))
    z = np.exp(x - 0.5)
    s_log = estimate_sigma_f("log", z)
    assert (s_log.value, s_log.std_error) == (1.0, 0.0)
    s_lmy = estimate_sigma_f("log-minus-y", z)
    assert abs(s_lmy.value - 0.0) < 3 * s_lmy.std_error + 1e-3
    s_sq = estimate_sigma_f("square", z)
    assert abs(s_sq.value - 2 * math.e) < 5 * s_sq.std_error
    with pytest.raises(ConfigurationError):
        estimate_sigma_f("cube", z)


def test_fluctuation_grid_ladder():
    g = TestFunction("gaussian-bump", scale=0.125)
    sizes = [fluctuation_grid(eps, 1.0, g).n_cells for eps in (0.5, 0.25, 0.125)]
    # each rung needs roughly double the box of the previous one
    assert sizes[0] < sizes[1] < sizes[2]
    assert sizes[1] >= 2 * sizes[0] - 8
    assert sizes[2] >= 2 * sizes[1] - 8
    with pytest.raises(ConfigurationError):
        fluctuation_grid(0.01, 1.0, g, max_cells=64)


def test_variance_scaling_rows():
    gen = RngStreamKey(6).generator()
    samples = {
        eps: FluctuationSample(eps, 1.0, "log", gen.normal(0, math.sqrt(eps), 500))
        for eps in (0.5, 0.25)
    }
    rows = variance_scaling_rows(samples, {0.5: 1.0, 0.25: 1.0}, seed=1)
    assert [r["eps"] for r in rows] == [0.5, 0.25]
    for r in rows:
        # Var = eps, so the rescaled variance is 1 up to sampling noise
        assert r["var_X_rescaled"] == pytest.approx(1.0, rel=0.2)
        assert r["var_ci_lo"] < r["var_X_rescaled"] < r["var_ci_hi"]
        assert r["ratio"] == pytest.approx(r["var_X_rescaled"], rel=1e-12)
        assert r["n"] == 500


def test_normality_report():
    gen = RngStreamKey(7).generator()
    good = FluctuationSample(0.125, 1.0, "log", gen.normal(2.0, 3.0, 400))
    rep = normality_report(good, seed=2)
    assert rep["ks_p"] > 0.01
    assert rep["skew_ci_lo"] <= 0.0 <= rep["skew_ci_hi"]
    bad = FluctuationSample(0.125, 1.0, "log", gen.exponential(size=400))
    rep_bad = normality_report(bad, seed=2)
    assert rep_bad["ks_p"] < 1e-6
    assert rep_bad["skew_ci_lo"] > 0.5
    with pytest.raises(ConfigurationError):
        normality_report(FluctuationSample(0.5, 1.0, "log", np.ones(50)))


def test_block_smooth():
    gen = RngStreamKey(8).generator()
    w = gen.normal(size=(8, 8, 8))
    assert block_smooth(w, 1) is w
    sm = block_smooth(w, 2)
    assert sm.mean() == pytest.approx(w.mean(), abs=1e-12)
    assert sm.var() < w.var()
    assert np.allclose(block_smooth(np.ones((4, 4, 4)), 2), 1.0)


def test_covariance_profile_cosine_field():
    n = 16
    x = np.arange(n)
    w = np.cos(2 * np.pi * x / n)[:, None, None] * np.ones((1, n, n))
    prof = covariance_profile(w, offsets=(2, 4), block=1)
    assert prof["mean"] == pytest.approx(0.0, abs=1e-12)
    for o in (2, 4):
        # one axis contributes cos(2 pi o / n)/2, the other two 1/2 each
        expect = (2 * 0.5 * math.cos(2 * math.pi * o / n) + 4 * 0.5) / 6.0
        assert prof[o] == pytest.approx(expect, abs=1e-12)
    with pytest.raises(ConfigurationError):
        covariance_profile(w, offsets=(0,))


def test_covariance_rows():
    profiles = [
        {"identity": {"mean": 1.0, 2: 1.2}},
        {"identity": {"mean": 1.0, 2: 0.8}},
    ]
    rows = covariance_rows(profiles, offsets=(2,), f_tags=("identity",))
    assert rows[0]["cov"] == pytest.approx(0.0, abs=1e-12)
    assert rows[0]["cov_se"] == pytest.approx(0.2)  # std([1.2, 0.8]) / sqrt(2)
    assert rows[0]["f_tag"] == "identity"
    with pytest.raises(ConfigurationError):
        covariance_rows(profiles[:1], offsets=(2,))


def test_run_fluctuation_realization_deterministic():
    g = TestFunction("gaussian-bump", scale=0.25)
    grid = LatticeGrid(3, 0.5, 16)
    kw = dict(eps=0.5, t=0.25, g=g, beta=0.2, grid=grid, mollifier=M,
              dt=0.03125, seed=11)
    a = run_fluctuation_realization(index=0, **kw)
    b = run_fluctuation_realization(index=0, **kw)
    assert a == b
    c = run_fluctuation_realization(index=1, **kw)
    assert a["log"] != c["log"]
    assert set(a) == {"log", "identity", "log-minus-y"}


def test_run_fluctuation_realization_mean():
    # E[u] = 1 exactly, so the identity statistic averages to the Riemann
    # sum of g over realizations
    g = TestFunction("gaussian-bump", scale=0.25)
    grid = LatticeGrid(3, 0.5, 16)
    flat = compute_X_eps(LatticeField(grid, np.ones(grid.shape)), g, 0.5, "identity")
    vals = np.array([
        run_fluctuation_realization(0.5, 0.25, g, 0.3, grid, M, 0.03125, 13, i,
                                    f_tags=("identity",))["identity"]
        for i in range(40)
    ])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - flat) < 5 * se


def test_run_covariance_realization_smoke():
    grid = LatticeGrid(3, 1.0, 16)
    out = run_covariance_realization(
        beta=0.3, T=2.0, grid=grid, mollifier=M, dt=0.125, seed=19, index=0,
        offsets=(2, 4), block=2,
    )
    assert set(out) == {"identity", "square"}
    for tag in out:
        assert set(out[tag]) == {"mean", 2, 4}
    # short-range positive correlation of the field itself
    assert out["identity"][2] - out["identity"]["mean"] ** 2 > -0.05
