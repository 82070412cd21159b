"""Spatially averaged fluctuation observables and their experiments.

The central statistic is X_eps = ∫ f(u(t/eps^2, x/eps)) g(x) dx, computed
as a lattice Riemann sum in macroscopic coordinates.  The experiments
(variance scaling along an eps ladder, normality of the standardized draws,
covariance decay in the offset) each split into a per-realization worker
function, pure in (config, realization index, master seed), and a
deterministic aggregation step; the long-running loops with checkpointing
live in the runner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, QualityError
from .fields import LatticeField, LatticeGrid, TestFunction, check_coverage
from .mollifier import MollifierSpec
from .noise import NoiseRealization
from .rng import EXPERIMENT_IDS, RngStreamKey
from .solver import SolverConfig, solve_she
from .stats import ad_test_normal, bootstrap_ci, ks_test_normal, sample_moments

#: observable nonlinearities: tag -> (f, f_prime, needs_positive)
FTAGS = {
    "identity": (lambda y: y, lambda y: np.ones_like(y), False),
    "log": (np.log, lambda y: 1.0 / y, True),
    "log-minus-y": (lambda y: np.log(y) - y, lambda y: 1.0 / y - 1.0, True),
    "square": (lambda y: y * y, lambda y: 2.0 * y, False),
}

DEFAULT_FLOOR = 1e-8
CLAMP_BUDGET = 1e-3


def apply_f(values: np.ndarray, f_tag: str, floor: float = DEFAULT_FLOOR):
    """f(values) with the log floor; returns (array, clamp count)."""
    if f_tag not in FTAGS:
        raise ConfigurationError(f"unknown f_tag {f_tag!r}")
    f, _, needs_positive = FTAGS[f_tag]
    if not needs_positive:
        return f(values), 0
    clamped = int(np.sum(values <= floor))
    return f(np.clip(values, floor, None)), clamped


def compute_X_eps(
    u_final: LatticeField,
    g: TestFunction,
    eps: float,
    f_tag: str,
    floor: float = DEFAULT_FLOOR,
) -> float:
    """Lattice Riemann sum of f(u) against g in macroscopic coordinates.

    Cells at or below `floor` are clamped before log-type f; more than 0.1%
    clamped cells aborts the observable as unusable.
    """
    grid = u_final.grid
    fy, clamped = apply_f(u_final.values, f_tag, floor)
    if clamped > CLAMP_BUDGET * grid.n_total:
        raise QualityError(
            f"{clamped} of {grid.n_total} cells clamped at floor {floor:g} "
            f"(budget {CLAMP_BUDGET:.1%}) for f_tag={f_tag!r}"
        )
    gw = _g_weights(grid, g, eps)
    return float(np.sum(fy * gw)) * (eps * grid.spacing) ** grid.dim


_G_CACHE: dict = {}


def _g_weights(grid: LatticeGrid, g: TestFunction, eps: float) -> np.ndarray:
    key = (grid.dim, grid.spacing, grid.n_cells, g, eps)
    got = _G_CACHE.get(key)
    if got is None:
        ax = grid.axis_coords() * eps
        coords = np.stack(np.meshgrid(*([ax] * grid.dim), indexing="ij"), axis=-1)
        got = _G_CACHE[key] = g(coords)
    return got


@dataclass
class FluctuationSample:
    """X_eps draws over independent noise realizations at one (eps, f_tag)."""

    eps: float
    t: float
    f_tag: str
    values: np.ndarray
    fingerprint: str = ""
    seed: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("non-finite X_eps draws")

    @property
    def n(self) -> int:
        return self.values.size

    def rescaled_variance(self, d: int = 3) -> float:
        return float(self.eps ** -(d - 2) * np.var(self.values, ddof=1))


@dataclass(frozen=True)
class SigmaF:
    """Estimate of the f-multiplier E[f'(Z_inf) Z_inf]."""

    value: float
    std_error: float
    f_tag: str
    n: int


def estimate_sigma_f(f_tag: str, z_samples, floor: float = DEFAULT_FLOOR) -> SigmaF:
    """Sample mean of f'(Z) Z over Z_inf draws; exact for f=identity.

    `z_samples` is a ZInftySamples (clustered SE over realizations) or a
    plain 1-D array (iid SE).
    """
    if f_tag not in FTAGS:
        raise ConfigurationError(f"unknown f_tag {f_tag!r}")
    if f_tag == "identity":
        n = np.asarray(getattr(z_samples, "values", z_samples)).size
        return SigmaF(value=1.0, std_error=0.0, f_tag=f_tag, n=n)
    _, fp, needs_positive = FTAGS[f_tag]
    vals = getattr(z_samples, "values", None)
    if vals is None:
        vals = np.atleast_2d(np.asarray(z_samples, dtype=np.float64))
    z = np.clip(vals, floor, None) if needs_positive else vals
    est = fp(z) * z
    per_real = est.mean(axis=1)
    if per_real.size > 1:
        se = float(np.std(per_real, ddof=1) / math.sqrt(per_real.size))
    else:
        se = 0.0
    return SigmaF(value=float(est.mean()), std_error=se, f_tag=f_tag, n=est.size)


def fluctuation_grid(
    eps: float,
    t: float,
    g: TestFunction,
    spacing: float = 0.5,
    wrap_tol: float = 0.05,
    max_cells: int = 192,
) -> LatticeGrid:
    """Smallest admissible grid (cells a multiple of 8) for one ladder rung.

    The box must contain the observation region supp-radius(g)/eps plus a
    diffusive margin sqrt(t)/eps, and keep the periodic wrap-around proxy
    below `wrap_tol`.
    """
    horizon = t / eps**2
    r_g = g.radius / eps
    n = 8
    while n <= max_cells:
        grid = LatticeGrid(dim=g.dim, spacing=spacing, n_cells=n)
        try:
            check_coverage(grid, horizon, r_g, wrap_tol)
            return grid
        except ConfigurationError:
            n += 8
    raise ConfigurationError(
        f"no grid up to {max_cells} cells/axis satisfies the coverage rule "
        f"for eps={eps:g}, t={t:g} (horizon {horizon:g}, g radius {r_g:g})"
    )


def run_fluctuation_realization(
    eps: float,
    t: float,
    g: TestFunction,
    beta: float,
    grid: LatticeGrid,
    mollifier: MollifierSpec,
    dt: float,
    seed: int,
    index: int,
    f_tags=("log", "identity", "log-minus-y"),
    floor: float = DEFAULT_FLOOR,
) -> dict:
    """One independent solve; returns {f_tag: X_eps} computed on the same
    terminal field, so the f-comparisons share seeds by construction."""
    horizon = t / eps**2
    n_steps = int(round(horizon / dt))
    noise = NoiseRealization(
        grid=grid, mollifier=mollifier, dt=dt, n_slices=n_steps,
        seed=seed, stream_id=index,
        experiment_id=EXPERIMENT_IDS["fluctuations"],
    )
    cfg = SolverConfig(grid=grid, mollifier=mollifier, beta=beta, dt=dt)
    res = solve_she(cfg, noise)
    return {
        tag: compute_X_eps(res.final, g, eps, tag, floor) for tag in f_tags
    }


def variance_scaling_rows(
    samples: dict,
    theory_by_eps: dict,
    seed: int = 0,
    d: int = 3,
) -> list:
    """Aggregate {eps: FluctuationSample} into the variance-scaling table.

    `theory_by_eps` maps eps to the target sigma_f^2 * sigma_t^2.  Rows are
    sorted by decreasing eps and follow the CSV schema of the harness.
    """
    rows = []
    for eps in sorted(samples, reverse=True):
        s = samples[eps]
        scale = eps ** -(d - 2)
        key = RngStreamKey(seed, EXPERIMENT_IDS["fluctuations"],
                          int(round(1.0 / eps)), 10)
        lo, hi = bootstrap_ci(s.values, "variance", key=key)
        theory = float(theory_by_eps[eps])
        var_resc = s.rescaled_variance(d)
        rows.append({
            "eps": eps,
            "n": s.n,
            "mean_X": float(np.mean(s.values)),
            "var_X_rescaled": var_resc,
            "var_ci_lo": scale * lo,
            "var_ci_hi": scale * hi,
            "theory_sigma2": theory,
            "ratio": var_resc / theory if theory > 0 else math.nan,
        })
    return rows


def normality_report(sample: FluctuationSample, seed: int = 0) -> dict:
    """KS/AD against N(0,1) after standardizing, plus shape moments with
    bootstrap CIs.  Report-only."""
    if sample.n < 100:
        raise ConfigurationError("normality needs >= 100 draws")
    x = sample.values
    z = (x - x.mean()) / x.std(ddof=1)
    ks_stat, ks_p = ks_test_normal(z)
    ad_stat, ad_p = ad_test_normal(z)
    mom = sample_moments(z)
    kb = RngStreamKey(seed, EXPERIMENT_IDS["fluctuations"],
                      int(round(1.0 / sample.eps)), 20)
    skew_ci = bootstrap_ci(
        z, lambda a, axis=-1: _skew_along(a, axis), key=kb)
    kurt_ci = bootstrap_ci(
        z, lambda a, axis=-1: _exkurt_along(a, axis), key=kb.child(21))
    return {
        "eps": sample.eps, "n": sample.n,
        "ks_stat": ks_stat, "ks_p": ks_p,
        "ad_stat": ad_stat, "ad_p": ad_p,
        "skew": mom["skew"], "skew_ci_lo": skew_ci[0], "skew_ci_hi": skew_ci[1],
        "exkurt": mom["exkurt"], "exkurt_ci_lo": kurt_ci[0], "exkurt_ci_hi": kurt_ci[1],
    }


def _skew_along(a, axis):
    c = a - np.mean(a, axis=axis, keepdims=True)
    m2 = np.mean(c**2, axis=axis)
    return np.mean(c**3, axis=axis) / m2**1.5


def _exkurt_along(a, axis):
    c = a - np.mean(a, axis=axis, keepdims=True)
    m2 = np.mean(c**2, axis=axis)
    return np.mean(c**4, axis=axis) / m2**2 - 3.0


def block_smooth(values: np.ndarray, block: int) -> np.ndarray:
    """Periodic moving average over a block^d cube (block=1 is identity)."""
    if block <= 1:
        return values
    out = values
    for axis in range(values.ndim):
        acc = np.zeros_like(out)
        for s in range(block):
            acc += np.roll(out, -s, axis=axis)
        out = acc / block
    return out


def covariance_profile(values: np.ndarray, offsets, block: int = 2) -> dict:
    """Axis-averaged products E_x[w(x) w(x+y)] at the given offsets (cells).

    Uses the full FFT autocorrelation of the (optionally block-smoothed)
    field, then averages the 6 axis directions per offset.  Returns
    {"mean": field mean, offset: averaged product}.
    """
    w = block_smooth(np.asarray(values, dtype=np.float64), block)
    n = w.shape[0]
    fw = np.fft.rfftn(w)
    corr = np.fft.irfftn(
        fw * np.conj(fw), s=w.shape, axes=tuple(range(w.ndim))
    ) / w.size
    out = {"mean": float(w.mean())}
    for off in offsets:
        o = int(off)
        if not 0 < o < n:
            raise ConfigurationError(f"offset {off} outside the grid")
        acc = 0.0
        for axis in range(w.ndim):
            sl = [0] * w.ndim
            sl[axis] = o
            acc += corr[tuple(sl)]
            sl[axis] = (n - o) % n
            acc += corr[tuple(sl)]
        out[o] = float(acc / (2 * w.ndim))
    return out


def run_covariance_realization(
    beta: float,
    T: float,
    grid: LatticeGrid,
    mollifier: MollifierSpec,
    dt: float,
    seed: int,
    index: int,
    offsets,
    f_tags=("identity", "square"),
    block: int = 2,
) -> dict:
    """One stationarized solve; per-f_tag covariance profile at the offsets."""
    n_steps = int(round(T / dt))
    noise = NoiseRealization(
        grid=grid, mollifier=mollifier, dt=dt, n_slices=n_steps,
        seed=seed, stream_id=index, experiment_id=EXPERIMENT_IDS["covdecay"],
    )
    cfg = SolverConfig(grid=grid, mollifier=mollifier, beta=beta, dt=dt)
    res = solve_she(cfg, noise)
    out = {}
    for tag in f_tags:
        fy, _ = apply_f(res.final.values, tag)
        out[tag] = covariance_profile(fy, offsets, block=block)
    return out


def covariance_rows(profiles: list, offsets, f_tags=("identity", "square")) -> list:
    """Aggregate per-realization profiles into cov_decay rows.

    Cov(y) = mean_r[A_r(y)] - (mean_r[m_r])^2 with the realization scatter
    of A_r(y) as the standard error (the mean-squared term is lower order).
    """
    rows = []
    n = len(profiles)
    if n < 2:
        raise ConfigurationError("need >= 2 realizations")
    for tag in f_tags:
        m = np.mean([p[tag]["mean"] for p in profiles])
        for off in offsets:
            a = np.array([p[tag][int(off)] for p in profiles])
            cov = float(a.mean() - m * m)
            se = float(np.std(a, ddof=1) / math.sqrt(n))
            rows.append({"offset": int(off), "cov": cov, "cov_se": se, "f_tag": tag})
    return rows
