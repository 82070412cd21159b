"""Theory-side quantities of the Gaussian limit.

nu_eff^2 is the effective noise variance of the limiting linear equation,

    nu_eff^2 = ∫ R(x) E_B[exp((beta^2/2) ∫_0^inf R(x + B_s) ds)] dx,

estimated by radial quadrature in x with the inner expectation sampled over
one shared set of Brownian paths (sharing makes the quadrature error across
nodes strongly correlated, hence nearly free).  sigma_t^2, the variance of
the spatially averaged limit field against a test function g, reduces in
Fourier to a single radial integral

    sigma_t^2 = beta^2 nu_eff^2 (2 pi)^(-d) ∫ |g_hat(k)|^2 (1 - e^(-t k^2)) / k^2 dk,

with the s-integral done analytically.  The toy_gaussian_* functions work
out the lognormal one-liners behind the sigma_f multiplier by Gauss-Hermite
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, QualityError, TruncationError
from .fields import TestFunction
from .mollifier import MollifierSpec, integral_R
from .polymer import accumulate_R_along_paths
from .rng import EXPERIMENT_IDS, PURPOSE_PATHS, RngStreamKey


@dataclass(frozen=True)
class EffectiveVariance:
    """Monte Carlo + quadrature estimate of nu_eff^2."""

    nu_eff_sq: float
    std_error: float
    beta: float
    truncation_T: float
    n_paths: int
    n_x_nodes: int
    diagnostics: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class LimitVariance:
    """sigma_t^2 for one (t, g, beta, nu_eff^2) combination."""

    sigma_t_sq: float
    t: float
    beta: float
    nu_eff_sq: float
    g: TestFunction


def estimate_nu_eff_sq(
    m: MollifierSpec,
    beta: float,
    T: float = 64.0,
    n_paths: int = 20000,
    x_quadrature_nodes: int = 16,
    rng=0,
    dt: float = 0.01,
    independent_control: bool = False,
) -> EffectiveVariance:
    """Estimate nu_eff^2 by radial quadrature over supp R times the sampled
    exponential moment.

    The paths are shared across quadrature nodes; `independent_control=True`
    reruns each node with its own stream and stores the discrepancy in the
    diagnostics (it must be statistically compatible).
    """
    if beta > 0.5:
        raise ConfigurationError("estimate_nu_eff_sq expects beta <= 0.5")
    if T < 32.0:
        raise ConfigurationError("truncation horizon T must be >= 32")
    tab = m.tables()
    nodes, glw = leggauss(x_quadrature_nodes)
    r_sup = tab.r_support
    r = 0.5 * r_sup * (nodes + 1.0)
    w = 0.5 * r_sup * glw
    coef = 4.0 * math.pi * w * r**2 * tab.covariance(r)
    starts = np.zeros((x_quadrature_nodes, m.dim))
    starts[:, 0] = r

    if isinstance(rng, int):
        rng = RngStreamKey(rng, EXPERIMENT_IDS["theory"], 0, PURPOSE_PATHS)
    sums = accumulate_R_along_paths(
        starts, T, n_paths, rng.generator(substream=0) if hasattr(rng, "generator") else rng,
        mollifier=m, dt=dt, checkpoint_times=(0.5 * T,),
    )
    w_full = np.exp(0.5 * beta**2 * sums[float(T)])
    w_half = np.exp(0.5 * beta**2 * sums[0.5 * T])
    per_path = coef @ w_full
    value = float(per_path.mean())
    se = float(np.std(per_path, ddof=1) / math.sqrt(n_paths))

    gap = per_path - coef @ w_half
    gap_mean, gap_se = float(gap.mean()), float(np.std(gap, ddof=1) / math.sqrt(n_paths))
    if gap_se > 0 and abs(gap_mean) > 3.0 * gap_se and abs(gap_mean) > 1e-3 * value:
        raise TruncationError(
            f"nu_eff^2 moved by {gap_mean:.3g} between T/2 and T={T:g}; increase T"
        )

    diagnostics = {"truncation_gap": gap_mean, "truncation_gap_se": gap_se}
    if independent_control:
        ctrl = np.empty(x_quadrature_nodes)
        for j in range(x_quadrature_nodes):
            key = rng if isinstance(rng, RngStreamKey) else RngStreamKey(0)
            s_j = accumulate_R_along_paths(
                starts[j : j + 1], T, n_paths,
                key.generator(substream=j + 1),
                mollifier=m, dt=dt,
            )[float(T)][0]
            ctrl[j] = np.exp(0.5 * beta**2 * s_j).mean()
        diagnostics["independent_control"] = float(coef @ ctrl)

    base = integral_R(m)
    if value < base - 3.0 * se - 1e-9:
        raise QualityError(
            f"nu_eff^2 estimate {value:.6g} fell below the beta=0 bound {base:.6g}"
        )
    return EffectiveVariance(
        nu_eff_sq=value, std_error=se, beta=beta, truncation_T=float(T),
        n_paths=n_paths, n_x_nodes=x_quadrature_nodes, diagnostics=diagnostics,
    )


def _radial_spectrum_integral(g: TestFunction, t: float, n_nodes: int = 512) -> float:
    """(2 pi)^(-3) ∫ |g_hat|^2 (1 - e^(-t k^2)) / k^2 dk by radial quadrature."""
    if g.kind == "gaussian-bump":
        k_max = 9.0 / g.scale
    else:
        k_max = 80.0 / g.scale
    nodes, glw = leggauss(n_nodes)
    k = 0.5 * k_max * (nodes + 1.0)
    w = 0.5 * k_max * glw
    ghat = np.asarray(g.fourier_radial(k), dtype=np.float64)
    integrand = ghat**2 * (1.0 - np.exp(-t * k**2))
    return float(np.sum(w * integrand)) / (2.0 * math.pi**2)


def sigma_t_sq(nu, g: TestFunction, t: float, beta: float | None = None) -> LimitVariance:
    """Limit variance of ∫ (averaged field) g dx at macroscopic time t.

    `nu` is an EffectiveVariance (carrying beta) or a raw nu_eff^2 float
    (then `beta` is required).
    """
    if t <= 0:
        raise ConfigurationError("t must be positive")
    if isinstance(nu, EffectiveVariance):
        nu_sq, b = nu.nu_eff_sq, nu.beta
    else:
        nu_sq = float(nu)
        if beta is None:
            raise ConfigurationError("beta required when nu is a bare value")
        b = float(beta)
    if g.dim != 3:
        raise NotImplementedError("sigma_t_sq radial quadrature assumes d=3")
    val = b**2 * nu_sq * _radial_spectrum_integral(g, t)
    return LimitVariance(sigma_t_sq=val, t=float(t), beta=b, nu_eff_sq=nu_sq, g=g)


_GH_NODES = 128


def _gh_standard_normal():
    x, w = hermgauss(_GH_NODES)
    return math.sqrt(2.0) * x, w / math.sqrt(math.pi)


def _derivative(f, y: np.ndarray) -> np.ndarray:
    """f' on positive y: complex-step when f supports it, else central
    differences."""
    h = 1e-20
    try:
        out = np.imag(f(y + 1j * h)) / h
        if np.all(np.isfinite(out)):
            return out
    except (TypeError, ValueError):
        pass
    step = 1e-6 * np.maximum(np.abs(y), 1e-6)
    return (f(y + step) - f(y - step)) / (2.0 * step)


def toy_gaussian_sigma_f(f, f_prime=None) -> float:
    """sigma_f of the lognormal toy model: E[f'(e^(X-1/2)) e^(X-1/2)].

    Also evaluates the integration-by-parts twin E[f(e^(X-1/2)) X] and
    insists the two sides agree to 1e-8 relative; a violation means the
    quadrature cannot represent f (growth too fast or f not smooth).
    """
    x, w = _gh_standard_normal()
    y = np.exp(x - 0.5)
    fp = f_prime(y) if f_prime is not None else _derivative(f, y)
    right = float(np.sum(w * fp * y))
    left = float(np.sum(w * np.asarray(f(y), dtype=np.float64) * x))
    if abs(left - right) > 1e-8 * max(1.0, abs(right)):
        raise QualityError(
            f"integration-by-parts identity violated: {left:.12g} vs {right:.12g}; "
            "f grows too fast for 128-node Gauss-Hermite"
        )
    return right


def toy_gaussian_covariance(f, delta: float) -> float:
    """Cov[f(e^(X-1/2)), f(e^(Y-1/2))] / delta for correlation-delta
    Gaussians, by 2-D Gauss-Hermite quadrature."""
    if not 0.0 < delta <= 0.1:
        raise ConfigurationError("delta must be in (0, 0.1]")
    x, w = _gh_standard_normal()
    fx = np.asarray(f(np.exp(x - 0.5)), dtype=np.float64)
    mean_f = float(np.sum(w * fx))
    # Y | X = delta X + sqrt(1 - delta^2) Z
    root = math.sqrt(1.0 - delta * delta)
    ymat = np.exp(delta * x[:, None] + root * x[None, :] - 0.5)
    fy_given_x = np.asarray(f(ymat), dtype=np.float64) @ w
    second = float(np.sum(w * fx * fy_given_x))
    return (second - mean_f**2) / delta
