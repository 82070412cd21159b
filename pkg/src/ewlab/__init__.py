"""Numerical laboratory for Edwards-Wilkinson scaling of the multiplicative
stochastic heat equation in d >= 3 with white-in-time, colored-in-space noise.

The package simulates the lattice equation du = 1/2 Lap(u) dt + beta u dV,
estimates polymer partition functions by Feynman-Kac Monte Carlo, computes
the effective noise variance of the limiting Edwards-Wilkinson equation, and
runs the spatially averaged fluctuation experiments (variance scaling,
normality, covariance decay) that probe the large-scale Gaussian limit.
"""

__version__ = "0.1.0"

from .fields import LatticeGrid, LatticeField, TestFunction
from .mollifier import MollifierSpec, covariance_R, integral_R
from .kernels import heat_kernel, green_function
from .rng import RngStreamKey
from .noise import NoiseRealization, sample_noise_slice, interpolate_noise
from .solver import SolverConfig, step_she, solve_she
from .polymer import (
    PolymerEstimate,
    BrownianPath,
    feynman_kac_Z,
    sample_Z_infty,
    negative_moment_probe,
    intersection_time_moment,
    exp_moment_functional,
)
from .theory import (
    EffectiveVariance,
    LimitVariance,
    estimate_nu_eff_sq,
    sigma_t_sq,
    toy_gaussian_sigma_f,
    toy_gaussian_covariance,
)
from .harness import (
    FluctuationSample,
    SigmaF,
    FTAGS,
    compute_X_eps,
    estimate_sigma_f,
)

__all__ = [
    "LatticeGrid",
    "LatticeField",
    "TestFunction",
    "MollifierSpec",
    "covariance_R",
    "integral_R",
    "heat_kernel",
    "green_function",
    "RngStreamKey",
    "NoiseRealization",
    "sample_noise_slice",
    "interpolate_noise",
    "SolverConfig",
    "step_she",
    "solve_she",
    "PolymerEstimate",
    "BrownianPath",
    "feynman_kac_Z",
    "sample_Z_infty",
    "negative_moment_probe",
    "intersection_time_moment",
    "exp_moment_functional",
    "EffectiveVariance",
    "LimitVariance",
    "estimate_nu_eff_sq",
    "sigma_t_sq",
    "toy_gaussian_sigma_f",
    "toy_gaussian_covariance",
    "FluctuationSample",
    "SigmaF",
    "FTAGS",
    "compute_X_eps",
    "estimate_sigma_f",
    "__version__",
]
