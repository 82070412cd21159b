"""The smoothing bump, its autocorrelation R, and cached radial tables.

The noise is built by smoothing space-time white noise with a nonnegative
bump phi supported on |x| < support_radius; its spatial covariance is
R = phi * phi(-.), supported on |x| < 2*support_radius.  R sits in the
innermost Monte Carlo loops, so it is evaluated through a cubic-spline
lookup table computed once per mollifier by deterministic tensor-product
Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError

_PROFILES = ("standard-bump",)

#: fineness of the radial lookup grid for R (spacing = 1/R_LOOKUP_RESOLUTION)
R_LOOKUP_RESOLUTION = 512

_K_MAX = 120.0  # radial Fourier table covers |k| <= K_MAX


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _bump_profile(r: np.ndarray, a: float) -> np.ndarray:
    """Unnormalized exp(-1/(1-(r/a)^2)) on r < a, zero outside."""
    r = np.asarray(r, dtype=np.float64)
    u = np.abs(r) / a
    out = np.zeros_like(u)
    inside = u < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Choice of smoothing bump.

    normalization=None computes the constant making ∫phi = 1; passing an
    explicit constant overrides it (used to test bilinearity of R).
    """

    profile: str = "standard-bump"
    support_radius: float = 0.5
    dim: int = 3
    normalization: float | None = None

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise ConfigurationError(f"unknown mollifier profile {self.profile!r}")
        if self.support_radius <= 0:
            raise ConfigurationError("support_radius must be positive")
        if self.dim < 3:
            raise ConfigurationError("dim must be >= 3")
        if self.normalization is not None and self.normalization <= 0:
            raise ConfigurationError("normalization must be positive")

    @property
    def constant(self) -> float:
        """The multiplicative constant in front of the raw profile."""
        if self.normalization is not None:
            return self.normalization
        return _unit_mass_constant(self.support_radius, self.dim)

    def phi_radial(self, r: np.ndarray) -> np.ndarray:
        return self.constant * _bump_profile(r, self.support_radius)

    def phi(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.phi_radial(np.sqrt(np.sum(x * x, axis=-1)))

    def integral_phi(self) -> float:
        """∫ phi dx by radial Gauss-Legendre quadrature."""
        return self.constant * _profile_mass(self.support_radius, self.dim)

    def tables(self) -> "MollifierTables":
        return _tables(self.profile, self.support_radius, self.dim, self.constant)


@lru_cache(maxsize=8)
def _profile_mass(a: float, d: int) -> float:
    nodes, weights = leggauss(200)
    r = 0.5 * a * (nodes + 1.0)
    w = 0.5 * a * weights
    return _sphere_area(d) * float(np.sum(w * r ** (d - 1) * _bump_profile(r, a)))


def _unit_mass_constant(a: float, d: int) -> float:
    return 1.0 / _profile_mass(a, d)


class MollifierTables:
    """Cached radial lookup tables for R and the radial Fourier transform."""

    def __init__(self, spec_key, a: float, d: int, constant: float):
        self._key = spec_key
        self.support_radius = a
        self.dim = d
        self.constant = constant
        self.r_support = 2.0 * a
        self._build()

    def _build(self):
        a, d, c = self.support_radius, self.dim, self.constant
        if d != 3:
            raise NotImplementedError("mollifier tables are implemented for d=3")
        # R(r) = ∫ phi(y) phi(y + r e1) dy, reduced to cylindrical (rho, z)
        # coordinates; 96-point Gauss-Legendre per axis puts the quadrature
        # error far below the spline interpolation error.
        nq = 96
        nodes, weights = leggauss(nq)
        rho = 0.5 * a * (nodes + 1.0)
        w_rho = 0.5 * a * weights
        z = a * nodes
        w_z = a * weights
        rr2 = rho[:, None] ** 2 + z[None, :] ** 2
        base = (
            2.0 * math.pi
            * np.outer(w_rho * rho, w_z)
            * c * _bump_profile(np.sqrt(rr2), a)
        )
        n_r = int(round(self.r_support * R_LOOKUP_RESOLUTION)) + 1
        r_grid = np.linspace(0.0, self.r_support, n_r)
        r_vals = np.empty(n_r)
        for i, rr in enumerate(r_grid):
            shifted = np.sqrt(rho[:, None] ** 2 + (z[None, :] + rr) ** 2)
            r_vals[i] = np.sum(base * c * _bump_profile(shifted, a))
        r_vals[-1] = 0.0
        self.r_grid = r_grid
        self.r_vals = r_vals
        self._r_spline = CubicSpline(r_grid, r_vals, bc_type="clamped")
        self.R0 = float(r_vals[0])

        # radial Fourier transform of phi (d=3 closed 1-D reduction)
        if d == 3:
            nq, wq = leggauss(200)
            rq = 0.5 * a * (nq + 1.0)
            wq = 0.5 * a * wq
            phi_q = c * _bump_profile(rq, a)
            ks = np.linspace(0.0, _K_MAX, 6001)
            with np.errstate(invalid="ignore", divide="ignore"):
                mat = np.sin(np.outer(ks, rq)) / ks[:, None]
            mat[0] = rq  # limit sin(kr)/k -> r
            vals = 4.0 * math.pi * mat @ (wq * rq * phi_q)
            self._phat_grid = ks
            self._phat_vals = vals
        else:
            self._phat_grid = None
            self._phat_vals = None

    def covariance(self, r: np.ndarray) -> np.ndarray:
        """R(|x|) from the cubic lookup table (0 outside the support)."""
        r = np.abs(np.asarray(r, dtype=np.float64))
        out = np.zeros_like(r, dtype=np.float64)
        inside = r < self.r_support
        # the spline can undershoot 0 by ~1e-15 near the support edge
        out[inside] = np.maximum(self._r_spline(r[inside]), 0.0)
        return out

    def phi_hat(self, k: np.ndarray) -> np.ndarray:
        """Radial Fourier transform of phi; phi_hat(0) = ∫phi."""
        if self._phat_vals is None:
            raise NotImplementedError("phi_hat tables only available in d=3")
        k = np.abs(np.asarray(k, dtype=np.float64))
        return np.interp(k, self._phat_grid, self._phat_vals, right=0.0)


_TABLE_CACHE: dict = {}


def _tables(profile: str, a: float, d: int, constant: float) -> MollifierTables:
    key = (profile, a, d, constant)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = MollifierTables(key, a, d, constant)
    return _TABLE_CACHE[key]


def covariance_R(m: MollifierSpec, x) -> np.ndarray:
    """Covariance R(x) = ∫ phi(x+y) phi(y) dy, cached-lookup evaluation.

    Accepts a point of shape (..., dim) or a radius (scalar / 1-D array of
    radii), since R is radial.
    """
    t = m.tables()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim and x.shape[-1] == m.dim and x.ndim >= 1:
        r = np.sqrt(np.sum(x * x, axis=-1))
    else:
        r = x
    return t.covariance(r)


def integral_R(m: MollifierSpec) -> float:
    """∫ R(x) dx by radial quadrature of the cached covariance table."""
    t = m.tables()
    nodes, weights = leggauss(128)
    r = 0.5 * t.r_support * (nodes + 1.0)
    w = 0.5 * t.r_support * weights
    d = m.dim
    return _sphere_area(d) * float(np.sum(w * r ** (d - 1) * t.covariance(r)))
