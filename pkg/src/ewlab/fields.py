"""Grids, lattice fields and smooth test functions.

Microscopic lengths are the units in which the noise covariance has support
radius 1.  A `LatticeGrid` is a periodic cube with `n_cells` cells per axis
and spacing `spacing`; cell 0 sits at the origin and coordinates wrap to
(-side/2, side/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import erfc

from .errors import ConfigurationError

# |g(r)| < 1e-12 * g(0) outside NEGLIGIBLE_SIGMAS * scale for a Gaussian bump
NEGLIGIBLE_SIGMAS = math.sqrt(2.0 * 12.0 * math.log(10.0))  # ~7.434


@dataclass(frozen=True)
class LatticeGrid:
    """Periodic d-dimensional cubic lattice."""

    dim: int = 3
    spacing: float = 0.5
    n_cells: int = 64

    def __post_init__(self):
        if self.dim < 3:
            raise ConfigurationError(f"dim must be >= 3, got {self.dim}")
        if self.spacing <= 0:
            raise ConfigurationError("spacing must be positive")
        if self.n_cells < 4:
            raise ConfigurationError(f"n_cells must be >= 4, got {self.n_cells}")

    @property
    def side(self) -> float:
        return self.spacing * self.n_cells

    @property
    def shape(self) -> tuple:
        return (self.n_cells,) * self.dim

    @property
    def n_total(self) -> int:
        return self.n_cells**self.dim

    def axis_coords(self) -> np.ndarray:
        """Signed cell-center coordinates along one axis, cell 0 at 0."""
        idx = np.arange(self.n_cells)
        signed = np.where(idx <= self.n_cells // 2, idx, idx - self.n_cells)
        return signed * self.spacing

    def wrap_index(self, x: np.ndarray) -> np.ndarray:
        """Nearest-cell indices (mod n_cells) for points of shape (..., dim)."""
        return np.mod(np.rint(np.asarray(x) / self.spacing).astype(np.int64), self.n_cells)

    def cell_volume(self) -> float:
        return self.spacing**self.dim


@dataclass
class LatticeField:
    """A scalar value per cell of a periodic lattice."""

    grid: LatticeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("field contains non-finite values")

    def at_cell(self, index) -> float:
        return float(self.values[tuple(np.atleast_1d(index))])


@dataclass(frozen=True)
class TestFunction:
    """Smooth averaging function g, Gaussian bump or compactly supported bump.

    `scale` is the macroscopic length scale: the Gaussian bump is
    exp(-|x-c|^2 / (2 scale^2)), the smooth bump is the standard
    exp(-1/(1-(r/scale)^2)) profile supported on r < scale (amplitude 1 at
    the center, not normalized).
    """

    kind: str = "gaussian-bump"
    center: tuple = (0.0, 0.0, 0.0)
    scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian-bump", "smooth-bump"):
            raise ConfigurationError(f"unknown test function kind {self.kind!r}")
        if self.scale <= 0:
            raise ConfigurationError("scale must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def radius(self) -> float:
        """Radius outside which |g| < 1e-12 (exact support for the bump)."""
        if self.kind == "smooth-bump":
            return self.scale
        return NEGLIGIBLE_SIGMAS * self.scale

    def radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "gaussian-bump":
            return self.amplitude * np.exp(-0.5 * (r / self.scale) ** 2)
        u = r / self.scale
        out = np.zeros_like(u)
        inside = u < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return self.amplitude * out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        r = np.sqrt(np.sum((x - np.asarray(self.center)) ** 2, axis=-1))
        return self.radial(r)

    def integral(self) -> float:
        """∫ g dx in self.dim dimensions."""
        d = self.dim
        if self.kind == "gaussian-bump":
            return self.amplitude * (2.0 * math.pi * self.scale**2) ** (d / 2.0)
        surf = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
        val, _ = integrate.quad(
            lambda r: r ** (d - 1) * self.radial(np.array([r]))[0], 0.0, self.scale
        )
        return surf * val

    def integral_sq(self) -> float:
        """∫ g^2 dx."""
        d = self.dim
        if self.kind == "gaussian-bump":
            return self.amplitude**2 * (math.pi * self.scale**2) ** (d / 2.0)
        surf = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
        val, _ = integrate.quad(
            lambda r: r ** (d - 1) * self.radial(np.array([r]))[0] ** 2, 0.0, self.scale
        )
        return surf * val

    def fourier_radial(self, k: np.ndarray) -> np.ndarray:
        """Radial Fourier transform ĝ(|k|) = ∫ g(x) exp(-i k·x) dx, d=3 only
        for the smooth bump; closed form in any d for the Gaussian."""
        k = np.asarray(k, dtype=np.float64)
        if self.kind == "gaussian-bump":
            d = self.dim
            return self.amplitude * (2.0 * math.pi * self.scale**2) ** (d / 2.0) * np.exp(
                -0.5 * self.scale**2 * k**2
            )
        if self.dim != 3:
            raise NotImplementedError("smooth-bump Fourier transform only in d=3")
        out = np.empty(k.shape if k.shape else (1,))
        kf = np.atleast_1d(k)
        for i, kk in enumerate(kf):
            if kk == 0.0:
                out[i] = self.integral()
            else:
                val, _ = integrate.quad(
                    lambda r: 4.0 * math.pi / kk * r * math.sin(kk * r)
                    * self.radial(np.array([r]))[0],
                    0.0,
                    self.scale,
                    limit=200,
                )
                out[i] = val
        return out.reshape(k.shape) if k.shape else out[0]


def check_coverage(
    grid: LatticeGrid,
    horizon: float,
    g_radius_micro: float = 0.0,
    wrap_tol: float = 0.05,
) -> float:
    """Validate that a periodic box is large enough for an experiment.

    `horizon` is the microscopic final time, `g_radius_micro` the radius (in
    microscopic units) of the region whose statistics are observed.  The box
    must exceed twice the diffusive radius sqrt(horizon) plus the observation
    radius, and the wrap-around correlation proxy
    erfc(d_img / (2 sqrt(horizon))) for the nearest periodic image distance
    d_img must stay below `wrap_tol`.  Returns the wrap proxy.
    """
    diffusive = math.sqrt(max(horizon, 0.0))
    required = 2.0 * (diffusive + g_radius_micro)
    if grid.side <= required:
        raise ConfigurationError(
            f"box side {grid.side:g} must exceed 2*(sqrt(T) + g radius) = "
            f"{required:g} (T={horizon:g}, g radius={g_radius_micro:g})"
        )
    d_img = grid.side - 2.0 * g_radius_micro
    wrap = float(erfc(d_img / (2.0 * diffusive))) if diffusive > 0 else 0.0
    if wrap > wrap_tol:
        raise ConfigurationError(
            f"wrap-around correlation proxy {wrap:.3g} exceeds tolerance "
            f"{wrap_tol:g}; enlarge the box (side {grid.side:g}, horizon {horizon:g})"
        )
    return wrap
