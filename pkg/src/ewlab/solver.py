"""Explicit Ito-Euler scheme for the smoothed multiplicative heat equation.

The field u on a periodic lattice evolves by

    u <- u + dt * (1/2) Lap_h u + beta * dt * V u,

with Lap_h the standard (2d+1)-point Laplacian and V the colored noise slice
for the current step.  The update is in Ito form, so the cell mean of u is a
discrete martingale and E[u] = 1 exactly for the flat initial condition,
at every h and dt; this identity is used as a self-test.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigurationError, QualityError
from .fields import LatticeField, LatticeGrid
from .mollifier import MollifierSpec
from .noise import NoiseRealization

#: largest stable fraction of the diffusive step limit h^2 / (2d)
CFL_SAFETY = 0.9

#: |u| beyond this aborts the run as a blow-up
BLOWUP_THRESHOLD = 1.0e12


def cfl_limit(grid: LatticeGrid) -> float:
    """Largest admissible dt for the explicit scheme on this grid."""
    return CFL_SAFETY * grid.spacing**2 / (2.0 * grid.dim)


@dataclass(frozen=True)
class SolverConfig:
    """Static parameters of one simulation."""

    grid: LatticeGrid
    mollifier: MollifierSpec
    beta: float = 0.2
    dt: float = 0.03125  # dyadic, so horizons like 8, 16, 64 hit exact steps

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        lim = cfl_limit(self.grid)
        if self.dt > lim * (1.0 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt:g} violates the diffusive stability limit "
                f"{lim:g} for spacing {self.grid.spacing:g} in d={self.grid.dim}"
            )
        if self.beta < 0:
            raise ConfigurationError("beta must be nonnegative")
        if self.beta >= 1.0:
            raise ConfigurationError(
                f"beta={self.beta:g} is outside the weak-disorder regime "
                "handled here (need beta < 1)"
            )
        if self.beta > 0.5:
            warnings.warn(
                f"beta={self.beta:g} > 0.5: moments of u grow quickly, "
                "expect heavy tails and slow Monte Carlo convergence",
                stacklevel=2,
            )


def discrete_laplacian(values: np.ndarray, spacing: float) -> np.ndarray:
    """Periodic (2d+1)-point Laplacian."""
    out = -2.0 * values.ndim * values
    for axis in range(values.ndim):
        out += np.roll(values, 1, axis=axis)
        out += np.roll(values, -1, axis=axis)
    return out / spacing**2


def step_she(
    values: np.ndarray, v_slice: np.ndarray, beta: float, dt: float, spacing: float
) -> np.ndarray:
    """One Ito-Euler step; returns a new array."""
    return (
        values * (1.0 + beta * dt * v_slice)
        + (0.5 * dt) * discrete_laplacian(values, spacing)
    )


@dataclass
class SolveResult:
    """Terminal state plus any requested intermediate snapshots."""

    config: SolverConfig
    final: LatticeField
    n_steps: int
    snapshots: dict = field(default_factory=dict)  # time -> ndarray
    negative_fraction: float = 0.0

    def snapshot(self, t: float) -> LatticeField:
        return LatticeField(self.config.grid, self.snapshots[t])


def _step_of_time(t: float, dt: float) -> int:
    k = int(round(t / dt))
    if abs(t - k * dt) > 1e-9 * max(1.0, abs(t)):
        raise ConfigurationError(f"time {t} is not a multiple of dt={dt}")
    return k


def solve_she(
    config: SolverConfig,
    noise: NoiseRealization,
    snapshot_times=(),
    initial_values: np.ndarray | None = None,
    start_step: int = 0,
    n_steps: int | None = None,
    negative_fraction_tol: float = 0.01,
) -> SolveResult:
    """March the field from step `start_step` through `n_steps` noise slices.

    `snapshot_times` are absolute times (multiples of dt) whose states are
    kept in the result; the final state is always kept.  Passing
    `initial_values` together with `start_step` resumes from a checkpoint.
    Raises BlowUpError on numeric escape and QualityError when the fraction
    of negative cells at the final time exceeds `negative_fraction_tol`.
    """
    grid, dt = config.grid, config.dt
    if noise.grid != grid:
        raise ConfigurationError("noise realization lives on a different grid")
    if abs(noise.dt - dt) > 1e-12:
        raise ConfigurationError(
            f"noise dt {noise.dt:g} does not match solver dt {dt:g}"
        )
    if n_steps is None:
        n_steps = noise.n_slices
    if start_step + 0 > n_steps or n_steps > noise.n_slices:
        raise ConfigurationError("step range exceeds the noise horizon")

    if initial_values is None:
        if start_step != 0:
            raise ConfigurationError("resuming requires initial_values")
        u = np.ones(grid.shape)
    else:
        u = np.asarray(initial_values, dtype=np.float64).copy()
        if u.shape != grid.shape:
            raise ConfigurationError("initial values do not match the grid shape")

    want = {}
    for t in snapshot_times:
        k = _step_of_time(t, dt)
        if not start_step <= k <= n_steps:
            raise ConfigurationError(
                f"snapshot time {t} outside the simulated range "
                f"[{start_step * dt:g}, {n_steps * dt:g}]"
            )
        want[k] = float(t)

    snapshots = {}
    if start_step in want:
        snapshots[want[start_step]] = u.copy()
    for k in range(start_step, n_steps):
        u = step_she(u, noise.slice_values(k), config.beta, dt, grid.spacing)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP_THRESHOLD:
            raise BlowUpError(
                k + 1, f"field escaped at step {k + 1} (t={(k + 1) * dt:g})"
            )
        if k + 1 in want:
            snapshots[want[k + 1]] = u.copy()

    neg_frac = float(np.mean(u < 0.0))
    if neg_frac > negative_fraction_tol:
        raise QualityError(
            f"{neg_frac:.2%} of cells negative at the final time "
            f"(tolerance {negative_fraction_tol:.2%}); decrease dt or beta"
        )
    return SolveResult(
        config=config,
        final=LatticeField(grid, u),
        n_steps=n_steps - start_step,
        snapshots=snapshots,
        negative_fraction=neg_frac,
    )
