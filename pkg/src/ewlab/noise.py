"""Discrete white-in-time, colored-in-space noise on a periodic lattice.

A noise slice is V = conv(phi, w) where w is discrete space-time white
noise, w_i = xi_i / sqrt(dt h^d) with iid standard normals xi.  The circular
convolution is applied in Fourier space with the radial transform of phi
sampled at the lattice modes, so one slice has exactly the covariance

    E[V_i V_j] dt = R_disc(x_i - x_j),
    R_disc(x) = (1/L^d) sum_k |phi_hat(k)|^2 exp(i k.x),

whose lattice integral sum_x R_disc(x) h^d = phi_hat(0)^2 is exact (equal
to ∫R for a unit-mass bump) at any resolution; R_disc(x) -> R(x) pointwise
as h -> 0.  Slices at distinct time indices come from distinct counter
blocks of one Philox stream, so they are independent and can be generated
lazily, in any order, on any worker.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .errors import ConfigurationError
from .fields import LatticeField, LatticeGrid
from .mollifier import MollifierSpec
from .rng import EXPERIMENT_IDS, PURPOSE_NOISE, RngStreamKey

_HEADER_FMT = "<qqddqQ"  # dim, n_cells, h, dt, n_slices, seed
_KERNEL_CACHE: dict = {}


def _noise_kernel(grid: LatticeGrid, m: MollifierSpec) -> np.ndarray:
    """|phi_hat| sampled on the rfftn mode grid of `grid`."""
    key = (grid.dim, grid.spacing, grid.n_cells, m.profile, m.support_radius, m.constant)
    got = _KERNEL_CACHE.get(key)
    if got is not None:
        return got
    if grid.dim != 3:
        raise NotImplementedError("spectral noise sampling is implemented for d=3")
    n, h = grid.n_cells, grid.spacing
    kx = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    kz = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
    kk = np.sqrt(
        kx[:, None, None] ** 2 + kx[None, :, None] ** 2 + kz[None, None, :] ** 2
    )
    ker = m.tables().phi_hat(kk)
    _KERNEL_CACHE[key] = ker
    return ker


def lattice_R0(grid: LatticeGrid, m: MollifierSpec) -> float:
    """Single-cell variance R_disc(0) of the lattice noise (times dt)."""
    ker = _noise_kernel(grid, m)
    n = grid.n_cells
    # sum |phi_hat|^2 over the full mode grid; rfft layout stores only
    # kz >= 0, interior kz planes stand for two conjugate modes
    w = np.full(ker.shape[-1], 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    total = float(np.sum((ker**2) * w[None, None, :]))
    return total / grid.side**grid.dim


def lattice_R_table(grid: LatticeGrid, m: MollifierSpec) -> np.ndarray:
    """Full array R_disc on the lattice offsets (shape = grid.shape)."""
    ker = _noise_kernel(grid, m)
    return sfft.irfftn(ker**2, s=grid.shape) / grid.cell_volume()


def sample_noise_slice(
    grid: LatticeGrid,
    m: MollifierSpec,
    dt: float,
    rng: np.random.Generator,
    method: str = "fft",
) -> LatticeField:
    """Draw one spatial slice of the noise field V.

    `method="fft"` (default) applies the circular convolution spectrally,
    which is exact for the periodic topology at any grid size.
    `method="direct"` multiplies by the dense circulant matrix; it is only
    for cross-validation and restricted to n_cells <= 16.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if grid.side < 2.0 * m.support_radius:
        raise ConfigurationError(
            f"grid side {grid.side:g} too small for mollifier support "
            f"{m.support_radius:g}"
        )
    xi = rng.standard_normal(grid.shape)
    scale = 1.0 / np.sqrt(dt * grid.cell_volume())
    if method == "fft":
        ker = _noise_kernel(grid, m)
        vals = sfft.irfftn(ker * sfft.rfftn(xi), s=grid.shape) * scale
    elif method == "direct":
        if grid.n_cells > 16:
            raise ConfigurationError("direct method is for cross-validation, n_cells <= 16")
        mat = dense_convolution_matrix(grid, m)
        vals = (mat @ xi.ravel()).reshape(grid.shape) * scale
    else:
        raise ConfigurationError(f"unknown noise method {method!r}")
    return LatticeField(grid, vals)


def dense_convolution_matrix(grid: LatticeGrid, m: MollifierSpec) -> np.ndarray:
    """Dense circulant matrix of the smoothing convolution (small grids)."""
    ker_hat = _noise_kernel(grid, m)
    kernel = sfft.irfftn(ker_hat, s=grid.shape)
    n = grid.n_cells
    idx = np.indices(grid.shape).reshape(grid.dim, -1)
    diff = (idx[:, :, None] - idx[:, None, :]) % n
    return kernel[tuple(diff)]


@dataclass
class NoiseRealization:
    """A time-indexed sequence of independent colored noise slices.

    Slices are generated lazily from the counter-based stream; the whole
    object is logically immutable and can be shared read-only.
    """

    grid: LatticeGrid
    mollifier: MollifierSpec
    dt: float
    n_slices: int
    seed: int
    stream_id: int = 0
    experiment_id: int = EXPERIMENT_IDS["noise"]
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.n_slices < 1:
            raise ConfigurationError("need at least one slice")

    @property
    def key(self) -> RngStreamKey:
        return RngStreamKey(
            self.seed, self.experiment_id, self.stream_id, PURPOSE_NOISE
        )

    @property
    def horizon(self) -> float:
        return self.dt * self.n_slices

    @property
    def R0(self) -> float:
        return lattice_R0(self.grid, self.mollifier)

    def slice_values(self, index: int, cache: bool = False) -> np.ndarray:
        """Noise values of time slice `index` (generated on demand)."""
        if not 0 <= index < self.n_slices:
            raise ValueError(f"slice index {index} outside 0..{self.n_slices - 1}")
        got = self._cache.get(index)
        if got is not None:
            return got
        rng = self.key.generator(substream=index)
        vals = sample_noise_slice(self.grid, self.mollifier, self.dt, rng).values
        if cache:
            self._cache[index] = vals
        return vals

    def slice_field(self, index: int) -> LatticeField:
        return LatticeField(self.grid, self.slice_values(index))

    def materialize(self) -> None:
        """Generate and hold all slices (small realizations only)."""
        for i in range(self.n_slices):
            self.slice_values(i, cache=True)

    def time_index(self, t: float) -> int:
        if not 0.0 <= t < self.horizon:
            raise ValueError(f"time {t} outside noise horizon [0, {self.horizon})")
        return min(int(t / self.dt), self.n_slices - 1)


def interpolate_noise(n: NoiseRealization, t: float, x) -> float:
    """V at time t and point x: piecewise-constant in time, nearest cell in
    space, periodic wrapping."""
    k = n.time_index(t)
    idx = n.grid.wrap_index(np.asarray(x, dtype=np.float64))
    return float(n.slice_values(k)[tuple(idx)])


def dump_noise(n: NoiseRealization, path) -> None:
    """Write a realization to a little-endian binary file.

    Layout: header `<qqddqQ` = (dim, n_cells, h, dt, n_slices, seed), then
    the slices in time order as float64, C order.
    """
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                _HEADER_FMT,
                n.grid.dim,
                n.grid.n_cells,
                n.grid.spacing,
                n.dt,
                n.n_slices,
                n.seed & 0xFFFFFFFFFFFFFFFF,
            )
        )
        for i in range(n.n_slices):
            fh.write(n.slice_values(i).astype("<f8").tobytes(order="C"))


def load_noise(path, mollifier: MollifierSpec | None = None) -> NoiseRealization:
    """Read a dumped realization back as a materialized NoiseRealization."""
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize(_HEADER_FMT))
        dim, n_cells, h, dt, n_slices, seed = struct.unpack(_HEADER_FMT, header)
        grid = LatticeGrid(dim=dim, spacing=h, n_cells=n_cells)
        out = NoiseRealization(
            grid=grid,
            mollifier=mollifier or MollifierSpec(dim=dim),
            dt=dt,
            n_slices=n_slices,
            seed=seed,
        )
        count = grid.n_total
        for i in range(n_slices):
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ConfigurationError(f"truncated noise file {path}")
            out._cache[i] = np.frombuffer(buf, dtype="<f8").reshape(grid.shape).copy()
    return out
