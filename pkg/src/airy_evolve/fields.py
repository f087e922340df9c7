"""Uniform 1D grids and complex fields sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StateError

MIN_POINTS = 16


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``x_i = x_min + i*dx`` for ``i`` in ``[0, n)``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)):
            raise ParameterError("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise ParameterError("grid requires x_max > x_min")
        if int(self.n) != self.n or self.n < MIN_POINTS:
            raise ParameterError(f"grid requires integer n ≥ {MIN_POINTS}, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def index_of(self, x: float) -> int:
        """Index of the grid point nearest to ``x`` (clipped to the grid)."""
        i = int(round((x - self.x_min) / self.dx))
        return min(max(i, 0), self.n - 1)

    def window_mask(self, lo: float, hi: float) -> np.ndarray:
        if not lo < hi:
            raise ParameterError(f"window requires lo < hi, got ({lo}, {hi})")
        if lo < self.x_min or hi > self.x_max:
            raise ParameterError(
                f"window ({lo}, {hi}) lies outside the grid [{self.x_min}, {self.x_max}]"
            )
        x = self.x
        return (x >= lo) & (x <= hi)


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitudes on a :class:`GridSpec`."""

    grid: GridSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.n,):
            raise ParameterError(f"expected {self.grid.n} amplitudes, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise StateError("wave field contains non-finite amplitudes")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        """Discrete L2 norm squared, ``sum |psi_i|^2 dx``."""
        return float(np.sum(self.density) * self.grid.dx)

    def with_amplitudes(self, amplitudes) -> "WaveField":
        return WaveField(self.grid, amplitudes)
