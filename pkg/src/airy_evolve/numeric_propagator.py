"""Grid integration of ``i hbar dPsi/dt = (p^2/2m - F(t) x) Psi``.

Two schemes are provided: Strang split-step on the periodic grid, and
Crank-Nicolson with a three-point Laplacian and Dirichlet ends. The force
is sampled at the midpoint of every step. An :class:`Aperture` mask is
applied after each step to keep the heavy left tail of the Airy packet
away from the grid edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .analytic_propagator import ForceProfile, PhysicalConstants
from .errors import ConfigurationError, DivergenceError, ParameterError, StateError
from .fields import GridSpec, WaveField

SPLIT_STEP = "split_step_strang"
CRANK_NICOLSON = "crank_nicolson"
SCHEMES = (SPLIT_STEP, CRANK_NICOLSON)

__all__ = [
    "GridSpec",
    "WaveField",
    "StepScheme",
    "Aperture",
    "Spectrum",
    "dft",
    "idft",
    "step",
    "evolve",
    "steps_for",
]


@dataclass(frozen=True)
class StepScheme:
    kind: str = SPLIT_STEP
    dt: float = 1e-3

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        # dt == 0 is accepted so that a single zero-length step is an exact identity
        if not (math.isfinite(self.dt) and self.dt >= 0):
            raise ParameterError(f"time step must be finite and non-negative, got {self.dt}")


@dataclass(frozen=True)
class Aperture:
    """Unit inside ``[window_lo, window_hi]`` with cosine-squared ramps of ``ramp_width``."""

    window_lo: float
    window_hi: float
    ramp_width: float

    def __post_init__(self):
        if not self.window_lo < self.window_hi:
            raise ParameterError("aperture requires window_lo < window_hi")
        if not self.ramp_width > 0:
            raise ParameterError("aperture requires ramp_width > 0")

    def mask(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.maximum(self.window_lo - x, 0.0) + np.maximum(x - self.window_hi, 0.0)
        m = np.cos(0.5 * np.pi * np.minimum(d / self.ramp_width, 1.0)) ** 2
        return np.where(d >= self.ramp_width, 0.0, m)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Unitary Fourier amplitudes: ``sum |psi|^2 dx == sum |psi_hat|^2 dk``."""

    grid: GridSpec
    amplitudes: np.ndarray

    @property
    def k(self) -> np.ndarray:
        return self.grid.k


def dft(field: WaveField) -> Spectrum:
    g = field.grid
    phase = np.exp(-1j * g.k * g.x_min)
    return Spectrum(g, np.fft.fft(field.amplitudes) * phase * g.dx / math.sqrt(2 * math.pi))


def idft(spectrum: Spectrum) -> WaveField:
    g = spectrum.grid
    phase = np.exp(1j * g.k * g.x_min)
    amps = np.fft.ifft(spectrum.amplitudes * phase) * math.sqrt(2 * math.pi) / g.dx
    return WaveField(g, amps)


class _Stepper:
    """Precomputed per-scheme operators for a fixed grid, constants and dt."""

    def __init__(self, grid, constants, force, scheme):
        self.grid = grid
        self.x = grid.x
        self.hbar = constants.hbar
        self.mass = constants.mass
        self.force = force
        self.dt = scheme.dt
        self.kind = scheme.kind
        if self.kind == SPLIT_STEP:
            k = grid.k
            self.half_kinetic = np.exp(-1j * self.hbar * k ** 2 * self.dt / (4.0 * self.mass))
            self._static_potential = None
            if force.kind in ("zero", "constant"):
                f = force.value(0.0)
                self._static_potential = np.exp(1j * f * self.x * self.dt / self.hbar)
        else:
            n = grid.n
            kin = self.hbar ** 2 / (self.mass * grid.dx ** 2)
            self.kin_diag = kin
            self.kin_off = -0.5 * kin
            self.c = 0.5j * self.dt / self.hbar
            self.ab = np.zeros((3, n), dtype=complex)
            self.ab[0, 1:] = self.c * self.kin_off
            self.ab[2, :-1] = self.c * self.kin_off

    def potential_phase(self, t):
        if self._static_potential is not None:
            return self._static_potential
        f = self.force.value(t + 0.5 * self.dt)
        return np.exp(1j * f * self.x * self.dt / self.hbar)

    def advance(self, psi, t):
        if self.dt == 0:
            return psi.copy()
        if self.kind == SPLIT_STEP:
            psi = np.fft.ifft(self.half_kinetic * np.fft.fft(psi))
            psi = psi * self.potential_phase(t)
            return np.fft.ifft(self.half_kinetic * np.fft.fft(psi))
        f = self.force.value(t + 0.5 * self.dt)
        diag = self.kin_diag - f * self.x
        rhs = (1.0 - self.c * diag) * psi
        rhs[1:] -= self.c * self.kin_off * psi[:-1]
        rhs[:-1] -= self.c * self.kin_off * psi[1:]
        ab = self.ab.copy()
        ab[1] = 1.0 + self.c * diag
        return solve_banded((1, 1), ab, rhs, check_finite=False)


def step(
    field: WaveField,
    constants: PhysicalConstants,
    force: ForceProfile,
    scheme: StepScheme,
    t: float,
) -> WaveField:
    """Advance ``field`` from ``t`` to ``t + dt`` by one step of ``scheme``."""
    if not np.all(np.isfinite(field.amplitudes)):
        raise StateError("cannot step a non-finite field")
    if t < 0:
        raise ParameterError("negative times are not supported")
    if scheme.dt == 0:
        return field
    stepper = _Stepper(field.grid, constants, force, scheme)
    return WaveField(field.grid, stepper.advance(np.asarray(field.amplitudes), t))


def steps_for(t: float, dt: float, tol: float = 1e-12) -> int:
    """Number of steps of length ``dt`` reaching ``t``; raises if ``t`` is off the lattice."""
    if t == 0:
        return 0
    if dt <= 0:
        raise ConfigurationError("a positive time step is required to reach t > 0")
    n = int(round(t / dt))
    if abs(n * dt - t) > tol * max(1.0, abs(t)):
        raise ConfigurationError(
            f"time {t!r} is not on the step lattice of dt = {dt!r}"
        )
    return n


def evolve(
    field: WaveField,
    constants: PhysicalConstants,
    force: ForceProfile,
    scheme: StepScheme,
    aperture: Aperture | None,
    t_end: float,
    snapshot_times: Sequence[float] = (),
) -> list[tuple[float, WaveField]]:
    """Evolve ``field`` from 0 to ``t_end``, masking after every step.

    Returns ``(t, field)`` for each requested snapshot time, or only the
    final field when ``snapshot_times`` is empty. The initial field is
    masked once before the first step.
    """
    times = [float(s) for s in snapshot_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ConfigurationError("snapshot times must be sorted")
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")
    if any(s < 0 or s > t_end * (1 + 1e-12) for s in times):
        raise ConfigurationError("snapshot times must lie within [0, t_end]")
    n_end = steps_for(t_end, scheme.dt)
    marks = [steps_for(s, scheme.dt) for s in times] if times else [n_end]
    if not times:
        times = [float(t_end)]

    grid = field.grid
    mask = aperture.mask(grid.x) if aperture is not None else None
    psi = np.array(field.amplitudes, dtype=complex)
    if mask is not None:
        psi = psi * mask
    stepper = _Stepper(grid, constants, force, scheme)

    out = []
    pending = iter(zip(marks, times))
    target = next(pending, None)
    last = max(marks)
    i = 0
    while True:
        while target is not None and target[0] == i:
            out.append((target[1], WaveField(grid, psi)))
            target = next(pending, None)
        if i >= last:
            break
        # overflow is caught below by the finiteness test
        with np.errstate(over="ignore", invalid="ignore"):
            psi = stepper.advance(psi, i * scheme.dt)
            if mask is not None:
                psi = psi * mask
        i += 1
        if not np.all(np.isfinite(psi)):
            raise DivergenceError(i, i * scheme.dt)
    return out
