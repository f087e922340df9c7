"""Numeric-versus-closed-form comparisons for evolved Airy packets."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .airy_special import FIRST_EXTREMUM, ai, ai_packet
from .analytic_propagator import (
    ForceProfile,
    PhysicalConstants,
    analytic_field,
    x0,
    x1,
)
from .errors import DegenerateWindowError, ParameterError, TrackingLostError
from .fields import GridSpec, WaveField

AI_PEAK = abs(ai(FIRST_EXTREMUM))
PHASE_ENVELOPE_FRACTION = 1e-3
MIN_TRAJECTORY_POINTS = 4


@dataclass(frozen=True)
class ShapeReport:
    t: float
    max_abs_dev: float
    l2_dev: float
    window: tuple[float, float]

    def as_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrajectoryReport:
    times: tuple[float, ...]
    peak_positions: tuple[float, ...]
    predicted_positions: tuple[float, ...]
    fitted_acceleration: float
    fitted_velocity: float
    fit_residual: float

    def as_record(self) -> dict:
        return asdict(self)


def total_shift(constants: PhysicalConstants, force: ForceProfile, t: float) -> float:
    return x0(constants, t) + x1(constants, force, t)


def shape_error(
    numeric: WaveField,
    constants: PhysicalConstants,
    force: ForceProfile,
    t: float,
    window: tuple[float, float],
) -> ShapeReport:
    """Compare ``|numeric|^2`` with ``Ai^2(b(x - x_s(t)))`` inside ``window``.

    Deviations are relative to the packet's global peak density, which does
    not depend on the window, so shrinking the window can only lower
    ``max_abs_dev``.
    """
    lo, hi = window
    sel = numeric.grid.window_mask(lo, hi)
    if not np.any(sel):
        raise ParameterError("shape window contains no grid points")
    x = numeric.grid.x[sel]
    expected = ai(constants.b * (x - total_shift(constants, force, t))) ** 2
    got = np.abs(numeric.amplitudes[sel]) ** 2
    diff = got - expected
    peak = AI_PEAK ** 2
    ref = np.sqrt(np.sum(expected ** 2))
    l2 = float(np.sqrt(np.sum(diff ** 2)) / ref) if ref > 0 else float(np.sqrt(np.sum(diff ** 2)))
    return ShapeReport(float(t), float(np.max(np.abs(diff)) / peak), l2, (float(lo), float(hi)))


def phase_residuals(
    numeric: WaveField,
    constants: PhysicalConstants,
    force: ForceProfile,
    t: float,
    window: tuple[float, float],
):
    """Phase of ``numeric`` relative to the closed form, global constant removed.

    Returns ``(x, residual, offset)`` over the samples where the analytic
    envelope is at least ``PHASE_ENVELOPE_FRACTION`` of its peak.
    """
    lo, hi = window
    sel = numeric.grid.window_mask(lo, hi)
    exact = analytic_field(constants, force, numeric.grid, t).amplitudes
    sel &= np.abs(exact) >= PHASE_ENVELOPE_FRACTION * AI_PEAK
    if not np.any(sel):
        raise DegenerateWindowError("no samples with a usable envelope in the phase window")
    ratio = numeric.amplitudes[sel] * np.conj(exact[sel])
    # circular mean of the phase difference weighted by |numeric| |exact|
    offset = float(np.angle(np.sum(ratio)))
    residual = np.angle(ratio * np.exp(-1j * offset))
    return numeric.grid.x[sel], residual, offset


def phase_check(
    numeric: WaveField,
    constants: PhysicalConstants,
    force: ForceProfile,
    t: float,
    window: tuple[float, float],
) -> float:
    """Largest phase deviation (radians) from the closed form after removing one constant."""
    _, residual, _ = phase_residuals(numeric, constants, force, t, window)
    return float(np.max(np.abs(residual)))


def locate_peak(field: WaveField, lo: float, hi: float) -> float:
    """Position of the largest ``|psi|^2`` in ``[lo, hi]`` refined by a 3-point parabola."""
    g = field.grid
    if lo < g.x_min or hi > g.x_max - g.dx:
        raise TrackingLostError(f"peak search window ({lo:.4g}, {hi:.4g}) leaves the grid")
    i_lo = int(np.ceil((lo - g.x_min) / g.dx))
    i_hi = int(np.floor((hi - g.x_min) / g.dx))
    dens = field.density
    i = i_lo + int(np.argmax(dens[i_lo : i_hi + 1]))
    if i <= i_lo or i >= i_hi:
        raise TrackingLostError(
            f"peak found at search window edge x = {g.x_min + i * g.dx:.6g}"
        )
    ym, y0, yp = dens[i - 1], dens[i], dens[i + 1]
    curv = ym - 2.0 * y0 + yp
    shift = 0.5 * (ym - yp) / curv if curv != 0 else 0.0
    return float(g.x_min + (i + shift) * g.dx)


def predicted_peak(constants: PhysicalConstants, force: ForceProfile, t: float) -> float:
    return total_shift(constants, force, t) + FIRST_EXTREMUM / constants.b


def peak_trajectory(
    snapshots: Sequence[tuple[float, WaveField]],
    constants: PhysicalConstants,
    force: ForceProfile,
) -> TrajectoryReport:
    """Track the main lobe through ``snapshots`` and fit ``x(t) = x(0) + v t + a t^2 / 2``."""
    if len(snapshots) < MIN_TRAJECTORY_POINTS:
        raise ParameterError(
            f"trajectory fit needs at least {MIN_TRAJECTORY_POINTS} snapshots, got {len(snapshots)}"
        )
    half = 5.0 / constants.b
    times, peaks, predicted = [], [], []
    for t, f in snapshots:
        guess = predicted_peak(constants, force, t)
        times.append(float(t))
        predicted.append(guess)
        peaks.append(locate_peak(f, guess - half, guess + half))
    tt = np.asarray(times)
    coeffs = np.polyfit(tt, np.asarray(peaks), 2)
    fitted = np.polyval(coeffs, tt)
    residual = float(np.sqrt(np.mean((fitted - np.asarray(peaks)) ** 2)))
    return TrajectoryReport(
        tuple(times),
        tuple(peaks),
        tuple(predicted),
        float(2.0 * coeffs[0]),
        float(coeffs[1]),
        residual,
    )


def second_derivative_5pt(psi: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order central second difference; the two samples at each end are left as NaN."""
    out = np.full(psi.shape, np.nan, dtype=psi.dtype)
    out[2:-2] = (
        -psi[:-4] + 16.0 * psi[1:-3] - 30.0 * psi[2:-2] + 16.0 * psi[3:-1] - psi[4:]
    ) / (12.0 * dx ** 2)
    return out


def hb_eigencheck(
    constants: PhysicalConstants,
    x_shift: float,
    grid: GridSpec,
    window: tuple[float, float],
) -> float:
    """Relative residual of ``H_b psi = f_b x_s psi`` for ``psi = Ai(b(x - x_s))``."""
    b = constants.b
    if not grid.dx <= 0.05 / b:
        raise ParameterError(f"grid spacing {grid.dx:.4g} does not resolve the packet (need <= {0.05 / b:.4g})")
    lo, hi = window
    sel = grid.window_mask(lo, hi)
    sel[:2] = False
    sel[-2:] = False
    psi = ai_packet(b, x_shift, grid).amplitudes.real
    kinetic = -(constants.hbar ** 2) / (2.0 * constants.mass) * second_derivative_5pt(psi, grid.dx)
    hb_psi = kinetic + constants.f_b * grid.x * psi
    energy = constants.f_b * x_shift
    resid = (hb_psi - energy * psi)[sel]
    scale = constants.f_b * max(abs(x_shift), 1.0 / b) * psi[sel]
    return float(np.linalg.norm(resid) / np.linalg.norm(scale))
