"""Closed-form evolution of an initial Airy packet ``Ai(b x)``.

Under ``H(t) = p^2/2m - F(t) x`` the packet keeps its shape and moves as

    Psi(x, t) = Ai(b (x - x0(t) - x1(t))) exp(i phi(x, t))

with ``x0 = f_b t^2 / 2m`` (free acceleration from ``f_b = b^3 hbar^2 / 2m``),
``x1 = int_0^t alpha / m`` (impulse ``alpha = int_0^t F``) and a phase that is
linear in ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .airy_special import ai
from .errors import DomainError, ParameterError
from .fields import GridSpec, WaveField

HBAR_EXPLICIT = "hbar_explicit"
BERRY_BALAZS = "berry_balazs_B"
CONVENTIONS = (HBAR_EXPLICIT, BERRY_BALAZS)


@dataclass(frozen=True)
class PhysicalConstants:
    """``hbar``, mass and Airy scale.

    With ``convention="berry_balazs_B"`` the packet is specified by ``B``
    instead of ``b``; then ``b = B hbar**(-2/3)`` and ``f_b = B**3 / 2m``.
    """

    hbar: float = 1.0
    mass: float = 1.0
    b: float | None = 1.0
    convention: str = HBAR_EXPLICIT
    B: float | None = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ParameterError(f"unknown convention {self.convention!r}")
        if not self.hbar > 0:
            raise ParameterError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise ParameterError(f"mass must be positive, got {self.mass}")
        if self.convention == BERRY_BALAZS:
            if self.B is None:
                raise ParameterError("berry_balazs_B convention requires B")
            if self.B < 0:
                raise ParameterError(f"B must be non-negative, got {self.B}")
            object.__setattr__(self, "b", self.B * self.hbar ** (-2.0 / 3.0))
        else:
            if self.b is None or self.b < 0:
                raise ParameterError(f"b must be non-negative, got {self.b}")
            object.__setattr__(self, "B", None)

    @classmethod
    def berry_balazs(cls, B: float, hbar: float = 1.0, mass: float = 1.0) -> "PhysicalConstants":
        return cls(hbar=hbar, mass=mass, b=None, convention=BERRY_BALAZS, B=B)

    @property
    def f_b(self) -> float:
        """Characteristic force tying the Airy scale to the Hamiltonian."""
        if self.convention == BERRY_BALAZS:
            return self.B ** 3 / (2.0 * self.mass)
        return self.b ** 3 * self.hbar ** 2 / (2.0 * self.mass)


def _check_time(t):
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ParameterError("time must be finite")
    if np.any(t_arr < 0):
        raise ParameterError("negative times are not supported")
    return t_arr


def _scalarize(out, like):
    return float(out) if np.ndim(like) == 0 else out


@dataclass(frozen=True)
class ForceProfile:
    """Spatially uniform force ``F(t)``.

    Build instances with :meth:`zero`, :meth:`constant`, :meth:`sinusoid`
    (``F0 sin(omega t + phase)``) or :meth:`tabulated` (piecewise linear).
    """

    kind: str = "zero"
    f0: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    _knots: dict = field(default=None, init=False, repr=False, compare=False)

    KINDS = ("zero", "constant", "sinusoid", "tabulated")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown force kind {self.kind!r}")
        if self.kind == "tabulated":
            self._prepare_table()

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, f0: float):
        return cls("constant", f0=float(f0))

    @classmethod
    def sinusoid(cls, f0: float, omega: float, phase: float = 0.0):
        return cls("sinusoid", f0=float(f0), omega=float(omega), phase=float(phase))

    @classmethod
    def tabulated(cls, times: Sequence[float], values: Sequence[float]):
        return cls(
            "tabulated",
            times=tuple(float(t) for t in times),
            values=tuple(float(v) for v in values),
        )

    def _prepare_table(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
            raise ParameterError("tabulated force needs matching times/values of length >= 2")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
            raise ParameterError("tabulated force must be finite")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("tabulated times must be strictly increasing")
        if t[0] > 0 or t[-1] <= 0:
            raise ParameterError("tabulated times must cover t = 0 and extend past it")
        if t[0] < 0:
            keep = t > 0
            f = np.concatenate([[np.interp(0.0, t, f)], f[keep]])
            t = np.concatenate([[0.0], t[keep]])
        dt = np.diff(t)
        slope = np.diff(f) / dt
        a = np.zeros_like(t)
        s = np.zeros_like(t)
        q = np.zeros_like(t)
        for k in range(len(dt)):
            h = dt[k]
            a[k + 1] = a[k] + f[k] * h + slope[k] * h ** 2 / 2
            s[k + 1] = s[k] + a[k] * h + f[k] * h ** 2 / 2 + slope[k] * h ** 3 / 6
            q[k + 1] = q[k] + _segment_alpha_sq(a[k], f[k], slope[k], h)
        knots = dict(t=t, f=f, slope=slope, alpha=a, alpha_int=s, alpha_sq=q)
        object.__setattr__(self, "_knots", knots)

    @property
    def t_max(self) -> float:
        return self._knots["t"][-1] if self.kind == "tabulated" else np.inf

    @property
    def sup_norm(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.f0)
        if self.kind == "sinusoid":
            return abs(self.f0)
        return float(np.max(np.abs(self._knots["f"])))

    def _segments(self, t):
        kn = self._knots
        if np.any(t > kn["t"][-1] * (1 + 1e-14)):
            raise DomainError(
                f"time {np.max(t)} lies beyond the tabulated force (t_max = {kn['t'][-1]})"
            )
        k = np.clip(np.searchsorted(kn["t"], t, side="right") - 1, 0, len(kn["slope"]) - 1)
        return k, t - kn["t"][k]

    def value(self, t):
        """Force at time(s) ``t``."""
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "zero":
            out = np.zeros_like(t_arr)
        elif self.kind == "constant":
            out = np.full_like(t_arr, self.f0)
        elif self.kind == "sinusoid":
            out = self.f0 * np.sin(self.omega * t_arr + self.phase)
        else:
            kn = self._knots
            k, h = self._segments(_check_time(t_arr))
            out = kn["f"][k] + kn["slope"][k] * h
        return _scalarize(out, t)

    def _sinusoid_parts(self, t):
        w, ph = self.omega, self.phase
        return np.cos(ph), np.sin(ph), np.cos(w * t + ph), np.sin(w * t + ph)

    def alpha(self, t):
        """Accumulated impulse ``int_0^t F``."""
        t_arr = _check_time(t)
        if self.kind == "zero":
            out = np.zeros_like(t_arr)
        elif self.kind == "constant":
            out = self.f0 * t_arr
        elif self.kind == "sinusoid":
            if self.omega == 0:
                out = self.f0 * np.sin(self.phase) * t_arr
            else:
                c0, _, ct, _ = self._sinusoid_parts(t_arr)
                out = self.f0 / self.omega * (c0 - ct)
        else:
            kn = self._knots
            k, h = self._segments(t_arr)
            out = kn["alpha"][k] + kn["f"][k] * h + kn["slope"][k] * h ** 2 / 2
        return _scalarize(out, t)

    def alpha_integral(self, t):
        """``int_0^t alpha``."""
        t_arr = _check_time(t)
        if self.kind == "zero":
            out = np.zeros_like(t_arr)
        elif self.kind == "constant":
            out = self.f0 * t_arr ** 2 / 2
        elif self.kind == "sinusoid":
            if self.omega == 0:
                out = self.f0 * np.sin(self.phase) * t_arr ** 2 / 2
            else:
                w = self.omega
                c0, s0, _, st = self._sinusoid_parts(t_arr)
                out = self.f0 / w * (c0 * t_arr - (st - s0) / w)
        else:
            kn = self._knots
            k, h = self._segments(t_arr)
            out = (
                kn["alpha_int"][k]
                + kn["alpha"][k] * h
                + kn["f"][k] * h ** 2 / 2
                + kn["slope"][k] * h ** 3 / 6
            )
        return _scalarize(out, t)

    def alpha_square_integral(self, t):
        """``int_0^t alpha^2``."""
        t_arr = _check_time(t)
        if self.kind == "zero":
            out = np.zeros_like(t_arr)
        elif self.kind == "constant":
            out = self.f0 ** 2 * t_arr ** 3 / 3
        elif self.kind == "sinusoid":
            if self.omega == 0:
                out = (self.f0 * np.sin(self.phase)) ** 2 * t_arr ** 3 / 3
            else:
                w = self.omega
                c0, s0, _, st = self._sinusoid_parts(t_arr)
                two = np.sin(2 * (w * t_arr + self.phase)) - np.sin(2 * self.phase)
                out = (self.f0 / w) ** 2 * (
                    c0 ** 2 * t_arr - 2 * c0 * (st - s0) / w + t_arr / 2 + two / (4 * w)
                )
        else:
            kn = self._knots
            k, h = self._segments(t_arr)
            out = kn["alpha_sq"][k] + _segment_alpha_sq(
                kn["alpha"][k], kn["f"][k], kn["slope"][k], h
            )
        return _scalarize(out, t)

    def breakpoints(self, t_end: float) -> list[float]:
        if self.kind != "tabulated":
            return []
        t = self._knots["t"]
        return [float(s) for s in t if 0 < s < t_end]


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


def _segment_alpha_sq(a0, f0, slope, h):
    """Exact ``int_0^h (a0 + f0 s + slope s^2/2)^2 ds`` by 3-point Gauss-Legendre."""
    h = np.asarray(h, dtype=float)
    total = np.zeros(np.broadcast(a0, f0, slope, h).shape)
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        s = 0.5 * h * (node + 1.0)
        total = total + weight * (a0 + f0 * s + slope * s ** 2 / 2) ** 2
    return 0.5 * h * total


@dataclass(frozen=True)
class AnalyticState:
    """Shift and linear phase ``phase_slope * x + phase_offset`` at time ``t``."""

    t: float
    x_shift: float
    phase_slope: float
    phase_offset: float
    x0: float = 0.0
    x1: float = 0.0
    alpha: float = 0.0

    def phase(self, x):
        return self.phase_slope * np.asarray(x) + self.phase_offset


def x0(constants: PhysicalConstants, t):
    """Free-space shift ``f_b t^2 / 2m``."""
    t_arr = _check_time(t)
    return _scalarize(constants.f_b * t_arr ** 2 / (2.0 * constants.mass), t)


def phi0(constants: PhysicalConstants, x, t):
    """Free-space phase ``(f_b t / hbar)(x - f_b t^2 / 3m)``."""
    t_arr = _check_time(t)
    fb, m, h = constants.f_b, constants.mass, constants.hbar
    out = fb * t_arr / h * (np.asarray(x, dtype=float) - fb * t_arr ** 2 / (3.0 * m))
    return float(out) if np.ndim(out) == 0 else out


def alpha(force: ForceProfile, t):
    return force.alpha(t)


def x1(constants: PhysicalConstants, force: ForceProfile, t):
    """Force-induced shift ``int_0^t alpha(tau)/m dtau``."""
    return force.alpha_integral(t) / constants.mass


def x1_kernel(constants: PhysicalConstants, force: ForceProfile, t: float) -> float:
    """Same shift from ``int_0^t F(tau)(t - tau)/m dtau`` by adaptive quadrature."""
    t = float(_check_time(t))
    if t == 0:
        return 0.0
    if force.kind == "tabulated" and t > force.t_max * (1 + 1e-14):
        raise DomainError(f"time {t} lies beyond the tabulated force")
    points = force.breakpoints(t)
    limit = max(200, 4 * len(points) + 50)
    scale = max(1.0, force.sup_norm * t)
    val, _ = integrate.quad(
        lambda s: force.value(s) * (t - s),
        0.0,
        t,
        points=points or None,
        limit=limit,
        epsabs=1e-13 * scale,
        epsrel=1e-13,
    )
    return val / constants.mass


def total_phase(constants: PhysicalConstants, force: ForceProfile, x, t):
    """Phase accumulated by the packet, assembled term by term:

    ``phi0(x,t) - f_b t x1/hbar + alpha x/hbar - int_0^t alpha^2/2m /hbar``.
    """
    h, m, fb = constants.hbar, constants.mass, constants.f_b
    t_arr = _check_time(t)
    xs = x1(constants, force, t_arr)
    out = (
        phi0(constants, x, t_arr)
        - fb * t_arr * xs / h
        + force.alpha(t_arr) * np.asarray(x, dtype=float) / h
        - force.alpha_square_integral(t_arr) / (2.0 * m * h)
    )
    if np.ndim(out) == 0:
        return float(out)
    return out


def analytic_state(constants: PhysicalConstants, force: ForceProfile, t: float) -> AnalyticState:
    t = float(_check_time(t))
    h, m, fb = constants.hbar, constants.mass, constants.f_b
    shift0 = x0(constants, t)
    shift1 = x1(constants, force, t)
    a = force.alpha(t)
    slope = (fb * t + a) / h
    offset = (
        -(fb ** 2) * t ** 3 / (3.0 * m * h)
        - fb * t * shift1 / h
        - force.alpha_square_integral(t) / (2.0 * m * h)
    )
    return AnalyticState(t, shift0 + shift1, slope, offset, shift0, shift1, a)


def analytic_field(
    constants: PhysicalConstants, force: ForceProfile, grid: GridSpec, t: float
) -> WaveField:
    """Exact field ``Ai(b (x - x0 - x1)) exp(i phi)`` on ``grid``."""
    t = float(_check_time(t))
    x = grid.x
    if t == 0:
        return WaveField(grid, ai(constants.b * x).astype(complex))
    shift = x0(constants, t) + x1(constants, force, t)
    envelope = ai(constants.b * (x - shift))
    return WaveField(grid, envelope * np.exp(1j * total_phase(constants, force, x, t)))


def forced_factors(constants: PhysicalConstants, force: ForceProfile, t: float):
    """Ordered exponents of the evolution under ``p^2/2m - F(t) x``.

    The propagator factors as a momentum kick, a pure phase, a translation
    and free spreading, ``e^E1 e^E2 e^E3 e^E4`` with

        E1 = (i/hbar) alpha(t) x
        E2 = -(i/hbar) int_0^t alpha^2 / 2m
        E3 = -(i/hbar) x1(t) p
        E4 = -(i/hbar) H0 t.
    """
    from .operator_algebra import FactorList, OperatorExpr, h0_operator

    t = float(_check_time(t))
    h, m = constants.hbar, constants.mass
    exponents = (
        OperatorExpr.x(h) * (1j * force.alpha(t) / h),
        OperatorExpr.scalar(-1j * force.alpha_square_integral(t) / (2.0 * m * h), h),
        OperatorExpr.p(h) * (-1j * x1(constants, force, t) / h),
        h0_operator(constants) * (-1j * t / h),
    )
    return FactorList(exponents, 3, True)
