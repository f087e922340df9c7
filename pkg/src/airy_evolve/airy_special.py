"""Airy function Ai and its derivatives for real arguments.

Inside ``|x| <= X_SWITCH`` values come from local Taylor expansions of the
Airy equation ``y'' = x y`` about a table of nodes; the recurrence for the
Taylor coefficients about a centre ``c`` is

    a[n+2] = (c*a[n] + a[n-1]) / ((n+2)(n+1)),

which for ``c = 0`` is the Maclaurin series. Node values on the negative
axis are obtained by stepping the ODE outward from the exact values at
zero (the oscillatory side is neutrally stable). On the positive axis
stepping away from zero would amplify the growing solution Bi, so nodes
are built by stepping inward from an asymptotic anchor at ``X_SWITCH``.
Outside the node range the standard large-argument expansions are used,
truncated at their smallest term.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ParameterError
from .fields import GridSpec, WaveField

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

X_SWITCH = 8.5
X_MIN = -1000.0
NODE_SPACING = 0.25
TAYLOR_TERMS = 32
ASYMPTOTIC_TERMS = 48

# Extrema and zeros of Ai used as landmarks by the verification code.
FIRST_ZERO = -2.338107410459767
FIRST_EXTREMUM = -1.0187929716474710


def _asymptotic_coefficients(count):
    u = np.empty(count)
    v = np.empty(count)
    u[0] = v[0] = 1.0
    for k in range(1, count):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
        v[k] = -(6 * k + 1) / (6 * k - 1) * u[k]
    return u, v


_U, _V = _asymptotic_coefficients(ASYMPTOTIC_TERMS)


def _truncated_terms(coeffs, zeta):
    """Terms ``coeffs[j] * zeta**-j`` cut off once their magnitude stops decreasing.

    Returns an array of shape ``(len(coeffs), len(zeta))`` holding zeros past
    each column's smallest term.
    """
    j = np.arange(len(coeffs))[:, None]
    terms = coeffs[:, None] * zeta[None, :] ** (-j.astype(float))
    mag = np.abs(terms)
    shrinking = np.ones_like(mag, dtype=bool)
    shrinking[1:] = mag[1:] < mag[:-1]
    keep = np.logical_and.accumulate(shrinking, axis=0)
    return np.where(keep, terms, 0.0), j


def _asymptotic_positive(x):
    zeta = (2.0 / 3.0) * x ** 1.5
    sign = (-1.0) ** np.arange(ASYMPTOTIC_TERMS)
    tu, _ = _truncated_terms(sign * _U, zeta)
    tv, j = _truncated_terms(sign * _V, zeta)
    su = tu.sum(axis=0)
    sv = tv.sum(axis=0)
    dsv = (-j * tv).sum(axis=0) / zeta
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    value = pref * x ** -0.25 * su
    deriv = -pref * x ** 0.25 * sv
    second = -pref * (0.25 * x ** -0.75 * sv - x ** 0.75 * sv + x ** 0.75 * dsv)
    return value, deriv, second


def _split_even_odd(terms, j):
    """Alternating-sign even and odd partial sums for the oscillatory forms."""
    even = j[:, 0] % 2 == 0
    sgn = np.where((j[:, 0] // 2) % 2 == 0, 1.0, -1.0)[:, None]
    signed = sgn * terms
    d_signed = -j * signed
    return (
        signed[even].sum(axis=0),
        signed[~even].sum(axis=0),
        d_signed[even].sum(axis=0),
        d_signed[~even].sum(axis=0),
    )


def _asymptotic_negative(x):
    z = -x
    zeta = (2.0 / 3.0) * z ** 1.5
    theta = zeta - math.pi / 4.0
    c, s = np.cos(theta), np.sin(theta)
    tu, j = _truncated_terms(_U, zeta)
    tv, _ = _truncated_terms(_V, zeta)
    p, q, _, _ = _split_even_odd(tu, j)
    r, sv, dr, dsv = _split_even_odd(tv, j)
    dr = dr / zeta
    dsv = dsv / zeta
    rpi = 1.0 / math.sqrt(math.pi)
    value = rpi * z ** -0.25 * (c * p + s * q)
    g = rpi * z ** 0.25 * (s * r - c * sv)
    dg = g / (4.0 * z) + rpi * z ** 0.75 * (c * r + s * sv + s * dr - c * dsv)
    return value, g, -dg


def _taylor_coefficients(center, a0, a1, count):
    """Taylor coefficients of the Airy solution about ``center``; arrays broadcast."""
    a = [np.asarray(a0, dtype=float), np.asarray(a1, dtype=float)]
    a.append(center * a[0] / 2.0)
    for n in range(1, count - 2):
        a.append((center * a[n] + a[n - 1]) / ((n + 2) * (n + 1)))
    return a


def _taylor_sum(coeffs, h):
    value = np.zeros_like(h)
    deriv = np.zeros_like(h)
    second = np.zeros_like(h)
    for n in range(len(coeffs) - 1, -1, -1):
        value = value * h + coeffs[n]
        if n >= 1:
            deriv = deriv * h + n * coeffs[n]
        if n >= 2:
            second = second * h + n * (n - 1) * coeffs[n]
    return value, deriv, second


def _build_nodes():
    count = int(round(X_SWITCH / NODE_SPACING))
    centers = NODE_SPACING * np.arange(-count, count + 1)
    values = np.empty(2 * count + 1)
    derivs = np.empty(2 * count + 1)
    values[count], derivs[count] = AI0, AIP0
    for i in range(count, 0, -1):
        c = _taylor_coefficients(centers[i], values[i], derivs[i], 2 * TAYLOR_TERMS)
        v, d, _ = _taylor_sum(c, np.array(-NODE_SPACING))
        values[i - 1], derivs[i - 1] = v, d
    top = np.array([X_SWITCH])
    v, d, _ = _asymptotic_positive(top)
    values[-1], derivs[-1] = v[0], d[0]
    for i in range(2 * count, count + 1, -1):
        c = _taylor_coefficients(centers[i], values[i], derivs[i], 2 * TAYLOR_TERMS)
        v, d, _ = _taylor_sum(c, np.array(-NODE_SPACING))
        values[i - 1], derivs[i - 1] = v, d
    return centers, values, derivs


_CENTERS, _NODE_VALUES, _NODE_DERIVS = _build_nodes()


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Airy evaluation requires finite arguments")
    if np.any(x < X_MIN):
        raise DomainError(f"Airy evaluation supported for x >= {X_MIN}, got {np.min(x)}")
    return x


def evaluate_taylor(x):
    """Value, first and second derivative from the node expansions.

    Valid for ``|x| <= X_SWITCH + NODE_SPACING/2``; exposed for the
    branch-consistency checks.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.clip(
        np.rint((x - _CENTERS[0]) / NODE_SPACING).astype(int), 0, len(_CENTERS) - 1
    )
    c = _CENTERS[idx]
    coeffs = _taylor_coefficients(c, _NODE_VALUES[idx], _NODE_DERIVS[idx], TAYLOR_TERMS)
    return _taylor_sum(coeffs, x - c)


def evaluate_asymptotic(x):
    """Value, first and second derivative from the large-|x| expansions."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = [np.empty_like(x) for _ in range(3)]
    pos = x > 0
    for branch, mask in ((_asymptotic_positive, pos), (_asymptotic_negative, ~pos)):
        if np.any(mask):
            for o, r in zip(out, branch(x[mask])):
                o[mask] = r
    return tuple(out)


def airy_derivatives(x):
    """Return ``(Ai(x), Ai'(x), Ai''(x))`` evaluated elementwise.

    ``Ai''`` is produced by the same expansions as the value, not by the
    ODE identity, so ``Ai'' - x Ai`` is a meaningful residual.
    """
    x = _check_domain(x)
    scalar = x.ndim == 0
    flat = np.atleast_1d(x).ravel()
    out = [np.empty_like(flat) for _ in range(3)]
    inner = np.abs(flat) <= X_SWITCH
    for evaluate, mask in ((evaluate_taylor, inner), (evaluate_asymptotic, ~inner)):
        if np.any(mask):
            for o, r in zip(out, evaluate(flat[mask])):
                o[mask] = r
    if scalar:
        return tuple(float(o[0]) for o in out)
    return tuple(o.reshape(x.shape) for o in out)


def ai(x):
    """Airy function Ai, normalised so that ``Ai(0) = 3**(-2/3) / Gamma(2/3)``."""
    return airy_derivatives(x)[0]


def ai_prime(x):
    """Derivative Ai'(x)."""
    return airy_derivatives(x)[1]


def ai_second(x):
    """Second derivative Ai''(x) from the series machinery."""
    return airy_derivatives(x)[2]


def ai_packet(b: float, x_shift: float, grid: GridSpec) -> WaveField:
    """Real Airy packet ``Ai(b (x - x_shift))`` sampled on ``grid``."""
    if not b > 0:
        raise ParameterError(f"Airy packet requires b > 0, got {b}")
    return WaveField(grid, ai(b * (grid.x - x_shift)).astype(complex))
