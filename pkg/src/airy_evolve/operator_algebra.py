"""Normal-ordered polynomials in position and momentum with ``[x, p] = i hbar``.

Every operator is stored as a map ``(m, n) -> c`` meaning ``sum c x^m p^n``
with all powers of ``x`` to the left. Products are brought back to normal
order with the closed-form reordering rule

    p^b x^c = sum_k k! C(b, k) C(c, k) (-i hbar)^k x^(c-k) p^(b-k).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Mapping

import numpy as np
from scipy.linalg import expm

from .errors import ParameterError

DROP_TOL = 1e-15


def _clean(terms):
    return {key: complex(c) for key, c in terms.items() if abs(c) >= DROP_TOL}


class OperatorExpr:
    """Immutable normal-ordered polynomial in ``x`` and ``p``."""

    __slots__ = ("_terms", "_hbar")

    def __init__(self, terms: Mapping[tuple[int, int], complex] | None = None, hbar: float = 1.0):
        if not hbar > 0:
            raise ParameterError(f"hbar must be positive, got {hbar}")
        clean = {}
        for (m, n), c in (terms or {}).items():
            if m < 0 or n < 0:
                raise ParameterError(f"negative exponent in term {(m, n)}")
            clean[(int(m), int(n))] = clean.get((int(m), int(n)), 0) + c
        self._terms = _clean(clean)
        self._hbar = float(hbar)

    # constructors
    @classmethod
    def scalar(cls, c, hbar=1.0):
        return cls({(0, 0): c}, hbar)

    @classmethod
    def identity(cls, hbar=1.0):
        return cls.scalar(1.0, hbar)

    @classmethod
    def zero(cls, hbar=1.0):
        return cls({}, hbar)

    @classmethod
    def x(cls, hbar=1.0):
        return cls({(1, 0): 1.0}, hbar)

    @classmethod
    def p(cls, hbar=1.0):
        return cls({(0, 1): 1.0}, hbar)

    @property
    def terms(self) -> dict[tuple[int, int], complex]:
        return dict(self._terms)

    @property
    def hbar(self) -> float:
        return self._hbar

    def coefficient(self, m: int, n: int) -> complex:
        return self._terms.get((m, n), 0j)

    @property
    def degree(self) -> int:
        return max((m + n for m, n in self._terms), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def is_scalar(self) -> bool:
        return all(key == (0, 0) for key in self._terms)

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, OperatorExpr):
            if other._hbar != self._hbar:
                raise ParameterError(
                    f"operators use different hbar ({self._hbar} vs {other._hbar})"
                )
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return OperatorExpr.scalar(other, self._hbar)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out.get(key, 0) + c
        return OperatorExpr(out, self._hbar)

    __radd__ = __add__

    def __neg__(self):
        return OperatorExpr({k: -c for k, c in self._terms.items()}, self._hbar)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return OperatorExpr({k: c * other for k, c in self._terms.items()}, self._hbar)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[tuple[int, int], complex] = {}
        ih = -1j * self._hbar
        for (a, b), c1 in self._terms.items():
            for (c, d), c2 in other._terms.items():
                for k in range(min(b, c) + 1):
                    w = c1 * c2 * factorial(k) * comb(b, k) * comb(c, k) * ih ** k
                    key = (a + c - k, b - k + d)
                    out[key] = out.get(key, 0) + w
        return OperatorExpr(out, self._hbar)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ParameterError("only non-negative integer powers are supported")
        out = OperatorExpr.identity(self._hbar)
        for _ in range(int(k)):
            out = out * self
        return out

    def isclose(self, other: "OperatorExpr", tol: float = 1e-12) -> bool:
        diff = self - other
        return diff.is_zero(tol)

    def __eq__(self, other):
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self._hbar == other._hbar and self._terms == other._terms

    def __hash__(self):
        return hash((self._hbar, tuple(sorted(self._terms.items(), key=lambda kv: kv[0]))))

    def render(self) -> str:
        """Sorted debug string, e.g. ``(0+1i)·1`` for ``i hbar`` at ``hbar = 1``."""
        if not self._terms:
            return "0"
        parts = []
        for (m, n) in sorted(self._terms):
            c = self._terms[(m, n)]
            coef = f"({c.real:.12g}{c.imag:+.12g}i)"
            parts.append(f"{coef}·{_monomial(m, n)}")
        return " + ".join(parts)

    def __repr__(self):
        return f"OperatorExpr({self.render()}, hbar={self._hbar:g})"

    __str__ = render


def _monomial(m, n):
    pieces = []
    for sym, e in (("x", m), ("p", n)):
        if e == 1:
            pieces.append(sym)
        elif e > 1:
            pieces.append(f"{sym}^{e}")
    return "·".join(pieces) if pieces else "1"


def commutator(a: OperatorExpr, b: OperatorExpr) -> OperatorExpr:
    """``ab - ba`` in normal order."""
    if a.hbar != b.hbar:
        raise ParameterError(f"operators use different hbar ({a.hbar} vs {b.hbar})")
    return a * b - b * a


@dataclass(frozen=True)
class FactorList:
    """Ordered exponents ``E1, E2, ...`` standing for ``e^E1 e^E2 ...``.

    ``exact`` is set when every Lie bracket of degree four in the two
    generators vanishes, in which case no further factors exist.
    """

    exponents: tuple[OperatorExpr, ...]
    truncation_order: int
    exact: bool

    def __len__(self):
        return len(self.exponents)

    def __getitem__(self, i):
        return self.exponents[i]

    def __iter__(self):
        return iter(self.exponents)


def zassenhaus(a: OperatorExpr, b: OperatorExpr, max_order: int = 3) -> FactorList:
    """Disentangle ``e^(a+b)`` into ``e^a e^b e^C2 e^C3`` with

    ``C2 = -[a,b]/2`` and ``C3 = [a,[a,b]]/6 + [b,[a,b]]/3``.

    Only factors through third order are available. The returned list is
    flagged exact when all fourth-order brackets vanish, since every higher
    factor is built from them.
    """
    if max_order < 2:
        raise ParameterError("max_order must be at least 2")
    ab = commutator(a, b)
    aab = commutator(a, ab)
    bab = commutator(b, ab)
    factors = [a, b, ab * -0.5]
    if max_order >= 3:
        factors.append(aab * (1.0 / 6.0) + bab * (1.0 / 3.0))
        beyond = [commutator(g, inner) for g in (a, b) for inner in (aab, bab)]
    else:
        beyond = [aab, bab]
    exact = all(t.is_zero(1e-12) for t in beyond)
    return FactorList(tuple(factors), min(max_order, 3), exact)


def hb_operator(constants) -> OperatorExpr:
    """Airy Hamiltonian ``p^2/2m + f_b x``; ``Ai(b(x - s))`` is its eigenfunction."""
    return OperatorExpr(
        {(0, 2): 1.0 / (2.0 * constants.mass), (1, 0): constants.f_b}, constants.hbar
    )


def h0_operator(constants) -> OperatorExpr:
    return OperatorExpr({(0, 2): 1.0 / (2.0 * constants.mass)}, constants.hbar)


def forced_hamiltonian(constants, force_value: float) -> OperatorExpr:
    """``p^2/2m - F x`` at a fixed force value."""
    return OperatorExpr(
        {(0, 2): 1.0 / (2.0 * constants.mass), (1, 0): -force_value}, constants.hbar
    )


def hi_operator(constants, force_value: float = 0.0) -> OperatorExpr:
    """Remainder ``H - H_b = -(f_b + F) x``; drives the packet's motion."""
    return OperatorExpr({(1, 0): -(constants.f_b + force_value)}, constants.hbar)


def classical_acceleration(constants, force_value: float = 0.0) -> float:
    if not constants.mass > 0:
        raise ParameterError(f"mass must be positive, got {constants.mass}")
    return (constants.f_b + force_value) / constants.mass


def free_space_generators(constants, t: float) -> tuple[OperatorExpr, OperatorExpr]:
    """The pair ``A = (i/hbar) f_b x t`` and ``B = -(i/hbar) H_b t`` with ``A + B = -(i/hbar) H0 t``."""
    h = constants.hbar
    a = OperatorExpr.x(h) * (1j * constants.f_b * t / h)
    b = hb_operator(constants) * (-1j * t / h)
    return a, b


# Finite matrix check

def ladder_matrices(dim: int, hbar: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Position and momentum in a truncated oscillator basis (unit frequency and mass).

    ``[x, p] = i hbar`` holds exactly except in the last diagonal entry,
    so low-index blocks of polynomial functions are faithful.
    """
    creation = np.diag(np.sqrt(np.arange(1, dim)), -1)
    annihilation = creation.T
    scale = np.sqrt(hbar / 2.0)
    x = scale * (creation + annihilation)
    p = 1j * scale * (creation - annihilation)
    return x.astype(complex), p


def to_matrix(expr: OperatorExpr, dim: int) -> np.ndarray:
    x, p = ladder_matrices(dim, expr.hbar)
    out = np.zeros((dim, dim), dtype=complex)
    cache_x = {0: np.eye(dim, dtype=complex)}
    cache_p = {0: np.eye(dim, dtype=complex)}

    def power(cache, base, k):
        if k not in cache:
            cache[k] = power(cache, base, k - 1) @ base
        return cache[k]

    for (m, n), c in expr.terms.items():
        out += c * (power(cache_x, x, m) @ power(cache_p, p, n))
    return out


def factor_product_matrix(factors, dim: int) -> np.ndarray:
    out = np.eye(dim, dtype=complex)
    for e in factors:
        out = out @ expm(to_matrix(e, dim))
    return out


def zassenhaus_matrix_deviation(a: OperatorExpr, b: OperatorExpr, dim: int = 240, block: int = 12) -> float:
    """Max deviation between ``expm(a+b)`` and the ordered factor product on the leading block."""
    factors = zassenhaus(a, b, 3)
    lhs = expm(to_matrix(a + b, dim))
    rhs = factor_product_matrix(factors, dim)
    return float(np.max(np.abs(lhs[:block, :block] - rhs[:block, :block])))
