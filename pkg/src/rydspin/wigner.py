"""Wigner 3j/6j symbols and Clebsch-Gordan coefficients.

Quantum numbers are carried internally as doubled integers so selection
rules are decided exactly.  The Racah sums are evaluated with Python
integers and :class:`fractions.Fraction`; only the final square root is
taken in floating point, so results are correctly rounded to a few ulp for
every argument this package needs (j <= 10).

Condon-Shortley phase convention throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real

from .exceptions import InvalidArgumentError

__all__ = ["HalfInt", "wigner_3j", "wigner_6j", "clebsch_gordan", "triangle"]

_J_MAX_TWICE = 40  # j <= 20; the float result degrades beyond that anyway


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer stored as ``twice_value = 2 * value``."""

    twice_value: int

    @classmethod
    def of(cls, x) -> HalfInt:
        if isinstance(x, HalfInt):
            return x
        return cls(_twice(x))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    def __float__(self) -> float:
        return self.twice_value / 2

    def __repr__(self) -> str:
        t = self.twice_value
        return f"HalfInt({t // 2})" if t % 2 == 0 else f"HalfInt({t}/2)"


def _twice(x) -> int:
    if isinstance(x, HalfInt):
        return x.twice_value
    if isinstance(x, bool) or not isinstance(x, (Real, Fraction)):
        raise InvalidArgumentError(f"quantum number must be a real number, got {x!r}")
    t = 2 * Fraction(x) if not isinstance(x, float) else 2 * x
    ti = round(t)
    if abs(t - ti) > 1e-9:
        raise InvalidArgumentError(f"{x!r} is not an integer or half-integer")
    return int(ti)


def _j(x) -> int:
    t = _twice(x)
    if t < 0:
        raise InvalidArgumentError(f"angular momentum must be non-negative, got {x!r}")
    if t > _J_MAX_TWICE:
        raise InvalidArgumentError(f"angular momentum {x!r} exceeds supported range j <= {_J_MAX_TWICE // 2}")
    return t


def _jm(j, m) -> tuple[int, int] | None:
    """Doubled (j, m); None when |m| > j, which is a selection-rule zero."""
    tj, tm = _j(j), _twice(m)
    if (tj - tm) % 2:
        raise InvalidArgumentError(f"projection m={m!r} incompatible with j={j!r}")
    return None if abs(tm) > tj else (tj, tm)


def _tri2(a: int, b: int, c: int) -> bool:
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


def triangle(j1, j2, j3) -> bool:
    """True when (j1, j2, j3) can couple (triangle rule with integer perimeter)."""
    return _tri2(_j(j1), _j(j2), _j(j3))


_fact = math.factorial


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    # arguments are doubled; triangle rule already checked
    return Fraction(
        _fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
        _fact((a + b + c) // 2 + 1),
    )


def _signed_sqrt(sq: Fraction, s: Fraction) -> float:
    """Return sign(s) * sqrt(sq * s**2) with a single rounding at the end."""
    if s == 0:
        return 0.0
    val = sq * s * s
    # int / int is correctly rounded, so only two roundings happen in total
    out = math.sqrt(val.numerator / val.denominator)
    return out if s > 0 else -out


@lru_cache(maxsize=65536)
def _w3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    if m1 + m2 + m3 != 0 or not _tri2(j1, j2, j3):
        return 0.0
    # Racah single sum, all quantities in units of 1 (halved doubled ints)
    a = (j1 + j2 - j3) // 2
    b = (j1 - m1) // 2
    c = (j2 + m2) // 2
    d = (j3 - j2 + m1) // 2
    e = (j3 - j1 - m2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = _fact(k) * _fact(d + k) * _fact(e + k) * _fact(a - k) * _fact(b - k) * _fact(c - k)
        s += Fraction(-1 if k % 2 else 1, den)
    pref = _delta_sq(j1, j2, j3) * (
        _fact((j1 + m1) // 2) * _fact((j1 - m1) // 2)
        * _fact((j2 + m2) // 2) * _fact((j2 - m2) // 2)
        * _fact((j3 + m3) // 2) * _fact((j3 - m3) // 2)
    )
    phase = -1 if ((j1 - j2 - m3) // 2) % 2 else 1
    return phase * _signed_sqrt(pref, s)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Arguments may be ints, floats such as ``0.5``, :class:`~fractions.Fraction`
    or :class:`HalfInt`.  Returns exactly ``0.0`` when a selection rule fails.

    >>> round(wigner_3j(1, 1, 2, 0, 0, 0), 11)
    0.36514837167
    """
    pairs = (_jm(j1, m1), _jm(j2, m2), _jm(j3, m3))
    if None in pairs:
        return 0.0
    (t1, u1), (t2, u2), (t3, u3) = pairs
    return _w3j(t1, t2, t3, u1, u2, u3)


@lru_cache(maxsize=65536)
def _w6j(j1: int, j2: int, j3: int, j4: int, j5: int, j6: int) -> float:
    triads = ((j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3))
    if not all(_tri2(*t) for t in triads):
        return 0.0
    sums = [sum(t) // 2 for t in triads]
    quads = ((j1 + j2 + j4 + j5) // 2, (j2 + j3 + j5 + j6) // 2, (j3 + j1 + j6 + j4) // 2)
    s = Fraction(0)
    for t in range(max(sums), min(quads) + 1):
        den = 1
        for x in sums:
            den *= _fact(t - x)
        for q in quads:
            den *= _fact(q - t)
        s += Fraction((-1 if t % 2 else 1) * _fact(t + 1), den)
    pref = Fraction(1)
    for tr in triads:
        pref *= _delta_sq(*tr)
    return _signed_sqrt(pref, s)


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol ``{j1 j2 j3; j4 j5 j6}``; zero if any triad fails the triangle rule."""
    return _w6j(_j(j1), _j(j2), _j(j3), _j(j4), _j(j5), _j(j6))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | J M>``.

    Obtained from the 3j symbol via
    ``(-1)**(j1 - j2 + M) * sqrt(2J + 1) * (j1 j2 J; m1 m2 -M)``.
    """
    pairs = (_jm(j1, m1), _jm(j2, m2), _jm(J, M))
    if None in pairs:
        return 0.0
    (t1, u1), (t2, u2), (tJ, uM) = pairs
    if u1 + u2 != uM:
        return 0.0
    w = _w3j(t1, t2, tJ, u1, u2, -uM)
    if w == 0.0:
        return 0.0
    phase = -1 if ((t1 - t2 + uM) // 2) % 2 else 1
    return phase * math.sqrt(tJ + 1) * w
