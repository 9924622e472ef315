"""Exact Gaussian rationals, precision defaults and serialization helpers."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import mpmath
from mpmath import mp

DEFAULT_PREC = 128


def default_tol(prec: int) -> mpmath.mpf:
    """Elimination tolerance, leaving 16 bits of headroom."""
    return mpmath.mpf(2) ** -(prec - 16)


def default_tol_resonance(prec: int) -> mpmath.mpf:
    return mpmath.mpf(2) ** -(prec // 2)


def mpf_to_fraction(x) -> Fraction:
    x = mpmath.mpf(x)
    if not mpmath.isfinite(x):
        raise ValueError(f"cannot convert {x} to an exact rational")
    man, exp = x.man_exp
    if exp >= 0:
        return Fraction(int(man) << exp)
    return Fraction(int(man), 1 << -exp)


def fraction_to_mpf(q: Fraction) -> mpmath.mpf:
    return mpmath.mpf(q.numerator) / q.denominator


class GaussianRational(NamedTuple):
    """An exact complex number with rational real and imaginary parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(Fraction(value))
        if isinstance(value, float):
            return cls(Fraction(value))
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        if isinstance(value, mpmath.mpc):
            return cls(mpf_to_fraction(value.real), mpf_to_fraction(value.imag))
        if isinstance(value, mpmath.mpf):
            return cls(mpf_to_fraction(value))
        if isinstance(value, str):
            from .germ import parse_coefficient

            return parse_coefficient(value)
        raise TypeError(f"cannot interpret {value!r} as a coefficient")

    def to_mpc(self) -> mpmath.mpc:
        return mpmath.mpc(fraction_to_mpf(self.re), fraction_to_mpf(self.im))

    def __abs__(self) -> float:
        return math.hypot(float(self.re), float(self.im))

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __str__(self) -> str:
        return format_gaussian(self)


def _format_fraction(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def format_gaussian(z: GaussianRational) -> str:
    """Render ``z`` in the germ grammar, e.g. ``1/2``, ``3i``, ``(1-2/3i)``."""
    if z.im == 0:
        return _format_fraction(z.re)
    if z.re == 0:
        return f"{_format_fraction(z.im)}i"
    sign = "+" if z.im > 0 else "-"
    return f"({_format_fraction(z.re)}{sign}{_format_fraction(abs(z.im))}i)"


def digits_for(prec: int) -> int:
    return int(prec * math.log10(2)) + 3


def mp_str(x, prec: int | None = None) -> str:
    """Decimal string with enough digits to round-trip at ``prec`` bits."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if prec is None:
        prec = max(53, mpmath.mpf(x).man.bit_length()) if isinstance(x, mpmath.mpf) else 53
    with mp.workprec(prec):
        x = mpmath.mpf(x)
    if mpmath.isinf(x):
        return "inf" if x > 0 else "-inf"
    return mpmath.nstr(x, digits_for(prec), min_fixed=-5, max_fixed=20, strip_zeros=True)


def complex_pair(z, prec: int | None = None) -> list[str]:
    z = mpmath.mpc(z)
    return [mp_str(z.real, prec), mp_str(z.imag, prec)]


def to_float(x) -> float:
    """Float view of an mpf; overflows to +/-inf instead of raising."""
    try:
        return float(x)
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def jsonable(x):
    """Best-effort conversion of report values to JSON-compatible objects."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, mpmath.mpc):
        return complex_pair(x)
    if isinstance(x, mpmath.mpf):
        return mp_str(x)
    if isinstance(x, complex):
        return [repr(x.real), repr(x.imag)]
    if isinstance(x, Fraction):
        return _format_fraction(x)
    if isinstance(x, GaussianRational):
        return format_gaussian(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "to_json"):
        return x.to_json()
    return x
