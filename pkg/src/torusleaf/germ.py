"""Polynomial germs and truncated power-series calculus.

A series is stored densely as ``a_1 .. a_N`` (the constant term is always
zero and never stored).  All arithmetic runs in ``mpmath`` at a caller-chosen
precision; coefficients of parsed germs are kept as exact Gaussian
rationals until a precision is requested.

The normal-form recursion conjugates ``f = tau xi + A xi**(n+1) + ...`` by
``h = xi + h1 xi**(n+1)`` with ``h1 = tau**-1 A / (tau**n - 1)``, which kills
the order ``n+1`` term.  At a resonant order (``tau**n == 1``) the term
cannot be removed; its coefficient ``tau**-1 A`` is the obstruction.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath
from mpmath import mp

from .diophantine import Multiplier
from .errors import (
    DegreeError,
    NonInvertibleError,
    OrderMismatchError,
    ParseError,
    PreconditionError,
    ResonanceError,
)
from .numbers import (
    DEFAULT_PREC,
    GaussianRational,
    complex_pair,
    default_tol,
    default_tol_resonance,
    format_gaussian,
    mp_str,
)

# -- coefficient and germ grammar ----------------------------------------------

_REAL = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?(?:/\d+)?"
_REAL_RE = re.compile(rf"^[+-]?{_REAL}$")
_IMAG_RE = re.compile(rf"^([+-]?)({_REAL})?\*?i$")
_VARS = ("xi", "ξ", "x", "z")


def _real(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad number {text!r}") from exc


def _split_signed(s: str) -> list[str]:
    """Split at top-level + and - (not inside parentheses or exponents)."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch in "+-" and depth == 0 and i > start:
            if s[i - 1] in "eE" and i >= 2 and s[i - 2].isdigit():
                continue
            parts.append(s[start:i])
            start = i
    parts.append(s[start:])
    return [p for p in parts if p]


def parse_coefficient(text: str) -> GaussianRational:
    """Parse an exact complex number: ``3``, ``-1/2``, ``0.25``, ``2i``, ``(1-2/3i)``."""
    s = text.strip().replace(" ", "")
    while s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    if not s:
        raise ParseError("empty coefficient")
    re_part, im_part = Fraction(0), Fraction(0)
    for piece in _split_signed(s):
        if piece.startswith("(") or piece[1:].startswith("("):
            sign = -1 if piece.startswith("-") else 1
            inner = piece.lstrip("+-")
            if not inner.endswith(")"):
                raise ParseError(f"unbalanced parentheses in {text!r}")
            z = parse_coefficient(inner)
            re_part += sign * z.re
            im_part += sign * z.im
            continue
        m = _IMAG_RE.match(piece)
        if m:
            mag = _real(m.group(2)) if m.group(2) else Fraction(1)
            im_part += -mag if m.group(1) == "-" else mag
        elif _REAL_RE.match(piece):
            re_part += _real(piece)
        else:
            raise ParseError(f"cannot parse coefficient {text!r}")
    return GaussianRational(re_part, im_part)


def _parse_term(term: str) -> tuple[int, GaussianRational]:
    sign = -1 if term.startswith("-") else 1
    body = term.lstrip("+-")
    if not body or len(term) - len(body) > 1:
        raise ParseError(f"dangling sign in term {term!r}")
    body = body.replace("**", "^")
    power = 0
    for var in _VARS:
        idx = body.find(var)
        if idx < 0:
            continue
        # "xi" the variable, not the imaginary unit following an x
        tail = body[idx + len(var):]
        if tail and not tail.startswith("^"):
            continue
        power = 1
        if tail:
            try:
                power = int(tail[1:])
            except ValueError as exc:
                raise ParseError(f"bad exponent in {term!r}") from exc
        body = body[:idx].rstrip("*")
        break
    if body in ("", "+"):
        coef = GaussianRational(Fraction(1))
    elif body == "-":
        coef = GaussianRational(Fraction(-1))
    else:
        coef = parse_coefficient(body)
    return power, GaussianRational(sign * coef.re, sign * coef.im)


def parse_polynomial(text: str) -> list[GaussianRational]:
    """Coefficients ``c_0 .. c_d`` of a one-variable polynomial string."""
    s = text.strip().replace(" ", "")
    if not s:
        raise ParseError("empty polynomial")
    coeffs: dict[int, GaussianRational] = {}
    for term in _split_signed(s):
        power, c = _parse_term(term)
        old = coeffs.get(power, GaussianRational(Fraction(0)))
        coeffs[power] = GaussianRational(old.re + c.re, old.im + c.im)
    deg = max((k for k, c in coeffs.items() if not c.is_zero()), default=0)
    return [coeffs.get(k, GaussianRational(Fraction(0))) for k in range(deg + 1)]


def format_polynomial(coeffs: Sequence[GaussianRational], var: str = "x") -> str:
    out = []
    for k, c in enumerate(coeffs):
        if c.is_zero():
            continue
        mono = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
        if c.im == 0:
            neg = c.re < 0
            mag = format_gaussian(GaussianRational(abs(c.re)))
        elif c.re == 0:
            neg = c.im < 0
            mag = format_gaussian(GaussianRational(Fraction(0), abs(c.im)))
        else:
            neg = False
            mag = format_gaussian(c)
        if mono and mag == "1":
            mag = ""
        out.append(("-" if neg else "+") + mag + mono)
    text = "".join(out) or "0"
    return text[1:] if text.startswith("+") else text


# -- polynomials -----------------------------------------------------------------


def _zero():
    return GaussianRational(Fraction(0))


@dataclass(frozen=True)
class Polynomial:
    """``c_0 + c_1 xi + ... + c_d xi**d`` with exact Gaussian-rational coefficients.

    When ``multiplier`` is set, ``c_1`` is only a stored approximation and
    ``mp_coeffs`` recomputes it from the multiplier at the requested precision.
    """

    coeffs: tuple
    multiplier: Multiplier | None = None

    def __post_init__(self):
        cs = tuple(GaussianRational.coerce(c) for c in self.coeffs)
        while len(cs) > 1 and cs[-1].is_zero():
            cs = cs[:-1]
        if not cs:
            cs = (_zero(),)
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        return cls(tuple(parse_polynomial(text)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def mp_coeffs(self, prec: int | None = None) -> list:
        prec = prec or DEFAULT_PREC
        with mp.workprec(prec):
            cs = [c.to_mpc() for c in self.coeffs]
            if self.multiplier is not None and len(cs) > 1:
                cs[1] = self.multiplier.tau(prec)
        return cs

    def tau(self, prec: int | None = None):
        return self.mp_coeffs(prec)[1] if self.degree >= 1 else mpmath.mpc(0)

    def __call__(self, xi, prec: int | None = None):
        return horner(self.mp_coeffs(prec), xi)

    def derivative_coeffs(self, prec: int | None = None) -> list:
        cs = self.mp_coeffs(prec)
        return [k * cs[k] for k in range(1, len(cs))]

    def to_json(self) -> dict:
        out = {"f": str(self), "degree": self.degree}
        if self.multiplier is not None:
            out["multiplier"] = self.multiplier.to_json()
        return out

    def __str__(self) -> str:
        if self.multiplier is not None:
            rest = format_polynomial((_zero(), _zero()) + self.coeffs[2:])
            tail = "" if rest == "0" else ("+" + rest if not rest.startswith("-") else rest)
            return f"tau*x{tail}"
        return format_polynomial(self.coeffs)


def horner(coeffs, xi):
    acc = mpmath.mpc(0)
    for c in reversed(coeffs):
        acc = acc * xi + c
    return acc


@dataclass(frozen=True)
class PolynomialGerm(Polynomial):
    """A polynomial germ ``f(0) = 0``, ``f'(0) = tau != 0``."""

    def __post_init__(self):
        super().__post_init__()
        if not self.coeffs[0].is_zero():
            raise PreconditionError("a germ must fix 0 (c_0 = 0)")
        if self.degree < 1 or (self.coeffs[1].is_zero() and self.multiplier is None):
            raise PreconditionError("multiplier tau = f'(0) must be non-zero")

    @classmethod
    def parse(cls, text: str) -> "PolynomialGerm":
        return cls(tuple(parse_polynomial(text)))

    @classmethod
    def from_multiplier(cls, mult: Multiplier, tail: Sequence = (1,), bits: int = 256) -> "PolynomialGerm":
        """``tau xi + tail[0] xi**2 + tail[1] xi**3 + ...`` with ``tau`` from ``mult``."""
        with mp.workprec(bits):
            c1 = GaussianRational.coerce(mult.tau(bits))
        return cls((_zero(), c1) + tuple(tail), mult)

    def to_series(self, N: int, prec: int | None = None) -> "TruncatedSeries":
        cs = self.mp_coeffs(prec)[1:]
        cs = cs[:N] + [mpmath.mpc(0)] * max(0, N - len(cs))
        return TruncatedSeries(N, tuple(cs), prec or DEFAULT_PREC)

    def rescale(self, c) -> "PolynomialGerm":
        """The conjugate ``c**-1 f(c xi)``; coefficients ``c_k c**(k-1)``."""
        c = GaussianRational.coerce(c)
        if c.is_zero():
            raise PreconditionError("rescaling factor must be non-zero")
        out, power = [], GaussianRational(Fraction(1))
        for k, a in enumerate(self.coeffs):
            if k == 0:
                out.append(a)
                continue
            out.append(_gmul(a, power))
            power = _gmul(power, c)
        return PolynomialGerm(tuple(out), self.multiplier)


def _gmul(a: GaussianRational, b: GaussianRational) -> GaussianRational:
    return GaussianRational(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)


def as_germ(f) -> PolynomialGerm:
    if isinstance(f, PolynomialGerm):
        return f
    if isinstance(f, Polynomial):
        return PolynomialGerm(f.coeffs, f.multiplier)
    if isinstance(f, str):
        return PolynomialGerm.parse(f)
    raise TypeError(f"cannot interpret {f!r} as a germ")


# -- truncated series --------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedSeries:
    """``a_1 xi + ... + a_N xi**N``; ``coeffs[k-1] = a_k``."""

    order: int
    coeffs: tuple
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        if self.order < 1:
            raise OrderMismatchError("series order must be positive")
        with mp.workprec(self.prec):
            cs = tuple(mpmath.mpc(c) for c in self.coeffs)
        if len(cs) != self.order:
            raise OrderMismatchError(f"expected {self.order} coefficients, got {len(cs)}")
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence, order: int | None = None, prec: int = DEFAULT_PREC) -> "TruncatedSeries":
        with mp.workprec(prec):
            cs = [
                GaussianRational.coerce(c).to_mpc() if isinstance(c, (str, Fraction, GaussianRational)) else mpmath.mpc(c)
                for c in coeffs
            ]
        order = order or len(cs)
        cs = cs[:order] + [mpmath.mpc(0)] * max(0, order - len(cs))
        return cls(order, tuple(cs), prec)

    @classmethod
    def identity(cls, N: int, prec: int = DEFAULT_PREC) -> "TruncatedSeries":
        return cls.from_coeffs([1], N, prec)

    @classmethod
    def monomial_perturbation(cls, c, n: int, N: int, prec: int = DEFAULT_PREC) -> "TruncatedSeries":
        """``xi + c xi**n``."""
        cs = [mpmath.mpc(0)] * N
        cs[0] = mpmath.mpc(1)
        if n <= N:
            cs[n - 1] += c
        return cls(N, tuple(cs), prec)

    def __getitem__(self, n: int):
        if n == 0:
            return mpmath.mpc(0)
        if not 1 <= n <= self.order:
            raise OrderMismatchError(f"order {n} outside 1..{self.order}")
        return self.coeffs[n - 1]

    def truncate(self, N: int) -> "TruncatedSeries":
        _check_order(N, self)
        return TruncatedSeries(N, self.coeffs[:N], self.prec)

    def dense(self, N: int | None = None) -> list:
        """``[0, a_1, ..., a_N]`` for internal arithmetic."""
        N = N or self.order
        return [mpmath.mpc(0)] + list(self.coeffs[:N])

    def __call__(self, xi):
        with mp.workprec(self.prec):
            return horner(self.dense(), xi)

    def derivative(self, xi):
        with mp.workprec(self.prec):
            acc = mpmath.mpc(0)
            for k in range(self.order, 0, -1):
                acc = acc * xi + k * self.coeffs[k - 1]
            return acc

    def max_abs(self, lo: int = 2, hi: int | None = None):
        hi = self.order if hi is None else hi
        vals = [abs(self[k]) for k in range(lo, hi + 1)]
        return max(vals) if vals else mpmath.mpf(0)

    def with_coeff(self, n: int, value) -> "TruncatedSeries":
        cs = list(self.coeffs)
        cs[n - 1] = mpmath.mpc(value)
        return TruncatedSeries(self.order, tuple(cs), self.prec)

    def to_json(self) -> dict:
        return {"order": self.order, "coeffs": [complex_pair(c, self.prec) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict, prec: int = DEFAULT_PREC) -> "TruncatedSeries":
        with mp.workprec(prec):
            cs = [mpmath.mpc(mpmath.mpf(re_), mpmath.mpf(im)) for re_, im in obj["coeffs"]]
        return cls(int(obj["order"]), tuple(cs), prec)


def _check_order(N: int, *series: TruncatedSeries):
    if N < 1:
        raise OrderMismatchError("truncation order must be positive")
    for s in series:
        if N > s.order:
            raise OrderMismatchError(f"requested order {N} exceeds input order {s.order}")


def _mul(a: list, b: list, N: int) -> list:
    """Truncated product of dense coefficient lists (constant terms allowed)."""
    out = []
    for n in range(N + 1):
        lo = max(0, n - len(b) + 1)
        hi = min(n, len(a) - 1)
        if lo > hi:
            out.append(mpmath.mpc(0))
        else:
            out.append(mpmath.fdot(a[lo:hi + 1], b[n - hi:n - lo + 1][::-1]))
    return out


def _powers(s: list, N: int) -> list:
    """Dense lists of ``s**k`` for ``k = 0..N``."""
    pw = [[mpmath.mpc(1)] + [mpmath.mpc(0)] * N]
    for _ in range(N):
        pw.append(_mul(pw[-1], s, N))
    return pw


def compose(outer: TruncatedSeries, inner: TruncatedSeries, N: int | None = None) -> TruncatedSeries:
    """``outer o inner`` truncated at order N (Horner in the inner series)."""
    N = N or min(outer.order, inner.order)
    _check_order(N, outer, inner)
    prec = max(outer.prec, inner.prec)
    with mp.workprec(prec):
        a = outer.dense(N)
        s = inner.dense(N)
        acc = [a[N]] + [mpmath.mpc(0)] * N
        for k in range(N - 1, 0, -1):
            acc = _mul(acc, s, N)
            acc[0] += a[k]
        acc = _mul(acc, s, N)
    return TruncatedSeries(N, tuple(acc[1:]), prec)


def invert(s: TruncatedSeries, N: int | None = None) -> TruncatedSeries:
    """Compositional inverse: ``b_n a_1**n = delta_{n1} - sum_{k<n} b_k [xi**n] s**k``."""
    N = N or s.order
    _check_order(N, s)
    a1 = s[1]
    if a1 == 0:
        raise NonInvertibleError("leading coefficient is zero; the germ is not invertible")
    with mp.workprec(s.prec):
        pw = _powers(s.dense(N), N)
        b = [mpmath.mpc(0)] * (N + 1)
        a1_pow = mpmath.mpc(1)
        for n in range(1, N + 1):
            a1_pow *= a1
            rhs = mpmath.mpc(1 if n == 1 else 0)
            if n > 1:
                rhs -= mpmath.fdot(b[1:n], [pw[k][n] for k in range(1, n)])
            b[n] = rhs / a1_pow
    return TruncatedSeries(N, tuple(b[1:]), s.prec)


def conjugate(f: TruncatedSeries, h: TruncatedSeries, N: int | None = None) -> TruncatedSeries:
    """``h**-1 o f o h``; the first coefficient is set to ``f``'s exactly."""
    N = N or min(f.order, h.order)
    _check_order(N, f, h)
    hinv = invert(h, N)
    out = compose(hinv, compose(f, h, N), N)
    return out.with_coeff(1, f[1])


# -- normal form -------------------------------------------------------------------


class NormalFormStep(NamedTuple):
    order: int
    A: object  # coefficient of xi**(order+1) before elimination
    divisor: object  # tau**order - 1
    resonant: bool
    h1: object = None  # None at resonant orders

    def small_divisor_log(self):
        d = abs(self.divisor)
        return mpmath.inf if d == 0 else -mpmath.log(d)

    def to_json(self):
        out = {
            "order": self.order,
            "A": complex_pair(self.A),
            "divisor": complex_pair(self.divisor),
            "small_divisor_log": mp_str(self.small_divisor_log(), 64),
            "resonant": self.resonant,
        }
        if self.h1 is not None:
            out["h1"] = complex_pair(self.h1)
        return out


class Obstruction(NamedTuple):
    order: int
    value: object  # tau**-1 A

    def to_json(self):
        return {"order": self.order, "value": complex_pair(self.value)}


@dataclass
class NormalFormReport:
    conjugator: TruncatedSeries
    residual: TruncatedSeries
    steps: list = field(default_factory=list)
    obstruction: Obstruction | None = None
    tol: object = None
    prec: int = DEFAULT_PREC
    lost_bits: float = 0.0
    target_prec: int | None = None
    achieved: object = None  # eliminated coefficients of h**-1 o f o h, recomputed

    @property
    def precision_ok(self) -> bool:
        return self.achieved is not None and self.achieved <= self.tol

    def to_json(self) -> dict:
        with mp.workprec(self.prec):
            return {
                "obstruction": self.obstruction.to_json() if self.obstruction else None,
                "conjugator": self.conjugator.to_json(),
                "residual": self.residual.to_json(),
                "steps": [s.to_json() for s in self.steps],
                "tol": mp_str(self.tol, 64),
                "achieved": mp_str(self.achieved, 16) if self.achieved is not None else None,
                "precision_bits": self.prec,
                "requested_precision_bits": self.target_prec or self.prec,
                "lost_bits": round(self.lost_bits, 2),
                "precision_ok": self.precision_ok,
            }


def _resonant_exact(mult: Multiplier | None, n: int):
    """Exact answer to ``tau**n == 1`` when the multiplier is exact, else None."""
    if mult is None or not mult.is_exact:
        return None
    if mult.huge_exponents():
        return False
    th = mult.exact_part()
    return (n * th).denominator == 1


def normal_form_step(
    f: TruncatedSeries,
    n: int,
    tol=None,
    tol_resonance=None,
    resonant: bool | None = None,
) -> tuple[TruncatedSeries, TruncatedSeries]:
    """Remove the ``xi**(n+1)`` term of ``f`` by ``h = xi + h1 xi**(n+1)``.

    ``resonant`` overrides the numeric root-of-unity test when the caller
    knows the answer exactly.
    """
    N = f.order
    if n + 1 > N:
        raise OrderMismatchError(f"order {n + 1} exceeds series order {N}")
    tol = default_tol(f.prec) if tol is None else tol
    tol_resonance = default_tol_resonance(f.prec) if tol_resonance is None else tol_resonance
    if n >= 2 and f.max_abs(2, n) > tol:
        raise PreconditionError(f"coefficients of orders 2..{n} are not eliminated")
    with mp.workprec(f.prec):
        tau = f[1]
        divisor = tau**n - 1
        if resonant is None:
            resonant = abs(divisor) < tol_resonance
        if resonant:
            raise ResonanceError(n, mp_str(abs(divisor), 64))
        A = f[n + 1]
        h1 = A / (tau * divisor)
    h = TruncatedSeries.monomial_perturbation(h1, n + 1, N, f.prec)
    if A == 0:
        return h, f
    g = conjugate(f, h, N).with_coeff(n + 1, 0)
    return h, g


def reduce(
    f,
    N: int,
    tol=None,
    prec: int | None = None,
    tol_resonance=None,
    max_prec: int = 4096,
) -> NormalFormReport:
    """Run the elimination for ``n = 1 .. N-1``.

    Resonant orders whose coefficient is within ``tol`` are skipped (the class
    vanishes there); the first resonant order with a surviving coefficient
    ends the run with that obstruction.

    ``tol`` and ``tol_resonance`` are fixed by ``prec``.  Each run is checked
    by recomputing ``h**-1 o f o h`` with 64 extra bits; if the eliminated
    coefficients exceed ``tol`` (small divisors and cancellation inside the
    compositions eat precision), the run is repeated at a higher working
    precision, up to ``max_prec``.  ``precision_ok`` reports the outcome.
    """
    if N < 2:
        raise OrderMismatchError("reduce needs N >= 2")
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec):
        tol = default_tol(prec) if tol is None else mpmath.mpf(tol)
        tol_resonance = default_tol_resonance(prec) if tol_resonance is None else mpmath.mpf(tol_resonance)
    work = prec
    while True:
        report = _reduce_at(f, N, tol, tol_resonance, work)
        report.target_prec = prec
        if report.precision_ok or work >= max_prec:
            return report
        short = float(mpmath.log(report.achieved / tol, 2)) if report.achieved > 0 else 0.0
        work = min(max_prec, work + max(32, math.ceil(short) + 16))


def _as_series(f, N: int, prec: int) -> TruncatedSeries:
    with mp.workprec(prec):
        if isinstance(f, Polynomial):
            return f.to_series(N, prec)
        return TruncatedSeries(N, f.truncate(N).coeffs, prec)


def _reduce_at(f, N: int, tol, tol_resonance, prec: int) -> NormalFormReport:
    mult = getattr(f, "multiplier", None)
    with mp.workprec(prec):
        series = _as_series(f, N, prec)
        tau = series[1]
        if tau == 0:
            raise NonInvertibleError("tau = 0: not a local diffeomorphism")
        H = TruncatedSeries.identity(N, prec)
        report = NormalFormReport(H, series, tol=tol, prec=prec)
        for n in range(1, N):
            divisor = tau**n - 1
            A = series[n + 1]
            exact = _resonant_exact(mult, n)
            resonant = exact if exact is not None else abs(divisor) < tol_resonance
            if resonant:
                report.steps.append(NormalFormStep(n, A, divisor, True))
                if abs(A) > tol:
                    report.obstruction = Obstruction(n, A / tau)
                    break
                continue
            h, series = normal_form_step(series, n, tol, tol_resonance, resonant=False)
            report.steps.append(NormalFormStep(n, A, divisor, False, h[n + 1]))
            H = compose(H, h, N)
        report.conjugator = H
        report.residual = series
    orders = [st.order + 1 for st in report.steps if not (report.obstruction and st.order == report.obstruction.order)]
    # exact inputs are re-read at the check precision, so input rounding counts too
    with mp.workprec(prec + 64):
        check = conjugate(_as_series(f, N, prec + 64), _lift(H, prec + 64), N)
        achieved = max((abs(check[k]) for k in orders), default=mpmath.mpf(0))
    report.achieved = achieved
    report.lost_bits = max(0.0, prec + float(mpmath.log(achieved, 2))) if achieved > 0 else 0.0
    return report


def _lift(s: TruncatedSeries, prec: int) -> TruncatedSeries:
    return TruncatedSeries(s.order, s.coeffs, prec)


def iterate_series(f: TruncatedSeries, m: int, N: int | None = None) -> TruncatedSeries:
    """The m-th compositional power."""
    N = N or f.order
    out = TruncatedSeries.identity(N, f.prec)
    for _ in range(m):
        out = compose(f, out, N)
    return out


def degree_check(f: Polynomial, minimum: int = 2):
    if f.degree < minimum:
        raise DegreeError(f"degree {f.degree} < {minimum}")
