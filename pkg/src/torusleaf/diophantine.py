"""Arithmetic of a multiplier on the unit circle.

A multiplier ``tau`` is held in one of four representations:

``rational``
    ``tau = exp(2 pi i p/q)`` with ``p/q`` exact, in lowest terms.
``angle``
    a high-precision approximation of a real angle ``theta``; stored as an
    exact rational together with the number of bits it is valid to.
``sparse``
    an exact sparse dyadic angle ``theta = sum_k 2**-a_k``.  Exponents that
    fit comfortably in memory are Python ints; astronomically large ones are
    integer-valued ``mpf`` (mantissa times a power of two), which is still an
    exact integer.  Cremer-type angles live here.
``numeric``
    an arbitrary non-zero complex number.

All circle arithmetic goes through the angle: ``n * theta`` is reduced modulo
1 exactly before any transcendental function is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import mpmath
from mpmath import mp

from .errors import CapExceeded, ParseError, PrecisionExhausted, PreconditionError
from .numbers import (
    DEFAULT_PREC,
    GaussianRational,
    default_tol_resonance,
    fraction_to_mpf,
    mp_str,
    mpf_to_fraction,
)

INF = mpmath.inf


def _frac(q: Fraction) -> Fraction:
    return q - (q.numerator // q.denominator)


def _is_int_exponent(a) -> bool:
    return isinstance(a, int)


@dataclass(frozen=True)
class Multiplier:
    kind: str
    value: object
    bits: int = DEFAULT_PREC

    # -- constructors -----------------------------------------------------

    @classmethod
    def rational(cls, p, q=None) -> "Multiplier":
        theta = Fraction(p) if q is None else Fraction(p, q)
        return cls("rational", _frac(theta), 0)

    @classmethod
    def angle(cls, theta, bits: int) -> "Multiplier":
        """High-precision approximation of an (irrational) angle."""
        if isinstance(theta, str):
            theta = Fraction(theta)
        elif not isinstance(theta, Fraction):
            with mp.workprec(bits + 16):
                theta = mpf_to_fraction(mpmath.mpf(theta))
        scale = 1 << bits
        theta = Fraction(round(_frac(theta) * scale), scale)
        return cls("angle", theta, bits)

    @classmethod
    def golden(cls, bits: int = 1024) -> "Multiplier":
        with mp.workprec(bits + 32):
            theta = (mpmath.sqrt(5) - 1) / 2
            return cls.angle(mpf_to_fraction(theta), bits)

    @classmethod
    def sparse(cls, exponents) -> "Multiplier":
        exps = tuple(exponents)
        if not exps:
            raise PreconditionError("sparse dyadic angle needs at least one term")
        for lo, hi in zip(exps, exps[1:]):
            if not hi > lo:
                raise PreconditionError("dyadic exponents must increase strictly")
            if not _is_int_exponent(lo) and _is_int_exponent(hi):
                raise PreconditionError("huge exponents must come last")
        return cls("sparse", exps, 0)

    @classmethod
    def numeric(cls, tau, bits: int = DEFAULT_PREC) -> "Multiplier":
        z = GaussianRational.coerce(tau)
        if z.is_zero():
            raise PreconditionError("multiplier must be non-zero")
        return cls("numeric", z, bits)

    @classmethod
    def parse(cls, text: str, bits: int = 1024) -> "Multiplier":
        """Parse ``p/q``, ``golden``, ``cremer:d=2,depth=3``, a decimal angle
        (``0.1234`` or ``0.1234@200``) or a complex number (``0.9+0.1i``)."""
        s = text.strip().replace(" ", "")
        if s == "golden":
            return cls.golden(bits)
        if s.startswith("cremer"):
            opts = {"d": "2", "depth": "3", "A": "2"}
            if ":" in s:
                for item in s.split(":", 1)[1].split(","):
                    if item:
                        key, _, val = item.partition("=")
                        opts[key] = val
            try:
                mult, _ = cremer_angle(int(opts["d"]), int(opts["depth"]), float(opts["A"]))
            except ValueError as exc:
                raise ParseError(f"bad cremer spec {text!r}") from exc
            return mult
        if "i" in s:
            from .germ import parse_coefficient

            return cls.numeric(parse_coefficient(s), bits)
        if "/" in s:
            try:
                return cls.rational(Fraction(s))
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(f"bad rational angle {text!r}") from exc
        body, _, prec = s.partition("@")
        try:
            theta = Fraction(body)
        except ValueError as exc:
            raise ParseError(f"cannot parse multiplier {text!r}") from exc
        if prec:
            ang_bits = int(prec)
        else:
            decimals = len(body.split(".", 1)[1]) if "." in body else 0
            ang_bits = max(53, math.ceil(decimals * math.log2(10)))
        return cls.angle(theta, ang_bits)

    # -- views --------------------------------------------------------------

    @property
    def on_circle(self) -> bool:
        return self.kind != "numeric"

    @property
    def is_exact(self) -> bool:
        return self.kind in ("rational", "sparse")

    def exact_part(self) -> Fraction:
        """The angle as an exact rational (sparse: the int-exponent terms)."""
        if self.kind in ("rational", "angle"):
            return self.value
        if self.kind == "sparse":
            return sum((Fraction(1, 1 << a) for a in self.value if _is_int_exponent(a)), Fraction(0))
        raise PreconditionError("numeric multiplier has no stored angle")

    def huge_exponents(self) -> tuple:
        if self.kind != "sparse":
            return ()
        return tuple(a for a in self.value if not _is_int_exponent(a))

    def theta(self) -> Fraction:
        """Angle in [0, 1); for numeric multipliers, arg(tau)/2pi."""
        if self.kind == "numeric":
            with mp.workprec(self.bits + 16):
                z = self.value.to_mpc()
                th = mpmath.arg(z) / (2 * mp.pi)
                return _frac(mpf_to_fraction(th))
        return _frac(self.exact_part())

    def tau(self, prec: int | None = None) -> mpmath.mpc:
        prec = prec or DEFAULT_PREC
        with mp.workprec(prec + 16):
            if self.kind == "numeric":
                z = self.value.to_mpc()
            else:
                z = mpmath.expjpi(2 * fraction_to_mpf(self.theta()))
        with mp.workprec(prec):
            return +z

    def log_modulus(self, prec: int | None = None):
        if self.kind != "numeric":
            return mpmath.mpf(0)
        with mp.workprec((prec or DEFAULT_PREC) + 16):
            return mpmath.log(abs(self.value.to_mpc()))

    def angle_uncertainty(self) -> Fraction:
        """Bound on |theta_true - theta_stored|."""
        if self.kind == "angle":
            return Fraction(1, 1 << self.bits)
        if self.kind == "numeric":
            return Fraction(1, 1 << max(self.bits - 4, 1))
        return Fraction(0)

    def label(self) -> str:
        if self.kind == "rational":
            return f"{self.value.numerator}/{self.value.denominator}"
        if self.kind == "angle":
            with mp.workprec(64):
                return f"angle:{mpmath.nstr(fraction_to_mpf(self.value), 15)}@{self.bits}"
        if self.kind == "sparse":
            return "dyadic:" + "+".join(f"2^-{_fmt_exponent(a)}" for a in self.value)
        with mp.workprec(64):
            z = self.value.to_mpc()
            re, im = mpmath.nstr(z.real, 15), mpmath.nstr(abs(z.imag), 15)
        return f"numeric:{re}{'-' if z.imag < 0 else '+'}{im}i"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "label": self.label()}
        if self.kind == "rational":
            out["angle"] = f"{self.value.numerator}/{self.value.denominator}"
        elif self.kind == "angle":
            out["angle"] = mp_str(fraction_to_mpf(self.value), self.bits)
            out["bits"] = self.bits
        elif self.kind == "sparse":
            out["dyadic_exponents"] = [_fmt_exponent(a) for a in self.value]
        else:
            out["tau"] = str(self.value)
            out["bits"] = self.bits
        return out

    # -- circle distance ----------------------------------------------------

    def _distance(self, n: int):
        """dist(n*theta, Z) as ``(exact Fraction or None, log-distance mpf)``.

        The log-distance is ``-inf`` at an exact resonance.
        """
        x = _frac(n * self.theta() if self.kind == "numeric" else n * self.exact_part())
        if x != 0:
            dist = min(x, 1 - x)
            return dist, None
        huge = self.huge_exponents()
        if not huge:
            return Fraction(0), -INF
        # n*theta_exact is an integer: the first astronomically small term
        # dominates and every later one is negligible at any precision.
        return None, mpmath.log(n) - huge[0] * mpmath.log(2)


def _fmt_exponent(a) -> str:
    if _is_int_exponent(a):
        return str(a)
    return mpmath.nstr(a, 20)


def _log_two_sin_pi(dist: Fraction | None, log_dist) -> mpmath.mpf:
    """log(2 sin(pi*dist)) = log|1 - exp(2 pi i dist)|."""
    if dist is not None:
        if dist == 0:
            return -INF
        x = fraction_to_mpf(dist)
        return mpmath.log(2 * mpmath.sinpi(x))
    # dist is far below 2**-prec: sin(pi x) = pi x to working precision
    return mpmath.log(2 * mp.pi) + log_dist


def small_divisor_log(mult: Multiplier, n: int, prec: int | None = None) -> mpmath.mpf:
    """``-log|tau**n - 1|``; ``+inf`` (not an exception) at a resonance."""
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec + 16):
        if mult.kind == "numeric":
            z = mult.value.to_mpc()
            w = z**n - 1
            if w == 0:
                return +INF
            return -mpmath.log(abs(w))
        dist, log_dist = mult._distance(n)
        val = _log_two_sin_pi(dist, log_dist)
        return -val if val != -INF else +INF


def small_divisor_error(mult: Multiplier, n: int) -> float:
    """Rough bound on the absolute error of small_divisor_log at index n."""
    unc = mult.angle_uncertainty()
    if unc == 0:
        return 0.0
    dist, log_dist = mult._distance(n)
    spread = float(n * unc)
    if dist is None or dist == 0:
        return math.inf
    return spread / max(float(dist), 1e-300)


def continued_fraction(theta: Fraction, max_terms: int | None = None) -> list[int]:
    terms = []
    x = theta
    while True:
        a = x.numerator // x.denominator
        terms.append(a)
        rem = x - a
        if rem == 0 or (max_terms and len(terms) >= max_terms):
            return terms
        x = 1 / rem


def convergents(theta: Fraction, max_terms: int | None = None):
    """Yield successive convergents ``(p, q)`` of ``theta``."""
    p_prev, p = 0, 1
    q_prev, q = 1, 0
    x = theta
    count = 0
    while True:
        a = x.numerator // x.denominator
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        yield p, q
        count += 1
        rem = x - a
        if rem == 0 or (max_terms and count >= max_terms):
            return
        x = 1 / rem


def record_indices(mult: Multiplier, lo: int, hi=None, count: int | None = None) -> list[int]:
    """Indices ``q > lo`` where ``dist(q*theta, Z)`` sets a new record.

    These are the convergent denominators of the angle.  Indices beyond the
    resolving power of an approximate angle are dropped; for a sparse dyadic
    angle the final denominator of the exact part is kept only when a huge
    term follows it.
    """
    if mult.kind == "rational":
        return []
    theta = mult.theta()
    limit = None
    if mult.kind in ("angle", "numeric"):
        limit = 1 << (max(mult.bits - 8, 2) // 2)
    last_exact = theta.denominator
    out = []
    for _, q in convergents(theta):
        if q <= lo or (out and q <= out[-1]):
            continue
        if limit is not None and q > limit:
            break
        if hi is not None and q > hi:
            break
        if q == last_exact and not mult.huge_exponents():
            break
        out.append(q)
        if count is not None and len(out) >= count:
            break
    return out


class Resonance(NamedTuple):
    q: int
    p: int
    residual: object  # |q*theta - p| (0 for exact inputs)

    def to_json(self):
        return {"q": self.q, "p": self.p, "residual": mp_str(self.residual, 64)}


def detect_resonance(mult: Multiplier, q_max: int, tol=None, prec: int | None = None) -> Resonance | None:
    """Order ``q <= q_max`` with ``tau**q == 1``, or None.

    Exact representations are decided exactly; approximations use the
    continued-fraction convergents of the angle and ``tol``.
    """
    prec = prec or DEFAULT_PREC
    if mult.kind == "rational":
        th = mult.value
        if th.denominator <= q_max:
            return Resonance(th.denominator, th.numerator, mpmath.mpf(0))
        return None
    if mult.kind == "sparse":
        if mult.huge_exponents():
            return None
        th = mult.exact_part()
        if th.denominator <= q_max:
            return Resonance(th.denominator, th.numerator % th.denominator, mpmath.mpf(0))
        return None
    tol = default_tol_resonance(prec) if tol is None else mpmath.mpf(tol)
    if mult.kind == "numeric":
        if abs(mult.log_modulus(prec)) > tol:
            return None
    theta = mult.theta()
    for p, q in convergents(theta):
        if q > q_max:
            return None
        residual = abs(q * theta - p)
        with mp.workprec(prec):
            res = fraction_to_mpf(residual)
        if res < tol:
            return Resonance(q, p % q if q else p, res)
    return None


# -- condition (i): polynomial growth of the small divisors -------------------


@dataclass
class ConditionI:
    n_max: int
    resonant: int | None = None
    k: object = None
    log_M: object = None
    worst_index: int | None = None
    k_ladder: list = field(default_factory=list)
    stable: bool = False
    holds: bool = False
    growth: str = "n/a"

    @property
    def M(self):
        return mpmath.exp(self.log_M) if self.log_M is not None else None

    def to_json(self):
        if self.resonant is not None:
            return {"n_max": self.n_max, "resonant": self.resonant}
        return {
            "n_max": self.n_max,
            "holds": self.holds,
            "growth": self.growth,
            "k": mp_str(self.k, 64),
            "log_M": mp_str(self.log_M, 64),
            "worst_index": str(self.worst_index),
            "stable_under_doubling": self.stable,
            "k_ladder": [[str(h), mp_str(k, 64)] for h, k in self.k_ladder],
        }


def _fit_exponent(s1, pairs):
    """Smallest k >= 0 with s_n <= s_1 + k log n for the given (n, s_n)."""
    best, worst = mpmath.mpf(0), 1
    for n, s in pairs:
        if n < 2:
            continue
        k = (s - s1) / mpmath.log(n)
        if k > best:
            best, worst = k, n
    return best, worst


def _check_resolved(mult: Multiplier, indices, required_bits) -> None:
    """Refuse indices where the stored angle is too coarse to resolve ``|1 - tau**n|``."""
    unc = mult.angle_uncertainty()
    if not unc:
        return
    for n in indices:
        dist, _ = mult._distance(n)
        if dist and dist < (1 << 16) * n * unc:
            raise PrecisionExhausted(
                f"angle known to {mult.bits} bits cannot resolve |1 - tau^{n}|",
                required_bits=required_bits(n),
            )


def condition_i(
    mult: Multiplier,
    n_max: int,
    prec: int | None = None,
    doublings: int = 10,
    extra_records: int = 3,
    rel_tol: float = 0.1,
) -> ConditionI:
    """Evidence for ``|tau**n - 1|**-1 <= M n**k``.

    ``s_n = -log|tau**n - 1|`` is scanned for ``n <= n_max``.  The fit anchors
    ``log M = s_1`` and takes the least ``k`` making the bound hold at every
    scanned index.  Stability: ``k`` is re-fitted on horizons
    ``n_max * 2**j`` (and on the next few record indices past ``n_max``)
    using the record indices of the angle, where all the new maxima of
    ``s_n`` occur; growth counts as polynomial when ``k`` moves by at most
    ``rel_tol * max(1, k)``.
    """
    prec = prec or DEFAULT_PREC
    report = ConditionI(n_max=n_max)
    if not mult.on_circle and abs(mult.log_modulus(prec)) > 0:
        raise PreconditionError("condition (i) concerns multipliers on the unit circle")
    with mp.workprec(prec):
        values = []
        for n in range(1, n_max + 1):
            s = small_divisor_log(mult, n, prec)
            if s == INF:
                report.resonant = n
                return report
            values.append((n, s))
        s1 = values[0][1]
        k, worst = _fit_exponent(s1, values)
        report.k, report.log_M, report.worst_index = k, s1, worst

        horizons = [n_max << j for j in range(1, doublings + 1)]
        beyond = record_indices(mult, n_max, count=extra_records)
        recs = record_indices(mult, n_max, hi=max([horizons[-1]] + beyond))
        _check_resolved(mult, record_indices(mult, 0, hi=n_max) + recs + beyond, lambda q: 2 * q.bit_length() + 64)
        rec_vals = []
        for q in sorted(set(recs) | set(beyond)):
            wp = prec + q.bit_length()
            s = small_divisor_log(mult, q, wp)
            if s == INF:
                break
            rec_vals.append((q, s))
        for h in horizons + beyond:
            kh, _ = _fit_exponent(s1, [(q, s) for q, s in rec_vals if q <= h])
            report.k_ladder.append((h, max(k, kh)))
        kmax = max([k] + [kk for _, kk in report.k_ladder])
        report.stable = kmax - k <= rel_tol * max(1, k)
        report.holds = report.stable
        report.growth = "polynomial" if report.stable else "super-polynomial"
    return report


# -- condition (ii): the Cremer-type condition --------------------------------


@dataclass
class ConditionIIRun:
    A: float
    indices: list
    values: list
    running_min: object
    argmin: int
    drops: list
    verdict: str

    def to_json(self):
        return {
            "A": self.A,
            "verdict": self.verdict,
            "running_min": mp_str(self.running_min, 64),
            "argmin": str(self.argmin),
            "drops": [str(i) for i in self.drops],
            "L": [[str(i), mp_str(v, 64)] for i, v in zip(self.indices, self.values)],
        }


@dataclass
class ConditionII:
    d: int
    l_max: object
    runs: list
    verdict: str

    def to_json(self):
        return {
            "d": self.d,
            "l_max": str(self.l_max),
            "verdict": self.verdict,
            "runs": [r.to_json() for r in self.runs],
        }


TREND = "trending to -inf"
BOUNDED = "bounded below"
INCONCLUSIVE = "inconclusive at this precision"

DROP_NATS = 50


def log_cremer_quantity(mult: Multiplier, d: int, A, ell: int, prec: int | None = None):
    """``L(ell) = ell log A + log|1 - tau**ell| / (d**ell - 1)``, in log space."""
    prec = prec or DEFAULT_PREC
    wp = prec + int(ell).bit_length() + 32
    with mp.workprec(wp):
        s = small_divisor_log(mult, ell, wp)
        if s == INF:
            return -INF
        denom = _pow_minus_one(d, ell)
        val = ell * mpmath.log(A) - s / denom
    with mp.workprec(prec):
        return +val


def _pow_minus_one(d: int, ell: int) -> mpmath.mpf:
    """``d**ell - 1`` at the current precision, for astronomically large ``ell``."""
    if ell < 4096:
        return mpmath.mpf(d**ell - 1)
    if d & (d - 1) == 0:
        return mpmath.ldexp(1, ell * (d.bit_length() - 1)) - 1
    # the exponent's absolute error scales with ell, so carry its bits too
    with mp.workprec(mp.prec + int(ell).bit_length() + 16):
        val = mpmath.exp(ell * mpmath.log(d))
    return val - 1


def _required_bits(ell: int, d: int, A: float) -> int:
    # bits to resolve a divisor small enough to make L(ell) <= 0
    try:
        return int(math.ceil(math.log2(ell) + 16 + (d**ell - 1) * ell * math.log2(A)))
    except OverflowError:
        return -1


def condition_ii(
    mult: Multiplier,
    d: int,
    A_list,
    l_max: int,
    prec: int | None = None,
    scan_cap: int = 4096,
) -> ConditionII:
    """Evidence for ``liminf A**l |1 - tau**l|**(1/(d**l - 1)) = 0``.

    Every index up to ``min(l_max, scan_cap)`` is evaluated, plus the record
    indices of the angle up to ``l_max`` (where ``|1 - tau**l|`` is smallest).
    """
    prec = prec or DEFAULT_PREC
    if d < 2:
        raise PreconditionError("condition (ii) needs degree d >= 2")
    if not mult.on_circle:
        raise PreconditionError("condition (ii) concerns multipliers on the unit circle")
    if detect_resonance(mult, l_max, prec=prec) is not None:
        raise PreconditionError("tau is resonant; condition (ii) concerns irrational angles")
    indices = sorted(set(range(1, min(l_max, scan_cap) + 1)) | set(record_indices(mult, 0, hi=l_max)))
    _check_resolved(mult, indices, lambda ell: _required_bits(ell, d, max(A_list)))
    runs = []
    for A in A_list:
        if not A > 1:
            raise PreconditionError("A must exceed 1")
        values = [log_cremer_quantity(mult, d, A, ell, prec) for ell in indices]
        runs.append(_trend(A, indices, values))
    verdicts = {r.verdict for r in runs}
    if TREND in verdicts:
        verdict = TREND
    elif verdicts == {BOUNDED}:
        verdict = BOUNDED
    else:
        verdict = INCONCLUSIVE
    return ConditionII(d=d, l_max=l_max, runs=runs, verdict=verdict)


def _trend(A, indices, values) -> ConditionIIRun:
    running = values[0]
    argmin = indices[0]
    drops = []
    for ell, v in zip(indices[1:], values[1:]):
        if v < running:
            if v <= running - DROP_NATS:
                drops.append(ell)
            running, argmin = v, ell
    if len(drops) >= 2:
        verdict = TREND
    elif not drops:
        # margin growing linearly: over the upper half of the scan the
        # small-divisor term must eat less than half of ell*log A
        half = indices[-1] // 2
        log_a = mpmath.log(A)
        ok = all(v >= ell * log_a / 2 for ell, v in zip(indices, values) if ell > half)
        verdict = BOUNDED if ok else INCONCLUSIVE
    else:
        verdict = INCONCLUSIVE
    return ConditionIIRun(A, list(indices), values, running, argmin, drops, verdict)


# -- Cremer-type angles ------------------------------------------------------


@dataclass(frozen=True)
class CremerCertificate:
    index: int
    L_upper: object
    threshold: int

    def to_json(self):
        return {
            "index_log2": self.index.bit_length() - 1,
            "L_upper": mp_str(self.L_upper, 64),
            "threshold": self.threshold,
        }


def cremer_angle(
    d: int,
    depth: int,
    A: float = 2.0,
    prec: int = DEFAULT_PREC,
    max_exponent_bits: int = 1 << 14,
) -> tuple[Multiplier, list[CremerCertificate]]:
    """A sparse dyadic angle ``sum_{k<=depth} 2**-a_k`` with ``a_1 = 2``.

    ``a_{k+1}`` is the least integer making the upper bound

        L(2**a_k) <= ell log A + (log 4pi - (a_{k+1} - a_k) log 2) / (d**ell - 1)

    fall below ``-100 k`` (with ``ell = 2**a_k``, using
    ``|1 - exp(2 pi i x)| <= 2 pi dist(x, Z)`` and a tail bounded by twice
    its leading term).  The certified indices are ``2**a_k`` for
    ``k < depth``; the final term is a resonant tail.
    """
    if d < 2:
        raise PreconditionError("degree d must be >= 2")
    if not A > 1:
        raise PreconditionError("A must exceed 1")
    if depth < 2:
        raise PreconditionError(
            "depth must be >= 2: a single dyadic term is a resonant tail with no certifiable index"
        )
    exps = [2]
    certs = []
    for k in range(1, depth):
        a_k = exps[-1]
        if not _is_int_exponent(a_k) or a_k > max_exponent_bits:
            raise CapExceeded(
                f"the next dyadic exponent would need a binary exponent of about 2^{_fmt_exponent(a_k)}"
                f" bits; cap is {max_exponent_bits} bits",
                required=a_k,
            )
        ell = 1 << a_k
        threshold = 100 * k
        wp = prec + ell.bit_length() + 64
        with mp.workprec(wp):
            log2 = mpmath.log(2)
            denom = _pow_minus_one(d, ell)
            need = (denom * (ell * mpmath.log(A) + threshold) + mpmath.log(4 * mp.pi)) / log2
            need = need * (1 + mpmath.mpf(2) ** (8 - wp))
            step = mpmath.floor(need) + 1
            if step < mpmath.mpf(2) ** 62:
                a_next = a_k + int(step)
            else:
                a_next = step  # integer-valued mpf; a_k is absorbed below its ulp
            L_upper = ell * mpmath.log(A) + (mpmath.log(4 * mp.pi) - (a_next - a_k) * log2) / denom
        if not L_upper < -threshold:
            raise PrecisionExhausted("certificate failed at working precision", required_bits=2 * wp)
        certs.append(CremerCertificate(ell, L_upper, threshold))
        exps.append(a_next)
    return Multiplier.sparse(exps), certs


# -- combined report -------------------------------------------------------------


@dataclass
class DiophantineReport:
    multiplier: Multiplier
    resonant: Resonance | None = None
    condition_i: ConditionI | None = None
    condition_ii: ConditionII | None = None
    small_divisor_log: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self):
        out = {"multiplier": self.multiplier.to_json(), "resonant": self.resonant.to_json() if self.resonant else None}
        if self.resonant is None:
            out["condition_i"] = self.condition_i.to_json() if self.condition_i else None
            out["condition_ii"] = self.condition_ii.to_json() if self.condition_ii else None
            out["small_divisor_log"] = [mp_str(s, 64) for s in self.small_divisor_log]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def analyze(
    mult: Multiplier,
    n_max: int = 10_000,
    d: int = 2,
    A_list=(2.0,),
    l_max: int = 30,
    prec: int | None = None,
    q_max: int | None = None,
    preview: int = 64,
    run_ii: bool = True,
) -> DiophantineReport:
    """Resonance test, then (only for non-resonant angles) both conditions.

    ``small_divisor_log`` lists ``-log|tau**n - 1|`` for the first
    ``min(n_max, preview)`` indices.
    """
    prec = prec or DEFAULT_PREC
    report = DiophantineReport(mult)
    report.resonant = detect_resonance(mult, q_max or n_max, prec=prec)
    if report.resonant is not None:
        return report
    with mp.workprec(prec):
        report.small_divisor_log = [small_divisor_log(mult, n, prec) for n in range(1, min(n_max, preview) + 1)]
    report.condition_i = condition_i(mult, n_max, prec)
    if report.condition_i.resonant is not None:
        q = report.condition_i.resonant
        report.resonant = Resonance(q, round(mult.theta() * q) % q, mpmath.mpf(0))
        report.condition_i = None
        return report
    if run_ii:
        try:
            report.condition_ii = condition_ii(mult, d, list(A_list), l_max, prec)
        except PrecisionExhausted as exc:
            report.notes.append(f"condition (ii): {exc} (needs about {exc.required_bits} bits)")
    return report
