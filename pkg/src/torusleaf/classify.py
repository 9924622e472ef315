"""Decide the neighborhood type of the torus leaf from the holonomy germ.

The decision tree:

1. ``|tau| != 1``: the linearizable hyperbolic case; a phi-mode gluing
   certificate is attached.
2. ``tau`` a root of unity of order q: a linear germ has finite order and is
   out of scope; otherwise the normal form is run with ``N = q+1 .. 4q`` and
   the first obstruction gives the parabolic branch.
3. ``tau`` on the circle, non-resonant: polynomial growth of the small
   divisors (stable under doubling) makes a Siegel candidate.  Otherwise the
   Cremer-type condition together with a survey of small cycles in shrinking
   punctured disks makes a Cremer candidate.  Anything else is inconclusive.

Circle verdicts are evidence, never proofs, hence "candidate".
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mp

from .diophantine import (
    TREND,
    DiophantineReport,
    Multiplier,
    analyze,
    condition_ii,
    cremer_angle,
    detect_resonance,
    small_divisor_log,
)
from .dynamics import TOL_MU, periodic_cycles
from .errors import PrecisionExhausted, PreconditionError, TorusLeafError
from .germ import PolynomialGerm, reduce
from .numbers import DEFAULT_PREC, GaussianRational, complex_pair, mp_str
from .surface import SurfaceModel, surface_check

REPELLING = "Thm1-i-repelling"
ATTRACTING = "Thm1-i-attracting"
SIEGEL = "Thm1-i-siegel-candidate"
PARABOLIC = "Thm1-ii-parabolic"
CREMER = "Thm1-iii-cremer-candidate"
FINITE_ORDER = "out-of-scope-finite-order"
INCONCLUSIVE = "inconclusive"

SEMI_POSITIVE = "semi-positive (Cor i)"
NOT_SEMI_POSITIVE = "not-semi-positive (Cor ii)"
NA = "n/a"


@dataclass(frozen=True)
class DecideOptions:
    prec: int = DEFAULT_PREC
    tol_mu: float = TOL_MU
    tol_resonance: object = None
    q_max: int = 1000
    nf_max: int = 48
    n_max: int = 10_000
    l_max: int = 30
    A_list: tuple = (2.0,)
    survey_r0: float = 0.25
    survey_J: int = 6
    survey_m_max: int = 4
    cap: int = 4096
    seed: int = 0
    lam: float = 0.5
    eps0: float = 0.05
    N: int = 12
    surface_samples: int = 32
    attach_surface: bool = True


@dataclass
class Verdict:
    f: PolynomialGerm
    branch: str
    corollary: str
    evidence: dict = field(default_factory=dict)
    limiting_stage: str | None = None
    notes: list = field(default_factory=list)
    prec: int = DEFAULT_PREC

    @property
    def obstruction(self):
        nf = self.evidence.get("normal_form")
        return nf.obstruction if nf is not None else None

    @property
    def resonance(self):
        dio = self.evidence.get("diophantine")
        return dio.resonant if dio is not None else None

    def to_json(self):
        ev = {}
        for key, val in self.evidence.items():
            ev[key] = val.to_json() if hasattr(val, "to_json") else val
        return {
            "f": self.f.to_json(),
            "tau": complex_pair(self.f.tau(self.prec), 64),
            "branch": self.branch,
            "corollary": self.corollary,
            "limiting_stage": self.limiting_stage,
            "notes": list(self.notes),
            "precision_bits": self.prec,
            "evidence": ev,
        }


def multiplier_of(f: PolynomialGerm, prec: int) -> Multiplier:
    if f.multiplier is not None:
        return f.multiplier
    return Multiplier.numeric(f.coeffs[1], prec)


def decide(f: PolynomialGerm, options: DecideOptions | None = None) -> Verdict:
    opts = options or DecideOptions()
    prec = opts.prec
    stage = "multiplier"
    try:
        mult = multiplier_of(f, prec)
        with mp.workprec(prec):
            log_mod = mult.log_modulus(prec)
        if abs(math.expm1(float(log_mod))) > opts.tol_mu:
            stage = "surface"
            return _hyperbolic(f, log_mod, opts)
        stage = "resonance"
        dio = DiophantineReport(mult)
        dio.resonant = detect_resonance(mult, opts.q_max, tol=opts.tol_resonance, prec=prec)
        if dio.resonant is not None:
            stage = "normal-form"
            return _resonant(f, dio, opts)
        stage = "diophantine"
        return _circle(f, mult, opts)
    except PrecisionExhausted as exc:
        return Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage=stage, notes=[str(exc)], prec=prec)


def _hyperbolic(f, log_mod, opts: DecideOptions) -> Verdict:
    branch = REPELLING if log_mod > 0 else ATTRACTING
    v = Verdict(f, branch, NA, prec=opts.prec)
    if opts.attach_surface:
        try:
            model = SurfaceModel(f, opts.lam, opts.eps0, N=opts.N, prec=opts.prec)
            xi_max = None if f.degree <= 1 else min(model.linearizer[2], mpmath.mpf("1e-3"))
            rep = surface_check(model, opts.surface_samples, opts.seed, xi_max=xi_max)
            v.evidence["surface"] = rep
        except TorusLeafError as exc:
            v.notes.append(f"surface certificate unavailable: {exc}")
    return v


def _resonant(f, dio: DiophantineReport, opts: DecideOptions) -> Verdict:
    q = dio.resonant.q
    if f.degree <= 1:
        v = Verdict(f, FINITE_ORDER, NA, prec=opts.prec, notes=[f"f^{q} is the identity"])
        v.evidence["diophantine"] = dio
        return v
    if q + 1 > opts.nf_max:
        # the elimination cost grows steeply with the order (about a minute at q = 50)
        v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="normal-form", prec=opts.prec)
        v.evidence["diophantine"] = dio
        v.notes.append(f"resonance order {q} needs a normal form past nf_max={opts.nf_max}")
        return v
    tried = []
    for N in sorted({q + 1, 2 * q + 1, 3 * q + 1, max(4 * q, 2)}):
        N = max(N, 2)
        if N > opts.nf_max:
            break
        tried.append(N)
        rep = reduce(f, N, prec=opts.prec, tol_resonance=opts.tol_resonance)
        if not rep.precision_ok:
            raise PrecisionExhausted(f"normal form lost {rep.lost_bits:.0f} bits even at {rep.prec} bits")
        if rep.obstruction is not None:
            v = Verdict(f, PARABOLIC, NA, prec=opts.prec)
            v.evidence["diophantine"] = dio
            v.evidence["normal_form"] = rep
            v.notes.append(f"obstruction at order {rep.obstruction.order} (resonance order {q}), N={N}")
            return v
    v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="normal-form", prec=opts.prec)
    v.evidence["diophantine"] = dio
    v.evidence["normal_form"] = rep
    v.notes.append(f"no obstruction up to N={tried[-1]} (cap min(4q, nf_max))")
    return v


def survey_precision(mult: Multiplier, periods, base: int) -> int:
    """Enough bits to separate small cycles from 0: twice the worst
    ``-log2|tau**m - 1|`` over the surveyed periods, plus the base."""
    worst = 0.0
    for m in periods:
        s = small_divisor_log(mult, m, base)
        if s == mpmath.inf:
            continue
        worst = max(worst, float(s) / math.log(2))
    return int(base + 2 * math.ceil(worst) + 64)


def cycle_survey(f: PolynomialGerm, mult: Multiplier, periods, opts: DecideOptions) -> dict:
    """Cycles inside ``0 < |xi| < r_j``, ``r_j = 2**-j r0``, ``j = 0..J``."""
    d = f.degree
    periods = sorted({m for m in periods if d**m <= opts.cap})
    m_max = max(periods)
    prec = survey_precision(mult, range(1, m_max + 1), opts.prec)
    cycles = periodic_cycles(f, m_max, disk=(0, opts.survey_r0), punctured=True, cap=opts.cap, prec=prec, seed=opts.seed, tol_mu=opts.tol_mu)
    cycles = [c for c in cycles if c.period in periods or c.period <= opts.survey_m_max]
    radii = []
    for j in range(opts.survey_J + 1):
        r = mpmath.ldexp(opts.survey_r0, -j)
        inside = [c for c in cycles if c.max_abs() < r]
        radii.append({"radius": mp_str(r, 32), "cycles": len(inside), "periods": sorted({c.period for c in inside})})
    smallest = min(cycles, key=lambda c: c.max_abs()) if cycles else None
    return {
        "periods": periods,
        "precision_bits": prec,
        "radii": radii,
        "nonempty_everywhere": all(r["cycles"] > 0 for r in radii),
        "smallest_cycle": smallest.to_json() if smallest else None,
        "smallest_cycle_log2_radius": mp_str(mpmath.log(smallest.max_abs(), 2), 16) if smallest else None,
        "search_complete": getattr(cycles, "complete", True),
    }


def _circle(f, mult: Multiplier, opts: DecideOptions) -> Verdict:
    prec = opts.prec
    dio = analyze(mult, opts.n_max, f.degree, opts.A_list, opts.l_max, prec, q_max=opts.q_max, run_ii=False)
    if dio.resonant is not None:
        return _resonant(f, dio, opts)
    ci = dio.condition_i
    if ci.holds:
        v = Verdict(f, SIEGEL, SEMI_POSITIVE, prec=prec)
        v.evidence["diophantine"] = dio
        v.notes.append("small divisors grow polynomially; Siegel and semi-positivity are candidates on numerical evidence")
        if opts.attach_surface and f.degree >= 2:
            try:
                model = SurfaceModel(f, opts.lam, opts.eps0, N=opts.N, prec=prec, allow_circle=True)
                xi_max = min(model.linearizer[2], mpmath.mpf("1e-3"))
                v.evidence["surface"] = surface_check(model, opts.surface_samples, opts.seed, xi_max=xi_max)
                v.notes.append("phi certificates here are truncation-bounded (formal linearization to order N)")
            except TorusLeafError as exc:
                v.notes.append(f"surface certificate unavailable: {exc}")
        return v
    if f.degree < 2:
        v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="diophantine", prec=prec)
        v.evidence["diophantine"] = dio
        return v
    l_max = opts.l_max
    if mult.huge_exponents():
        # the certified indices of a sparse dyadic angle lie far past any scan
        l_max = max(l_max, mult.exact_part().denominator)
    try:
        dio.condition_ii = condition_ii(mult, f.degree, list(opts.A_list), l_max, prec)
    except PrecisionExhausted as exc:
        v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="condition_ii", prec=prec)
        v.evidence["diophantine"] = dio
        v.notes.append(f"{exc} (needs about {exc.required_bits} bits)")
        return v
    if dio.condition_ii.verdict != TREND:
        v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="condition_ii", prec=prec)
        v.evidence["diophantine"] = dio
        v.notes.append(f"condition (i) fails and condition (ii) reports {dio.condition_ii.verdict!r}")
        return v
    periods = set(range(1, opts.survey_m_max + 1))
    for run in dio.condition_ii.runs:
        periods.update(int(i) for i in run.drops if isinstance(i, int) and f.degree ** min(i, 64) <= opts.cap)
    survey = cycle_survey(f, mult, periods, opts)
    if survey["nonempty_everywhere"]:
        v = Verdict(f, CREMER, NOT_SEMI_POSITIVE, prec=prec)
        v.notes.append("|f_C|^-2 is the minimal singular metric of [C] in this case")
    else:
        v = Verdict(f, INCONCLUSIVE, "inconclusive", limiting_stage="cycle-survey", prec=prec)
        v.notes.append("some punctured disk of the survey holds no cycle")
    v.evidence["diophantine"] = dio
    v.evidence["cycle_survey"] = survey
    return v


# -- the quadratic family sweep ---------------------------------------------------


def family_germ(tau, d: int = 2, prec: int = DEFAULT_PREC) -> PolynomialGerm:
    """``tau xi + xi**d`` for a Multiplier or a complex number."""
    if isinstance(tau, Multiplier):
        if tau.kind == "numeric":
            return PolynomialGerm((0, tau.value) + (0,) * (d - 2) + (1,))
        return PolynomialGerm.from_multiplier(tau, (0,) * (d - 2) + (1,), bits=max(prec, 256))
    return PolynomialGerm((0, GaussianRational.coerce(tau)) + (0,) * (d - 2) + (1,))


def default_grid(cremer_depth: int = 3, prec: int = DEFAULT_PREC) -> list[Multiplier]:
    """64 samples: 16 off the circle, 23 rational angles with q <= 12,
    24 golden-shifted angles ``frac(k phi)`` and one Cremer-type angle."""
    grid = []
    with mp.workprec(prec + 32):
        for r in ("0.9", "1.1"):
            for j in range(8):
                z = mpmath.mpf(r) * mpmath.expjpi(mpmath.mpf(j) / 4)
                grid.append(Multiplier.numeric(GaussianRational.coerce(z), prec))
    fracs = sorted({Fraction(p, q) for q in range(1, 13) for p in range(q)})
    grid += [Multiplier.rational(x) for x in fracs[::2]]
    golden = Multiplier.golden(1024).value
    grid += [Multiplier.angle(golden * k, 1024) for k in range(1, 25)]
    grid.append(cremer_angle(2, cremer_depth, 2.0, prec=1024)[0])
    return grid


@dataclass
class SweepRow:
    index: int
    tau: Multiplier
    verdict: Verdict | None
    error: str | None = None

    @property
    def branch(self):
        return self.verdict.branch if self.verdict else INCONCLUSIVE

    @property
    def on_circle(self):
        if self.tau.kind != "numeric":
            return True
        return abs(float(self.tau.log_modulus(64))) <= TOL_MU


@dataclass
class SweepResult:
    rows: list

    def summary(self) -> dict:
        off = [r for r in self.rows if not r.on_circle]
        on = [r for r in self.rows if r.on_circle]
        counts = {}
        for r in on:
            counts[r.branch] = counts.get(r.branch, 0) + 1
        return {
            "samples": len(self.rows),
            "off_circle": len(off),
            "off_circle_thm1_i": sum(r.branch in (REPELLING, ATTRACTING) for r in off),
            "on_circle": len(on),
            "on_circle_counts": counts,
            "exact_inconclusive": sum(r.branch == INCONCLUSIVE for r in self.rows if r.tau.is_exact),
        }

    def to_json(self):
        return {
            "summary": self.summary(),
            "rows": [
                {
                    "index": r.index,
                    "tau": r.tau.to_json(),
                    "branch": r.branch,
                    "corollary": r.verdict.corollary if r.verdict else "inconclusive",
                    "error": r.error,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "tau", "on_circle", "branch", "corollary", "limiting_stage"])
        for r in self.rows:
            w.writerow([
                r.index,
                r.tau.label(),
                r.on_circle,
                r.branch,
                r.verdict.corollary if r.verdict else "inconclusive",
                (r.verdict.limiting_stage if r.verdict else r.error) or "",
            ])
        return buf.getvalue()


def sweep(taus, options: DecideOptions | None = None, d: int = 2) -> SweepResult:
    """``decide`` on ``tau xi + xi**d`` for each sample; failures become
    inconclusive rows.  Runs sequentially (mpmath precision is global state)."""
    if not taus:
        raise PreconditionError("sweep needs a non-empty grid")
    opts = options or DecideOptions()
    rows = []
    for k, tau in enumerate(taus):
        if not isinstance(tau, Multiplier):
            tau = Multiplier.numeric(tau, opts.prec)
        try:
            v = decide(family_germ(tau, d, opts.prec), opts)
            rows.append(SweepRow(k, tau, v))
        except TorusLeafError as exc:
            rows.append(SweepRow(k, tau, None, str(exc)))
    return SweepResult(rows)
