"""The glued two-chart surface around the elliptic curve ``C = C*/(z ~ lam z)``.

Chart 1 is ``{lam < |z| < 1} x U0``, chart 2 is ``{lam1 < |z| < lam2} x U1``
with ``lam1 = 1 - eps0``, ``lam2 = 1 + eps0``.  On ``lam1 < |z| < 1`` the
charts are glued by the identity; on ``1 < |z| < lam2`` a chart-2 point
``(z, xi)`` is the chart-1 point ``(lam z, f(xi))``.

Disks are certified from coefficient bounds (``S_k = |c_k|``):

* ``rho``: ``sum_{k>=2} k S_k rho**(k-1) <= |tau|/2``, so ``Re f'/tau > 0`` on U0
  and f is injective there;
* ``V1``: inner radius ``min(rho, m(rho))`` with ``m(r)`` a lower bound of
  ``|f|`` on ``|xi| = r``;
* ``U1``: largest ``r`` with ``sum_k S_k r**k < v1``, so ``f(U1)`` lies in V1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from mpmath import mp

from .dynamics import escape_radius, green, invariant_disk
from .errors import DegreeError, DomainError, PreconditionError
from .germ import Polynomial, TruncatedSeries, horner, invert, reduce
from .numbers import DEFAULT_PREC, complex_pair, mp_str

PHI = "phi"
GREEN = "green"


@dataclass(frozen=True)
class SurfacePoint:
    chart: int
    z: object
    xi: object

    def to_json(self):
        return {"chart": self.chart, "z": complex_pair(self.z, 64), "xi": complex_pair(self.xi, 64)}


def _bisect(pred, lo, hi, steps: int = 80):
    """Largest r in [lo, hi] with pred(r), assuming pred is monotone decreasing."""
    if pred(hi):
        return hi
    for _ in range(steps):
        mid = (lo + hi) / 2
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


class SurfaceModel:
    def __init__(
        self,
        f: Polynomial,
        lam=0.5,
        eps0=0.05,
        mode: str = PHI,
        rho=None,
        N: int = 12,
        prec: int = DEFAULT_PREC,
        allow_circle: bool = False,
    ):
        if mode not in (PHI, GREEN):
            raise PreconditionError(f"unknown exponent mode {mode!r}")
        self.f = f
        self.mode = mode
        self.N = N
        self.prec = prec
        with mp.workprec(prec):
            self.lam = mpmath.mpf(str(lam) if isinstance(lam, float) else lam)
            self.eps0 = mpmath.mpf(str(eps0) if isinstance(eps0, float) else eps0)
            if not 0 < self.lam < 1:
                raise PreconditionError("lambda must lie in (0, 1)")
            if not 0 < self.eps0 < 1 - self.lam:
                raise PreconditionError("eps0 must lie in (0, 1 - lambda)")
            self.lam1 = 1 - self.eps0
            self.lam2 = 1 + self.eps0
            self.cs = f.mp_coeffs(prec)
            self.tau = self.cs[1] if len(self.cs) > 1 else mpmath.mpc(0)
            S = [abs(c) for c in self.cs]
            if mode == PHI:
                if self.tau == 0:
                    raise PreconditionError("phi mode needs tau != 0")
                log_tau = mpmath.log(abs(self.tau))
                if not allow_circle and abs(log_tau) <= mpmath.ldexp(1, -(prec // 2)):
                    raise PreconditionError("phi mode needs |tau| != 1 (pass allow_circle for a Siegel-candidate model)")
                self.a = -log_tau / mpmath.log(self.lam)
            else:
                d = f.degree
                if d < 2:
                    raise DegreeError("green mode needs degree >= 2")
                self.a = -mpmath.log(d) / mpmath.log(self.lam)
            if rho is None:
                if mode == PHI:
                    bound = lambda r: mpmath.fsum(k * S[k] * r ** (k - 1) for k in range(2, len(S))) <= abs(self.tau) / 2
                    rho = _bisect(bound, mpmath.mpf(0), mpmath.mpf(1))
                else:
                    rho = 2 * escape_radius(f, prec)
            self.rho = mpmath.mpf(rho)
            lower = S[-1] * self.rho ** (len(S) - 1) - mpmath.fsum(S[k] * self.rho**k for k in range(len(S) - 1))
            if S[0] == 0:
                lower = max(lower, abs(self.tau) * self.rho - mpmath.fsum(S[k] * self.rho**k for k in range(2, len(S))))
            self.v1 = min(self.rho, lower) if lower > 0 else mpmath.mpf(0)
            if self.v1 <= 0:
                raise PreconditionError("could not certify a non-empty V1; choose a smaller rho")
            self.u1 = _bisect(lambda r: mpmath.fsum(S[k] * r**k for k in range(len(S))) < self.v1, mpmath.mpf(0), self.rho)
            self._linearizer = None
            self._disks = invariant_disk(f, prec=prec) if mode == GREEN else None

    # -- geometry ------------------------------------------------------------

    def exponent_identity(self):
        """``lam**a |tau|`` (phi) or ``lam**a d`` (green); both should be 1."""
        with mp.workprec(self.prec):
            base = abs(self.tau) if self.mode == PHI else mpmath.mpf(self.f.degree)
            return self.lam**self.a * base

    def point(self, chart: int, z, xi) -> SurfacePoint:
        with mp.workprec(self.prec):
            z, xi = mpmath.mpc(z), mpmath.mpc(xi)
            az = abs(z)
            if chart == 1:
                if not (self.lam < az < 1 and abs(xi) < self.rho):
                    raise DomainError("point outside chart 1", admissible_radius=self.rho)
            elif chart == 2:
                if not (self.lam1 < az < self.lam2 and abs(xi) < self.u1):
                    raise DomainError("point outside chart 2", admissible_radius=self.u1)
            else:
                raise DomainError(f"no chart {chart}")
        return SurfacePoint(chart, z, xi)

    def canonical(self, z, xi) -> SurfacePoint:
        """Reduce a point of the cover to chart 1 with ``|z|`` in ``[lam, 1)``.

        Crossing ``|z| = 1`` outward applies ``(z, xi) -> (lam z, f(xi))``.
        """
        with mp.workprec(self.prec):
            z, xi = mpmath.mpc(z), mpmath.mpc(xi)
            while abs(z) >= 1:
                z, xi = self.lam * z, horner(self.cs, xi)
            while abs(z) < self.lam:
                z, xi = z / self.lam, self.local_inverse(xi)
            if abs(z) == self.lam:
                return self.point(2, z / self.lam, self.local_inverse(xi))
            return self.point(1, z, xi)

    def local_inverse(self, w):
        """The branch of ``f**-1`` near 0 (Newton from ``w / tau``)."""
        with mp.workprec(self.prec):
            if self.tau == 0:
                raise PreconditionError("f is not locally invertible at 0")
            dcs = [k * self.cs[k] for k in range(1, len(self.cs))]
            y = mpmath.mpc(w) / self.tau
            for _ in range(100):
                dy = (horner(self.cs, y) - w) / horner(dcs, y)
                y -= dy
                if abs(dy) <= mpmath.ldexp(1, -(self.prec - 4)) * (abs(y) + mpmath.ldexp(1, -self.prec)):
                    break
            if abs(y) >= self.rho:
                raise DomainError("preimage leaves U0", admissible_radius=self.v1)
            return y

    # -- transitions ---------------------------------------------------------------

    def transition_minus(self, pt: SurfacePoint) -> SurfacePoint:
        if pt.chart != 2 or not self.lam1 < abs(pt.z) < 1 or not abs(pt.xi) < self.u1:
            raise DomainError("transition_minus needs a chart-2 point with lam1 < |z| < 1")
        return SurfacePoint(1, pt.z, pt.xi)

    def inverse_minus(self, pt: SurfacePoint) -> SurfacePoint:
        if pt.chart != 1 or not self.lam1 < abs(pt.z) < 1 or not abs(pt.xi) < self.u1:
            raise DomainError("inverse_minus needs a chart-1 point with lam1 < |z| < 1 and xi in U1")
        return SurfacePoint(2, pt.z, pt.xi)

    def transition_plus(self, pt: SurfacePoint) -> SurfacePoint:
        if pt.chart != 2 or not 1 < abs(pt.z) < self.lam2 or not abs(pt.xi) < self.u1:
            raise DomainError("transition_plus needs a chart-2 point with 1 < |z| < lam2")
        with mp.workprec(self.prec):
            w = horner(self.cs, pt.xi)
            if not abs(w) < self.v1:
                raise DomainError("f(xi) leaves V1", admissible_radius=self.u1)
            return SurfacePoint(1, self.lam * pt.z, w)

    def inverse_plus(self, pt: SurfacePoint) -> SurfacePoint:
        if pt.chart != 1 or not self.lam < abs(pt.z) < self.lam * self.lam2 or not abs(pt.xi) < self.v1:
            raise DomainError("inverse_plus needs a chart-1 point with lam < |z| < lam lam2 and xi in V1")
        with mp.workprec(self.prec):
            return SurfacePoint(2, pt.z / self.lam, self.local_inverse(pt.xi))

    # -- the functions ---------------------------------------------------------------

    @property
    def linearizer(self):
        """``(h, h**-1, admissible radius)`` with ``f o h = h o (tau xi)`` to order N."""
        if self._linearizer is None:
            if self.f.degree <= 1:
                ident = TruncatedSeries.identity(max(self.N, 1), self.prec)
                self._linearizer = (ident, ident, self.rho)
            else:
                rep = reduce(self.f, self.N, prec=self.prec)
                if rep.obstruction is not None:
                    raise PreconditionError("f is not formally linearizable: resonant obstruction present")
                h = rep.conjugator
                hinv = invert(h, self.N)
                self._linearizer = (h, hinv, min(self.rho, _series_radius(hinv)))
        return self._linearizer

    def eval_phi(self, pt: SurfacePoint, N: int | None = None):
        """``log|h**-1(xi)| + a log|z|`` in the point's own chart."""
        if self.mode != PHI:
            raise PreconditionError("eval_phi needs a phi-mode model")
        with mp.workprec(self.prec):
            xi = mpmath.mpc(pt.xi)
            if xi == 0:
                raise DomainError("xi = 0 lies on the curve C, where phi is singular")
            _, hinv, radius = self.linearizer
            if abs(xi) > radius:
                raise DomainError("linearizer not certified at this xi", admissible_radius=radius)
            return mpmath.log(abs(hinv(xi))) + self.a * mpmath.log(abs(pt.z))

    def eval_G(self, pt: SurfacePoint):
        """``g(xi) |z|**a`` with its certified error; 0 if xi does not escape."""
        if self.mode != GREEN:
            raise PreconditionError("eval_G needs a green-mode model")
        with mp.workprec(self.prec):
            ev = green(self.f, pt.xi, prec=self.prec, disks=self._disks)
            scale = abs(pt.z) ** self.a
            return GValue(ev.value * scale, ev.certified_error * scale, ev.escaped)

    def eval(self, pt: SurfacePoint):
        return self.eval_phi(pt) if self.mode == PHI else self.eval_G(pt).value

    # -- harmonicity -------------------------------------------------------------------

    def laplacian_probe(self, function: str, pt: SurfacePoint, leaf_fixed: bool, h_steps, coords: str = "log"):
        """Five-point Laplacians at ``pt`` for each spacing in ``h_steps``.

        ``coords="log"`` differentiates in ``w = log z`` and ``s = log xi``
        (the stencil is exact on functions linear in Re w, Re s); ``"raw"``
        uses ``z`` and ``xi`` themselves.  Directions: ``z`` always, ``xi``
        too unless ``leaf_fixed``.  ``function`` is ``"phi"`` or ``"logG"``.
        """
        if function == "phi":
            F = lambda z, xi: self.eval_phi(SurfacePoint(pt.chart, z, xi))
        elif function == "logG":
            def F(z, xi):
                v = self.eval_G(SurfacePoint(pt.chart, z, xi))
                if not v.escaped or v.value <= 0:
                    raise DomainError("log G needs an escaping xi")
                return mpmath.log(v.value)
        else:
            raise PreconditionError(f"unknown function {function!r}")
        if function == "logG" and not leaf_fixed:
            raise PreconditionError("log G is only leafwise harmonic; use leaf_fixed=True")
        out = []
        with mp.workprec(self.prec):
            z0, xi0 = mpmath.mpc(pt.z), mpmath.mpc(pt.xi)
            directions = ["z"] if leaf_fixed else ["z", "xi"]
            for h in h_steps:
                h = mpmath.mpf(h)
                row = {"h": h}
                for var in directions:
                    base = z0 if var == "z" else xi0
                    if coords == "log":
                        w = mpmath.log(base)
                        moves = [mpmath.exp(w + dw) for dw in (h, -h, 1j * h, -1j * h)]
                    else:
                        moves = [base + dw for dw in (h, -h, 1j * h, -1j * h)]
                    for mv in moves:
                        self._check_stencil(pt.chart, mv if var == "z" else z0, mv if var == "xi" else xi0)
                    vals = [F(mv, xi0) if var == "z" else F(z0, mv) for mv in moves]
                    center = F(z0, xi0)
                    lap = (mpmath.fsum(vals) - 4 * center) / h**2
                    scale = max(abs(v) for v in vals + [center]) / h**2
                    row[var] = lap
                    row[var + "_scale"] = scale
                out.append(row)
        return out

    def _check_stencil(self, chart, z, xi):
        try:
            self.point(chart, z, xi)
        except DomainError as exc:
            raise DomainError("stencil leaves the chart") from exc

    # -- reports -----------------------------------------------------------------------

    def random_overlap_points(self, n: int, seed: int = 0, xi_max=None, side: str = "both"):
        """Chart-2 points in the overlaps (``side`` in ``minus``/``plus``/``both``)."""
        rng = np.random.default_rng(seed)
        with mp.workprec(self.prec):
            rmax = float(min(self.u1, xi_max) if xi_max is not None else self.u1)
            lam1, lam2 = float(self.lam1), float(self.lam2)
            pts = []
            for k in range(n):
                s = side if side != "both" else ("plus" if k % 2 else "minus")
                lo, hi = (1.0, lam2) if s == "plus" else (lam1, 1.0)
                r = lo + (hi - lo) * (0.02 + 0.96 * rng.random())
                t = 2 * math.pi * rng.random()
                rx = rmax * (0.02 + 0.96 * math.sqrt(rng.random()))
                tx = 2 * math.pi * rng.random()
                pts.append(self.point(2, mpmath.mpc(r * math.cos(t), r * math.sin(t)), mpmath.mpc(rx * math.cos(tx), rx * math.sin(tx))))
            return pts

    def gluing_residuals(self, points) -> list:
        out = []
        with mp.workprec(self.prec):
            for pt in points:
                other = self.transition_plus(pt) if abs(pt.z) > 1 else self.transition_minus(pt)
                if self.mode == PHI:
                    out.append(abs(self.eval_phi(pt) - self.eval_phi(other)))
                else:
                    a, b = self.eval_G(pt), self.eval_G(other)
                    out.append(abs(a.value - b.value))
        return out

    def to_json(self):
        return {
            "mode": self.mode,
            "lambda": mp_str(self.lam, 64),
            "eps0": mp_str(self.eps0, 64),
            "lambda1": mp_str(self.lam1, 64),
            "lambda2": mp_str(self.lam2, 64),
            "a": mp_str(self.a, 64),
            "rho": mp_str(self.rho, 32),
            "v1": mp_str(self.v1, 32),
            "u1": mp_str(self.u1, 32),
            "precision_bits": self.prec,
        }


@dataclass
class GValue:
    value: object
    error: object
    escaped: bool


def _series_radius(s: TruncatedSeries, tail_tol: float = 1e-12):
    """Radius where the last two retained terms of ``s`` are below ``tail_tol``
    relative to the linear term (the truncation is trusted there)."""
    N = s.order
    if N < 3:
        return mpmath.inf
    r = mpmath.inf
    for k in (N - 1, N):
        c = abs(s[k])
        if c != 0:
            r = min(r, (tail_tol * abs(s[1]) / c) ** (mpmath.mpf(1) / (k - 1)))
    return r


def fit_order(hs, values) -> float:
    """Least-squares slope of ``log|value|`` against ``log h``."""
    xs = [math.log(float(h)) for h in hs]
    ys = [math.log(max(float(abs(v)), 1e-300)) for v in values]
    return float(np.polyfit(xs, ys, 1)[0])


def surface_check(
    model: SurfaceModel,
    samples: int = 1000,
    seed: int = 0,
    xi_max=None,
    h_steps=(0.1, 0.05, 0.025, 0.0125),
    probe_point: SurfacePoint | None = None,
) -> dict:
    """Exponent identity, gluing residual over random overlap points and a
    Laplacian convergence fit."""
    with mp.workprec(model.prec):
        ident = model.exponent_identity()
        ulps = abs(ident - 1) / mpmath.eps
        pts = model.random_overlap_points(samples, seed, xi_max)
        res = model.gluing_residuals(pts)
        report = {
            "model": model.to_json(),
            "exponent_identities": {
                "quantity": "lambda^a*|tau|" if model.mode == PHI else "lambda^a*d",
                "value": mp_str(ident, model.prec),
                "ulps_from_one": mp_str(ulps, 16),
            },
            "gluing_max_residual": mp_str(max(res), 16) if res else None,
            "samples": samples,
        }
        if probe_point is None:
            xi = (model.rho if model.mode == PHI else model.rho / 2) / 2
            if xi_max is not None:
                xi = min(xi, mpmath.mpf(xi_max))
            probe_point = SurfacePoint(1, mpmath.mpc(0.75), mpmath.mpc(xi))
        function = "phi" if model.mode == PHI else "logG"
        leaf = model.mode != PHI
        try:
            rows = model.laplacian_probe(function, probe_point, leaf, h_steps)
            key = "z" if leaf else "xi"
            vals = [r[key] for r in rows]
            scales = [r[key + "_scale"] for r in rows]
            report["laplacian"] = [
                {"h": mp_str(r["h"], 32), **{k: mp_str(r[k], 16) for k in r if k != "h"}} for r in rows
            ]
            if all(abs(v) <= 10 * mpmath.eps * s for v, s in zip(vals, scales)):
                report["laplacian_convergence_order"] = None
                report["laplacian_zero_to_rounding"] = True
            else:
                report["laplacian_convergence_order"] = fit_order([r["h"] for r in rows], vals)
                report["laplacian_zero_to_rounding"] = False
        except DomainError as exc:
            report["laplacian"] = None
            report["laplacian_error"] = str(exc)
    return report
