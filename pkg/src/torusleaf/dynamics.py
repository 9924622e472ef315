"""Iteration of a polynomial map: escape, Green function, cycles, Koenigs
coordinates and backward orbits accumulating on a repelling cycle.

Everything here accepts a general ``Polynomial`` (test maps such as
``xi**2 - 1`` do not fix 0); the germ-specific parts only use that
``f(0) = 0`` when deflating the fixed point at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np
from mpmath import mp

from .errors import CapExceeded, DegreeError, DomainError, NotHyperbolicError, PreconditionError
from .germ import Polynomial, TruncatedSeries, compose, horner, invert
from .numbers import DEFAULT_PREC, complex_pair, mp_str

DEFAULT_CAP = 4096
TOL_MU = 1e-10


class _Escaped:
    """Returned by ``iterate`` once an orbit leaves every meaningful scale."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self):
        return False

    def __repr__(self):
        return "ESCAPED"

    def to_json(self):
        return "escaped"


ESCAPED = _Escaped()

# orbits past 2**(2**20) are reported as escaped rather than carried on
_BAILOUT_LOG2 = 1 << 20


def _coeffs(f: Polynomial, prec=None):
    return f.mp_coeffs(prec)


def iterate(f: Polynomial, xi, n: int, prec: int | None = None):
    """``f**n (xi)``, or ``ESCAPED`` if the orbit blows past the bailout."""
    if n < 0:
        raise PreconditionError("iteration count must be >= 0")
    if not isinstance(f, Polynomial):
        raise TypeError("iterate is defined for polynomial maps only")
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec):
        cs = _coeffs(f, prec)
        z = mpmath.mpc(xi)
        for _ in range(n):
            z = horner(cs, z)
            if z != 0 and mpmath.mag(z) > _BAILOUT_LOG2:
                return ESCAPED
        return z


def escape_radius(f: Polynomial, prec: int | None = None) -> mpmath.mpf:
    """R with ``|xi| >= R  =>  |f(xi)| >= 2|xi|``.

    For ``|xi| >= R >= 1``: ``|f| >= |xi|**(d-1) (|c_d||xi| - sum_{i<d}|c_i|)``.
    """
    if f.degree < 2:
        raise DegreeError("escape radius needs degree >= 2")
    with mp.workprec(prec or DEFAULT_PREC):
        cs = _coeffs(f, prec)
        lower = mpmath.fsum(abs(c) for c in cs[:-1])
        return max(mpmath.mpf(1), (2 + lower) / abs(cs[-1]))


# -- Green function ----------------------------------------------------------------


@dataclass
class GreenEvaluation:
    value: object
    escape_iterations: int
    certified_error: object
    escaped: bool
    inside: bool = False  # orbit entered a certified forward-invariant disk

    @property
    def indeterminate(self) -> bool:
        return not self.escaped and not self.inside

    def to_json(self):
        return {
            "value": mp_str(self.value, 64),
            "escape_iterations": self.escape_iterations,
            "certified_error": mp_str(self.certified_error, 32),
            "escaped": self.escaped,
            "indeterminate": self.indeterminate,
        }


class InvariantDisk(NamedTuple):
    """``f**period`` maps the closed disk into itself, so it lies in K(f)."""

    center: object
    radius: object
    period: int


def green(
    f: Polynomial,
    xi,
    n_max: int = 500,
    prec: int | None = None,
    disks: list | None = None,
) -> GreenEvaluation:
    """``g(xi) = lim d**-n log|f**n(xi)|``.

    Once ``|z_n| >= max(R, 2S)`` with ``S = sum_{i<d}|c_i| / |c_d|``, every
    tail factor obeys ``|log|f(z)/(c_d z**d)|| <= 2S/|z|`` and ``|z|`` at
    least doubles per step, so

        g = d**-n (log|z_n| + log|c_d|/(d-1)) + err,
        |err| <= 2S d**-(n+1) / (|z_n| (1 - 1/(2d))).

    Iteration continues past escape until that bound is below the working
    precision.  ``disks`` are forward-invariant disks; an orbit entering one
    returns 0 certified.
    """
    d = f.degree
    if d < 2:
        raise DegreeError("the Green function needs degree d >= 2")
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec + 16):
        cs = _coeffs(f, prec + 16)
        cd = abs(cs[-1])
        S = mpmath.fsum(abs(c) for c in cs[:-1]) / cd
        R = max(escape_radius(f, prec + 16), 2 * S)
        target = mpmath.ldexp(1, -prec)
        z = mpmath.mpc(xi)
        log_cd = mpmath.log(cd) / (d - 1)
        escaped_at = None
        n = 0
        while True:
            az = abs(z)
            if escaped_at is None and az >= R:
                escaped_at = n
            if escaped_at is not None:
                bound = 2 * S / (az * (1 - mpmath.mpf(1) / (2 * d))) / mpmath.mpf(d) ** (n + 1)
                if bound < target or S == 0 or n - escaped_at > 64:
                    break
            elif n >= n_max:
                return GreenEvaluation(mpmath.mpf(0), n, mpmath.mpf(0), False)
            if disks and escaped_at is None:
                for disk in disks:
                    if abs(z - disk.center) <= disk.radius:
                        return GreenEvaluation(mpmath.mpf(0), n, mpmath.mpf(0), False, inside=True)
            z = horner(cs, z)
            n += 1
        scale = mpmath.mpf(d) ** -n
        value = scale * (mpmath.log(az) + log_cd)
        rounding = mpmath.ldexp(1, -(prec - 8)) * (abs(value) + scale * (abs(mpmath.log(az)) + n + 1))
        err = (bound if S else 0) + rounding
    with mp.workprec(prec):
        return GreenEvaluation(+value, escaped_at, +err, True)


def green_closed_form_monomial(xi) -> mpmath.mpf:
    """``log+|xi|``, the Green function of ``xi**d``."""
    return max(mpmath.mpf(0), mpmath.log(abs(mpmath.mpc(xi))))


def green_grid(
    f: Polynomial,
    window: tuple,
    res: tuple,
    n_max: int = 500,
) -> list[dict]:
    """Double-precision raster of ``g`` over ``[x0,x1] x [y0,y1]``.

    Same formula as ``green`` on numpy arrays; returns rows
    ``{re, im, g, escaped_iter}`` with ``escaped_iter = -1`` for no escape.
    """
    d = f.degree
    if d < 2:
        raise DegreeError("the Green function needs degree d >= 2")
    x0, x1, y0, y1 = map(float, window)
    nx, ny = res
    cs = [complex(c) for c in _coeffs(f, 64)]
    cd = abs(cs[-1])
    S = sum(abs(c) for c in cs[:-1]) / cd
    # tail error is about 2S / (|z| d**(n+1)); past 1e16 it is below double rounding
    R = max(float(escape_radius(f, 64)), 2 * S, 1e16)
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    it = np.full(Z.shape, -1, dtype=np.int64)
    g = np.zeros(Z.shape)
    z = Z.copy()
    active = np.ones(Z.shape, dtype=bool)
    log_cd = math.log(cd) / (d - 1)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_max + 1):
            az = np.abs(z)
            hit = active & (az >= R)
            if hit.any():
                g[hit] = (np.log(az[hit]) + log_cd) / float(d) ** n
                it[hit] = n
                active &= ~hit
            if not active.any():
                break
            zz = np.zeros_like(z)
            for c in reversed(cs):
                zz = zz * z + c
            z = np.where(active, zz, z)
    return [
        {"re": float(X.flat[k]), "im": float(Y.flat[k]), "g": float(g.flat[k]), "escaped_iter": int(it.flat[k])}
        for k in range(Z.size)
    ]


# -- polynomial helpers --------------------------------------------------------------


def poly_mul(a: list, b: list) -> list:
    out = [mpmath.mpc(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_compose(outer: list, inner: list) -> list:
    acc = [outer[-1]]
    for c in reversed(outer[:-1]):
        acc = poly_mul(acc, inner)
        acc[0] += c
    return acc


def iterate_coeffs(f: Polynomial, m: int, prec: int | None = None) -> list:
    cs = _coeffs(f, prec)
    out = list(cs)
    for _ in range(m - 1):
        out = poly_compose(cs, out)
    return out


def taylor_shift(coeffs: list, c) -> list:
    """Coefficients of ``p(c + zeta)`` in ``zeta``."""
    out = list(coeffs)
    n = len(out)
    for k in range(n - 1):
        for j in range(n - 2, k - 1, -1):
            out[j] += c * out[j + 1]
    return out


def _eval_with_derivative(coeffs: list, z):
    p = mpmath.mpc(0)
    dp = mpmath.mpc(0)
    for c in reversed(coeffs):
        dp = dp * z + p
        p = p * z + c
    return p, dp


def invariant_disk(f: Polynomial, centers=None, periods=(1, 2, 3), prec: int | None = None) -> list[InvariantDisk]:
    """Disks ``D(c, r)`` with ``f**p(D) inside D``, found from the bound
    ``sup |f**p(c + zeta) - c| <= sum_k |b_k| r**k`` on Taylor coefficients."""
    prec = prec or DEFAULT_PREC
    out = []
    with mp.workprec(prec):
        cs = _coeffs(f, prec)
        if centers is None:
            crit = _roots_numpy([k * cs[k] for k in range(1, len(cs))]) if len(cs) > 2 else []
            centers = [mpmath.mpc(0)] + [mpmath.mpc(c) for c in crit if abs(c) > 1e-12]
        for p in periods:
            if len(cs) - 1 > 1 and (len(cs) - 1) ** p > 512:
                break
            fp = iterate_coeffs(f, p, prec)
            for c in centers:
                b = taylor_shift(fp, c)
                b[0] -= c
                for r in (mpmath.mpf(2) ** -j for j in range(1, 12)):
                    bound = mpmath.fsum(abs(bk) * r**k for k, bk in enumerate(b))
                    if bound <= r:
                        out.append(InvariantDisk(c, r, p))
                        break
    return out


# -- periodic cycles -------------------------------------------------------------------


@dataclass
class CycleRecord:
    points: list
    period: int
    multiplier: object
    stability: str
    residual: object = None

    def to_json(self):
        return {
            "period": self.period,
            "points": [complex_pair(p, 64) for p in self.points],
            "multiplier": complex_pair(self.multiplier, 64),
            "abs_multiplier": mp_str(abs(self.multiplier), 64),
            "class": self.stability,
            "residual": mp_str(self.residual, 32) if self.residual is not None else None,
        }

    def min_abs(self):
        return min(abs(p) for p in self.points)

    def max_abs(self):
        return max(abs(p) for p in self.points)


class CycleList(list):
    """A list of cycles with search diagnostics attached."""

    complete: bool = True
    root_counts: dict = {}
    prec: int = 0


def classify_multiplier(mu, tol_mu: float = TOL_MU) -> str:
    a = abs(mu)
    if a > 1 + tol_mu:
        return "repelling"
    if a < 1 - tol_mu:
        return "attracting"
    return "indifferent"


def _roots_numpy(coeffs: list) -> list:
    """Double-precision roots (seeds only); ``coeffs`` low to high."""
    arr = np.array([complex(c) for c in reversed(coeffs)], dtype=complex)
    if not np.all(np.isfinite(arr)):
        return []
    while len(arr) > 1 and arr[0] == 0:
        arr = arr[1:]
    if len(arr) < 2:
        return []
    try:
        return list(np.roots(arr))
    except np.linalg.LinAlgError:
        return []


def aberth(coeffs: list, seeds=None, prec: int | None = None, max_iter: int = 4000, rng=None):
    """All roots of ``sum coeffs[k] z**k`` by Aberth-Ehrlich iteration.

    Returns ``(roots, converged)``.
    """
    prec = prec or DEFAULT_PREC
    n = len(coeffs) - 1
    if n < 1:
        return [], True
    rng = rng if rng is not None else np.random.default_rng(0)
    with mp.workprec(prec):
        lead = coeffs[-1]
        cs = [c / lead for c in coeffs]
        if seeds is None or len(seeds) != n:
            radius = 1 + max(float(abs(c)) for c in cs[:-1])
            seeds = [radius * np.exp(2j * np.pi * (k + 0.25) / n) for k in range(n)]
        zs = []
        for s in seeds:
            s = complex(s)
            jitter = complex(rng.normal(), rng.normal()) * 1e-9 * (1 + abs(s))
            zs.append(mpmath.mpc(s + jitter))
        eps = mpmath.ldexp(1, -(prec - 10))
        done = [False] * n
        for _ in range(max_iter):
            moved = False
            for i in range(n):
                if done[i]:
                    continue
                p, dp = _eval_with_derivative(cs, zs[i])
                # residual at the rounding level of the evaluation
                az = abs(zs[i])
                noise = eps * mpmath.fsum(abs(c) * az**k for k, c in enumerate(cs))
                if abs(p) <= noise:
                    done[i] = True
                    continue
                ratio = p / dp if dp != 0 else mpmath.mpc(1e-3)
                acc = mpmath.fsum(1 / (zs[i] - zs[j]) for j in range(n) if j != i and zs[j] != zs[i])
                denom = 1 - ratio * acc
                step = ratio / denom if denom != 0 else ratio
                zs[i] -= step
                if abs(step) <= eps * abs(zs[i]):
                    done[i] = True
                else:
                    moved = True
            if not moved:
                return zs, True
        return zs, all(done)


def _newton_polish(coeffs, z, prec, steps: int = 8):
    with mp.workprec(prec):
        for _ in range(steps):
            p, dp = _eval_with_derivative(coeffs, z)
            if dp == 0 or p == 0:
                break
            dz = p / dp
            z -= dz
            if abs(dz) <= mpmath.ldexp(abs(z), -(prec - 4)):
                break
    return z


def orbit_derivative(cs: list, dcs: list, z, m: int):
    """``(f**m(z), (f**m)'(z))`` by the chain rule."""
    w = mpmath.mpc(1)
    for _ in range(m):
        w *= horner(dcs, z)
        z = horner(cs, z)
    return z, w


def _in_disk(points, disk, punctured: bool) -> bool:
    if disk is None:
        return not (punctured and all(p == 0 for p in points))
    center, radius = disk
    center = mpmath.mpc(center)
    for p in points:
        if abs(p - center) >= radius:
            return False
        if punctured and p == center:
            return False
    return True


def periodic_cycles(
    f: Polynomial,
    m_max: int,
    disk: tuple | None = None,
    punctured: bool = False,
    cap: int = DEFAULT_CAP,
    prec: int | None = None,
    seed: int = 0,
    tol_mu: float = TOL_MU,
    root_tol=None,
) -> CycleList:
    """Cycles of exact period ``m <= m_max`` lying in ``disk = (center, radius)``.

    Roots of ``f**m(xi) - xi`` come from Aberth iteration seeded with
    double-precision companion roots.  The known fixed point at 0 of a germ
    is deflated (repeatedly while the constant term vanishes) before the
    search.  A root has exact period m when no proper divisor period fits.
    """
    d = f.degree
    if d < 2:
        raise DegreeError("cycle search needs degree >= 2")
    if d**m_max > cap:
        raise CapExceeded(f"f^{m_max}(xi) - xi has degree {d**m_max} > cap {cap}", required=d**m_max)
    prec = prec or DEFAULT_PREC
    rng = np.random.default_rng(seed)
    result = CycleList()
    result.root_counts = {}
    result.prec = prec
    with mp.workprec(prec):
        cs = _coeffs(f, prec)
        dcs = [k * cs[k] for k in range(1, len(cs))]
        root_tol = mpmath.ldexp(1, -(prec // 2)) if root_tol is None else mpmath.mpf(root_tol)
        fixes_zero = cs[0] == 0
        for m in range(1, m_max + 1):
            P = iterate_coeffs(f, m, prec)
            P[1] -= 1
            zeros = 0
            scale = max(abs(c) for c in P)
            if fixes_zero:
                P = P[1:]
                zeros = 1
                while len(P) > 1 and abs(P[0]) <= mpmath.ldexp(scale, -(prec - 16)):
                    P = P[1:]
                    zeros += 1
            roots, ok = aberth(P, _roots_numpy(P), prec, rng=rng)
            roots = [_newton_polish(P, z, prec) for z in roots]
            if not ok:
                result.complete = False
            roots = [mpmath.mpc(0)] * zeros + roots
            result.root_counts[m] = len(roots)
            pool = []
            for z in roots:
                if _exact_period(cs, z, m, root_tol) == m:
                    pool.append(z)
            while pool:
                eta = pool.pop(0)
                pts = [eta]
                z = eta
                for _ in range(m - 1):
                    z = horner(cs, z)
                    j = min(range(len(pool)), key=lambda k: abs(pool[k] - z), default=None)
                    if j is not None and abs(pool[j] - z) <= mpmath.sqrt(root_tol) * (1 + abs(z)):
                        z = pool.pop(j)
                    else:
                        result.complete = False
                    pts.append(z)
                mu = mpmath.fprod(horner(dcs, p) for p in pts)
                resid = max(abs(horner(cs, pts[i]) - pts[(i + 1) % m]) for i in range(m))
                if _in_disk(pts, disk, punctured):
                    result.append(CycleRecord(pts, m, mu, classify_multiplier(mu, tol_mu), resid))
    return result


def _exact_period(cs, z, m: int, tol) -> int:
    w = z
    for k in range(1, m + 1):
        w = horner(cs, w)
        if m % k == 0 and abs(w - z) <= tol * (1 + abs(z)):
            return k
    return m


# -- Koenigs coordinates and backward orbits ---------------------------------------------


def _local_series(cs: list, center, N: int) -> TruncatedSeries:
    """``f(center + zeta) - f(center)`` as a series in zeta."""
    b = taylor_shift(cs, center)
    b = b[1:N + 1] + [mpmath.mpc(0)] * max(0, N - (len(b) - 1))
    return TruncatedSeries(N, tuple(b), mp.prec)


def return_map_series(f: Polynomial, cycle: CycleRecord, N: int, index: int = 0, prec: int | None = None):
    """``f**m(eta + zeta) - eta`` at ``eta = cycle.points[index]``."""
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec):
        cs = _coeffs(f, prec)
        m = cycle.period
        pts = cycle.points[index:] + cycle.points[:index]
        G = TruncatedSeries.identity(N, mp.prec)
        for k in range(m):
            G = compose(_local_series(cs, pts[k], N), G, N)
        return G


def koenigs(f: Polynomial, cycle: CycleRecord, N: int, index: int = 0, prec: int | None = None, tol_mu: float = TOL_MU) -> TruncatedSeries:
    """``phi`` with ``phi'(0) = 1`` and ``phi(G(zeta)) = mu phi(zeta)``, ``G`` the
    return map at the cycle point; ``b_n = sum_{k<n} b_k [G**k]_n / (mu - mu**n)``."""
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec):
        G = return_map_series(f, cycle, N, index, prec)
        mu = G[1]
        if abs(abs(mu) - 1) <= tol_mu:
            raise NotHyperbolicError(f"|multiplier| = {mp_str(abs(mu), 20)} is 1 within tolerance")
        if mu == 0:
            raise NotHyperbolicError("superattracting cycle: no Koenigs coordinate")
        dense = G.dense(N)
        powers = [[mpmath.mpc(1)] + [mpmath.mpc(0)] * N]
        b = [mpmath.mpc(0), mpmath.mpc(1)]
        from .germ import _mul

        powers.append(dense)
        for n in range(2, N + 1):
            powers.append(_mul(powers[-1], dense, N))
            num = mpmath.fsum(b[k] * powers[k][n] for k in range(1, n))
            b.append(num / (mu - mu**n))
        return TruncatedSeries(N, tuple(b[1:]), prec)


def critical_points_of_iterate(f: Polynomial, m: int, prec: int | None = None) -> list:
    P = iterate_coeffs(f, m, prec)
    dP = [k * P[k] for k in range(1, len(P))]
    return _roots_numpy(dP)


def injectivity_radius(f: Polynomial, cycle: CycleRecord, index: int = 0, prec: int | None = None):
    """Half the distance from the cycle point to the nearest critical point of ``f**m``."""
    eta = complex(cycle.points[index])
    crit = critical_points_of_iterate(f, cycle.period, prec)
    if not crit:
        return mpmath.inf
    return mpmath.mpf(min(abs(c - eta) for c in crit)) / 2


@dataclass
class BackwardOrbit:
    seed: object
    points: list
    target_cycle: CycleRecord
    distances: list = field(default_factory=list)
    monotone_from: int | None = None
    admissible_radius: object = None

    def step_residuals(self, f: Polynomial, prec: int | None = None) -> list:
        with mp.workprec(prec or DEFAULT_PREC):
            cs = _coeffs(f, prec)
            return [abs(horner(cs, self.points[n + 1]) - self.points[n]) for n in range(len(self.points) - 1)]

    def to_json(self):
        return {
            "seed": complex_pair(self.seed, 64),
            "n_steps": len(self.points) - 1,
            "points": [complex_pair(p, 64) for p in self.points],
            "distance_to_cycle": [mp_str(x, 20) for x in self.distances],
            "monotone_from": self.monotone_from,
            "admissible_radius": mp_str(self.admissible_radius, 20),
            "target_cycle": self.target_cycle.to_json(),
        }


def backward_orbit(
    f: Polynomial,
    cycle: CycleRecord,
    xi0,
    n_steps: int,
    N: int = 24,
    index: int = 0,
    prec: int | None = None,
    tol_mu: float = TOL_MU,
) -> BackwardOrbit:
    """``eta_0 = xi0``, ``f(eta_{n+1}) = eta_n``, converging to the cycle.

    ``eta_{jm}`` is the point with Koenigs coordinate ``mu**-j phi(xi0)``
    (the local inverse branch of ``f**m``), Newton-polished against
    ``f**m(eta_{jm}) = eta_{(j-1)m}``; the indices in between are forward
    images ``eta_{jm-k} = f**k(eta_{jm})``.
    """
    prec = prec or DEFAULT_PREC
    with mp.workprec(prec):
        mu = cycle.multiplier
        if abs(mu) <= 1 + tol_mu:
            raise PreconditionError("backward orbits need a repelling cycle")
        xi0 = mpmath.mpc(xi0)
        g0 = green(f, xi0, prec=prec)
        if not g0.escaped or g0.value <= 0:
            raise DomainError("seed is not in the escaping set (g(seed) = 0)")
        m = cycle.period
        eta = cycle.points[index]
        radius = injectivity_radius(f, cycle, index, prec)
        if abs(xi0 - eta) >= radius:
            raise DomainError(
                f"seed lies outside the Koenigs injectivity disk of radius {mp_str(radius, 10)}",
                admissible_radius=radius,
            )
        phi = koenigs(f, cycle, N, index, prec, tol_mu)
        psi = invert(phi, N)
        w0 = phi(xi0 - eta)
        cs = _coeffs(f, prec)
        dcs = [k * cs[k] for k in range(1, len(cs))]
        points = [xi0]
        prev = xi0
        j = 0
        while len(points) <= n_steps:
            j += 1
            y = eta + psi(w0 / mu**j)
            for _ in range(60):
                val, der = orbit_derivative(cs, dcs, y, m)
                dy = (val - prev) / der
                y -= dy
                if abs(dy) <= mpmath.ldexp(1, -(prec - 6)) * (1 + abs(y)):
                    break
            chunk = [y]
            z = y
            for _ in range(m - 1):
                z = horner(cs, z)
                chunk.append(z)
            # chunk = [eta_{jm}, eta_{jm-1}, ..., eta_{jm-m+1}]
            points.extend(reversed(chunk))
            prev = y
        points = points[:n_steps + 1]
        orbit_pts = cycle.points
        dists = [min(abs(p - q) for q in orbit_pts) for p in points]
        monotone_from = None
        for k in range(len(dists) - m - 1, -1, -1):
            if dists[k + m] < dists[k]:
                monotone_from = k
            else:
                break
        return BackwardOrbit(xi0, points, cycle, dists, monotone_from, radius)
