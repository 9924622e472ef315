"""Command-line front end.

Every command writes exactly one document to stdout (JSON, or CSV for
``green-grid`` and ``sweep --format csv``) and diagnostics to stderr.

Exit status: 0 success, 1 usage or parse error, 2 precondition refused,
3 precision exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass

import mpmath
from mpmath import mp

from . import __version__
from .classify import DecideOptions, decide, default_grid, family_germ, sweep
from .diophantine import Multiplier, analyze
from .dynamics import (
    DEFAULT_CAP,
    TOL_MU,
    backward_orbit,
    green,
    green_grid,
    invariant_disk,
    periodic_cycles,
)
from .errors import ParseError, PrecisionExhausted, PreconditionError
from .germ import Polynomial, PolynomialGerm, parse_coefficient, reduce
from .numbers import DEFAULT_PREC, default_tol, default_tol_resonance, jsonable, mp_str
from .surface import GREEN, PHI, SurfaceModel, surface_check

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_PRECISION = 0, 1, 2, 3

COMMANDS = ("classify", "sweep", "normal-form", "green-grid", "cycles", "backward-orbit", "surface-check", "diophantine")


_FLAGS = {"--punctured", "--help", "--version"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    precision_bits: int = DEFAULT_PREC
    N: int = 12
    tol: float | None = None
    tol_mu: float = TOL_MU
    tol_resonance: float | None = None
    root_tol: float | None = None
    lam: float = 0.5
    eps0: float = 0.05
    rho: float | None = None
    seed: int = 0
    format: str = "json"

    def __post_init__(self):
        if self.precision_bits < 53:
            raise UsageError("--precision must be at least 53 bits")
        if self.N < 1:
            raise UsageError("--N must be positive")
        for name in ("tol", "tol_mu", "tol_resonance", "root_tol", "rho"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise UsageError(f"{name} must be positive")
        if not 0 < self.lam < 1:
            raise UsageError("--lambda must lie in (0, 1)")
        if not 0 < self.eps0 < 1 - self.lam:
            raise UsageError("--eps0 must lie in (0, 1 - lambda)")
        if self.format not in ("json", "csv"):
            raise UsageError("--format is json or csv")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(
            precision_bits=args.precision,
            N=args.N,
            tol=args.tol,
            tol_mu=args.tol_mu,
            tol_resonance=args.tol_resonance,
            root_tol=args.root_tol,
            lam=args.lam,
            eps0=args.eps0,
            rho=args.rho,
            seed=args.seed,
            format=args.format or ("csv" if args.command == "green-grid" else "json"),
        )

    def to_json(self):
        out = asdict(self)
        with mp.workprec(self.precision_bits):
            out["tol_effective"] = mp_str(self.tol if self.tol is not None else default_tol(self.precision_bits), 16)
            tr = self.tol_resonance if self.tol_resonance is not None else default_tol_resonance(self.precision_bits)
            out["tol_resonance_effective"] = mp_str(tr, 16)
        return out

    def decide_options(self, **extra) -> DecideOptions:
        return DecideOptions(
            prec=self.precision_bits,
            tol_mu=self.tol_mu,
            tol_resonance=self.tol_resonance,
            seed=self.seed,
            lam=self.lam,
            eps0=self.eps0,
            N=self.N,
            **extra,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, n: int) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}") from exc
    if len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--f", help='polynomial, e.g. "2x+x^2" or "(1+2i)x-1/3x^3"')
    common.add_argument("--tau", help='multiplier: "p/q", "golden", "cremer:d=2,depth=3", angle "0.123@200", or complex "0.9+0.1i"')
    common.add_argument("--N", type=int, default=12, help="truncation order")
    common.add_argument("--precision", type=int, default=DEFAULT_PREC, help="working precision in bits")
    common.add_argument("--lambda", dest="lam", type=float, default=0.5)
    common.add_argument("--eps0", type=float, default=0.05)
    common.add_argument("--rho", type=float, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--tol-mu", type=float, default=TOL_MU)
    common.add_argument("--tol-resonance", type=float, default=None)
    common.add_argument("--root-tol", type=float, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", default=None, choices=("json", "csv"), help="default csv for green-grid, json otherwise")
    common.add_argument("--out", default=None, help="write the document here instead of stdout")

    p = _Parser(prog="torusleaf", description="Neighborhoods of a torus leaf from its holonomy germ.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("classify", parents=[common], help="neighborhood-type verdict for a germ")
    sp.add_argument("--nf-max", type=int, default=48, help="largest normal-form order tried at a resonance")

    sp = sub.add_parser("sweep", parents=[common], help="verdicts over the tau*x+x^2 family")
    sp.add_argument("--nf-max", type=int, default=48, help="largest normal-form order tried at a resonance")
    sp.add_argument("--grid", action="append", default=None, help="multiplier sample (repeatable); default grid otherwise")
    sp.add_argument("--degree", type=int, default=2)

    sub.add_parser("normal-form", parents=[common], help="formal normal form and first obstruction")

    sp = sub.add_parser("green-grid", parents=[common], help="raster of the Green function")
    sp.add_argument("--window", default="-2,2,-2,2", help="x0,x1,y0,y1")
    sp.add_argument("--res", default="128", help="n or nx,ny")
    sp.add_argument("--n-max", type=int, default=500)
    sp.add_argument("--probe", action="append", default=[], help="extra point evaluated at full precision")

    sp = sub.add_parser("cycles", parents=[common], help="periodic cycles up to a period")
    sp.add_argument("--m-max", type=int, default=3)
    sp.add_argument("--disk", default=None, help="re,im,radius")
    sp.add_argument("--punctured", action="store_true")
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP)

    sp = sub.add_parser("backward-orbit", parents=[common], help="backward orbit converging to a repelling cycle")
    sp.add_argument("--cycle", required=True, help="a point of the target cycle (approximate)")
    sp.add_argument("--period", type=int, default=1)
    sp.add_argument("--from", dest="start", required=True, help="seed point eta_0")
    sp.add_argument("--steps", type=int, default=40)

    sp = sub.add_parser("surface-check", parents=[common], help="gluing, exponent and harmonicity checks")
    sp.add_argument("--mode", choices=(PHI, GREEN), default=PHI)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--xi-max", type=float, default=None)

    sp = sub.add_parser("diophantine", parents=[common], help="resonance and small-divisor conditions")
    sp.add_argument("--n-max", type=int, default=10_000)
    sp.add_argument("--l-max", type=int, default=30)
    sp.add_argument("--A", type=float, action="append", default=None)
    sp.add_argument("--degree", type=int, default=2)
    return p


# -- input helpers --------------------------------------------------------------------


def _multiplier(text: str, cfg: RunConfig) -> Multiplier:
    return Multiplier.parse(text, bits=max(cfg.precision_bits, 1024) if text.strip() == "golden" else 1024)


def _germ(args, cfg: RunConfig) -> PolynomialGerm:
    if args.tau is not None:
        mult = _multiplier(args.tau, cfg)
        if args.f is None:
            return family_germ(mult, 2, cfg.precision_bits)
        tail = Polynomial.parse(args.f).coeffs[2:] or (0,)
        if mult.kind == "numeric":
            return PolynomialGerm((0, mult.value) + tuple(tail))
        return PolynomialGerm.from_multiplier(mult, tail, bits=max(cfg.precision_bits, 256))
    if args.f is None:
        raise UsageError("need --f or --tau")
    return PolynomialGerm.parse(args.f)


def _poly(args) -> Polynomial:
    if args.f is None:
        raise UsageError("need --f")
    return Polynomial.parse(args.f)


def _point(text: str, prec: int):
    with mp.workprec(prec):
        return parse_coefficient(text).to_mpc()


# -- commands ------------------------------------------------------------------------------


def cmd_classify(args, cfg):
    return decide(_germ(args, cfg), cfg.decide_options(nf_max=args.nf_max)).to_json()


def cmd_sweep(args, cfg):
    taus = [_multiplier(t, cfg) for t in args.grid] if args.grid else default_grid(prec=cfg.precision_bits)
    result = sweep(taus, cfg.decide_options(nf_max=args.nf_max), d=args.degree)
    return result.to_csv() if cfg.format == "csv" else result.to_json()


def cmd_normal_form(args, cfg):
    f = _germ(args, cfg)
    rep = reduce(f, cfg.N, tol=cfg.tol, prec=cfg.precision_bits, tol_resonance=cfg.tol_resonance)
    return {"f": f.to_json(), "N": cfg.N, **rep.to_json()}


def cmd_green_grid(args, cfg):
    f = _poly(args)
    window = _floats(args.window, 4)
    res = [int(x) for x in args.res.split(",")]
    res = (res[0], res[0]) if len(res) == 1 else tuple(res[:2])
    if min(res) < 1:
        raise UsageError("--res must be positive")
    rows = green_grid(f, window, res, args.n_max)
    disks = invariant_disk(f, prec=cfg.precision_bits) if args.probe else None
    probes = []
    for text in args.probe:
        ev = green(f, _point(text, cfg.precision_bits), args.n_max, cfg.precision_bits, disks)
        probes.append((text, ev))
    if cfg.format == "json":
        return {
            "f": f.to_json(),
            "window": window,
            "res": list(res),
            "raster_precision": "double",
            "raster": rows,
            "probes": [{"point": t, **ev.to_json()} for t, ev in probes],
        }
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "re", "im", "g", "escaped_iter", "certified_error"])
    for r in rows:
        w.writerow(["grid", repr(r["re"]), repr(r["im"]), repr(r["g"]), r["escaped_iter"], ""])
    for text, ev in probes:
        z = _point(text, cfg.precision_bits)
        w.writerow([
            "probe",
            mp_str(z.real, cfg.precision_bits),
            mp_str(z.imag, cfg.precision_bits),
            mp_str(ev.value, cfg.precision_bits),
            ev.escape_iterations if ev.escaped else -1,
            mp_str(ev.certified_error, 16),
        ])
    return buf.getvalue()


def cmd_cycles(args, cfg):
    f = _poly(args)
    disk = None
    if args.disk:
        x, y, r = _floats(args.disk, 3)
        disk = (mpmath.mpc(x, y), mpmath.mpf(r))
    cycles = periodic_cycles(
        f, args.m_max, disk=disk, punctured=args.punctured, cap=args.cap, prec=cfg.precision_bits,
        seed=cfg.seed, tol_mu=cfg.tol_mu, root_tol=cfg.root_tol,
    )
    return {
        "f": f.to_json(),
        "m_max": args.m_max,
        "complete": cycles.complete,
        "root_counts": {str(k): v for k, v in cycles.root_counts.items()},
        "precision_bits": cycles.prec,
        "cycles": [c.to_json() for c in cycles],
    }


def cmd_backward_orbit(args, cfg):
    f = _poly(args)
    target = _point(args.cycle, cfg.precision_bits)
    cycles = periodic_cycles(f, args.period, prec=cfg.precision_bits, seed=cfg.seed, tol_mu=cfg.tol_mu)
    cands = [(min(abs(p - target) for p in c.points), c) for c in cycles if c.period == args.period]
    if not cands:
        raise PreconditionError(f"no cycle of period {args.period}")
    dist, cycle = min(cands, key=lambda t: t[0])
    index = min(range(len(cycle.points)), key=lambda i: abs(cycle.points[i] - target))
    orbit = backward_orbit(
        f, cycle, _point(args.start, cfg.precision_bits), args.steps, N=max(cfg.N, 24), index=index,
        prec=cfg.precision_bits, tol_mu=cfg.tol_mu,
    )
    with mp.workprec(cfg.precision_bits):
        res = orbit.step_residuals(f, cfg.precision_bits)
    return {
        "f": f.to_json(),
        "cycle_match_distance": mp_str(dist, 16),
        "max_step_residual": mp_str(max(res), 16) if res else None,
        **orbit.to_json(),
    }


def cmd_surface_check(args, cfg):
    f = _poly(args)
    model = SurfaceModel(f, cfg.lam, cfg.eps0, mode=args.mode, rho=cfg.rho, N=cfg.N, prec=cfg.precision_bits)
    return surface_check(model, args.samples, cfg.seed, xi_max=args.xi_max)


def cmd_diophantine(args, cfg):
    if args.tau is None:
        raise UsageError("need --tau")
    mult = _multiplier(args.tau, cfg)
    rep = analyze(mult, args.n_max, args.degree, tuple(args.A or (2.0,)), args.l_max, cfg.precision_bits)
    return rep.to_json()


HANDLERS = {
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "normal-form": cmd_normal_form,
    "green-grid": cmd_green_grid,
    "cycles": cmd_cycles,
    "backward-orbit": cmd_backward_orbit,
    "surface-check": cmd_surface_check,
    "diophantine": cmd_diophantine,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # values such as "-2,2,-1.5,1.5" or "-x+x^2" must not read as options
    for i in range(len(argv) - 1, 0, -1):
        prev, val = argv[i - 1], argv[i]
        if prev.startswith("--") and "=" not in prev and prev not in _FLAGS and val.startswith("-") and not val.startswith("--"):
            argv[i - 1 : i + 1] = [f"{argv[i - 1]}={argv[i]}"]
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig.from_args(args)
        result = HANDLERS[args.command](args, cfg)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=stderr)
        print(parser.format_usage(), file=stderr, end="")
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=stderr)
        return EXIT_PRECISION
    except PreconditionError as exc:
        print(f"precondition refused: {exc}", file=stderr)
        return EXIT_PRECONDITION
    if isinstance(result, str):
        text = result
    else:
        doc = {"command": args.command, "version": __version__, "config": cfg.to_json(), "result": jsonable(result)}
        text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=stderr)
    else:
        stdout.write(text)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
