import cmath
import math

import mpmath
import pytest
from hypothesis import assume, example, given
from hypothesis import strategies as st
from mpmath import mp

from oracles import green_brute, newton_grid_cycles, sqrt_branch_orbit, square_cycles
from torusleaf.diophantine import Multiplier
from torusleaf.dynamics import (
    ESCAPED,
    backward_orbit,
    classify_multiplier,
    escape_radius,
    green,
    green_closed_form_monomial,
    green_grid,
    injectivity_radius,
    invariant_disk,
    iterate,
    koenigs,
    periodic_cycles,
    return_map_series,
)
from torusleaf.errors import CapExceeded, DegreeError, DomainError, NotHyperbolicError, PreconditionError
from torusleaf.germ import Polynomial, PolynomialGerm, compose, invert, reduce

PREC = 128

# frozen from the brute-force iteration oracle (n = 60 at 256 bits)
with mp.workprec(PREC):
    G_X2M1_AT_3 = mpmath.mpf("1.03575217958108709359405771274")
    G_X2M1_AT_05_12i = mpmath.mpf("0.440247502031439593999213033437")
    G_TAU11_AT_2 = mpmath.mpf("0.956140346896272495482425349669")

X2 = Polynomial.parse("x^2")
X2M1 = Polynomial.parse("x^2-1")
TAU11 = PolynomialGerm.parse("1.1x+x^2")


def test_frozen_values_match_oracle():
    with mp.workprec(PREC):
        assert abs(green_brute([-1, 0, 1], 3) - G_X2M1_AT_3) < 1e-28
        assert abs(green_brute([0, 1.1, 1], 2) - G_TAU11_AT_2) < 1e-28


# -- iteration and escape -----------------------------------------------------------


def test_iterate_examples():
    assert iterate(X2, 2, 3) == 256
    assert iterate(X2, mpmath.mpc(0.3, 0.2), 0) == mpmath.mpc(0.3, 0.2)
    assert iterate(X2, 3, 100) is ESCAPED
    with pytest.raises(TypeError):
        iterate(lambda z: z / (1 + z), 0.1, 2)


@pytest.mark.parametrize("text", ["x^2", "x^3", "x^2-1", "2x+x^2", "(1+i)x+x^2-1/3x^3"])
def test_escape_radius_doubling(text):
    f = Polynomial.parse(text)
    R = escape_radius(f)
    with mp.workprec(PREC):
        for k in range(16):
            z = R * mpmath.expjpi(mpmath.mpf(k) / 8)
            assert abs(f(z)) >= 2 * abs(z) * (1 - 1e-30)


def test_escape_radius_family_bound():
    for k in range(8):
        tau = 2 * cmath.exp(2j * math.pi * k / 8)
        assert escape_radius(PolynomialGerm((0, tau, 1))) <= 4 + 1e-12


def test_escape_radius_needs_degree_two():
    with pytest.raises(DegreeError):
        escape_radius(Polynomial.parse("2x"))


# -- Green function ---------------------------------------------------------------------


def test_green_examples():
    with mp.workprec(PREC):
        assert abs(green(X2, 2).value - mpmath.log(2)) < 1e-30
        ev = green(X2, 0.5)
        assert ev.value == 0 and not ev.escaped
        assert abs(green(X2M1, 3).value - G_X2M1_AT_3) < 1e-12
        assert abs(green(X2M1, mpmath.mpc(0.5, 1.2)).value - G_X2M1_AT_05_12i) < 1e-12
        assert abs(green(TAU11, 2).value - G_TAU11_AT_2) < 1e-12


@given(st.complex_numbers(min_magnitude=0.01, max_magnitude=50))
def test_green_closed_form_for_square(z):
    with mp.workprec(PREC):
        ev = green(X2, z, n_max=200)
        if ev.escaped:
            assert abs(ev.value - green_closed_form_monomial(z)) <= ev.certified_error + 1e-30


@pytest.mark.parametrize("f", [X2, X2M1, TAU11])
@given(z=st.complex_numbers(min_magnitude=0.5, max_magnitude=20))
@example(z=complex(1e-12, 1))
def test_green_functional_equation(f, z):
    with mp.workprec(PREC):
        a = green(f, z)
        assume(a.escaped)
        # f(z) with guard bits: rounding it at PREC would move g by about 2**-PREC
        with mp.workprec(PREC + 64):
            fz = f(mpmath.mpc(z))
        b = green(f, fz)
        assert abs(b.value - 2 * a.value) <= b.certified_error + 2 * a.certified_error
        assert a.value >= 0


@pytest.mark.parametrize("f", [X2M1, TAU11, Polynomial.parse("2x^3-x+1")])
def test_green_asymptotics(f):
    d = f.degree
    with mp.workprec(PREC):
        cd = abs(f.mp_coeffs()[-1])
        for r in (mpmath.mpf(10) ** 3, mpmath.mpf(10) ** 6):
            ev = green(f, r * mpmath.expjpi(0.3))
            gap = ev.value - mpmath.log(r) - mpmath.log(cd) / (d - 1)
            assert abs(gap) < 10 / r


def test_green_vanishes_in_certified_disks():
    f = X2M1
    disks = invariant_disk(f)
    assert disks
    with mp.workprec(PREC):
        for disk in disks:
            for k in range(6):
                z = disk.center + disk.radius / 2 * mpmath.expjpi(mpmath.mpf(k) / 3)
                ev = green(f, z, disks=disks)
                assert ev.value == 0 and ev.inside and not ev.indeterminate


def test_green_grid_matches_pointwise():
    rows = green_grid(X2M1, (-2, 2, -1.5, 1.5), (9, 7), 300)
    assert len(rows) == 63
    with mp.workprec(PREC):
        for r in rows[::5]:
            if r["escaped_iter"] >= 0:
                ev = green(X2M1, mpmath.mpc(r["re"], r["im"]))
                assert abs(ev.value - r["g"]) < 1e-13


# -- cycles ---------------------------------------------------------------------------------


def _same_set(a, b, tol=1e-20):
    return len(a) == len(b) and all(min(abs(complex(x) - complex(y)) for y in b) < tol for x in a)


def test_square_cycles_match_roots_of_unity():
    cycles = periodic_cycles(X2, 3)
    assert cycles.root_counts == {1: 2, 2: 4, 3: 8}
    for m in (1, 2, 3):
        ours = [c for c in cycles if c.period == m]
        ref = square_cycles(m)
        assert len(ours) == len(ref)
        for c in ours:
            assert any(_same_set(c.points, r, 1e-12) for r in ref)
            if m > 1 or abs(c.points[0]) > 0.5:
                assert abs(c.multiplier - 2**m) < 1e-25
                assert c.stability == "repelling"


def test_cycles_in_small_disk():
    cycles = periodic_cycles(X2, 1, disk=(0, 0.5))
    assert len(cycles) == 1 and cycles[0].points[0] == 0
    assert cycles[0].stability == "attracting" and cycles[0].multiplier == 0


def test_cycles_cap():
    with pytest.raises(CapExceeded):
        periodic_cycles(X2, 13)


@pytest.mark.parametrize("coeffs", [[-1, 0, 1], [0, 1.1, 1], [0.25j, 0, 1]])
def test_cycles_match_grid_oracle(coeffs):
    f = Polynomial(tuple(coeffs))
    cycles = periodic_cycles(f, 4)
    for m in range(1, 5):
        pts = [p for c in cycles if m % c.period == 0 for p in c.points]
        ref = newton_grid_cycles(coeffs, m, radius=2.5, grid=50)
        assert len(pts) == 2**m
        assert all(min(abs(z - complex(p)) for p in pts) < 1e-8 for z in ref)


def test_golden_cycles_against_grid_oracle():
    g = Multiplier.golden()
    f = PolynomialGerm.from_multiplier(g, (1,))
    tau = complex(g.tau(64))
    near = periodic_cycles(f, 6, disk=(0, 0.3), punctured=True, prec=256)
    assert near.complete
    for m in range(1, 7):
        ref = [z for z in newton_grid_cycles([0, tau, 1], m, radius=0.35, grid=40) if 1e-6 < abs(z) < 0.3]
        assert len(ref) == sum(len(c.points) for c in near if m % c.period == 0)
    full = periodic_cycles(f, 4)
    for m in range(1, 5):
        pts = [complex(p) for c in full if m % c.period == 0 for p in c.points]
        ref = newton_grid_cycles([0, tau, 1], m, radius=2.5, grid=60)
        assert len(ref) == len(pts) == 2**m
        assert all(min(abs(z - p) for p in pts) < 1e-8 for z in ref)


@given(st.complex_numbers(max_magnitude=1.5), st.integers(1, 4))
def test_cycle_grouping_counts(c, m_max):
    f = Polynomial((c, 0, 1))
    cycles = periodic_cycles(f, m_max, prec=96)
    for m in range(1, m_max + 1):
        assert cycles.root_counts[m] == 2**m
        # roots of f^m - id = union of cycles of period dividing m (generic c)
        pts = sum(len(cy.points) for cy in cycles if m % cy.period == 0)
        assert pts <= 2**m
        if cycles.complete:
            assert pts == 2**m or any(cy.stability == "indifferent" for cy in cycles)


@pytest.mark.parametrize(
    "mu, expected",
    [(0, "attracting"), (0.5, "attracting"), (1, "indifferent"), (1j, "indifferent"), (2, "repelling")],
)
def test_classify_multiplier(mu, expected):
    assert classify_multiplier(mpmath.mpc(mu)) == expected


# -- Koenigs and backward orbits -------------------------------------------------------------


def _fixed_cycle(f, point):
    cycles = periodic_cycles(f, 1)
    return min(cycles, key=lambda c: abs(c.points[0] - point))


def test_koenigs_linear_is_identity():
    f = Polynomial.parse("2x+x^2")
    # the linear map itself is not a polynomial of degree >= 2; use its local series
    cyc = _fixed_cycle(f, 0)
    phi = koenigs(Polynomial.parse("2x+x^2"), cyc, 8)
    assert phi[1] == 1
    rep = reduce(PolynomialGerm.parse("2x+x^2"), 8)
    # phi conjugates f to mu*zeta, so does the normal-form conjugator
    hinv = invert(rep.conjugator)
    for k in range(1, 9):
        assert abs(phi[k] - hinv[k]) < 1e-28


def test_koenigs_square_at_one():
    cyc = _fixed_cycle(X2, 1)
    N = 6
    phi = koenigs(X2, cyc, N)
    G = return_map_series(X2, cyc, N)
    assert abs(G[1] - 2) < 1e-30 and abs(G[2] - 1) < 1e-30
    lhs = compose(phi, G, N)
    with mp.workprec(PREC):
        for k in range(1, N + 1):
            assert abs(lhs[k] - 2 * phi[k]) < 1e-30


def test_koenigs_refuses_indifferent():
    f = PolynomialGerm.from_multiplier(Multiplier.golden(), (1,))
    cyc = _fixed_cycle(f, 0)
    with pytest.raises(NotHyperbolicError):
        koenigs(f, cyc, 6)


def test_backward_orbit_square_root_branch():
    cyc = _fixed_cycle(X2, 1)
    orbit = backward_orbit(X2, cyc, 1.2, 40)
    ref = sqrt_branch_orbit(1.2, 40)
    with mp.workprec(PREC):
        assert max(abs(a - b) for a, b in zip(orbit.points, ref)) < 1e-30
        assert max(orbit.step_residuals(X2)) < 1e-30
        g0 = mpmath.log(1.2)
        for n in (0, 10, 40):
            assert abs(green(X2, orbit.points[n]).value * 2**n - g0) < 1e-20
    assert orbit.distances[-1] < 1e-8
    assert orbit.monotone_from == 0


def test_backward_orbit_rejections():
    cyc = _fixed_cycle(X2, 1)
    with pytest.raises(DomainError):
        backward_orbit(X2, cyc, 0.8, 10)
    with pytest.raises(DomainError) as info:
        backward_orbit(X2, cyc, 3, 10)
    assert info.value.admissible_radius == injectivity_radius(X2, cyc)
    with pytest.raises(PreconditionError):
        backward_orbit(X2, _fixed_cycle(X2, 0), 0.1, 10)


def test_backward_orbit_to_two_cycle():
    f = TAU11
    two = [c for c in periodic_cycles(f, 2) if c.period == 2 and c.stability == "repelling"][0]
    eta = two.points[0]
    r = injectivity_radius(f, two)
    with mp.workprec(PREC):
        for k in range(16):
            seed = eta + r / 2 * mpmath.expjpi(mpmath.mpf(k) / 8)
            if green(f, seed).value > 1e-6:
                break
        orbit = backward_orbit(f, two, seed, 30)
        assert max(orbit.step_residuals(f)) < 1e-25
        g0 = green(f, seed).value
        for n in (0, 7, 30):
            ev = green(f, orbit.points[n])
            assert abs(ev.value * 2**n - g0) < 1e-15
        assert orbit.distances[-1] < orbit.distances[0]
