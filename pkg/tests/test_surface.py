import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st
from mpmath import mp

from torusleaf.errors import DegreeError, DomainError, PreconditionError
from torusleaf.germ import Polynomial, PolynomialGerm
from torusleaf.surface import GREEN, PHI, SurfaceModel, SurfacePoint, fit_order, surface_check

LINEAR = Polynomial.parse("2x")
SQUARE = Polynomial.parse("x^2")
NONLIN = PolynomialGerm.parse("2x+x^2")


@pytest.fixture(scope="module")
def phi_linear():
    return SurfaceModel(LINEAR, 0.5, 0.05)


@pytest.fixture(scope="module")
def green_square():
    return SurfaceModel(SQUARE, 0.5, 0.05, mode=GREEN)


@pytest.fixture(scope="module")
def phi_nonlinear():
    return SurfaceModel(NONLIN, 0.5, 0.05, N=12)


def ulps(model, x):
    return abs(x - 1) / mpmath.ldexp(1, -model.prec)


def test_exponent_identities(phi_linear, green_square, phi_nonlinear):
    for m in (phi_linear, green_square, phi_nonlinear):
        assert ulps(m, m.exponent_identity()) <= 4
    assert phi_linear.a == 1 and green_square.a == 1


@given(st.floats(0.05, 0.9), st.floats(0.5, 8), st.sampled_from([PHI, GREEN]))
def test_exponent_identity_property(lam, tau, mode):
    f = Polynomial((0, tau, 1))
    eps0 = (1 - lam) / 2
    m = SurfaceModel(f, lam, eps0, mode=mode, allow_circle=True)
    assert ulps(m, m.exponent_identity()) <= 4


def test_parameter_validation():
    with pytest.raises(PreconditionError):
        SurfaceModel(LINEAR, 1.5, 0.05)
    with pytest.raises(PreconditionError):
        SurfaceModel(LINEAR, 0.5, 0.6)
    with pytest.raises(PreconditionError):
        SurfaceModel(PolynomialGerm.parse("x+x^2"), 0.5, 0.05)
    with pytest.raises(DegreeError):
        SurfaceModel(LINEAR, 0.5, 0.05, mode=GREEN)


def test_chart_domains(phi_linear):
    with pytest.raises(DomainError):
        phi_linear.point(1, 1.2, 0.01)
    with pytest.raises(DomainError):
        phi_linear.point(2, 1.0, 10)
    pt = phi_linear.point(2, 0.97, 0.01)
    assert phi_linear.transition_minus(pt).chart == 1


def test_gluing_linear_phi(phi_linear):
    pts = phi_linear.random_overlap_points(200, seed=1)
    assert max(phi_linear.gluing_residuals(pts)) <= 1e-12


def test_gluing_green(green_square):
    pts = green_square.random_overlap_points(200, seed=2)
    assert max(green_square.gluing_residuals(pts)) <= 1e-12


def test_gluing_nonlinear_phi(phi_nonlinear):
    pts = phi_nonlinear.random_overlap_points(200, seed=3, xi_max=1e-3)
    assert max(phi_nonlinear.gluing_residuals(pts)) <= 1e-8


@given(st.floats(0.01, 0.99), st.floats(0, 6.28), st.floats(1e-4, 1e-3), st.floats(0, 6.28))
def test_transition_coherence(r, t, s, u):
    """A chart-1 point and its chart-2 representative (z/lam, f^-1(xi)) carry the same value."""
    model = SurfaceModel(NONLIN, 0.5, 0.05, N=12)
    with mp.workprec(model.prec):
        z = model.lam * (1 + r * model.eps0) * mpmath.expj(t)
        xi = mpmath.mpf(s) * mpmath.expj(u)
        p1 = SurfacePoint(1, z, xi)
        p2 = model.inverse_plus(p1)
        assert abs(model.eval_phi(p1) - model.eval_phi(p2)) < 1e-8
        back = model.transition_plus(p2)
        assert abs(back.z - p1.z) < 1e-30 and abs(back.xi - p1.xi) < 1e-30


def test_canonical_uses_the_deck_relation(green_square):
    m = green_square
    with mp.workprec(m.prec):
        xi = mpmath.mpc(0.3, 0.1)
        p = m.canonical(mpmath.mpc(1.5, 0.2), xi)
        assert p.chart == 1 and m.lam <= abs(p.z) < 1
        assert abs(p.xi - xi**2) < 1e-30
        assert abs(m.eval(p) - m.eval_G(SurfacePoint(2, mpmath.mpc(1.5, 0.2), xi)).value) < 1e-25


def test_phi_unbounded_towards_the_curve(phi_nonlinear):
    m = phi_nonlinear
    h, hinv, radius = m.linearizer
    vals = []
    with mp.workprec(m.prec):
        z = mpmath.mpc(0.75)
        for k in range(8, 48, 5):
            xi = mpmath.mpc(1, 1) * mpmath.ldexp(1, -k)
            v = m.eval_phi(SurfacePoint(1, z, xi))
            vals.append(-v)
            # the defect from log|xi_lin| is the bounded a*log|z| term
            assert abs(v - mpmath.log(abs(hinv(xi))) - m.a * mpmath.log(abs(z))) < 1e-30
    assert all(b > a for a, b in zip(vals, vals[1:])) and vals[-1] > 20


def test_phi_singular_on_curve(phi_linear):
    with pytest.raises(DomainError):
        phi_linear.eval_phi(SurfacePoint(1, 0.75, 0))


def test_laplacian_linear_phi_is_rounding(phi_linear):
    pt = SurfacePoint(1, mpmath.mpc(0.75), mpmath.mpc(0.01))
    rows = phi_linear.laplacian_probe("phi", pt, False, (0.1, 0.05, 0.025, 0.0125))
    eps = mpmath.ldexp(1, -phi_linear.prec)
    for r in rows:
        assert abs(r["z"]) <= 10 * eps * r["z_scale"]
        assert abs(r["xi"]) <= 10 * eps * r["xi_scale"]


def test_laplacian_log_green_leafwise(green_square):
    pt = SurfacePoint(1, mpmath.mpc(0.75), mpmath.mpc(1.3, 0.4))
    rows = green_square.laplacian_probe("logG", pt, True, (0.1, 0.05, 0.025, 0.0125))
    eps = mpmath.ldexp(1, -green_square.prec)
    for r in rows:
        assert abs(r["z"]) <= 10 * eps * r["z_scale"]
    with pytest.raises(PreconditionError):
        green_square.laplacian_probe("logG", pt, False, (0.1,))


def test_laplacian_nonlinear_phi_second_order(phi_nonlinear):
    hs = (0.1, 0.05, 0.025, 0.0125)
    pt = SurfacePoint(1, mpmath.mpc(0.75), mpmath.mpc(0.05))
    rows = phi_nonlinear.laplacian_probe("phi", pt, False, hs)
    assert fit_order(hs, [r["xi"] for r in rows]) >= 1.9
    raw = phi_nonlinear.laplacian_probe("phi", pt, False, (0.004, 0.002, 0.001, 0.0005), coords="raw")
    assert fit_order([r["h"] for r in raw], [r["z"] for r in raw]) >= 1.9


def test_fit_order_recovers_power():
    hs = [0.1, 0.05, 0.025]
    assert abs(fit_order(hs, [3 * h**2 for h in hs]) - 2) < 1e-9


def test_surface_check_report(phi_linear):
    rep = surface_check(phi_linear, samples=50)
    assert rep["laplacian_zero_to_rounding"] is True
    assert float(rep["gluing_max_residual"]) <= 1e-12
    assert rep["model"]["mode"] == PHI
    assert float(rep["exponent_identities"]["ulps_from_one"]) <= 4
