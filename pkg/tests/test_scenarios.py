"""Presets and the manufactured solution (sources re-derived with sympy)."""

import numpy as np
import pytest
import sympy as sy

from thermocontact.constitutive import normal_displacement
from thermocontact.scenarios import (
    PRESETS,
    ManufacturedSolution,
    manufactured_case,
    manufactured_material,
    preset,
)
from thermocontact.stepper import Simulator

X, Y, T = sy.symbols("x y t", real=True)


def _symbolic(ex: ManufacturedSolution):
    p = ex.p
    a = 1 + T if ex.profile == "linear" else sy.exp(T)
    b = ex.beta0 * a
    c = sy.Float(ex.c)
    theta = a * (1 + sy.Rational(1, 4) * sy.cos(sy.pi * X) * sy.cos(sy.pi * Y))
    theta_s = a * (sy.Rational(4, 5) + sy.Rational(1, 5) * sy.cos(sy.pi * X))
    chi = sy.Rational(1, 2) + sy.Rational(1, 5) * sy.cos(sy.pi * X)
    u = [b * ex.c1 * X * (1 - Y), b * ex.c2 * (1 - Y)]
    lap = lambda f: sy.diff(f, X, 2) + sy.diff(f, Y, 2)

    def stress(lam, mu, v):
        e = [[(sy.diff(v[i], [X, Y][j]) + sy.diff(v[j], [X, Y][i])) / 2 for j in range(2)] for i in range(2)]
        tr = e[0][0] + e[1][1]
        return [[lam * tr * int(i == j) + 2 * mu * e[i][j] for j in range(2)] for i in range(2)]

    se = stress(ex.lam_e, ex.mu_e, u)
    sv = stress(ex.lam_v, ex.mu_v, [sy.diff(ui, T) for ui in u])
    sig = [[se[i][j] + sv[i][j] + theta * int(i == j) for j in range(2)] for i in range(2)]
    div_ut = sy.diff(sy.diff(u[0], X) + sy.diff(u[1], Y), T)
    k = p.k0
    lam1 = p.lam[1]
    h = ex.eps * (sy.diff(theta, T) - lap(sy.diff(theta, T))) + c * sy.diff(theta, T) - lap(theta) - div_ut
    # Contact flux: -d_y theta (outward) + k (theta - theta_s) = h_c on y = 0.
    h_c = k * (theta - theta_s)
    ths_xx = sy.diff(theta_s, X, 2)
    h_s = (ex.eps * (sy.diff(theta_s, T) - sy.diff(ths_xx, T)) + c * sy.diff(theta_s, T) - ths_xx
           - k * (theta - theta_s))
    f = [-(sy.diff(sig[i][0], X) + sy.diff(sig[i][1], Y)) for i in range(2)]
    n_side = sy.Symbol("n1")
    g = [sig[i][0] * n_side for i in range(2)]
    g_c = [-sig[i][1] + chi * u[i] for i in range(2)]
    s_chi = -sy.diff(chi, X, 2) - lam1 * p.theta_eq + lam1 * theta_s + (u[0] ** 2 + u[1] ** 2) / 2
    return dict(h=h, h_c=h_c, h_s=h_s, f=f, g=g, g_c=g_c, s_chi=s_chi, n1=n_side, theta=theta, dthy=sy.diff(theta, Y))


@pytest.mark.parametrize("profile", ["linear", "exp"])
def test_manufactured_sources_match_sympy(profile):
    ex = ManufacturedSolution(manufactured_material(), eps=0.02, mu=0.05, profile=profile)
    sym = _symbolic(ex)
    rng = np.random.default_rng(0)
    pts = rng.random((6, 2))
    for t in (0.0, 0.37):
        for x, y in pts:
            sub = {X: x, Y: y, T: t}
            xa, ya = np.array([x]), np.array([y])
            assert ex.h(xa, ya, t)[0] == pytest.approx(float(sym["h"].subs(sub)), abs=1e-12)
            assert np.allclose(ex.f(xa, ya, t)[0], [float(e.subs(sub)) for e in sym["f"]], atol=1e-12)
        for x in pts[:, 0]:
            sub = {X: x, Y: 0.0, T: t}
            xa, ya = np.array([x]), np.array([0.0])
            # theta has zero normal derivative on the contact line, so h_c is pure exchange.
            assert float(sym["dthy"].subs(sub)) == pytest.approx(0.0, abs=1e-14)
            assert ex.h_c(xa, ya, t)[0] == pytest.approx(float(sym["h_c"].subs(sub)), abs=1e-12)
            assert ex.h_s(xa, ya, t)[0] == pytest.approx(float(sym["h_s"].subs(sub)), abs=1e-12)
            assert np.allclose(ex.g_c(xa, ya, t)[0], [float(e.subs(sub)) for e in sym["g_c"]], atol=1e-12)
            assert ex.s_chi(xa, ya, t)[0] == pytest.approx(float(sym["s_chi"].subs(sub)), abs=1e-12)
        for x_side, n1 in ((0.0, -1.0), (1.0, 1.0)):
            for y in pts[:, 1]:
                sub = {X: x_side, Y: y, T: t, sym["n1"]: n1}
                got = ex.g(np.array([x_side]), np.array([y]), t)[0]
                assert np.allclose(got, [float(e.subs(sub)) for e in sym["g"]], atol=1e-12)


def test_manufactured_time_derivative_by_finite_differences():
    ex = ManufacturedSolution(manufactured_material(), eps=0.01, mu=0.01, profile="exp")
    t, h = 0.3, 1e-6
    assert (ex.a(t + h) - ex.a(t - h)) / (2 * h) == pytest.approx(ex.a_t(t), rel=1e-8)
    assert (ex.b(t + h) - ex.b(t - h)) / (2 * h) == pytest.approx(ex.b_t(t), rel=1e-8)


def test_manufactured_design_constraints():
    sc = manufactured_case(n=8)
    ex = sc.exact
    mu = sc.solver.mu
    assert ex.c == pytest.approx((1 + mu) / (mu * mu + mu + 1), rel=1e-14)
    x = np.linspace(0, 1, 101)
    chi = ex.chi(x, 0 * x, 0.0)
    assert chi.min() >= 0.2 and chi.max() <= 0.8
    sim = Simulator(sc)
    for t in (0.0, 0.5):
        un = normal_displacement(ex.u(sim.xc, sim.yc, t), sim.normals)
        assert np.all(un < 0)


def test_manufactured_rejects_nonlinear_law():
    from thermocontact.scenarios import default_material

    with pytest.raises(ValueError):
        ManufacturedSolution(default_material(), 0.01, 0.01)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_build(name):
    sc = preset(name, n=4)
    sim = Simulator(sc)
    s = sim.build_initial_data()
    assert s.chi.min() >= 0 and s.chi.max() <= 1
    assert sc.name == name


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("nope")
