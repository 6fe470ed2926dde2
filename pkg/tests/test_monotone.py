"""Scalar calculus of the thermal law and its regularization.

Oracles are independent of the package: scipy's ``brentq`` root finder,
bounded scalar minimization for conjugates/Moreau envelopes, and closed
forms for the linear law.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar

from thermocontact import monotone as mc
from thermocontact.errors import DomainViolation, NoConvergence

LOG = mc.ThermalLaw.logarithmic()
LIN = mc.ThermalLaw.linear()
POW2 = mc.ThermalLaw.power(2.0)
LAWS = [LOG, LIN, POW2, mc.ThermalLaw.power(0.5)]

# Omega constant: root of r + e^r = 0 (Lambert W(1)), by bisection oracle.
OMEGA = brentq(lambda r: r + math.exp(r), -1.0, 0.0, xtol=1e-15)


def reg(mu):
    return mc.RegParams(mu)


# --- the law ---------------------------------------------------------------

def test_ell_examples():
    assert mc.ell_apply(LOG, 1.0) == 0.0
    assert mc.ell_apply(LIN, 3.5) == 3.5
    assert mc.ell_apply(mc.ThermalLaw.power(1.0), 2.0) == pytest.approx(2.0)


@pytest.mark.parametrize("law", [LOG, POW2])
@pytest.mark.parametrize("x", [0.0, -1.0])
def test_ell_domain_violation(law, x):
    with pytest.raises(DomainViolation):
        mc.ell_apply(law, x)


def test_gamma_examples():
    assert mc.gamma_apply(LOG, 0.0) == 1.0
    assert mc.gamma_apply(POW2, -1.0) == 0.0
    assert mc.gamma_apply(LIN, -2.0) == -2.0


@pytest.mark.parametrize("law", LAWS, ids=str)
def test_gamma_inverts_ell(law):
    x = np.linspace(0.05, 4.0, 50)
    assert np.allclose(mc.gamma_apply(law, mc.ell_apply(law, x)), x, rtol=1e-13)


def test_power_law_conjugate_vanishes_on_negatives():
    # sup_{x>0} x*y - j(x) for y <= 0 is approached at x -> 0, hence 0.
    j = lambda x: mc.j_apply(POW2, x)
    for y in (-2.0, -0.1, 0.0):
        res = minimize_scalar(lambda x: -(x * y - j(x)), bounds=(0.0, 10.0), method="bounded",
                              options={"xatol": 1e-12})
        assert -res.fun == pytest.approx(0.0, abs=1e-8)
        assert mc.jstar_apply(POW2, y) == 0.0


@pytest.mark.parametrize("law", LAWS, ids=str)
@pytest.mark.parametrize("y", [-1.5, 0.3, 1.7])
def test_jstar_matches_numerical_conjugate(law, y):
    j = lambda x: mc.j_apply(law, x)
    lo = 1e-12 if law.kind != "linear" else -50.0
    res = minimize_scalar(lambda x: -(x * y - j(x)), bounds=(lo, 50.0), method="bounded",
                          options={"xatol": 1e-12})
    assert mc.jstar_apply(law, y) == pytest.approx(-res.fun, rel=1e-7, abs=1e-9)


def test_j_log_normalized():
    assert mc.j_apply(LOG, 1.0) == pytest.approx(-1.0)  # x log x - x at x = 1
    assert mc.j_apply(LOG, 0.0) == 0.0
    assert math.isinf(mc.j_apply(LOG, -1.0))


# --- resolvent and Yosida ---------------------------------------------------

def test_resolvent_examples():
    assert mc.resolvent(LOG, reg(1.0), 1.0) == pytest.approx(0.0, abs=1e-12)  # newton_tol contract
    assert mc.resolvent(LIN, reg(1.0), 2.0) == 1.0
    oracle = brentq(lambda r: r + math.exp(r) - 2.0, 0.0, 1.0, xtol=1e-15)
    assert oracle == pytest.approx(0.4429, abs=1e-4)
    assert mc.resolvent(LOG, reg(1.0), 2.0) == pytest.approx(oracle, abs=1e-12)


def test_yosida_examples():
    assert mc.yosida_apply(LIN, reg(1.0), 2.0) == pytest.approx(1.0)
    assert mc.yosida_apply(LOG, reg(1.0), 1.0) == pytest.approx(1.0, abs=1e-13)
    assert OMEGA == pytest.approx(-0.5671, abs=1e-4)
    assert mc.yosida_apply(LOG, reg(1.0), 0.0) == pytest.approx(-OMEGA, abs=1e-12)


def test_resolvent_vectorized_and_shape():
    w = np.linspace(-5, 5, 12).reshape(3, 4)
    r = mc.resolvent(LOG, reg(0.1), w)
    assert r.shape == w.shape
    assert np.all(np.abs(r + 0.1 * np.exp(r) - w) <= 1e-10)


def test_resolvent_budget_exhausted():
    with pytest.raises(NoConvergence):
        mc.resolvent(LOG, mc.RegParams(1e-3, newton_tol=1e-300, newton_max_iter=1), 3.0)


# --- regularized ell --------------------------------------------------------

def test_ell_reg_examples():
    assert mc.ell_reg_apply(LIN, reg(1.0), 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    oracle = brentq(lambda y: math.exp(2 * y - 1) - (1 - y), 0.0, 1.0, xtol=1e-15)
    assert oracle == pytest.approx(0.3126, abs=1e-4)
    assert mc.ell_reg_apply(LOG, reg(1.0), 1.0) == pytest.approx(oracle, abs=1e-12)


def test_ell_reg_nested_oracle():
    # Independent nested evaluation: y solves mu*y + gamma_mu(y) = u with the
    # inner resolvent solved by brentq as well.
    mu, u = 0.3, 2.5

    def gamma_mu(y):
        r = brentq(lambda r: r + mu * math.exp(r) - y, -60, 60, xtol=1e-15)
        return (y - r) / mu

    y = brentq(lambda y: mu * y + gamma_mu(y) - u, -50, 50, xtol=1e-14)
    assert mc.ell_reg_apply(LOG, reg(mu), u) == pytest.approx(y, abs=1e-11)


@pytest.mark.parametrize("law", LAWS, ids=str)
@given(y=st.floats(-15, 15), mu=st.floats(1e-3, 1.0))
@settings(max_examples=60, deadline=None)
def test_ell_reg_round_trip(law, y, mu):
    r = reg(mu)
    u = mu * y + mc.yosida_apply(law, r, y)
    assert mc.ell_reg_apply(law, r, u) == pytest.approx(y, abs=1e-9 * max(1.0, abs(y)))
    assert mc.ell_reg_inverse(law, r, y) == pytest.approx(u, abs=1e-12 * max(1.0, abs(u)))


def test_ell_reg_derivative_examples():
    assert mc.ell_reg_derivative(LIN, reg(1.0), 7.0) == pytest.approx(2.0 / 3.0)
    h = 1e-5
    fd = (mc.ell_reg_apply(LOG, reg(1.0), 1.0 + h) - mc.ell_reg_apply(LOG, reg(1.0), 1.0 - h)) / (2 * h)
    assert mc.ell_reg_derivative(LOG, reg(1.0), 1.0) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("law", LAWS, ids=str)
@pytest.mark.parametrize("mu", [1.0, 0.1, 0.01])
def test_ell_reg_derivative_grid(law, mu):
    u = np.linspace(-8, 8, 41)
    r = reg(mu)
    d = mc.ell_reg_derivative(law, r, u)
    h = 1e-6 * np.maximum(1.0, np.abs(u))
    fd = (mc.ell_reg_apply(law, r, u + h) - mc.ell_reg_apply(law, r, u - h)) / (2 * h)
    assert np.all(d > 0) and np.all(d <= 1.0 / mu + 1e-12)
    # The power law with p < 1 has a kink in gamma at 0; skip points next to it.
    ok = np.abs(np.asarray(mc.positivity_slack(law, r, u))) > 1e-3 if law.kind == "power" else np.ones_like(u, bool)
    assert np.allclose(d[ok], fd[ok], rtol=1e-6, atol=1e-8)
    y, d2 = mc.ell_reg_with_derivative(law, r, u)
    assert np.array_equal(d2, d) and np.allclose(y, mc.ell_reg_apply(law, r, u), rtol=0, atol=0)


def test_log_consistency_and_positivity():
    r = reg(0.05)
    u = np.linspace(-20, 20, 201)
    y = mc.ell_reg_apply(LOG, r, u)
    rho = mc.resolvent(LOG, r, y)
    assert np.all(np.abs(np.exp(rho) - (u - 0.05 * y)) <= 1e-8)
    assert np.all(mc.positivity_slack(LOG, r, u) > 0)


# --- Moreau envelope --------------------------------------------------------

def _moreau_oracle(law, mu, w):
    """min_v j*(v) + (w - v)^2 / (2 mu) by bounded golden-section search."""
    res = minimize_scalar(lambda v: mc.jstar_apply(law, v) + (w - v) ** 2 / (2 * mu),
                          bounds=(-abs(w) - 60.0, abs(w) + 5.0), method="bounded", options={"xatol": 1e-12})
    return res.fun


def test_jstar_moreau_examples():
    assert mc.jstar_moreau(LIN, reg(1.0), 2.0) == pytest.approx(1.0)
    expect = 0.5 * OMEGA**2 + math.exp(OMEGA)
    assert expect == pytest.approx(0.7279, abs=1e-4)
    val = mc.jstar_moreau(LOG, reg(1.0), 0.0)
    assert val == pytest.approx(expect, abs=1e-12)
    assert val <= mc.jstar_apply(LOG, 0.0)
    sweep = [mc.jstar_moreau(LOG, reg(m), 0.0) for m in (1.0, 0.1, 0.01, 1e-3, 1e-4)]
    assert all(b > a for a, b in zip(sweep, sweep[1:])) and sweep[-1] < 1.0
    assert sweep[-1] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("law", LAWS, ids=str)
@pytest.mark.parametrize("mu", [1.0, 0.1])
@pytest.mark.parametrize("w", [-3.0, 0.0, 0.7, 2.0])
def test_jstar_moreau_is_envelope(law, mu, w):
    assert mc.jstar_moreau(law, reg(mu), w) == pytest.approx(_moreau_oracle(law, mu, w), abs=1e-8)


# --- coercivity --------------------------------------------------------------

def test_coercivity_examples():
    assert mc.coercivity_bound(LOG, reg(0.1), 5.0) >= 0.0
    c2bar = mc.coercivity_constant(LIN, reg(1.0))
    assert mc.coercivity_bound(LIN, reg(1.0), 0.0) == pytest.approx(c2bar, abs=1e-15)
    u = np.linspace(-10, 10, 2001)
    for mu in (1.0, 0.1, 0.01):
        assert np.all(mc.coercivity_bound(LOG, reg(mu), u) >= 0.0)


def test_coercivity_constants_table():
    assert (LOG.coercivity_c1, LOG.coercivity_c2) == (1.0, 0.0)
    assert POW2.coercivity_c2 == pytest.approx(2.0 / 3.0)
    assert LIN.coercivity_c2 == 0.5
    # j*(ell(x)) >= |x| - C2 on the domain, checked on a grid.
    for law in LAWS:
        x = np.linspace(1e-6 if law.kind != "linear" else -20, 20, 4001)
        lhs = mc.jstar_apply(law, mc.ell_apply(law, x))
        assert np.all(lhs >= law.coercivity_c1 * np.abs(x) - law.coercivity_c2 - 1e-12)


@given(w1=st.floats(-20, 20), w2=st.floats(-20, 20), mu=st.floats(1e-4, 1.0))
@settings(max_examples=200, deadline=None)
def test_monotone_and_lipschitz_property(w1, w2, mu):
    lo, hi = min(w1, w2), max(w1, w2)
    for law in LAWS:
        a, b = mc.ell_reg_apply(law, reg(mu), lo), mc.ell_reg_apply(law, reg(mu), hi)
        assert a <= b + 1e-12
        assert b - a <= (hi - lo) / mu + 1e-10


def test_regparams_validation():
    with pytest.raises(ValueError):
        mc.RegParams(0.0)
    with pytest.raises(ValueError):
        mc.RegParams(1.0, newton_tol=0.0)
    with pytest.raises(ValueError):
        mc.ThermalLaw.power(-1.0)
