"""Scalar calculus of the entropy nonlinearity and its regularizations.

A thermal law is a convex potential ``j`` with derivative ``ell = j'`` and
inverse ``gamma = ell^{-1} = (j^*)'``.  Three families are provided:

=============  ==================  =====================  =================
law            ell(x)              gamma(y)               j*(y)
=============  ==================  =====================  =================
logarithmic    log x   (x > 0)     exp y                  exp y
power (p)      x**p / p (x > 0)    (p y)**(1/p), 0 if y<=0  gamma(y)**(p+1)/(p+1)
linear         x                   y                      y**2 / 2
=============  ==================  =====================  =================

For a Yosida parameter ``mu > 0`` we work with

* the resolvent ``rho_mu(w)``, the root of ``rho + mu*gamma(rho) = w``;
* the Yosida approximation ``gamma_mu(w) = (w - rho_mu(w)) / mu``;
* the composite regularization ``L_mu = (mu*Id + gamma_mu)^{-1}``, which
  replaces ``ell`` in the regularized temperature equations;
* the Moreau envelope ``j*_mu(w) = mu/2 gamma_mu(w)**2 + j*(rho_mu(w))``.

Every function accepts scalars or numpy arrays and is evaluated
elementwise; scalar input gives a Python float back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, NoConvergence

__all__ = [
    "ThermalLaw",
    "RegParams",
    "ell_apply",
    "gamma_apply",
    "gamma_prime",
    "j_apply",
    "jstar_apply",
    "resolvent",
    "yosida_apply",
    "ell_reg_apply",
    "ell_reg_inverse",
    "ell_reg_derivative",
    "ell_reg_with_derivative",
    "positivity_slack",
    "jstar_moreau",
    "coercivity_constant",
    "coercivity_bound",
]

LOGARITHMIC = "logarithmic"
POWER = "power"
LINEAR = "linear"

_EXP_CAP = 709.0


@dataclass(frozen=True)
class ThermalLaw:
    kind: str = LOGARITHMIC
    p_exp: float = 1.0

    def __post_init__(self):
        if self.kind not in (LOGARITHMIC, POWER, LINEAR):
            raise ValueError(f"unknown thermal law {self.kind!r}")
        if self.kind == POWER and not self.p_exp > 0:
            raise ValueError("power law exponent must be positive")

    @classmethod
    def logarithmic(cls) -> "ThermalLaw":
        return cls(LOGARITHMIC)

    @classmethod
    def power(cls, p_exp: float) -> "ThermalLaw":
        return cls(POWER, float(p_exp))

    @classmethod
    def linear(cls) -> "ThermalLaw":
        return cls(LINEAR)

    @property
    def dom_lower(self) -> float:
        return -np.inf if self.kind == LINEAR else 0.0

    @property
    def coercivity_c1(self) -> float:
        return 1.0

    @property
    def coercivity_c2(self) -> float:
        # Minimum of j*(ell(x)) - |x| over the domain of ell.
        if self.kind == LOGARITHMIC:
            return 0.0
        if self.kind == POWER:
            return self.p_exp / (self.p_exp + 1.0)
        return 0.5

    def __str__(self):
        if self.kind == POWER:
            return f"power(p={self.p_exp:g})"
        return self.kind


@dataclass(frozen=True)
class RegParams:
    mu: float
    newton_tol: float = 1e-12
    newton_max_iter: int = 100

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("Yosida parameter mu must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be a positive integer")


def _wrap(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


# ---------------------------------------------------------------------------
# The law itself
# ---------------------------------------------------------------------------

def ell_apply(law: ThermalLaw, x):
    """Evaluate ``ell = j'`` on the interior of its domain."""
    xa = np.asarray(x, dtype=float)
    if law.kind != LINEAR and np.any(~(xa > 0)):
        raise DomainViolation(f"{law} requires x > 0")
    if law.kind == LOGARITHMIC:
        out = np.log(xa)
    elif law.kind == POWER:
        out = xa ** law.p_exp / law.p_exp
    else:
        out = xa.copy()
    return _wrap(out, x)


def gamma_apply(law: ThermalLaw, y):
    """Inverse of ``ell``, extended maximal-monotonically to all reals."""
    ya = np.asarray(y, dtype=float)
    if law.kind == LOGARITHMIC:
        out = np.exp(np.minimum(ya, _EXP_CAP))
    elif law.kind == POWER:
        out = np.power(law.p_exp * np.maximum(ya, 0.0), 1.0 / law.p_exp)
    else:
        out = ya.copy()
    return _wrap(out, y)


def gamma_prime(law: ThermalLaw, y):
    """Derivative of ``gamma``; may be ``inf`` at the kink of a power law."""
    ya = np.asarray(y, dtype=float)
    if law.kind == LOGARITHMIC:
        out = np.exp(np.minimum(ya, _EXP_CAP))
    elif law.kind == POWER:
        p = law.p_exp
        pos = ya > 0
        out = np.zeros_like(ya)
        with np.errstate(divide="ignore"):
            out[pos] = np.power(p * ya[pos], 1.0 / p - 1.0)
    else:
        out = np.ones_like(ya)
    return _wrap(out, y)


def j_apply(law: ThermalLaw, x):
    """Convex potential ``j``; ``+inf`` outside its closed domain."""
    xa = np.asarray(x, dtype=float)
    out = np.full_like(xa, np.inf)
    if law.kind == LOGARITHMIC:
        pos = xa > 0
        out[pos] = xa[pos] * np.log(xa[pos]) - xa[pos]
        out[xa == 0] = 0.0
    elif law.kind == POWER:
        p = law.p_exp
        ok = xa >= 0
        out[ok] = xa[ok] ** (p + 1.0) / (p * (p + 1.0))
    else:
        out = 0.5 * xa * xa
    return _wrap(out, x)


def jstar_apply(law: ThermalLaw, y):
    """Convex conjugate ``j*``, finite on the whole real line."""
    ya = np.asarray(y, dtype=float)
    if law.kind == LOGARITHMIC:
        out = np.exp(np.minimum(ya, _EXP_CAP))
    elif law.kind == POWER:
        p = law.p_exp
        out = np.power(p * np.maximum(ya, 0.0), (p + 1.0) / p) / (p + 1.0)
    else:
        out = 0.5 * ya * ya
    return _wrap(out, y)


# ---------------------------------------------------------------------------
# Safeguarded Newton for increasing scalar functions, vectorized
# ---------------------------------------------------------------------------

def _increasing_root(g, gp, param, reg: RegParams, what: str):
    """Solve ``g(x, param) = 0`` elementwise, ``g`` increasing in ``x``.

    Newton steps are accepted only inside the current sign-change bracket;
    otherwise the bracket is bisected.  The initial bracket
    ``[min(param,0)-1, max(param,0)+1]`` is widened geometrically until it
    encloses the root, which exists because ``g`` is monotone and onto.
    """
    pa = np.atleast_1d(np.asarray(param, dtype=float)).ravel()
    lo = np.minimum(pa, 0.0) - 1.0
    hi = np.maximum(pa, 0.0) + 1.0
    eps = np.finfo(float).eps

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(2000):
            bad = ~(g(lo, pa) <= 0)
            if not bad.any():
                break
            width = hi[bad] - lo[bad]
            hi[bad] = lo[bad]
            lo[bad] -= 2.0 * width
        else:
            raise NoConvergence(f"{what}: could not bracket root from below")
        for _ in range(2000):
            bad = ~(g(hi, pa) >= 0)
            if not bad.any():
                break
            width = hi[bad] - lo[bad]
            lo[bad] = hi[bad]
            hi[bad] += 2.0 * width
        else:
            raise NoConvergence(f"{what}: could not bracket root from above")

        x = 0.5 * (lo + hi)
        # Previous step length per point: a Newton step that does not at
        # least halve it is replaced by bisection (slow far-field Newton on
        # exponentials would otherwise crawl one unit per iteration).
        dx_old = hi - lo
        active = np.ones(pa.size, dtype=bool)
        for _ in range(reg.newton_max_iter):
            idx = np.flatnonzero(active)
            xi, pi = x[idx], pa[idx]
            gi = g(xi, pi)
            neg = gi < 0
            lo[idx[neg]] = xi[neg]
            hi[idx[~neg]] = xi[~neg]
            done = (np.abs(gi) <= reg.newton_tol) | (
                hi[idx] - lo[idx] <= 4.0 * eps * np.maximum(1.0, np.abs(xi))
            )
            active[idx[done]] = False
            if not active.any():
                break
            keep = ~done
            idx, xi, pi, gi = idx[keep], xi[keep], pi[keep], gi[keep]
            xn = xi - gi / gp(xi, pi)
            ok = np.isfinite(xn) & (xn > lo[idx]) & (xn < hi[idx]) & (np.abs(xn - xi) <= 0.5 * dx_old[idx])
            xb = 0.5 * (lo[idx] + hi[idx])
            xnew = np.where(ok, xn, xb)
            dx_old[idx] = np.abs(xnew - xi)
            x[idx] = xnew
        else:
            raise NoConvergence(
                f"{what}: {int(active.sum())} point(s) unresolved after "
                f"{reg.newton_max_iter} iterations"
            )
    return x


# ---------------------------------------------------------------------------
# Resolvent, Yosida approximation, regularized ell, Moreau envelope
# ---------------------------------------------------------------------------

def resolvent(law: ThermalLaw, reg: RegParams, w):
    """Root ``rho`` of ``rho + mu*gamma(rho) = w``."""
    mu = reg.mu
    if law.kind == LINEAR:
        out = np.asarray(w, dtype=float) / (1.0 + mu)
        return _wrap(out, w)
    out = _increasing_root(
        lambda r, w_: r + mu * gamma_apply(law, r) - w_,
        lambda r, w_: 1.0 + mu * gamma_prime(law, r),
        w,
        reg,
        "resolvent",
    )
    return _wrap(out.reshape(np.shape(w)), w)


def yosida_apply(law: ThermalLaw, reg: RegParams, w):
    """Yosida approximation ``gamma_mu(w) = (w - rho_mu(w)) / mu``.

    Evaluated as ``gamma(rho_mu(w))``, which is the same number by the
    resolvent equation but free of the cancellation in ``w - rho``.
    """
    rho = resolvent(law, reg, w)
    if law.kind == LINEAR:
        return _wrap(np.asarray(w, dtype=float) / (1.0 + reg.mu), w)
    return gamma_apply(law, rho)


def _ell_reg_solve(law: ThermalLaw, reg: RegParams, u):
    """Return ``(y, r)`` with ``y = L_mu(u)`` and ``r = rho_mu(y)``.

    Eliminating the inner resolvent gives the single scalar equation
    ``gamma(y(1+mu^2) - mu u) + mu y = u`` in ``y``, and then
    ``r = y(1+mu^2) - mu u``.
    """
    mu = reg.mu
    ua = np.atleast_1d(np.asarray(u, dtype=float))
    c = 1.0 + mu * mu
    if law.kind == LINEAR:
        y = ua * (1.0 + mu) / (mu * mu + mu + 1.0)
    else:
        y = _increasing_root(
            lambda y_, u_: gamma_apply(law, c * y_ - mu * u_) + mu * y_ - u_,
            lambda y_, u_: c * gamma_prime(law, c * y_ - mu * u_) + mu,
            ua,
            reg,
            "ell_reg",
        )
    r = c * y - mu * ua
    return y, r


def ell_reg_apply(law: ThermalLaw, reg: RegParams, u):
    """``L_mu(u)``: the root ``y`` of ``mu*y + gamma_mu(y) = u``."""
    y, _ = _ell_reg_solve(law, reg, u)
    return _wrap(y.reshape(np.shape(u)), u)


def ell_reg_inverse(law: ThermalLaw, reg: RegParams, w):
    """``L_mu^{-1}(w) = mu*w + gamma_mu(w)`` (explicit, no root finding)."""
    wa = np.asarray(w, dtype=float)
    return _wrap(reg.mu * wa + np.asarray(yosida_apply(law, reg, wa)), w)


def _yosida_prime_from_resolvent(law, reg, r):
    gp = np.asarray(gamma_prime(law, r), dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.where(np.isinf(gp), 0.0, 1.0 / gp)
    # gamma'(r) / (1 + mu gamma'(r)) written to survive gamma' in {0, inf}.
    return np.where(gp == 0.0, 0.0, 1.0 / (inv + reg.mu))


def ell_reg_derivative(law: ThermalLaw, reg: RegParams, u):
    """``dL_mu/du = 1 / (mu + gamma_mu'(L_mu(u)))``, a value in ``(0, 1/mu]``."""
    _, r = _ell_reg_solve(law, reg, u)
    out = 1.0 / (reg.mu + _yosida_prime_from_resolvent(law, reg, r))
    return _wrap(out.reshape(np.shape(u)), u)


def ell_reg_with_derivative(law: ThermalLaw, reg: RegParams, u):
    """Value and derivative of ``L_mu`` from a single root solve (arrays)."""
    y, r = _ell_reg_solve(law, reg, u)
    d = 1.0 / (reg.mu + _yosida_prime_from_resolvent(law, reg, r))
    return y.reshape(np.shape(u)), d.reshape(np.shape(u))


def positivity_slack(law: ThermalLaw, reg: RegParams, u):
    """``gamma(rho_mu(L_mu(u)))``, which equals ``u - mu*L_mu(u)``.

    Computed from the resolvent so it stays accurate where the
    difference ``u - mu*L_mu(u)`` would cancel.
    """
    _, r = _ell_reg_solve(law, reg, u)
    return _wrap(np.asarray(gamma_apply(law, r)).reshape(np.shape(u)), u)


def jstar_moreau(law: ThermalLaw, reg: RegParams, w):
    """Moreau envelope of ``j*`` via ``mu/2 gamma_mu(w)^2 + j*(rho_mu(w))``."""
    wa = np.asarray(w, dtype=float)
    if law.kind == LINEAR:
        return _wrap(wa * wa / (2.0 * (1.0 + reg.mu)), w)
    rho = np.asarray(resolvent(law, reg, wa))
    gm = np.asarray(gamma_apply(law, rho))
    out = 0.5 * reg.mu * gm * gm + np.asarray(jstar_apply(law, rho))
    return _wrap(out, w)


def coercivity_constant(law: ThermalLaw, reg: RegParams) -> float:
    """Adjusted constant so that ``mu y^2 + j*_mu(y) >= C1|u| - C2bar``.

    From ``j*_mu(y) >= j*(rho) >= C1|u - mu y| - C2`` and
    ``C1 mu |y| <= mu y^2 + C1^2 mu / 4``.
    """
    c1 = law.coercivity_c1
    return law.coercivity_c2 + 0.25 * c1 * c1 * reg.mu


def coercivity_bound(law: ThermalLaw, reg: RegParams, u):
    """Slack ``mu L^2 + j*_mu(L) - C1|u| + C2bar`` at ``L = L_mu(u)``; never negative."""
    ua = np.asarray(u, dtype=float)
    y = np.asarray(ell_reg_apply(law, reg, ua))
    out = (
        reg.mu * y * y
        + np.asarray(jstar_moreau(law, reg, y))
        - law.coercivity_c1 * np.abs(ua)
        + coercivity_constant(law, reg)
    )
    return _wrap(out, u)
