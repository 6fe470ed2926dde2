"""Scenario presets: ``reference``, ``decoupled``, ``peel`` and ``manufactured``."""

from __future__ import annotations

import math

import numpy as np

from .assembly import ElasticityTensors
from .constitutive import MaterialParams, double_well_coeffs, lambda_prime
from .mesh import GAMMA1, GAMMA2, GAMMAC
from .monotone import RegParams, ThermalLaw, ell_reg_apply
from .stepper import Scenario, SolverParams

PRESETS = ("reference", "decoupled", "peel", "manufactured")


def default_material(**kw) -> MaterialParams:
    base = dict(
        tensors=ElasticityTensors.isotropic(1.0, 1.0, 0.1, 0.1),
        k0=0.1,
        k1=1.0,
        lam=(0.0, 0.2, 0.1),
        sigma_coeffs=double_well_coeffs(1.0),
        sigma_window=(-1.0, 2.0),
        theta_eq=1.0,
        kappa_pen=1.0e6,
        thermal_law=ThermalLaw.logarithmic(),
    )
    base.update(kw)
    return MaterialParams(**base)


def reference(n: int = 32, sources: bool = True, **solver_kw) -> Scenario:
    """Heated body resting on cool glue, pressed down by its weight.

    ``n`` is the number of cells per side (``(n+1)^2`` vertices).  With
    ``sources=False`` all loads and heat sources vanish.
    """
    solver = SolverParams(**{"eps": 1e-3, "mu": 1e-2, "dt": 1e-2, "t_end": 1.0, **solver_kw})
    return Scenario(
        name="reference",
        material=default_material(),
        solver=solver,
        nx=n,
        ny=n,
        f=(0.0, -2.0) if sources else None,
        w0=math.log(1.5),
        z0=math.log(0.5),
        u0=None,
        chi0=1.0,
    )


def decoupled(n: int = 32, **solver_kw) -> Scenario:
    """Reference set-up without heat exchange and with constant latent heat."""
    sc = reference(n, **solver_kw)
    return sc.with_(name="decoupled", material=default_material(k0=0.0, k1=0.0, lam=(0.3, 0.0, 0.0)))


def peel(n: int = 32, g0: float = 2.0, **solver_kw) -> Scenario:
    """Strip clamped on the left, glued below, lifted at its right end."""
    solver = SolverParams(**{"eps": 1e-3, "mu": 1e-2, "dt": 1e-2, "t_end": 1.0, **solver_kw})

    def lift(x, y, t):
        out = np.zeros((np.size(x), 2))
        out[np.asarray(x) > 1.0 - 1e-9, 1] = g0 * min(1.0, 2.0 * t)
        return out

    return Scenario(
        name="peel",
        material=default_material(),
        solver=solver,
        nx=n,
        ny=max(2, n // 4),
        extents=((0.0, 1.0), (0.0, 0.25)),
        sides=(GAMMAC, GAMMA2, GAMMA1, GAMMA2),
        g=lift,
        w0=math.log(1.2),
        z0=math.log(0.8),
        chi0=1.0,
    )


# ---------------------------------------------------------------------------
# Manufactured solution (linear thermal law)
# ---------------------------------------------------------------------------

class ManufacturedSolution:
    """Smooth exact fields of the regularized system with the linear law.

    theta   = a(t) (1 + 1/4 cos(pi x) cos(pi y))
    theta_s = a(t) (4/5 + 1/5 cos(pi x))          on y = 0
    chi     = 1/2 + 1/5 cos(pi x)                  (box constraint inactive)
    u       = b(t) (1 - y) (c1 x, c2)              (u.n = -b c2 < 0 on y = 0)

    with ``a(t) = 1 + t, b(t) = beta0 (1 + t)`` (``profile="linear"``; backward
    Euler is then exact in time) or ``a(t) = exp(t), b(t) = beta0 exp(t)``
    (``profile="exp"``).  The sources are obtained by inserting these fields
    in the strong form; they are hand-derived and hard-coded below.
    """

    def __init__(self, material: MaterialParams, eps: float, mu: float,
                 profile: str = "linear", beta0: float = 0.1, c1: float = 0.5, c2: float = 1.0):
        if material.thermal_law.kind != "linear":
            raise ValueError("the manufactured solution needs the linear thermal law")
        if profile not in ("linear", "exp"):
            raise ValueError("profile must be 'linear' or 'exp'")
        self.p = material
        self.eps = eps
        self.mu = mu
        self.profile = profile
        self.beta0, self.c1, self.c2 = beta0, c1, c2
        self.c = float(ell_reg_apply(material.thermal_law, RegParams(mu), 1.0))
        K = np.asarray(material.tensors.K)
        Kv = np.asarray(material.tensors.K_v)
        # Lame constants recovered from the isotropic tensors.
        self.lam_e, self.mu_e = K[0, 0, 1, 1], K[0, 1, 0, 1]
        self.lam_v, self.mu_v = Kv[0, 0, 1, 1], Kv[0, 1, 0, 1]
        if material.lam[2] != 0 or any(material.sigma_coeffs) or material.k1 != 0:
            raise ValueError("manufactured case needs linear lambda, sigma' = 0 and constant k")

    # time profiles -----------------------------------------------------------
    def a(self, t):
        return 1.0 + t if self.profile == "linear" else math.exp(t)

    def a_t(self, t):
        return 1.0 if self.profile == "linear" else math.exp(t)

    def b(self, t):
        return self.beta0 * self.a(t)

    def b_t(self, t):
        return self.beta0 * self.a_t(t)

    # exact fields -------------------------------------------------------------
    def theta(self, x, y, t):
        return self.a(t) * (1.0 + 0.25 * np.cos(np.pi * x) * np.cos(np.pi * y))

    def theta_s(self, x, y, t):
        return self.a(t) * (0.8 + 0.2 * np.cos(np.pi * x))

    def chi(self, x, y, t):
        return 0.5 + 0.2 * np.cos(np.pi * x) + 0.0 * y

    def u(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.b(t) * np.column_stack([self.c1 * x * (1.0 - y), self.c2 * (1.0 - y) + 0.0 * x])

    def w(self, x, y, t):
        return self.c * self.theta(x, y, t)

    def z(self, x, y, t):
        return self.c * self.theta_s(x, y, t)

    # stresses -------------------------------------------------------------------
    def _unit_stress(self, x, y, lam, mu):
        """Stress of the unit-amplitude displacement ``(1-y)(c1 x, c2)``."""
        c1, c2 = self.c1, self.c2
        tr = c1 * (1.0 - y) - c2
        s11 = lam * tr + 2.0 * mu * c1 * (1.0 - y)
        s22 = lam * tr - 2.0 * mu * c2
        s12 = -mu * c1 * x
        return s11, s12, s22

    def total_stress(self, x, y, t):
        """``K e(u) + K_v e(u_t) + theta I`` as ``(s11, s12, s22)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        e = self._unit_stress(x, y, self.lam_e, self.mu_e)
        v = self._unit_stress(x, y, self.lam_v, self.mu_v)
        th = self.theta(x, y, t)
        b, bt = self.b(t), self.b_t(t)
        return (b * e[0] + bt * v[0] + th, b * e[1] + bt * v[1], b * e[2] + bt * v[2] + th)

    # sources ----------------------------------------------------------------------
    def h(self, x, y, t):
        """Bulk heat source."""
        a, at = self.a(t), self.a_t(t)
        cc = np.cos(np.pi * x) * np.cos(np.pi * y)
        th_t = at * (1.0 + 0.25 * cc)
        lap_th = -0.5 * np.pi**2 * a * cc
        lap_th_t = -0.5 * np.pi**2 * at * cc
        div_ut = self.b_t(t) * (self.c1 * (1.0 - y) - self.c2)
        return (self.eps + self.c) * th_t - self.eps * lap_th_t - lap_th - div_ut

    def h_c(self, x, y, t):
        """Extra heat flux on the contact line (the normal derivative of theta vanishes)."""
        return self.p.k0 * (self.theta(x, y, t) - self.theta_s(x, y, t))

    def h_s(self, x, y, t):
        """Surface heat source (lambda(chi) is constant in time)."""
        a, at = self.a(t), self.a_t(t)
        cx = np.cos(np.pi * x)
        ths_t = at * (0.8 + 0.2 * cx)
        lap = -0.2 * np.pi**2 * a * cx
        lap_t = -0.2 * np.pi**2 * at * cx
        exch = self.p.k0 * (self.theta(x, y, t) - self.theta_s(x, y, t))
        return (self.eps + self.c) * ths_t - self.eps * lap_t - lap - exch

    def f(self, x, y, t):
        """Body force ``-div(stress)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a = self.a(t)
        fy = (self.b(t) * (self.lam_e + self.mu_e) + self.b_t(t) * (self.lam_v + self.mu_v)) * self.c1
        gx = -0.25 * np.pi * a * np.sin(np.pi * x) * np.cos(np.pi * y)
        gy = -0.25 * np.pi * a * np.cos(np.pi * x) * np.sin(np.pi * y)
        return np.column_stack([-gx, fy - gy])

    def g(self, x, y, t):
        """Traction ``stress . n`` on the lateral sides ``x = 0`` and ``x = 1``."""
        x = np.asarray(x, dtype=float)
        s11, s12, _ = self.total_stress(x, y, t)
        n1 = np.where(x < 0.5, -1.0, 1.0)
        return np.column_stack([s11 * n1, s12 * n1])

    def g_c(self, x, y, t):
        """Load on the contact line: ``stress . n + chi u`` with ``n = (0, -1)``."""
        s11, s12, s22 = self.total_stress(x, y, t)
        u = self.u(x, y, t)
        chi = self.chi(x, y, t)
        return np.column_stack([-s12 + chi * u[:, 0], -s22 + chi * u[:, 1]])

    def s_chi(self, x, y, t):
        """Source of the adhesion equation (chi is stationary, sigma' = 0)."""
        chi = self.chi(x, y, t)
        lap = -0.2 * np.pi**2 * np.cos(np.pi * x)
        u = self.u(x, y, t)
        lp = lambda_prime(self.p, chi)
        return -lap - lp * self.p.theta_eq + lp * self.theta_s(x, y, t) + 0.5 * np.einsum("ij,ij->i", u, u)


def manufactured_material(**kw) -> MaterialParams:
    base = dict(
        tensors=ElasticityTensors.isotropic(1.0, 1.0, 0.1, 0.1),
        k0=0.5,
        k1=0.0,
        lam=(0.0, 0.3, 0.0),
        sigma_coeffs=(0.0, 0.0, 0.0, 0.0),
        theta_eq=1.0,
        kappa_pen=1.0e6,
        thermal_law=ThermalLaw.linear(),
    )
    base.update(kw)
    return MaterialParams(**base)


def manufactured_case(n: int = 8, profile: str = "linear", **solver_kw) -> Scenario:
    solver = SolverParams(**{"eps": 1e-2, "mu": 1e-2, "dt": 0.1, "t_end": 0.5, **solver_kw})
    mat = manufactured_material()
    ex = ManufacturedSolution(mat, solver.eps, solver.mu, profile)
    return Scenario(
        name="manufactured",
        material=mat,
        solver=solver,
        nx=n,
        ny=n,
        h=ex.h,
        h_c=ex.h_c,
        h_s=ex.h_s,
        f=ex.f,
        g=ex.g,
        g_c=ex.g_c,
        s_chi=ex.s_chi,
        w0=lambda x, y, t: ex.w(x, y, 0.0),
        z0=lambda x, y, t: ex.z(x, y, 0.0),
        u0=lambda x, y, t: ex.u(x, y, 0.0),
        chi0=lambda x, y, t: ex.chi(x, y, 0.0),
        mollify_initial=False,
        exact=ex,
    )


def preset(name: str, **kw) -> Scenario:
    builders = {"reference": reference, "decoupled": decoupled, "peel": peel, "manufactured": manufactured_case}
    if name not in builders:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return builders[name](**kw)
