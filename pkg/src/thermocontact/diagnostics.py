"""Energy, dissipation and constraint diagnostics.

The discrete Lyapunov functional is

    L = eps/2 |theta|^2_{M+S} + sum_i m_i G(w_i)
      + eps/2 |theta_s|^2_{Mc+Sc} + sum_j m_j G(z_j)
      + 1/2 u.A u + 1/2 chi.Sc chi + sum_j m_j (chi_j |u_j|^2 / 2 + sigma_eff(chi_j))
      + sum_j m_j kappa/2 [u_j.n]_+^2

with ``G(w) = mu w^2 / 2 + j*_mu(w)`` (so that ``G'(w) = L_mu^{-1}(w) = theta``)
and ``sigma_eff = sigma - theta_eq lambda``.  Testing the discrete equations
of one step with ``(dt theta, dt theta_s, u - u_old, chi - chi_old)`` gives

    L_new - L_old + dt * (dissipation + exchange) + R_num - R_sigma = W_src

where ``R_num >= 0`` collects the numerical dissipation of backward Euler
and of the convex splittings, ``R_sigma`` is the Taylor remainder of the
explicit ``sigma_eff'`` (bounded by ``L_sigma/2 |chi - chi_old|^2``) and
``W_src`` is the work of the sources.  :func:`lyapunov_balance` returns the
defect of this identity, which only reflects solver tolerances.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import monotone as mc
from .constitutive import (
    box_violation,
    lambda_of,
    max_penetration,
    normal_displacement,
    penalty_energy,
    sigma_eff_of,
    sigma_of,
    sigma_prime_eff,
)

SCHEMA_VERSION = 1


@dataclass
class EnergyReport:
    step: int
    time: float
    fp_iters: int
    psi_omega: float
    psi_gammac: float
    psi_feasible: bool
    diss_volume_rate: float
    diss_surface_rate: float
    exchange_dissipation: float
    lyapunov: float
    lyapunov_residual: float
    numerical_dissipation: float
    sigma_remainder: float
    source_work: float
    l1_theta: float
    l1_theta_s: float
    max_penetration: float
    box_violation: float
    positivity_slack: float
    positivity_slack_s: float
    coercivity_slack: float
    moreau_budget: float

    def row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]

    def as_dict(self) -> dict:
        return asdict(self)


REPORT_COLUMNS = [f.name for f in fields(EnergyReport)]


def _G(sim, w):
    """``mu/2 w^2 + j*_mu(w)``, whose derivative is ``L_mu^{-1}``."""
    w = np.asarray(w, dtype=float)
    return 0.5 * sim.reg.mu * w * w + np.asarray(mc.jstar_moreau(sim.law, sim.reg, w))


def _contact_sq(sim, u):
    uc = sim.contact_u(u)
    return np.einsum("ij,ij->i", uc, uc)


def free_energies(sim, state):
    """``(psi_omega, psi_gammac, feasible)``.

    ``-int j(theta)`` is used where ``theta`` lies in the domain of ``j`` at
    every node; otherwise the conjugate form ``-(theta w - j*(w))`` is used
    and ``feasible`` is False.
    """
    mats = sim.mats
    p = sim.params
    law = sim.law
    u = state.u.ravel()
    feasible = True

    def thermal(theta, w, m):
        nonlocal feasible
        jt = np.asarray(mc.j_apply(law, theta), dtype=float)
        if np.all(np.isfinite(jt)):
            return float(np.dot(m, jt))
        feasible = False
        return float(np.dot(m, theta * w - np.asarray(mc.jstar_apply(law, w))))

    psi_o = float(state.theta @ (mats.D_div @ u) + 0.5 * u @ (mats.A_elastic @ u))
    psi_o -= thermal(state.theta, state.w, mats.M_lump_bulk)
    m = mats.M_lump_c
    chi = state.chi
    psi_c = float(
        np.dot(m, lambda_of(p, chi) * (state.theta_s - p.theta_eq) + sigma_of(p, chi) + 0.5 * chi * _contact_sq(sim, state.u))
        + 0.5 * chi @ (mats.S_c @ chi)
    )
    psi_c -= thermal(state.theta_s, state.z, m)
    return psi_o, psi_c, feasible


def dissipations(sim, old, new, dt=None):
    """``(diss_volume_rate, diss_surface_rate, exchange_dissipation)``."""
    dt = sim.solver.dt if dt is None else dt
    mats = sim.mats
    du = (new.u - old.u).ravel() / dt
    dchi = (new.chi - old.chi) / dt
    vol = float(new.theta @ (mats.S_bulk @ new.theta) + du @ (mats.B_viscous @ du))
    surf = float(new.theta_s @ (mats.S_c @ new.theta_s) + np.dot(mats.M_lump_c, dchi * dchi))
    return vol, surf, exchange(sim, new)


def exchange(sim, state) -> float:
    jump = sim.T @ state.theta - state.theta_s
    return float(jump @ (sim.exchange_matrix(state.chi) @ jump))


def lyapunov(sim, state) -> float:
    mats = sim.mats
    p = sim.params
    eps = sim.solver.eps
    u = state.u.ravel()
    m = mats.M_lump_c
    val = np.dot(mats.M_lump_bulk, _G(sim, state.w)) + np.dot(m, _G(sim, state.z))
    if eps > 0:
        val += 0.5 * eps * (state.theta @ (sim.MS @ state.theta) + state.theta_s @ (sim.MSc @ state.theta_s))
    val += 0.5 * u @ (mats.A_elastic @ u) + 0.5 * state.chi @ (mats.S_c @ state.chi)
    val += np.dot(m, 0.5 * state.chi * _contact_sq(sim, state.u) + sigma_eff_of(p, state.chi))
    val += penalty_energy(sim.contact_u(state.u), sim.normals, p.kappa_pen, m)
    return float(val)


def lyapunov_balance(sim, old, new, detail: bool = False):
    """Defect of the discrete energy identity for the step ``old -> new``."""
    dt = new.time - old.time
    mats = sim.mats
    p = sim.params
    eps = sim.solver.eps
    m, mb = mats.M_lump_c, mats.M_lump_bulk
    du = (new.u - old.u).ravel()
    dchi = new.chi - old.chi

    dL = lyapunov(sim, new) - lyapunov(sim, old)
    vol, surf, exch = dissipations(sim, old, new, dt)
    diss = dt * (vol + surf + exch)

    # Nonnegative numerical remainders.
    num = 0.0
    if eps > 0:
        dth = new.theta - old.theta
        dths = new.theta_s - old.theta_s
        num += 0.5 * eps * (dth @ (sim.MS @ dth) + dths @ (sim.MSc @ dths))
    rw = new.theta * (new.w - old.w) - (_G(sim, new.w) - _G(sim, old.w))
    rz = new.theta_s * (new.z - old.z) - (_G(sim, new.z) - _G(sim, old.z))
    num += np.dot(mb, rw) + np.dot(m, rz)
    num += 0.5 * du @ (mats.A_elastic @ du) + 0.5 * dchi @ (mats.S_c @ dchi)
    duc = sim.contact_u(new.u) - sim.contact_u(old.u)
    num += 0.5 * np.dot(m, old.chi * np.einsum("ij,ij->i", duc, duc))
    g_new = normal_displacement(sim.contact_u(new.u), sim.normals)
    g_old = normal_displacement(sim.contact_u(old.u), sim.normals)
    kap = p.kappa_pen
    pos_new, pos_old = np.maximum(g_new, 0.0), np.maximum(g_old, 0.0)
    num += np.dot(m, kap * pos_new * (g_new - g_old) - 0.5 * kap * (pos_new**2 - pos_old**2))
    num += np.dot(m, new.xi * dchi)

    r_sigma = float(np.dot(m, sigma_eff_of(p, new.chi) - sigma_eff_of(p, old.chi) - sigma_prime_eff(p, old.chi) * dchi))

    src = sim.sources(new.time)
    work = dt * (new.theta @ src["H"] + new.theta_s @ src["Hs"]) + src["F"] @ du + np.dot(m, src["s_chi"] * dchi)

    residual = float(dL + diss + num - r_sigma - work)
    if detail:
        return {
            "residual": residual,
            "delta_lyapunov": float(dL),
            "dissipation": float(diss),
            "numerical": float(num),
            "sigma_remainder": r_sigma,
            "source_work": float(work),
        }
    return residual


def monitor(sim, state) -> dict:
    mats = sim.mats
    law, reg = sim.law, sim.reg
    slack = state.theta - reg.mu * state.w
    slack_s = state.theta_s - reg.mu * state.z
    coer = np.concatenate([
        np.atleast_1d(mc.coercivity_bound(law, reg, state.theta)),
        np.atleast_1d(mc.coercivity_bound(law, reg, state.theta_s)),
    ])
    return {
        "box_violation": box_violation(state.chi),
        "max_penetration": max_penetration(sim.contact_u(state.u), sim.normals),
        "positivity_slack": float(slack.min()),
        "positivity_slack_s": float(slack_s.min()) if slack_s.size else np.inf,
        "coercivity_slack": float(coer.min()),
        "l1_theta": float(np.dot(mats.M_lump_bulk, np.abs(state.theta))),
        "l1_theta_s": float(np.dot(mats.M_lump_c, np.abs(state.theta_s))),
    }


def moreau_budget(sim, state) -> float:
    mats = sim.mats
    return float(
        np.dot(mats.M_lump_bulk, mc.jstar_moreau(sim.law, sim.reg, state.w))
        + np.dot(mats.M_lump_c, mc.jstar_moreau(sim.law, sim.reg, state.z))
    )


def report(sim, old, new) -> EnergyReport:
    """Report for ``new``; ``old=None`` marks the initial state (no rates)."""
    psi_o, psi_c, feasible = free_energies(sim, new)
    mon = monitor(sim, new)
    if old is None:
        vol = surf = 0.0
        exch = exchange(sim, new)
        bal = {"residual": 0.0, "numerical": 0.0, "sigma_remainder": 0.0, "source_work": 0.0}
    else:
        vol, surf, exch = dissipations(sim, old, new)
        bal = lyapunov_balance(sim, old, new, detail=True)
    return EnergyReport(
        step=new.step,
        time=new.time,
        fp_iters=new.fp_iters,
        psi_omega=psi_o,
        psi_gammac=psi_c,
        psi_feasible=feasible,
        diss_volume_rate=vol,
        diss_surface_rate=surf,
        exchange_dissipation=exch,
        lyapunov=lyapunov(sim, new),
        lyapunov_residual=bal["residual"],
        numerical_dissipation=bal["numerical"],
        sigma_remainder=bal["sigma_remainder"],
        source_work=bal["source_work"],
        moreau_budget=moreau_budget(sim, new),
        **mon,
    )
