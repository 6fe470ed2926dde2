"""Semi-implicit time stepping of the regularized thermal adhesive-contact system.

Each step runs a fixed-point loop over three sub-solvers:

1. *mechanical*: displacement ``u`` (viscoelastic momentum balance with the
   penalized impenetrability constraint, semismooth active set) followed by
   the adhesion ``chi`` (implicit gradient flow with the box constraint
   ``0 <= chi <= 1``, primal-dual active set);
2. *bulk*: temperature ``theta`` (Newton on the regularized entropy
   equation, nodal nonlinearity ``L_mu`` with lumped mass);
3. *surface*: temperature ``theta_s`` of the adhesive.

The discretization is backward Euler everywhere, with the choices listed
below so that testing the four discrete equations with
``(theta, theta_s, u - u_old, chi - chi_old)`` and summing reproduces an
exact discrete energy identity (see :mod:`thermocontact.diagnostics`):

* ``L_mu`` terms, latent heat, heat exchange, the ``chi`` equation and all
  contact terms use lumped (vertex) quadrature;
* the ``chi u`` contact term in the momentum balance uses ``chi_old`` while
  the ``|u|^2 / 2`` source in the ``chi`` equation uses ``u_new``;
* ``lambda'`` is evaluated at the midpoint ``(chi + chi_old) / 2``;
* ``sigma'`` (with the ``-lambda' theta_eq`` shift) is explicit in ``chi_old``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import monotone as mc
from .assembly import SystemMatrices, assemble_load, assemble_system, to_vector, vector_trace_matrix
from .constitutive import (
    MaterialParams,
    k_of_chi,
    lambda_of,
    lambda_prime,
    normal_displacement,
    sigma_prime_eff,
    solve_box_vi,
)
from .errors import (
    ActiveSetNoConvergence,
    FixedPointNoConvergence,
    LinearSolveFailure,
    NewtonNoConvergence,
    NoConvergence,
)
from .mesh import GAMMA1, GAMMA2, GAMMAC, Mesh, build_structured_rect, mark_boundary, rect_rule

MECHANICAL = "mechanical"
BULK = "bulk"
SURFACE = "surface"
ALL_SUBSYSTEMS = frozenset({MECHANICAL, BULK, SURFACE})


# ---------------------------------------------------------------------------
# Parameters, state, scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverParams:
    eps: float = 1e-3
    mu: float = 1e-2
    dt: float = 1e-2
    t_end: float = 1.0
    fp_tol: float = 1e-10
    fp_atol: float = 1e-13
    fp_max_iter: int = 50
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    active_set_max_iter: int = 50
    linear_tol: float = 1e-8

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("eps must be nonnegative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.t_end > 0 and self.dt > self.t_end * (1 + 1e-12):
            raise ValueError("dt must not exceed t_end")
        if not (self.fp_tol > 0 and self.fp_atol >= 0):
            raise ValueError("fp_tol must be positive and fp_atol nonnegative")
        for name in ("fp_max_iter", "newton_max_iter", "active_set_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (self.newton_tol > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be positive")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def reg(self) -> mc.RegParams:
        return mc.RegParams(self.mu, self.newton_tol, max(self.newton_max_iter, 100))


@dataclass(frozen=True, eq=False)
class State:
    theta: np.ndarray  # (nv,)
    w: np.ndarray  # (nv,)
    theta_s: np.ndarray  # (nc,)
    z: np.ndarray  # (nc,)
    u: np.ndarray  # (nv, 2)
    chi: np.ndarray  # (nc,)
    xi: np.ndarray  # (nc,)
    eta_n: np.ndarray  # (nc,)
    time: float = 0.0
    step: int = 0
    fp_iters: int = 0

    def fields(self) -> dict:
        return {
            "theta": self.theta,
            "w": self.w,
            "theta_s": self.theta_s,
            "z": self.z,
            "u": self.u,
            "chi": self.chi,
            "xi": self.xi,
            "eta_n": self.eta_n,
        }


def evaluate_scalar(spec, x, y, t: float = 0.0) -> np.ndarray:
    """Evaluate ``None`` / a constant / a callable ``f(x, y, t)`` at points."""
    x = np.asarray(x, dtype=float)
    if spec is None:
        return np.zeros_like(x)
    if callable(spec):
        return np.broadcast_to(np.asarray(spec(x, np.asarray(y, dtype=float), t), dtype=float), x.shape).copy()
    return np.full_like(x, float(spec))


def evaluate_vector(spec, x, y, t: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec is None:
        return np.zeros((x.size, 2))
    val = spec(x, np.asarray(y, dtype=float), t) if callable(spec) else spec
    val = np.asarray(val, dtype=float)
    if val.ndim == 1:
        return np.tile(val, (x.size, 1))
    return np.broadcast_to(val, (x.size, 2)).copy()


@dataclass(frozen=True, eq=False)
class Scenario:
    """Geometry, material, solver settings, data and initial conditions.

    Every data field is ``None`` (zero), a constant, or a callable
    ``f(x, y, t)`` evaluated at vertices; vector fields return ``(n, 2)``.

    ``h`` is the bulk heat source, ``h_c`` an extra heat flux through the
    contact boundary, ``h_s`` the surface heat source, ``f`` the body force,
    ``g`` the traction on the free boundary, ``g_c`` an extra load on the
    contact boundary and ``s_chi`` an extra source in the adhesion equation.
    """

    name: str
    material: MaterialParams
    solver: SolverParams
    nx: int = 32
    ny: int = 32
    extents: tuple = ((0.0, 1.0), (0.0, 1.0))
    sides: tuple = (GAMMAC, GAMMA1, GAMMA2, GAMMA2)  # bottom, top, left, right
    h: object = None
    h_c: object = None
    h_s: object = None
    f: object = None
    g: object = None
    g_c: object = None
    s_chi: object = None
    w0: object = 0.0
    z0: object = 0.0
    u0: object = None
    chi0: object = 1.0
    mollify_initial: bool = True
    exact: object = None

    def build_mesh(self) -> Mesh:
        bottom, top, left, right = self.sides
        mesh = build_structured_rect(self.nx, self.ny, self.extents)
        return mark_boundary(mesh, rect_rule(self.extents, bottom, top, left, right))

    def with_solver(self, **kw) -> "Scenario":
        return replace(self, solver=replace(self.solver, **kw))

    def with_material(self, **kw) -> "Scenario":
        return replace(self, material=replace(self.material, **kw))

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# Per-step workspace
# ---------------------------------------------------------------------------

@dataclass
class _StepContext:
    old: State
    t: float
    H: np.ndarray
    Hs: np.ndarray
    F: np.ndarray
    s_chi: np.ndarray
    K_base: sp.csr_matrix
    factors: dict = field(default_factory=dict)
    active: Optional[np.ndarray] = None


def _check_solution(K, x, b, tol, what):
    """Reject non-finite solutions and solutions with a large backward error."""
    if not np.all(np.isfinite(x)):
        raise LinearSolveFailure(f"{what}: non-finite solution")
    r = np.linalg.norm(K @ x - b)
    scale = np.linalg.norm(abs(K) @ np.abs(x)) + np.linalg.norm(b)
    if r > tol * scale:
        raise LinearSolveFailure(f"{what}: linear solve residual {r:.3e} (scale {scale:.3e})")


class Simulator:
    """Discretized problem for one scenario: matrices, data and the step loop."""

    def __init__(self, scenario: Scenario, mesh: Mesh | None = None):
        self.scenario = scenario
        self.params: MaterialParams = scenario.material
        self.solver: SolverParams = scenario.solver
        self.law = self.params.thermal_law
        self.reg = self.solver.reg
        self.mesh = mesh if mesh is not None else scenario.build_mesh()
        self.mats: SystemMatrices = assemble_system(self.mesh, self.params.tensors)
        m = self.mesh
        self.nv = m.n_vertices
        self.nc = m.n_contact
        self.normals = m.outward_normal
        self.xv, self.yv = m.vertices[:, 0], m.vertices[:, 1]
        pc = m.vertices[m.contact_nodes]
        self.xc, self.yc = pc[:, 0], pc[:, 1]
        self.T = self.mats.T_trace
        self.Tv = vector_trace_matrix(m)
        self.Mc_vec = to_vector(self.mats.M_c)
        self.cdofs = (2 * m.contact_nodes[:, None] + np.arange(2)).ravel()
        self.free = self.mats.free
        mats = self.mats
        self.MS = (mats.M_bulk + mats.S_bulk).tocsr()
        self.MSc = (mats.M_c + mats.S_c).tocsr()
        self.K_chi = (sp.diags(mats.M_lump_c / self.solver.dt) + mats.S_c).tocsr()

    # -- small helpers -------------------------------------------------------

    def exchange_matrix(self, chi) -> sp.csr_matrix:
        """Lumped ``int_{GammaC} k(chi) phi_i phi_j`` -- shared with diagnostics."""
        return self.mats.exchange_matrix(k_of_chi(self.params, chi))

    def contact_u(self, u) -> np.ndarray:
        return np.asarray(u).reshape(-1, 2)[self.mesh.contact_nodes]

    def sources(self, t: float) -> dict:
        sc = self.scenario
        mats = self.mats
        H = mats.M_bulk @ evaluate_scalar(sc.h, self.xv, self.yv, t)
        H = H + self.T.T @ (mats.M_c @ evaluate_scalar(sc.h_c, self.xc, self.yc, t))
        Hs = mats.M_c @ evaluate_scalar(sc.h_s, self.xc, self.yc, t)
        F = assemble_load(self.mesh, sc.f, sc.g, t, M=mats.M_bulk, M_g2=mats.M_gamma2)
        gc = evaluate_vector(sc.g_c, self.xc, self.yc, t).ravel()
        F = F + self.Tv.T @ (self.Mc_vec @ gc)
        F[self.mats.fixed] = 0.0
        s = evaluate_scalar(sc.s_chi, self.xc, self.yc, t)
        return {"H": H, "Hs": Hs, "F": F, "s_chi": s}

    # -- initial data ----------------------------------------------------------

    def build_initial_data(self) -> State:
        sc = self.scenario
        mats = self.mats
        mu = self.solver.mu
        w0 = evaluate_scalar(sc.w0, self.xv, self.yv, 0.0)
        z0 = evaluate_scalar(sc.z0, self.xc, self.yc, 0.0)
        if sc.mollify_initial:
            w0 = self._solve((mats.M_bulk + mu * mats.S_bulk).tocsc(), mats.M_bulk @ w0, "initial w")
            z0 = self._solve((mats.M_c + mu * mats.S_c).tocsc(), mats.M_c @ z0, "initial z")
        theta = np.asarray(mc.ell_reg_inverse(self.law, self.reg, w0), dtype=float)
        theta_s = np.asarray(mc.ell_reg_inverse(self.law, self.reg, z0), dtype=float)
        u = evaluate_vector(sc.u0, self.xv, self.yv, 0.0)
        fixed_nodes = self.mats.fixed[::2] // 2
        u[fixed_nodes] = 0.0
        chi = evaluate_scalar(sc.chi0, self.xc, self.yc, 0.0)
        if np.any(chi < 0) or np.any(chi > 1):
            raise ValueError("initial adhesion chi0 must lie in [0, 1]")
        gap = normal_displacement(self.contact_u(u), self.normals)
        if gap.size and gap.max() > 1e-10:
            raise ValueError("initial displacement violates impenetrability (u0.n > 0 on GammaC)")
        eta = self.params.kappa_pen * np.maximum(0.0, gap)
        return State(theta, w0, theta_s, z0, u, chi, np.zeros(self.nc), eta, 0.0, 0, 0)

    def _solve(self, K, b, what):
        try:
            x = spla.spsolve(K, b)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"{what}: {exc}") from exc
        _check_solution(K, x, b, self.solver.linear_tol, what)
        return x

    # -- T1: displacement and adhesion --------------------------------------------

    def _context(self, old: State) -> _StepContext:
        dt = self.solver.dt
        t = old.time + dt
        src = self.sources(t)
        mats = self.mats
        cmass = np.repeat(mats.M_lump_c * old.chi, 2)
        C = self.Tv.T @ sp.diags(cmass) @ self.Tv
        K = (mats.B_viscous / dt + mats.A_elastic + C).tocsr()
        K = K[self.free][:, self.free].tocsc()
        return _StepContext(old, t, src["H"], src["Hs"], src["F"], src["s_chi"], K)

    def _penalty_matrix(self, active: np.ndarray) -> sp.csr_matrix:
        m = self.mats.M_lump_c * self.params.kappa_pen * active
        n = self.normals
        blocks = m[:, None, None] * np.einsum("ia,ib->iab", n, n)
        rows = np.repeat(self.cdofs.reshape(-1, 2), 2, axis=1)
        cols = np.tile(self.cdofs.reshape(-1, 2), (1, 2))
        P = sp.coo_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * self.nv, 2 * self.nv))
        return P.tocsr()

    def _factor(self, ctx: _StepContext, active: np.ndarray):
        key = active.tobytes()
        if key not in ctx.factors:
            P = self._penalty_matrix(active)[self.free][:, self.free]
            K = (ctx.K_base + P).tocsc()
            try:
                ctx.factors[key] = (spla.splu(K), K)
            except RuntimeError as exc:
                raise LinearSolveFailure(f"momentum matrix: {exc}") from exc
        return ctx.factors[key]

    def solve_mechanical(self, ctx: _StepContext, theta, theta_s, chi_iter):
        """Displacement (penalty active set), then adhesion (box VI).

        Returns ``(u, chi, xi, eta_n)``; the penalty active set is cached on ``ctx``.
        """
        old = ctx.old
        dt = self.solver.dt
        mats = self.mats
        rhs = mats.B_viscous @ old.u.ravel() / dt + ctx.F - mats.D_div.T @ theta
        rhs_f = rhs[self.free]
        active = ctx.active
        if active is None:
            active = normal_displacement(self.contact_u(old.u), self.normals) > 0
        trace = []
        for _ in range(self.solver.active_set_max_iter):
            lu, K = self._factor(ctx, active)
            uf = lu.solve(rhs_f)
            _check_solution(K, uf, rhs_f, self.solver.linear_tol, "momentum")
            u = np.zeros(2 * self.nv)
            u[self.free] = uf
            u = u.reshape(-1, 2)
            gap = normal_displacement(self.contact_u(u), self.normals)
            new = gap > 0
            trace.append(int(new.sum()))
            if np.array_equal(new, active):
                break
            active = new
        else:
            raise ActiveSetNoConvergence("impenetrability active set did not settle", trace)
        ctx.active = active
        eta = self.params.kappa_pen * np.maximum(0.0, gap)

        p = self.params
        m = mats.M_lump_c
        uc = self.contact_u(u)
        chi_mid = 0.5 * (chi_iter + old.chi)
        force = (
            sigma_prime_eff(p, old.chi)
            + lambda_prime(p, chi_mid) * theta_s
            + 0.5 * np.einsum("ij,ij->i", uc, uc)
            - ctx.s_chi
        )
        rhs_chi = m * old.chi / dt - m * force
        chi, xi = solve_box_vi(self.K_chi, rhs_chi, m, chi_iter)
        return u, chi, xi, eta

    # -- T2 / T3: temperatures ---------------------------------------------------------

    def _thermal_newton(self, K_lin, lumped_over_dt, rhs, guess, what):
        """Solve ``K_lin x + lumped_over_dt * L_mu(x) = rhs`` by damped Newton."""
        law, reg = self.law, self.reg
        x = np.array(guess, dtype=float)
        tol = self.solver.newton_tol

        def residual(x):
            w, d = mc.ell_reg_with_derivative(law, reg, x)
            return K_lin @ x + lumped_over_dt * w - rhs, d

        G, d = residual(x)
        trace = [float(np.max(np.abs(G))) if G.size else 0.0]
        for _ in range(self.solver.newton_max_iter):
            J = (K_lin + sp.diags(lumped_over_dt * d)).tocsc()
            try:
                dx = spla.spsolve(J, -G)
            except RuntimeError as exc:
                raise LinearSolveFailure(f"{what} Newton: {exc}") from exc
            _check_solution(J, dx, -G, self.solver.linear_tol, what)
            step = 1.0
            g0 = np.linalg.norm(G)
            for _ls in range(30):
                xn = x + step * dx
                Gn, dn = residual(xn)
                if np.linalg.norm(Gn) <= (1 - 1e-4 * step) * g0 or g0 == 0.0:
                    break
                step *= 0.5
            x, G, d = xn, Gn, dn
            trace.append(float(np.max(np.abs(G))))
            if step * np.max(np.abs(dx)) <= tol * (1.0 + np.max(np.abs(x))):
                break
        else:
            raise NewtonNoConvergence(f"{what}: Newton did not converge (try a smaller dt)", trace)
        w = np.asarray(mc.ell_reg_apply(law, reg, x), dtype=float)
        return x, w

    def solve_bulk_temperature(self, ctx: _StepContext, du, chi, theta_s, guess):
        old = ctx.old
        dt, eps = self.solver.dt, self.solver.eps
        mats = self.mats
        Kc = self.exchange_matrix(chi)
        K_lin = mats.S_bulk + self.T.T @ Kc @ self.T
        rhs = mats.M_lump_bulk * old.w / dt + self.T.T @ (Kc @ theta_s) + ctx.H + mats.D_div @ du.ravel() / dt
        if eps > 0:
            K_lin = K_lin + (eps / dt) * self.MS
            rhs = rhs + (eps / dt) * (self.MS @ old.theta)
        return self._thermal_newton(K_lin.tocsr(), mats.M_lump_bulk / dt, rhs, guess, "bulk temperature")

    def solve_surface_temperature(self, ctx: _StepContext, theta_trace, chi, guess):
        old = ctx.old
        dt, eps = self.solver.dt, self.solver.eps
        mats = self.mats
        p = self.params
        Kc = self.exchange_matrix(chi)
        K_lin = mats.S_c + Kc
        latent = mats.M_lump_c * (lambda_of(p, chi) - lambda_of(p, old.chi)) / dt
        rhs = mats.M_lump_c * old.z / dt + latent + Kc @ theta_trace + ctx.Hs
        if eps > 0:
            K_lin = K_lin + (eps / dt) * self.MSc
            rhs = rhs + (eps / dt) * (self.MSc @ old.theta_s)
        return self._thermal_newton(K_lin.tocsr(), mats.M_lump_c / dt, rhs, guess, "surface temperature")

    # -- the step --------------------------------------------------------------

    def step(self, state: State, subsystems=ALL_SUBSYSTEMS) -> State:
        sol = self.solver
        ctx = self._context(state)
        theta, w = state.theta, state.w
        theta_s, z = state.theta_s, state.z
        u, chi, xi, eta = state.u, state.chi, state.xi, state.eta_n
        trace = []
        for it in range(1, sol.fp_max_iter + 1):
            prev = (theta, theta_s, u, chi)
            if MECHANICAL in subsystems:
                u, chi, xi, eta = self.solve_mechanical(ctx, theta, theta_s, chi)
            if BULK in subsystems:
                theta, w = self.solve_bulk_temperature(ctx, u - state.u, chi, theta_s, theta)
            if SURFACE in subsystems:
                theta_s, z = self.solve_surface_temperature(ctx, self.T @ theta, chi, theta_s)
            ratio = 0.0
            for a, b in zip((theta, theta_s, u, chi), prev):
                if a.size:
                    lim = sol.fp_tol * np.max(np.abs(a)) + sol.fp_atol
                    ratio = max(ratio, float(np.max(np.abs(a - b))) / lim)
            trace.append(ratio)
            if ratio <= 1.0:
                break
        else:
            raise FixedPointNoConvergence(
                f"fixed point did not converge in {sol.fp_max_iter} iterations at t={ctx.t:g}", trace
            )
        return State(theta, w, theta_s, z, u, chi, xi, eta, ctx.t, state.step + 1, it)

    def run(self, subsystems=ALL_SUBSYSTEMS, initial: State | None = None, keep_states: bool = True,
            reports: bool = True, callback: Callable | None = None):
        """Integrate to ``t_end``; returns ``(states, reports)``.

        ``states`` holds every state when ``keep_states`` is set, otherwise
        just the initial and the final one.
        """
        from .diagnostics import report as make_report

        state = initial if initial is not None else self.build_initial_data()
        states = [state]
        reps = [make_report(self, None, state)] if reports else []
        for n in range(self.solver.n_steps):
            try:
                new = self.step(state, subsystems)
            except NoConvergence as exc:
                raise type(exc)(f"step {n + 1}: {exc}", exc.trace) from exc
            except LinearSolveFailure as exc:
                raise LinearSolveFailure(f"step {n + 1}: {exc}") from exc
            if reports:
                reps.append(make_report(self, state, new))
            if callback is not None:
                callback(self, state, new)
            if keep_states:
                states.append(new)
            else:
                states[1:] = [new]
            state = new
        return states, reps


# ---------------------------------------------------------------------------
# Functional façade
# ---------------------------------------------------------------------------

def build_initial_data(scenario: Scenario, mu: float | None = None) -> State:
    if mu is not None and mu != scenario.solver.mu:
        scenario = scenario.with_solver(mu=mu)
    return Simulator(scenario).build_initial_data()


def step(state: State, scenario: Scenario, sim: Simulator | None = None,
         subsystems=ALL_SUBSYSTEMS) -> State:
    sim = sim if sim is not None else Simulator(scenario)
    return sim.step(state, subsystems)


def run(scenario: Scenario, subsystems=ALL_SUBSYSTEMS, **kw):
    return Simulator(scenario).run(subsystems, **kw)
