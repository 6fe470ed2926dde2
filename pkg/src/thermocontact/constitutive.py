"""Surface constitutive functions and the two constraint operators.

* heat-exchange coefficient ``k(chi) = k0 + k1 clamp(chi, 0, 1)``
* latent-heat function ``lambda(chi) = lam0 + lam1 chi + lam2 chi^2``
* cohesion ``sigma'`` -- a cubic polynomial frozen outside a window, so
  that it is globally Lipschitz
* the box constraint ``chi in [0, 1]`` (projection / primal-dual active set)
* impenetrability ``u.n <= 0`` realized by the penalty ``kappa [u.n]_+``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ElasticityTensors
from .errors import ActiveSetNoConvergence, LinearSolveFailure
from .monotone import ThermalLaw


def double_well_coeffs(c: float = 1.0) -> tuple:
    """Coefficients of ``c x (1-x) (1-2x)``, the derivative of ``c x^2 (1-x)^2 / 2``."""
    return (0.0, c, -3.0 * c, 2.0 * c)


@dataclass(frozen=True, eq=False)
class MaterialParams:
    tensors: ElasticityTensors
    k0: float = 0.1
    k1: float = 1.0
    lam: tuple = (0.0, 0.2, 0.1)
    sigma_coeffs: tuple = field(default_factory=double_well_coeffs)
    sigma_window: tuple = (-1.0, 2.0)
    theta_eq: float = 1.0
    kappa_pen: float = 1.0e6
    thermal_law: ThermalLaw = field(default_factory=ThermalLaw.logarithmic)

    def __post_init__(self):
        if self.k0 < 0 or self.k1 < 0:
            raise ValueError("k0 and k1 must be nonnegative")
        if len(self.lam) != 3:
            raise ValueError("lam must have three coefficients (lam0, lam1, lam2)")
        if len(self.sigma_coeffs) != 4:
            raise ValueError("sigma_coeffs must have four coefficients (cubic)")
        lo, hi = self.sigma_window
        if not lo < hi:
            raise ValueError("sigma_window must satisfy lo < hi")
        if not self.theta_eq > 0:
            raise ValueError("theta_eq must be positive")
        if not self.kappa_pen > 0:
            raise ValueError("kappa_pen must be positive")

    # -- Lipschitz constants ------------------------------------------------

    @property
    def lip_k(self) -> float:
        return float(self.k1)

    @property
    def lip_lambda_prime(self) -> float:
        return 2.0 * abs(self.lam[2])

    @property
    def lip_sigma(self) -> float:
        """Lipschitz constant of the clamped ``sigma'`` (max of ``|sigma''|`` on the window)."""
        d2 = np.polynomial.Polynomial(self.sigma_coeffs).deriv()
        lo, hi = self.sigma_window
        pts = [lo, hi] + [r.real for r in d2.deriv().roots() if abs(r.imag) < 1e-14 and lo < r.real < hi]
        return float(max(abs(d2(p)) for p in pts))

    @property
    def lip_sigma_eff(self) -> float:
        return self.lip_sigma + self.lip_lambda_prime * self.theta_eq


# ---------------------------------------------------------------------------
# Nodal functions
# ---------------------------------------------------------------------------

def k_of_chi(params: MaterialParams, chi):
    return params.k0 + params.k1 * np.clip(chi, 0.0, 1.0)


def lambda_of(params: MaterialParams, chi):
    l0, l1, l2 = params.lam
    return l0 + l1 * chi + l2 * chi * chi


def lambda_prime(params: MaterialParams, chi):
    _, l1, l2 = params.lam
    return l1 + 2.0 * l2 * np.asarray(chi, dtype=float) if np.ndim(chi) else l1 + 2.0 * l2 * chi


def sigma_prime(params: MaterialParams, chi):
    lo, hi = params.sigma_window
    return np.polynomial.polynomial.polyval(np.clip(chi, lo, hi), params.sigma_coeffs)


def sigma_of(params: MaterialParams, chi):
    """Antiderivative of the clamped ``sigma'`` with ``sigma(0) = 0``.

    Outside the window it continues linearly (``sigma'`` frozen at the edge).
    """
    lo, hi = params.sigma_window
    P = np.polynomial.Polynomial(params.sigma_coeffs).integ()
    P = P - P(0.0)
    x = np.asarray(chi, dtype=float)
    xc = np.clip(x, lo, hi)
    out = P(xc) + sigma_prime(params, xc) * (x - xc)
    return out if out.ndim else float(out)


def sigma_prime_eff(params: MaterialParams, chi):
    """``sigma'(clamp chi) - lambda'(chi) theta_eq``."""
    return sigma_prime(params, chi) - lambda_prime(params, chi) * params.theta_eq


def sigma_eff_of(params: MaterialParams, chi):
    """Potential of :func:`sigma_prime_eff`: ``sigma(chi) - theta_eq lambda(chi)``."""
    return sigma_of(params, chi) - params.theta_eq * lambda_of(params, chi)


# ---------------------------------------------------------------------------
# Box constraint
# ---------------------------------------------------------------------------

def prox_box(chi_hat, diag):
    """Nodal projection on ``[0, 1]`` and the multiplier ``xi`` it implies.

    For the diagonal problem ``diag (chi - chi_hat) + diag xi = 0`` with
    ``xi in d I_[0,1](chi)`` this is the exact solution: ``xi >= 0`` where
    ``chi = 1``, ``xi <= 0`` where ``chi = 0`` and ``xi = 0`` elsewhere.
    The returned ``xi`` is per unit mass (it multiplies the lumped mass).
    """
    chi_hat = np.asarray(chi_hat, dtype=float)
    diag = np.broadcast_to(np.asarray(diag, dtype=float), chi_hat.shape)
    if np.any(diag <= 0):
        raise ValueError("prox_box needs positive weights")
    chi = np.clip(chi_hat, 0.0, 1.0)
    xi = chi_hat - chi
    return chi, xi


def box_violation(chi) -> float:
    chi = np.asarray(chi, dtype=float)
    if chi.size == 0:
        return 0.0
    return float(max(0.0, -chi.min(), chi.max() - 1.0))


def _restricted_solve(K, rhs, up, lo):
    n = len(rhs)
    chi = np.zeros(n)
    chi[up] = 1.0
    free = ~(up | lo)
    if free.any():
        b = rhs[free] - K[free][:, up] @ chi[up]
        try:
            chi[free] = spla.spsolve(K[free][:, free].tocsc(), b)
        except RuntimeError as exc:  # singular factor
            raise LinearSolveFailure(str(exc)) from exc
        if not np.all(np.isfinite(chi)):
            raise LinearSolveFailure("box VI: non-finite solution")
    return chi, free


def _pgs(K, rhs, chi, tol=1e-14, max_sweeps=100000):
    """Projected Gauss-Seidel for ``min 1/2 x.Kx - rhs.x`` on ``[0,1]^n``."""
    K = sp.csr_matrix(K)
    diag = K.diagonal()
    indptr, indices, data = K.indptr, K.indices, K.data
    chi = chi.copy()
    for _ in range(max_sweeps):
        change = 0.0
        for i in range(len(chi)):
            row = slice(indptr[i], indptr[i + 1])
            r = rhs[i] - data[row] @ chi[indices[row]] + diag[i] * chi[i]
            new = min(1.0, max(0.0, r / diag[i]))
            change = max(change, abs(new - chi[i]))
            chi[i] = new
        if change <= tol:
            break
    return chi


def solve_box_vi(K, rhs, mass, chi0=None, max_iter: int = 200):
    """Solve ``K chi + mass * xi = rhs`` with ``chi in [0,1]``, ``xi in d I_[0,1](chi)``.

    Equivalent to minimizing ``1/2 chi.K chi - rhs.chi`` over the box, for
    symmetric positive definite ``K`` and positive lumped weights ``mass``.
    Active-set iteration: violated bounds become active, active bounds with
    a multiplier of the wrong sign are released; it stops when the KKT
    conditions hold exactly.  Should a set configuration repeat, projected
    Gauss-Seidel supplies the active sets instead.  On exit ``chi`` is
    exactly in the box and ``xi`` vanishes exactly on inactive nodes.
    """
    K = sp.csr_matrix(K)
    rhs = np.asarray(rhs, dtype=float)
    mass = np.asarray(mass, dtype=float)
    n = len(rhs)
    start = np.zeros(n) if chi0 is None else np.clip(np.asarray(chi0, dtype=float), 0.0, 1.0)
    up = start >= 1.0
    lo = start <= 0.0
    seen = set()
    trace = []
    for _ in range(max_iter):
        key = up.tobytes() + lo.tobytes()
        if key in seen:
            guess = _pgs(K, rhs, start)
            up, lo = guess >= 1.0, guess <= 0.0
            chi, free = _restricted_solve(K, rhs, up, lo)
            break
        seen.add(key)
        chi, free = _restricted_solve(K, rhs, up, lo)
        xi = (rhs - K @ chi) / mass
        trace.append(int(up.sum() + lo.sum()))
        new_up = (up & (xi >= 0)) | (free & (chi > 1.0))
        new_lo = (lo & (xi <= 0)) | (free & (chi < 0.0))
        if np.array_equal(new_up, up) and np.array_equal(new_lo, lo):
            break
        up, lo = new_up, new_lo
    else:
        raise ActiveSetNoConvergence("box constraint active set did not settle", trace)
    chi = np.clip(chi, 0.0, 1.0)
    xi = (rhs - K @ chi) / mass
    xi[(chi > 0.0) & (chi < 1.0)] = 0.0
    return chi, xi


# ---------------------------------------------------------------------------
# Impenetrability
# ---------------------------------------------------------------------------

def normal_displacement(u_trace, normals):
    return np.einsum("ij,ij->i", np.asarray(u_trace, dtype=float).reshape(-1, 2), normals)


def contact_reaction(u_trace, chi_trace, normals, kappa: float):
    """Penalty normal force ``kappa [u.n]_+`` and the full reaction ``-chi u - eta n``.

    Returns ``(eta_n, reaction)`` with ``reaction`` of shape ``(nc, 2)``.
    """
    u = np.asarray(u_trace, dtype=float).reshape(-1, 2)
    eta = kappa * np.maximum(0.0, normal_displacement(u, normals))
    reaction = -np.asarray(chi_trace, dtype=float)[:, None] * u - eta[:, None] * normals
    return eta, reaction


def penalty_energy(u_trace, normals, kappa: float, mass):
    """``sum_i m_i kappa/2 [u_i.n_i]_+^2``."""
    g = np.maximum(0.0, normal_displacement(u_trace, normals))
    return float(0.5 * kappa * np.dot(mass, g * g))


def max_penetration(u_trace, normals) -> float:
    g = normal_displacement(u_trace, normals)
    return float(max(0.0, g.max())) if g.size else 0.0
