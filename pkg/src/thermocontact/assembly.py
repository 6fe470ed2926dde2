"""P1 finite-element matrices on the body and on the contact line.

Vector fields use interleaved degrees of freedom: component ``c`` of
vertex ``a`` is dof ``2*a + c``.  All matrices are returned unconstrained;
the clamped part is handled by :func:`free_dofs` / :func:`eliminate_dirichlet`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateCell, EllipticityViolation
from .mesh import DIM, GAMMA1, GAMMA2, GAMMAC, Mesh


# ---------------------------------------------------------------------------
# Elasticity / viscosity tensors
# ---------------------------------------------------------------------------

def isotropic_tensor(lam: float, mu: float) -> np.ndarray:
    """``C_ijkh = lam d_ij d_kh + mu (d_ik d_jh + d_ih d_jk)`` (plane strain)."""
    d = np.eye(DIM)
    return (
        lam * np.einsum("ij,kh->ijkh", d, d)
        + mu * (np.einsum("ik,jh->ijkh", d, d) + np.einsum("ih,jk->ijkh", d, d))
    )


def _sym_basis() -> np.ndarray:
    basis = [np.zeros((DIM, DIM)) for _ in range(DIM * (DIM + 1) // 2)]
    k = 0
    for i in range(DIM):
        basis[k][i, i] = 1.0
        k += 1
    for i in range(DIM):
        for j in range(i + 1, DIM):
            basis[k][i, j] = basis[k][j, i] = np.sqrt(0.5)
            k += 1
    return np.array(basis)


def ellipticity_constant(C: np.ndarray) -> float:
    """Smallest eigenvalue of ``C`` acting on symmetric matrices (min over cells)."""
    C = np.asarray(C, dtype=float)
    cs = C.reshape((-1,) + (DIM,) * 4)
    E = _sym_basis()
    gram = np.einsum("aij,nijkh,bkh->nab", E, cs, E)
    return float(np.min(np.linalg.eigvalsh(gram)))


def check_tensor(C: np.ndarray, name: str = "tensor", tol: float = 1e-12) -> float:
    C = np.asarray(C, dtype=float)
    cs = C.reshape((-1,) + (DIM,) * 4)
    scale = max(1.0, float(np.max(np.abs(cs))))
    if np.max(np.abs(cs - cs.transpose(0, 2, 1, 3, 4))) > tol * scale:
        raise EllipticityViolation(f"{name}: a_ijkh != a_jikh")
    if np.max(np.abs(cs - cs.transpose(0, 3, 4, 1, 2))) > tol * scale:
        raise EllipticityViolation(f"{name}: a_ijkh != a_khij")
    alpha = ellipticity_constant(cs)
    if not alpha > 0:
        raise EllipticityViolation(f"{name}: not elliptic (constant {alpha:.3e})")
    return alpha


@dataclass(frozen=True, eq=False)
class ElasticityTensors:
    """Elastic ``K`` and viscous ``K_v`` coefficients.

    Each is either a single ``(2,2,2,2)`` array or per-cell ``(nc,2,2,2,2)``.
    """

    K: np.ndarray
    K_v: np.ndarray

    @classmethod
    def isotropic(cls, lam: float, mu: float, lam_v: float, mu_v: float) -> "ElasticityTensors":
        return cls(isotropic_tensor(lam, mu), isotropic_tensor(lam_v, mu_v))

    def validate(self) -> tuple:
        return check_tensor(self.K, "K"), check_tensor(self.K_v, "K_v")

    def trace(self) -> float:
        """Mean of ``a_iijj`` over cells, a scalar stiffness scale."""
        cs = np.asarray(self.K).reshape((-1,) + (DIM,) * 4)
        return float(np.mean(np.einsum("niijj->n", cs)))


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------

def p1_gradients(mesh: Mesh):
    """Areas ``(nc,)`` and basis gradients ``(nc, 3, 2)`` of every cell."""
    p = mesh.vertices[mesh.cells]
    area = mesh.cell_areas()
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise DegenerateCell(f"cell {bad} has nonpositive area {area[bad]:.3e}")
    g = np.empty((mesh.n_cells, 3, DIM))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        g[:, a, 0] = p[:, b, 1] - p[:, c, 1]
        g[:, a, 1] = p[:, c, 0] - p[:, b, 0]
    g /= (2.0 * area)[:, None, None]
    return area, g


def _coo(rows, cols, vals, shape):
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return A.tocsr()


def _scalar_pairs(conn):
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1)
    cols = np.tile(conn, (1, k))
    return rows, cols


_MASS_TRI = (np.ones((3, 3)) + np.eye(3)) / 12.0
_MASS_SEG = (np.ones((2, 2)) + np.eye(2)) / 6.0


# ---------------------------------------------------------------------------
# Scalar matrices
# ---------------------------------------------------------------------------

def assemble_scalar(mesh: Mesh):
    """Consistent mass, stiffness and lumped mass of P1 on the body."""
    area, g = p1_gradients(mesh)
    rows, cols = _scalar_pairs(mesh.cells)
    n = mesh.n_vertices
    Me = area[:, None, None] * _MASS_TRI
    Se = area[:, None, None] * np.einsum("nad,nbd->nab", g, g)
    M = _coo(rows, cols, Me, (n, n))
    S = _coo(rows, cols, Se, (n, n))
    ML = np.bincount(mesh.cells.ravel(), np.repeat(area / 3.0, 3), minlength=n)
    return M, S, ML


def _segment_matrices(points, segs, n):
    e = points[segs[:, 1]] - points[segs[:, 0]]
    length = np.hypot(e[:, 0], e[:, 1])
    if np.any(length <= 0):
        raise DegenerateCell("zero-length boundary segment")
    rows, cols = _scalar_pairs(segs)
    Me = length[:, None, None] * _MASS_SEG
    Se = (1.0 / length)[:, None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])
    M = _coo(rows, cols, Me, (n, n))
    S = _coo(rows, cols, Se, (n, n))
    ML = np.bincount(segs.ravel(), np.repeat(length / 2.0, 2), minlength=n)
    return M, S, ML, length


def assemble_contact_scalar(mesh: Mesh):
    """Mass, stiffness and lumped mass of P1 on the contact line (contact numbering)."""
    pts = mesh.vertices[mesh.contact_nodes]
    M, S, ML, _ = _segment_matrices(pts, mesh.contact_cells, mesh.n_contact)
    return M, S, ML


def boundary_mass(mesh: Mesh, marker: str):
    """Consistent 1D mass of the facets carrying ``marker``, in bulk numbering."""
    segs = mesh.facets_with(marker)
    n = mesh.n_vertices
    if len(segs) == 0:
        return sp.csr_matrix((n, n))
    M, _, _, _ = _segment_matrices(mesh.vertices, segs, n)
    return M


def weighted_contact_matrix(mesh: Mesh, weight, lumped: bool = False):
    """Matrix of ``int_{GammaC} kappa_w phi_i phi_j`` for a nodal weight field.

    With ``lumped=True`` the weight is sampled at vertices and the result is
    ``diag(m_i kappa_w_i)`` with ``m`` the lumped contact mass.
    """
    weight = np.asarray(weight, dtype=float)
    nc = mesh.n_contact
    if lumped:
        _, _, ML = assemble_contact_scalar(mesh)
        return sp.diags(ML * weight, format="csr")
    segs = mesh.contact_cells
    length = mesh.contact_cell_lengths()
    wa, wb = weight[segs[:, 0]], weight[segs[:, 1]]
    # Exact integrals of products of three hat functions on a segment.
    Me = np.empty((len(segs), 2, 2))
    Me[:, 0, 0] = length * (3.0 * wa + wb) / 12.0
    Me[:, 1, 1] = length * (wa + 3.0 * wb) / 12.0
    Me[:, 0, 1] = Me[:, 1, 0] = length * (wa + wb) / 12.0
    rows, cols = _scalar_pairs(segs)
    return _coo(rows, cols, Me, (nc, nc))


def trace_matrix(mesh: Mesh):
    """Restriction of bulk nodal scalars to contact nodes, shape ``(nc, nv)``."""
    nc = mesh.n_contact
    return sp.csr_matrix(
        (np.ones(nc), (np.arange(nc), mesh.contact_nodes)), shape=(nc, mesh.n_vertices)
    )


def vector_trace_matrix(mesh: Mesh):
    """Restriction of bulk vector dofs to contact vector dofs, ``(2nc, 2nv)``."""
    return sp.kron(trace_matrix(mesh), sp.identity(DIM), format="csr")


def to_vector(M):
    """Block-diagonal extension of a scalar matrix to interleaved vector dofs."""
    return sp.kron(M, sp.identity(DIM), format="csr")


# ---------------------------------------------------------------------------
# Viscoelastic forms and coupling
# ---------------------------------------------------------------------------

def _tensor_form(mesh: Mesh, C, area, g):
    cs = np.asarray(C, dtype=float)
    if cs.ndim == 4:
        Ke = np.einsum("ijkh,naj,nbh->naibk", cs, g, g)
    else:
        Ke = np.einsum("nijkh,naj,nbh->naibk", cs, g, g)
    Ke = area[:, None, None, None, None] * Ke
    Ke = Ke.reshape(mesh.n_cells, 3 * DIM, 3 * DIM)
    Ke = 0.5 * (Ke + Ke.transpose(0, 2, 1))
    dofs = (DIM * mesh.cells[:, :, None] + np.arange(DIM)).reshape(mesh.n_cells, -1)
    rows, cols = _scalar_pairs(dofs)
    n = DIM * mesh.n_vertices
    return _coo(rows, cols, Ke, (n, n))


def assemble_elastic(mesh: Mesh, tensors: ElasticityTensors):
    """Unconstrained matrices of ``a(u,v)`` and ``b(u,v)``."""
    tensors.validate()
    area, g = p1_gradients(mesh)
    A = _tensor_form(mesh, tensors.K, area, g)
    B = _tensor_form(mesh, tensors.K_v, area, g)
    return A, B


def assemble_divergence(mesh: Mesh):
    """``D[i, 2a+c] = int phi_i d_c phi_a``, so ``q^T D v = int q div v``."""
    area, g = p1_gradients(mesh)
    nc = mesh.n_cells
    vals = (area / 3.0)[:, None, None, None] * np.broadcast_to(
        g[:, None, :, :], (nc, 3, 3, DIM)
    )
    rows = np.broadcast_to(mesh.cells[:, :, None, None], vals.shape)
    cols = DIM * mesh.cells[:, None, :, None] + np.arange(DIM)
    cols = np.broadcast_to(cols, vals.shape)
    return _coo(rows, cols, vals, (mesh.n_vertices, DIM * mesh.n_vertices))


def clamped_dofs(mesh: Mesh) -> np.ndarray:
    nodes = mesh.nodes_on(GAMMA1)
    return (DIM * nodes[:, None] + np.arange(DIM)).ravel()


def free_dofs(mesh: Mesh) -> np.ndarray:
    mask = np.ones(DIM * mesh.n_vertices, dtype=bool)
    mask[clamped_dofs(mesh)] = False
    return np.flatnonzero(mask)


def eliminate_dirichlet(A, fixed) -> sp.csr_matrix:
    """Zero the rows and columns of ``fixed`` dofs and put 1 on their diagonal."""
    n = A.shape[0]
    keep = np.ones(n)
    keep[fixed] = 0.0
    P = sp.diags(keep)
    E = sp.diags(1.0 - keep)
    return (P @ A @ P + E).tocsr()


def korn_constant(A, mesh: Mesh, M_vec=None) -> float:
    """Smallest generalized eigenvalue of ``A`` vs the vector mass on free dofs."""
    free = free_dofs(mesh)
    Af = A[free][:, free]
    if M_vec is None:
        M, _, _ = assemble_scalar(mesh)
        M_vec = to_vector(M)
    Mf = M_vec[free][:, free]
    if Af.shape[0] <= 200:
        import scipy.linalg as sla

        return float(sla.eigh(Af.toarray(), Mf.toarray(), eigvals_only=True)[0])
    vals = spla.eigsh(Af.tocsc(), k=1, M=Mf.tocsc(), sigma=0.0, which="LM")[0]
    return float(vals[0])


def continuity_constant(A, B, mesh: Mesh) -> float:
    """Largest generalized eigenvalue of ``A + B`` against the H1 vector Gram matrix.

    A computable stand-in for the continuity constant of ``a + b``; it is
    reported, never used by the solvers.
    """
    M, S, _ = assemble_scalar(mesh)
    G = to_vector(M + S)
    free = free_dofs(mesh)
    AB = (A + B)[free][:, free].tocsc()
    Gf = G[free][:, free].tocsc()
    return float(spla.eigsh(AB, k=1, M=Gf, which="LA", return_eigenvectors=False)[0])


# ---------------------------------------------------------------------------
# Loads
# ---------------------------------------------------------------------------

def _eval_vector(fn, points, t):
    n = len(points)
    if fn is None:
        return np.zeros((n, DIM))
    val = fn(points[:, 0], points[:, 1], t) if callable(fn) else fn
    val = np.asarray(val, dtype=float)
    if val.ndim == 1:
        return np.tile(val, (n, 1))
    return np.broadcast_to(val, (n, DIM)).copy()


def nodal_vector(fn, points, t) -> np.ndarray:
    """Evaluate ``None``, a constant 2-vector or ``fn(x, y, t) -> (n, 2)`` at points."""
    return _eval_vector(fn, points, t)


def assemble_load(mesh: Mesh, f=None, g=None, t: float = 0.0, M=None, M_g2=None):
    """``<F, v> = int f.v + int_{Gamma2} g.v`` using P1 interpolants of the data.

    Exact for piecewise-linear ``f`` and ``g``.
    """
    if M is None:
        M, _, _ = assemble_scalar(mesh)
    if M_g2 is None:
        M_g2 = boundary_mass(mesh, GAMMA2)
    fv = _eval_vector(f, mesh.vertices, t)
    gv = _eval_vector(g, mesh.vertices, t)
    out = np.zeros(DIM * mesh.n_vertices)
    for c in range(DIM):
        out[c::DIM] = M @ fv[:, c] + M_g2 @ gv[:, c]
    return out


# ---------------------------------------------------------------------------
# Bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SystemMatrices:
    M_bulk: sp.csr_matrix
    S_bulk: sp.csr_matrix
    M_lump_bulk: np.ndarray
    M_c: sp.csr_matrix
    S_c: sp.csr_matrix
    M_lump_c: np.ndarray
    A_elastic: sp.csr_matrix
    B_viscous: sp.csr_matrix
    D_div: sp.csr_matrix
    T_trace: sp.csr_matrix
    M_gamma2: sp.csr_matrix
    M_gammac_bulk: sp.csr_matrix
    free: np.ndarray
    fixed: np.ndarray

    def exchange_matrix(self, weight) -> sp.csr_matrix:
        """Lumped ``int_{GammaC} k phi_i phi_j`` for nodal weights (contact numbering)."""
        return sp.diags(self.M_lump_c * np.asarray(weight, dtype=float), format="csr")

    def constrained(self, A) -> sp.csr_matrix:
        return eliminate_dirichlet(A, self.fixed)


def assemble_system(mesh: Mesh, tensors: ElasticityTensors) -> SystemMatrices:
    M, S, ML = assemble_scalar(mesh)
    Mc, Sc, MLc = assemble_contact_scalar(mesh)
    A, B = assemble_elastic(mesh, tensors)
    return SystemMatrices(
        M_bulk=M,
        S_bulk=S,
        M_lump_bulk=ML,
        M_c=Mc,
        S_c=Sc,
        M_lump_c=MLc,
        A_elastic=A,
        B_viscous=B,
        D_div=assemble_divergence(mesh),
        T_trace=trace_matrix(mesh),
        M_gamma2=boundary_mass(mesh, GAMMA2),
        M_gammac_bulk=boundary_mass(mesh, GAMMAC),
        free=free_dofs(mesh),
        fixed=clamped_dofs(mesh),
    )


def write_triplets(A, path) -> None:
    """Dump a sparse matrix as ``row col value`` lines (debugging aid)."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for i, j, v in zip(C.row, C.col, C.data):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")
