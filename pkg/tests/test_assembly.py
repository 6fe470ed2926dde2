"""Matrices checked against closed forms, sympy integrals and an independent quadrature."""

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from thermocontact import assembly as asm
from thermocontact.errors import EllipticityViolation
from thermocontact.mesh import GAMMA1, GAMMA2, GAMMAC, build_structured_rect, mark_boundary, rect_rule

LAME, MU_E = 2.0, 0.7
TENSORS = asm.ElasticityTensors.isotropic(LAME, MU_E, 0.3, 0.2)


def marked(n, extents=((0.0, 1.0), (0.0, 1.0)), **sides):
    return mark_boundary(build_structured_rect(n, n, extents), rect_rule(extents, **sides))


def test_scalar_examples():
    m = marked(1)
    M, S, ML = asm.assemble_scalar(m)
    assert M.sum() == pytest.approx(1.0, abs=1e-15)
    assert ML.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(S @ np.ones(4), 0.0, atol=1e-15)
    x = m.vertices[:, 0]
    assert x @ S @ x == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n", [2, 5])
def test_scalar_properties(n):
    m = marked(n, ((0.0, 2.0), (0.0, 1.0)))
    M, S, ML = asm.assemble_scalar(m)
    assert abs(M - M.T).max() == 0 and abs(S - S.T).max() == 0
    assert np.allclose(np.asarray(M.sum(axis=1)).ravel(), ML)
    assert np.linalg.eigvalsh(M.toarray()).min() > 0
    # Exact for P1: int x*y = 1 over [0,2]x[0,1] is not P1-exact, but int x = 2.
    x = m.vertices[:, 0]
    assert np.ones(m.n_vertices) @ M @ x == pytest.approx(2.0, abs=1e-13)


def test_contact_scalar():
    m = marked(4, ((0.0, 2.0), (0.0, 1.0)))
    Mc, Sc, MLc = asm.assemble_contact_scalar(m)
    assert Mc.sum() == pytest.approx(2.0) and MLc.sum() == pytest.approx(2.0)
    s = m.vertices[m.contact_nodes, 0]
    assert s @ Sc @ s == pytest.approx(2.0)  # int_0^2 1 dx
    assert np.allclose(Sc @ np.ones(m.n_contact), 0.0)


def _sympy_strain_energy(lam, mu, ux, uy):
    """int_0^1 int_0^1 (lam (div u)^2 + 2 mu e:e) / 1 -- i.e. u^T A u -- with sympy."""
    x, y = sy.symbols("x y")
    U = [ux(x, y), uy(x, y)]
    e = [[sy.Rational(1, 2) * (sy.diff(U[i], [x, y][j]) + sy.diff(U[j], [x, y][i])) for j in range(2)]
         for i in range(2)]
    dens = lam * (e[0][0] + e[1][1]) ** 2 + 2 * mu * sum(e[i][j] ** 2 for i in range(2) for j in range(2))
    return float(sy.integrate(dens, (x, 0, 1), (y, 0, 1)))


@pytest.mark.parametrize("field", [
    (lambda x, y: x, lambda x, y: 0 * x),           # uniaxial stretch
    (lambda x, y: 0.3 * y, lambda x, y: -0.2 * x + 0.5 * y),
])
def test_elastic_energy_of_linear_fields(field):
    m = marked(3)
    A, B = asm.assemble_elastic(m, TENSORS)
    ux, uy = field
    v = np.column_stack([ux(*m.vertices.T), uy(*m.vertices.T)]).ravel()
    expect = _sympy_strain_energy(LAME, MU_E, *field)
    assert v @ A @ v == pytest.approx(expect, rel=1e-13)
    assert v @ B @ v == pytest.approx(_sympy_strain_energy(0.3, 0.2, *field), rel=1e-13)


def test_uniaxial_stretch_closed_form():
    m = marked(2)
    A, _ = asm.assemble_elastic(m, TENSORS)
    v = np.column_stack([m.vertices[:, 0], 0 * m.vertices[:, 0]]).ravel()
    assert v @ A @ v == pytest.approx(LAME + 2 * MU_E, rel=1e-14)


def test_rigid_motions_in_kernel():
    m = marked(4)
    A, B = asm.assemble_elastic(m, TENSORS)
    x, y = m.vertices.T
    for v in ([1.0, 0.0], [0.0, 1.0]):
        t = np.tile(v, m.n_vertices)
        assert np.abs(A @ t).max() < 1e-13 and np.abs(B @ t).max() < 1e-13
    rot = np.column_stack([-y, x]).ravel()
    assert np.abs(A @ rot).max() < 1e-12


def test_symmetry_and_korn():
    m = marked(4)
    A, B = asm.assemble_elastic(m, TENSORS)
    assert abs(A - A.T).max() == 0.0 and abs(B - B.T).max() == 0.0
    assert asm.korn_constant(A, m) > 0 and asm.korn_constant(B, m) > 0
    assert asm.continuity_constant(A, B, m) > 0
    Ac = asm.eliminate_dirichlet(A, asm.clamped_dofs(m))
    assert np.linalg.eigvalsh(Ac.toarray()).min() > 0


def test_korn_on_larger_mesh_uses_sparse_path():
    m = marked(12)
    A, _ = asm.assemble_elastic(m, TENSORS)
    assert asm.korn_constant(A, m) > 0


def test_tensor_checks():
    assert asm.check_tensor(asm.isotropic_tensor(1.0, 1.0)) == pytest.approx(2.0)  # 2 mu on deviators
    bad = asm.isotropic_tensor(1.0, 1.0)
    bad[0, 0, 0, 1] += 0.5
    with pytest.raises(EllipticityViolation):
        asm.check_tensor(bad)
    with pytest.raises(EllipticityViolation):
        asm.ElasticityTensors.isotropic(1.0, -1.0, 1.0, 1.0).validate()


def test_per_cell_tensor_matches_constant():
    m = marked(3)
    K = np.broadcast_to(TENSORS.K, (m.n_cells, 2, 2, 2, 2)).copy()
    Kv = np.broadcast_to(TENSORS.K_v, (m.n_cells, 2, 2, 2, 2)).copy()
    A1, _ = asm.assemble_elastic(m, TENSORS)
    A2, _ = asm.assemble_elastic(m, asm.ElasticityTensors(K, Kv))
    assert abs(A1 - A2).max() < 1e-14


def test_patch_test_linear_field():
    # Linear field vanishing on Gamma1 (top, y=1): constant strain, energy as sympy.
    m = marked(5)
    A, _ = asm.assemble_elastic(m, TENSORS)
    ux, uy = (lambda x, y: 0.1 * (1 - y), lambda x, y: 0.4 * (1 - y))
    v = np.column_stack([ux(*m.vertices.T), uy(*m.vertices.T)]).ravel()
    assert np.all(v[asm.clamped_dofs(m)] == 0)
    assert v @ A @ v == pytest.approx(_sympy_strain_energy(LAME, MU_E, ux, uy), rel=1e-13)


def test_divergence_example():
    m = marked(1)
    D = asm.assemble_divergence(m)
    v = np.column_stack([m.vertices[:, 0], 0 * m.vertices[:, 0]]).ravel()
    assert np.ones(4) @ D @ v == pytest.approx(1.0, abs=1e-15)


def _quad_q_div_v(m, q, v):
    """Independent edge-midpoint quadrature of int q div v (exact for P1 q, P1 v)."""
    total = 0.0
    for c in m.cells:
        p = m.vertices[c]
        d1, d2 = p[1] - p[0], p[2] - p[0]
        area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
        # div v on the cell from the affine interpolant through the three vertices.
        V = v.reshape(-1, 2)[c]
        G = np.linalg.solve(np.column_stack([p, np.ones(3)]), V)  # rows: d/dx, d/dy, const
        div = G[0, 0] + G[1, 1]
        qm = [(q[c[a]] + q[c[(a + 1) % 3]]) / 2 for a in range(3)]
        total += area * div * np.mean(qm)
    return total


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_divergence_adjointness(seed):
    rng = np.random.default_rng(seed)
    m = marked(3, ((0.0, 1.5), (0.0, 1.0)))
    D = asm.assemble_divergence(m)
    q = rng.normal(size=m.n_vertices)
    v = rng.normal(size=2 * m.n_vertices)
    assert q @ D @ v == pytest.approx(_quad_q_div_v(m, q, v), abs=1e-12)


def test_weighted_contact_matrix():
    m = marked(4, ((0.0, 2.0), (0.0, 1.0)))
    Mc, _, MLc = asm.assemble_contact_scalar(m)
    assert asm.weighted_contact_matrix(m, np.zeros(m.n_contact)).nnz == 0 or \
        abs(asm.weighted_contact_matrix(m, np.zeros(m.n_contact))).max() == 0
    assert abs(asm.weighted_contact_matrix(m, np.ones(m.n_contact)) - Mc).max() < 1e-15
    lump = asm.weighted_contact_matrix(m, np.full(m.n_contact, 2.0), lumped=True)
    assert np.allclose(lump.diagonal(), 2 * MLc)
    # Exact triple-product integral: int_0^2 s * 1 * 1 ds = 2 with weight s.
    s = m.vertices[m.contact_nodes, 0]
    W = asm.weighted_contact_matrix(m, s)
    assert np.ones(m.n_contact) @ W @ np.ones(m.n_contact) == pytest.approx(2.0)
    assert s @ W @ np.ones(m.n_contact) == pytest.approx(8.0 / 3.0)  # int s^2


def test_trace_matrices():
    m = marked(3)
    T = asm.trace_matrix(m)
    th = np.arange(m.n_vertices, dtype=float)
    assert np.array_equal(T @ th, m.contact_nodes.astype(float))
    Tv = asm.vector_trace_matrix(m)
    u = np.arange(2 * m.n_vertices, dtype=float)
    assert np.array_equal((Tv @ u).reshape(-1, 2), u.reshape(-1, 2)[m.contact_nodes])


def test_load_examples():
    m = marked(2, left=GAMMA2, right=GAMMA2)
    assert np.all(asm.assemble_load(m, None, None) == 0)
    F = asm.assemble_load(m, (1.0, 0.0), None)
    assert F @ np.tile([1.0, 0.0], m.n_vertices) == pytest.approx(1.0)
    # Traction on a single unit-length Gamma2 edge (right side only).
    m2 = marked(2, left=GAMMA1, right=GAMMA2, top=GAMMA1)
    F2 = asm.assemble_load(m2, None, (0.0, -1.0))
    assert F2 @ np.tile([0.0, 1.0], m2.n_vertices) == pytest.approx(-1.0)


def test_load_exact_for_linear_data():
    m = marked(3)
    f = lambda x, y, t: np.column_stack([x + 2 * y, t * np.ones_like(x)])
    F = asm.assemble_load(m, f, None, t=3.0)
    ones_x = np.tile([1.0, 0.0], m.n_vertices)
    ones_y = np.tile([0.0, 1.0], m.n_vertices)
    assert F @ ones_x == pytest.approx(1.5, abs=1e-14)  # int x + 2y
    assert F @ ones_y == pytest.approx(3.0, abs=1e-14)


def test_system_bundle(tmp_path):
    m = marked(3)
    sysm = asm.assemble_system(m, TENSORS)
    assert len(sysm.free) + len(sysm.fixed) == 2 * m.n_vertices
    assert sysm.M_gammac_bulk.sum() == pytest.approx(1.0)
    chi = np.linspace(0, 1, m.n_contact)
    assert np.allclose(sysm.exchange_matrix(chi).diagonal(), sysm.M_lump_c * chi)
    path = tmp_path / "A.txt"
    asm.write_triplets(sysm.A_elastic, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ") and len(lines) == 1 + sysm.A_elastic.nnz
    i, j, v = lines[1].split()
    assert float(v) == sysm.A_elastic.tocoo().data[0]
