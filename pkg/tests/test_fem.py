import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from porohom.errors import CompatibilityError, FemError, NonConvergenceError, SolverError
from porohom.fem import (Assembler, DofMap, SparseSystem, assemble_load, assemble_mass,
                         assemble_stiffness, dump_coo, quadrature_rule, solve_mean_constrained,
                         solve_spd)
from porohom.mesh import SimplexMesh, build_box_mesh, build_cell_mesh
from porohom.model import HoleSpec

SQUARE = SimplexMesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                     np.array([[0, 1, 2], [0, 2, 3]]))
TRIANGLE = SimplexMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def test_two_triangle_stiffness_by_hand():
    k = assemble_stiffness(SQUARE).matrix.toarray()
    hand = np.array([[1.0, -0.5, 0.0, -0.5],
                     [-0.5, 1.0, -0.5, 0.0],
                     [0.0, -0.5, 1.0, -0.5],
                     [-0.5, 0.0, -0.5, 1.0]])
    assert np.max(np.abs(k - hand)) <= 1e-14


def test_stiffness_linear_in_a(disk):
    m = build_cell_mesh(disk, 1 / 16)
    k1 = assemble_stiffness(m).matrix
    k2 = assemble_stiffness(m, field=lambda x: 2.0 * np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))).matrix
    assert abs(k2 - 2 * k1).max() == 0.0


def test_periodic_stiffness_kills_constants(disk):
    m = build_cell_mesh(disk, 1 / 16)
    k = assemble_stiffness(m, DofMap.periodic(m))
    assert np.max(np.abs(k @ np.ones(k.dimension))) < 1e-12
    assert k.asymmetry() <= 1e-13


def test_single_triangle_consistent_mass():
    m = assemble_mass(TRIANGLE).matrix.toarray()
    area = 0.5
    hand = np.full((3, 3), area / 12) + np.eye(3) * area / 12
    assert np.max(np.abs(m - hand)) <= 1e-15


def test_mass_partition_of_unity(disk):
    mesh = build_cell_mesh(disk, 1 / 16)
    m = assemble_mass(mesh).matrix
    assert abs(m.sum() - mesh.volumes().sum()) < 1e-13
    assert assemble_mass(mesh, weight=lambda x: np.zeros(x.shape[:-1])).matrix.count_nonzero() == 0


def test_gradient_load_by_hand():
    f = assemble_load(SQUARE, field=lambda x: np.broadcast_to([1.0, 0.0], x.shape), form="gradient")
    assert np.max(np.abs(f - [-0.5, 0.5, 0.5, -0.5])) <= 1e-14


def test_value_load_sums(no_hole):
    mesh = build_cell_mesh(no_hole, 1 / 8)
    assert np.all(assemble_load(mesh) == 0.0)
    one = assemble_load(mesh, field=lambda x: np.ones(x.shape[:-1]))
    assert abs(one.sum() - 1.0) < 1e-14


def test_non_finite_coefficient_names_element():
    def bad(x):
        out = np.ones(x.shape[:-1])
        out[1] = np.nan
        return out
    with pytest.raises(FemError, match="element 1"):
        assemble_mass(SQUARE, weight=bad)


@pytest.mark.parametrize("dim,order", [(2, 1), (2, 2), (2, 4), (3, 1), (3, 2)])
def test_quadrature_exactness(dim, order):
    q = quadrature_rule(dim, order)
    assert np.all(q.weights > 0)
    assert abs(q.weights.sum() - q.reference_volume) < 1e-15
    # int over the reference simplex of x1^a x2^b = a! b! / (a + b + dim)!
    from math import factorial
    x = q.points[:, 1:]
    for a in range(order + 1):
        b = order - a
        exact = factorial(a) * factorial(b) / factorial(a + b + dim)
        assert abs(q.weights @ (x[:, 0] ** a * x[:, 1] ** b) - exact) < 1e-12


def test_spd_identity():
    rhs = np.arange(5.0)
    assert np.array_equal(solve_spd(SparseSystem(sparse.identity(5, format="csr"), True), rhs), rhs)


def test_spd_random_vs_dense():
    rng = np.random.default_rng(3)
    b = rng.standard_normal((10, 10))
    a = b @ b.T + 10 * np.eye(10)
    rhs = rng.standard_normal(10)
    x = solve_spd(SparseSystem(sparse.csr_matrix(a), True), rhs, tol=1e-14)
    assert np.max(np.abs(x - np.linalg.solve(a, rhs))) <= 1e-10


def test_spd_rejects_indefinite_and_unflagged():
    a = sparse.csr_matrix(np.diag([1.0, 2.0, 3.0]) + np.array([[0, 3.0, 0], [3.0, 0, 0], [0, 0, 0]]))
    with pytest.raises(SolverError):
        solve_spd(SparseSystem(a, True), np.ones(3))
    with pytest.raises(SolverError, match="SPD-flagged"):
        solve_spd(SparseSystem(sparse.identity(3, format="csr"), False), np.ones(3))
    with pytest.raises(SolverError, match="diagonal"):
        solve_spd(SparseSystem(sparse.csr_matrix(np.diag([1.0, -1.0])), True), np.ones(2))


def test_spd_iteration_cap_carries_residual():
    mesh = build_box_mesh([[0, 1], [0, 1]], 1 / 16)
    dm = DofMap.dirichlet(mesh.n_vertices, mesh.dirichlet_vertices)
    k = assemble_stiffness(mesh, dm, spd=True)
    with pytest.raises(NonConvergenceError) as info:
        solve_spd(k, np.ones(k.dimension), max_iterations=3)
    assert info.value.residual > 0 and info.value.iterations == 3


def periodic_poisson(h=1 / 8):
    mesh = build_cell_mesh(HoleSpec("disk", (0.5, 0.5), 0.25), h)
    dm = DofMap.periodic(mesh)
    asm = Assembler(mesh, dm)
    w = asm.load(lambda z: np.ones(z.shape[:-1]))
    rhs = asm.load(lambda z: np.cos(2 * np.pi * z[..., 0]) + np.sin(2 * np.pi * z[..., 1]))
    rhs -= w * rhs.sum() / w.sum()
    return asm.stiffness(), rhs, w


def test_mean_constrained_vs_dense_saddle():
    k, rhs, w = periodic_poisson()
    n = k.dimension
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = k.matrix.toarray()
    big[:n, n] = big[n, :n] = w
    dense = np.linalg.solve(big, np.append(rhs, 0.0))[:n]
    u = solve_mean_constrained(k, rhs, w)
    assert np.max(np.abs(u - dense)) <= 1e-9
    assert abs(w @ u) <= 1e-10 * np.linalg.norm(u)
    # first saddle equation: K u + lam w = rhs with lam = 0 for compatible data
    assert np.linalg.norm(k @ u - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_mean_constrained_zero_and_incompatible():
    k, rhs, w = periodic_poisson()
    assert np.all(solve_mean_constrained(k, np.zeros_like(rhs), w) == 0.0)
    with pytest.raises(CompatibilityError):
        solve_mean_constrained(k, np.ones_like(rhs), w)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2))
def test_galerkin_exact_for_linear(a, b, c):
    mesh = build_box_mesh([[0, 1], [0, 2]], 0.25)
    dm = DofMap.dirichlet(mesh.n_vertices, mesh.dirichlet_vertices)
    u = a * mesh.vertices[:, 0] + b * mesh.vertices[:, 1] + c
    k_full = assemble_stiffness(mesh).matrix
    free = dm.vertex_to_dof >= 0
    rhs = -(k_full[free][:, ~free] @ u[~free])
    k = assemble_stiffness(mesh, dm, spd=True)
    x = solve_spd(k, rhs, tol=1e-13)
    scale = max(abs(a), abs(b), abs(c), 1e-3)
    assert np.max(np.abs(x - u[free])) <= 1e-10 * scale


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_assembled_matrices_symmetric(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((2, 2))
    mat = m @ m.T + np.eye(2)
    mesh = build_cell_mesh(HoleSpec("square", (0.5, 0.5), 0.2), 1 / 8)
    field = lambda z: mat * (1 + 0.5 * np.sin(2 * np.pi * z[..., 0]))[..., None, None]
    k = assemble_stiffness(mesh, DofMap.periodic(mesh), field=field)
    assert k.asymmetry() <= 1e-13
    mm = assemble_mass(mesh, weight=lambda z: 1 + z[..., 1] ** 2)
    assert mm.asymmetry() <= 1e-13


def test_dofmap_round_trip(disk):
    mesh = build_cell_mesh(disk, 1 / 8)
    dm = DofMap.periodic(mesh)
    u = np.arange(dm.ndof, dtype=float)
    assert np.array_equal(dm.restrict(dm.expand(u)), u)
    nodal = dm.expand(u)
    for axis, (low, high) in mesh.periodic_pairs.items():
        assert np.array_equal(nodal[low], nodal[high])
    # closure leaves no chains
    assert np.all(dm.kind[mesh.master[mesh.master]] == 0)


def test_dump_coo(tmp_path):
    path = tmp_path / "k.txt"
    dump_coo(assemble_stiffness(SQUARE), path)
    lines = path.read_text().splitlines()
    assert lines[0].split()[1:3] == ["4", "4"]
    assert len(lines) == 1 + assemble_stiffness(SQUARE).matrix.nnz
