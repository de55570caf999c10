import math

import numpy as np
import pytest

from signorini_fem import ExactSolution, WIDTH, assembly, mesh as msh


@pytest.fixture(scope="module")
def sol():
    return ExactSolution()


def unit_right_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    tags = np.array([msh.SIGNORINI, msh.DIRICHLET, msh.DIRICHLET])
    parents = np.column_stack([np.arange(3), np.arange(3)])
    return msh.TriMesh(1, verts, tris, edges, tags, parents)


def test_local_stiffness_unit_right_triangle():
    m = unit_right_triangle()
    K = assembly.assemble_stiffness(m).toarray()
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(K, expected, rtol=0, atol=1e-15)


def test_stiffness_rowsums_and_symmetry():
    m = msh.mesh_at_level(3)
    A = assembly.assemble_stiffness(m)
    assert np.abs(A @ np.ones(m.num_vertices)).max() < 1e-13
    assert abs(A - A.T).max() == 0.0


def test_stiffness_deterministic():
    m = msh.mesh_at_level(3)
    A1 = assembly.assemble_stiffness(m)
    A2 = assembly.assemble_stiffness(m)
    assert np.array_equal(A1.data, A2.data)
    assert np.array_equal(A1.indices, A2.indices)
    assert np.array_equal(A1.indptr, A2.indptr)


def test_dirichlet_reduced_stiffness_is_spd():
    m = msh.mesh_at_level(2)
    tm = msh.trace_map(m)
    A = assembly.assemble_stiffness(m)
    free = np.ones(m.num_vertices, bool)
    free[assembly.dirichlet_vertices(m, tm)] = False
    red = A[np.ix_(free, free)].toarray()
    np.linalg.cholesky(red)  # raises if not SPD


def test_quadrature_rules_exact_on_monomials():
    # reference-triangle integral of l1^i l2^j l3^k is i! j! k! / (i+j+k+2)! * 2A
    for degree in (4, 7):
        bary, w = assembly.tri_quadrature(degree)
        assert np.isclose(w.sum(), 1.0, rtol=1e-14)
        for (i, j, k) in [(1, 0, 0), (2, 1, 0), (2, 2, 0), (1, 1, 2), (4, 0, 0), (2, 1, 1)]:
            if i + j + k > degree:
                continue
            val = np.sum(w * bary[:, 0] ** i * bary[:, 1] ** j * bary[:, 2] ** k)
            exact = (
                2.0
                * math.factorial(i)
                * math.factorial(j)
                * math.factorial(k)
                / math.factorial(i + j + k + 2)
            )
            assert np.isclose(val, exact, rtol=1e-13), (degree, i, j, k)


def test_load_constant_density_partition_of_unity():
    m = msh.mesh_at_level(2)
    load = assembly.assemble_load(m, lambda x, y: np.ones_like(x))
    assert np.isclose(load.sum(), 0.5 * WIDTH, rtol=1e-13)


def test_load_zero_density():
    m = msh.mesh_at_level(2)
    load = assembly.assemble_load(m, lambda x, y: np.zeros_like(x))
    assert np.all(load == 0.0)


def test_load_degree4_vs_degree7(sol):
    m = msh.mesh_at_level(4)
    l4 = assembly.assemble_load(m, sol.rhs, degree=4, split_x=sol.load_split_x)
    l7 = assembly.assemble_load(m, sol.rhs, degree=7, split_x=sol.load_split_x)
    assert np.abs(l4 - l7).max() <= 1e-3 * np.abs(l7).max()


def test_load_split_lines_matter(sol):
    # the volume load jumps across the cut-off lines; splitting the cells
    # reproduces a high-degree reference, the plain rule does not
    m = msh.mesh_at_level(4)
    ref = assembly.assemble_load(m, sol.rhs, degree=16, split_x=sol.load_split_x)
    split = assembly.assemble_load(m, sol.rhs, degree=4, split_x=sol.load_split_x)
    plain = assembly.assemble_load(m, sol.rhs, degree=4)
    assert np.abs(split - ref).max() < 1e-6
    assert np.abs(plain - ref).max() > 1e-4


def test_load_polynomial_exactness():
    m = msh.mesh_at_level(1)

    def poly(x, y):
        return x**3 - 2.0 * x * y + y**2 + 1.0

    l4 = assembly.assemble_load(m, poly, degree=4)
    l9 = assembly.assemble_load(m, poly, degree=9)
    assert np.allclose(l4, l9, rtol=1e-13)


def test_boundary_lumped_mass_uniform():
    m = msh.mesh_at_level(2)
    tm = msh.trace_map(m)
    d = assembly.boundary_lumped_mass(m, tm)
    assert d.shape == (7,)
    assert np.allclose(d, WIDTH / 8.0, rtol=1e-13)
    assert np.all(d > 0.0)


def test_boundary_lumped_mass_total():
    m = msh.mesh_at_level(3)
    tm = msh.trace_map(m)
    d = assembly.boundary_lumped_mass(m, tm)
    h = tm.spacings()
    corners = 0.5 * h[0] + 0.5 * h[-1]
    assert np.isclose(d.sum() + corners, WIDTH, rtol=1e-13)


def test_line_grams_single_element():
    h = 0.35
    mass, stiff = assembly.line_grams(np.array([0.0, h]))
    assert np.allclose(mass.toarray(), h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]]), rtol=1e-14)
    assert np.allclose(stiff.toarray(), np.array([[1.0, -1.0], [-1.0, 1.0]]) / h, rtol=1e-14)


def test_trace_grams_constant_and_spd():
    m = msh.mesh_at_level(2)
    tm = msh.trace_map(m)
    mass, h1 = assembly.trace_grams(m, tm)
    ones = np.ones(tm.x.shape[0])
    assert np.allclose(h1 @ ones, mass @ ones, rtol=1e-13)
    np.linalg.cholesky(h1.toarray())


def test_patch_test_affine_reproduction():
    # pure Dirichlet problem with affine data and zero load is reproduced
    import scipy.sparse.linalg as spla

    m = msh.mesh_at_level(3)
    A = assembly.assemble_stiffness(m)
    affine = 0.75 * m.vertices[:, 0] - 1.25 * m.vertices[:, 1] + 0.5
    boundary = np.unique(m.boundary_edges.ravel())
    free = np.ones(m.num_vertices, bool)
    free[boundary] = False
    fi = np.flatnonzero(free)
    u = affine.copy()
    u[fi] = spla.spsolve(A[np.ix_(fi, fi)].tocsc(), -A[np.ix_(fi, boundary)] @ affine[boundary])
    assert np.abs(u - affine).max() < 1e-12


def test_build_system_partitions(sol):
    m = msh.mesh_at_level(2)
    tm = msh.trace_map(m)
    system = assembly.build_system(m, tm, sol)
    assert system.trace_dofs.shape == (7,)
    n_boundary = len(np.unique(m.boundary_edges.ravel()))
    assert system.dirichlet_idx.shape[0] == n_boundary - 7
    assert not np.any(system.free_mask[system.dirichlet_idx])
    assert np.all(system.free_mask[system.trace_dofs])
    assert set(system.interior_idx).isdisjoint(set(system.trace_dofs))
    # Dirichlet values are the nodal values of the exact solution
    expect = sol.u(m.vertices[system.dirichlet_idx, 0], m.vertices[system.dirichlet_idx, 1])
    assert np.allclose(system.dirichlet_values, expect, rtol=0, atol=0)
