import itertools

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from signorini_fem import (
    ExactSolution,
    SolverError,
    build_system,
    discrete_transmission_points,
    linear_subsolve,
    mesh_at_level,
    solve_vi,
    trace_map,
)
from signorini_fem.biortho import MultiplierFunction
from signorini_fem.solver import VISolution
from signorini_fem.assembly import FeFunction


@pytest.fixture(scope="module")
def sol():
    return ExactSolution()


def make_problem(level, sol):
    mesh = mesh_at_level(level)
    tmap = trace_map(mesh)
    system = build_system(mesh, tmap, sol)
    return mesh, tmap, system


def brute_force_vi(system, g=0.0):
    """Enumerate all active sets and return the feasible complementary one."""
    A = system.stiffness
    F = system.load
    D = system.lumped_mass
    trace = system.trace_dofs
    n_mult = trace.shape[0]
    g = np.broadcast_to(np.asarray(g, dtype=float), (n_mult,)).copy()
    solutions = []
    for active_tuple in itertools.product([False, True], repeat=n_mult):
        active = np.array(active_tuple)
        u = np.zeros(system.mesh.num_vertices)
        u[system.dirichlet_idx] = system.dirichlet_values
        u[trace[active]] = g[active]
        fixed_mask = ~system.free_mask.copy()
        fixed_mask[trace[active]] = True
        free = np.flatnonzero(~fixed_mask)
        fixed = np.flatnonzero(fixed_mask)
        u[free] = spla.spsolve(
            A[np.ix_(free, free)].tocsc(), F[free] - A[np.ix_(free, fixed)] @ u[fixed]
        )
        resid = F - A @ u
        lam = np.zeros(n_mult)
        lam[active] = resid[trace[active]] / D[active]
        feasible = np.all(u[trace] <= g + 1e-10) and np.all(lam >= -1e-10)
        if feasible:
            solutions.append((active, u, lam))
    assert solutions, "no feasible complementary active set found"
    return solutions


def test_linear_subsolve_identity():
    eye = sp.identity(5, format="csr")
    rhs = np.arange(5.0)
    assert np.array_equal(linear_subsolve(eye, rhs), rhs)


def test_linear_subsolve_2x2():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = linear_subsolve(A, np.array([3.0, 3.0]))
    assert np.allclose(x, [1.0, 1.0], rtol=1e-13)


def test_linear_subsolve_random_spd():
    rng = np.random.default_rng(11)
    B = rng.standard_normal((50, 50))
    A = sp.csr_matrix(B.T @ B + np.eye(50))
    b = rng.standard_normal(50)
    x = linear_subsolve(A, b)
    assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)


def test_linear_subsolve_cg_path():
    # force the iterative branch with a tiny direct limit
    rng = np.random.default_rng(3)
    n = 80
    main = 2.0 + rng.uniform(0.0, 1.0, n)
    A = sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1], format="csr")
    b = rng.standard_normal(n)
    x = linear_subsolve(A, b, direct_limit=10)
    assert np.linalg.norm(b - A @ x) <= 1e-11 * np.linalg.norm(b)


def test_unconstrained_fallback(sol):
    mesh, tmap, system = make_problem(2, sol)
    vi = solve_vi(mesh, tmap, sol, g=1e6, system=system)
    assert np.all(vi.multiplier.values == 0.0)
    assert not np.any(vi.active)
    # equals the plain linear solve of the same system
    free = np.flatnonzero(system.free_mask)
    fixed = np.flatnonzero(~system.free_mask)
    u = np.zeros(mesh.num_vertices)
    u[system.dirichlet_idx] = system.dirichlet_values
    u[free] = spla.spsolve(
        system.stiffness[np.ix_(free, free)].tocsc(),
        system.load[free] - system.stiffness[np.ix_(free, fixed)] @ u[fixed],
    )
    assert np.abs(vi.u.values - u).max() < 1e-12


@pytest.mark.parametrize("level", [1, 2])
def test_pdas_matches_exhaustive_enumeration(level, sol):
    mesh, tmap, system = make_problem(level, sol)
    vi = solve_vi(mesh, tmap, sol, system=system)
    for active, u, lam in brute_force_vi(system):
        assert np.abs(vi.u.values - u).max() <= 1e-10
        assert np.abs(vi.multiplier.values - lam).max() <= 1e-10


@pytest.mark.parametrize("level", [2, 3, 4])
def test_active_set_contiguous(level, sol):
    mesh, tmap, system = make_problem(level, sol)
    vi = solve_vi(mesh, tmap, sol, system=system)
    idx = np.flatnonzero(vi.active)
    assert idx.size > 0
    assert np.array_equal(idx, np.arange(idx[0], idx[-1] + 1))


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_start_independence(level, sol):
    mesh, tmap, system = make_problem(level, sol)
    warm = solve_vi(mesh, tmap, sol, system=system, warm_start=True)
    cold = solve_vi(mesh, tmap, sol, system=system, warm_start=False)
    assert np.array_equal(warm.active, cold.active)
    assert np.abs(warm.u.values - cold.u.values).max() <= 1e-10
    assert np.abs(warm.multiplier.values - cold.multiplier.values).max() <= 1e-10


def test_feasibility_and_complementarity(sol):
    mesh, tmap, system = make_problem(3, sol)
    vi = solve_vi(mesh, tmap, sol, system=system)
    u_trace = vi.u.values[system.trace_dofs]
    lam = vi.multiplier.values
    assert np.all(u_trace <= 1e-10)
    assert np.all(lam >= -1e-10)
    # active: touching; inactive: zero multiplier
    assert np.abs(u_trace[vi.active]).max() <= 1e-10
    assert np.all(lam[~vi.active] == 0.0)
    assert vi.residual <= 1e-10 * np.abs(system.load).max()


def test_variational_inequality_verified(sol):
    # a(u_h, v - u_h) - f(v - u_h) >= 0 for feasible discrete v
    mesh, tmap, system = make_problem(3, sol)
    vi = solve_vi(mesh, tmap, sol, system=system)
    rng = np.random.default_rng(17)
    A, F = system.stiffness, system.load
    for _ in range(50):
        v = vi.u.values + rng.standard_normal(mesh.num_vertices)
        v[system.dirichlet_idx] = system.dirichlet_values
        v[system.trace_dofs] = -np.abs(rng.standard_normal(system.trace_dofs.shape[0]))
        w = v - vi.u.values
        assert float(vi.u.values @ (A @ w) - F @ w) >= -1e-8


def test_pdas_iteration_bound(sol):
    for level in (1, 2, 3, 4):
        mesh, tmap, system = make_problem(level, sol)
        vi = solve_vi(mesh, tmap, sol, system=system, warm_start=False)
        assert vi.iterations <= tmap.num_multipliers + 2


def test_transmission_points(sol):
    mesh, tmap, system = make_problem(3, sol)
    vi = solve_vi(mesh, tmap, sol, system=system)
    xl, xr = discrete_transmission_points(vi, tmap)
    idx = np.flatnonzero(vi.active)
    assert xl == tmap.multiplier_x[idx[0]]
    assert xr == tmap.multiplier_x[idx[-1]]
    h = mesh.max_edge_length()
    assert abs(xl - sol.x_left) <= h
    assert abs(xr - sol.x_right) <= h


def test_transmission_points_single_dof(sol):
    tmap = trace_map(mesh_at_level(2))
    active = np.zeros(tmap.num_multipliers, dtype=bool)
    active[4] = True
    synthetic = VISolution(
        u=FeFunction(2, np.zeros(1)),
        multiplier=MultiplierFunction(2, np.zeros(tmap.num_multipliers)),
        active=active,
        iterations=1,
        residual=0.0,
    )
    xl, xr = discrete_transmission_points(synthetic, tmap)
    assert xl == xr == tmap.multiplier_x[4]


def test_transmission_points_empty_active_set(sol):
    tmap = trace_map(mesh_at_level(2))
    synthetic = VISolution(
        u=FeFunction(2, np.zeros(1)),
        multiplier=MultiplierFunction(2, np.zeros(tmap.num_multipliers)),
        active=np.zeros(tmap.num_multipliers, dtype=bool),
        iterations=1,
        residual=0.0,
    )
    with pytest.raises(SolverError):
        discrete_transmission_points(synthetic, tmap)


def test_affine_obstacle_supported(sol):
    mesh, tmap, system = make_problem(2, sol)
    g = -0.01 + 0.001 * tmap.multiplier_x
    vi = solve_vi(mesh, tmap, sol, g=g, system=system)
    assert np.all(vi.u.values[system.trace_dofs] <= g + 1e-10)
    for active, u, lam in brute_force_vi(system, g=g):
        assert np.abs(vi.u.values - u).max() <= 1e-10


def test_nonconvergence_carries_iterate(sol):
    mesh, tmap, system = make_problem(2, sol)
    with pytest.raises(SolverError) as excinfo:
        solve_vi(mesh, tmap, sol, system=system, warm_start=False, max_iter=1)
    assert excinfo.value.solution is not None
    assert excinfo.value.solution.iterations == 1
