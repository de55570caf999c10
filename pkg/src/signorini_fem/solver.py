"""Primal-dual active set solver for the discrete contact problem.

The discrete saddle point couples the P1 Poisson operator with the
biorthogonal multiplier only through the diagonal D_j = <phi_j, 1>, so the
complementarity system is nodal: at each multiplier DOF either the solution
touches the obstacle and the multiplier is non-negative, or the multiplier
vanishes and the solution stays below the obstacle.  PDAS iterates on the
guessed active set A_k: it imposes u_j = g_j on A_k and lambda_j = 0 off it,
solves the reduced SPD system, recovers active multipliers from the residual
scaled by D_j, and updates A_{k+1} = { j : lambda_j + c (u_j - g_j)/D_j > 0 }.
The iteration terminates finitely; on the benchmark it stabilizes in a
handful of steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FeFunction, FeSystem, build_system
from .biortho import MultiplierFunction
from .mesh import TriMesh, TraceMap


class SolverError(RuntimeError):
    """Raised on non-convergence or a defective linear system.

    Carries the last iterate in the ``solution`` attribute when available.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class VISolution:
    """Converged primal/dual pair with its active set and iteration data."""

    u: FeFunction
    multiplier: MultiplierFunction
    active: np.ndarray  # bool per multiplier DOF
    iterations: int
    residual: float  # inf-norm of the saddle-point residual on free rows


def linear_subsolve(
    matrix: sp.spmatrix,
    rhs: np.ndarray,
    direct_limit: int = 600_000,
    rtol: float = 1e-12,
):
    """Solve an SPD system to relative residual rtol.

    Direct sparse factorization up to direct_limit unknowns, diagonally
    preconditioned conjugate gradients beyond.  A step of iterative
    refinement backs the direct path so the contract holds also for
    ill-conditioned fine-level systems.
    """
    matrix = matrix.tocsc()
    n = matrix.shape[0]
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    if n <= direct_limit:
        try:
            lu = spla.splu(matrix, permc_spec="COLAMD")
        except RuntimeError as exc:  # singular factorization
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        x = lu.solve(rhs)
        for _ in range(2):
            r = rhs - matrix @ x
            if np.linalg.norm(r) <= rtol * rhs_norm:
                break
            x = x + lu.solve(r)
    else:
        precond = sp.diags(1.0 / matrix.diagonal())
        x, info = spla.cg(matrix, rhs, rtol=rtol / 10.0, atol=0.0, M=precond, maxiter=20 * n)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info})")
    res = float(np.linalg.norm(rhs - matrix @ x))
    if not np.isfinite(res) or res > rtol * rhs_norm * 10.0:
        raise SolverError(f"linear solve residual {res:.3e} exceeds contract")
    return x


def solve_vi(
    mesh: TriMesh,
    tmap: TraceMap,
    sol,
    g=0.0,
    system: FeSystem | None = None,
    warm_start: bool = True,
    c: float = 1.0,
    max_iter: int = 100,
) -> VISolution:
    """Solve the discrete variational inequality by PDAS.

    g is the obstacle at the multiplier DOFs (scalar or per-DOF array;
    affine obstacles are supported through the array form).  Dirichlet data
    are the nodal values of sol on Gamma_D.  With warm_start the initial
    active set is every multiplier DOF inside [x_left, x_right], otherwise
    empty; the converged solution does not depend on the start.
    """
    if system is None:
        system = build_system(mesh, tmap, sol)
    A = system.stiffness
    F = system.load
    D = system.lumped_mass
    trace = system.trace_dofs
    n_mult = trace.shape[0]
    g = np.broadcast_to(np.asarray(g, dtype=float), (n_mult,)).copy()

    u = np.zeros(mesh.num_vertices)
    u[system.dirichlet_idx] = system.dirichlet_values
    lam = np.zeros(n_mult)

    if warm_start:
        x = tmap.multiplier_x
        active = (x >= sol.x_left) & (x <= sol.x_right)
    else:
        active = np.zeros(n_mult, dtype=bool)

    iterations = 0
    converged = False
    resid_vec = F - A @ u
    for k in range(1, max_iter + 1):
        iterations = k
        fixed_mask = ~system.free_mask.copy()
        fixed_mask[trace[active]] = True
        u[trace[active]] = g[active]
        free = np.flatnonzero(~fixed_mask)
        fixed = np.flatnonzero(fixed_mask)
        rhs = F[free] - A[free][:, fixed] @ u[fixed]
        u[free] = linear_subsolve(A[free][:, free], rhs)
        resid_vec = F - A @ u
        lam = np.zeros(n_mult)
        lam[active] = resid_vec[trace[active]] / D[active]
        new_active = (lam + c * (u[trace] - g) / D) > 0.0
        if np.array_equal(new_active, active):
            converged = True
            break
        active = new_active

    level = mesh.level
    solution = VISolution(
        u=FeFunction(level, u),
        multiplier=MultiplierFunction(level, lam),
        active=active,
        iterations=iterations,
        residual=_saddle_residual(system, u, lam),
    )
    if not converged:
        raise SolverError(f"PDAS did not converge within {max_iter} iterations", solution)
    return solution


def _saddle_residual(system: FeSystem, u: np.ndarray, lam: np.ndarray) -> float:
    """Inf-norm of F - A u - B lambda over the non-Dirichlet rows."""
    r = system.load - system.stiffness @ u
    r[system.trace_dofs] -= lam * system.lumped_mass
    return float(np.max(np.abs(r[system.free_mask])))


def discrete_transmission_points(solution: VISolution, tmap: TraceMap) -> tuple[float, float]:
    """Extremal x coordinates of the converged active set.

    An empty active set signals that the mesh is too coarse to resolve the
    contact interval at all and is reported as an error.
    """
    if not np.any(solution.active):
        raise SolverError("active set is empty; contact interval unresolved")
    x = tmap.multiplier_x[solution.active]
    return float(x.min()), float(x.max())
