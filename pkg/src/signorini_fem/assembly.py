"""P1 assembly: stiffness, load, boundary lumped mass and trace Gram matrices.

The stiffness integral is exact (piecewise-constant gradients).  The load is
integrated with a fixed symmetric triangle rule of degree >= 4, with two
refinements where the integrand is not smooth: cells crossed by a known
vertical jump or kink line of the load are cut along it and integrated
piecewise, and cells near a transmission point optionally get one extra
quadrisection to control the square-root kink there.  Assembly is serial
and deterministic: repeated runs produce bit-identical matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import TriMesh, TraceMap, point_triangle_distances, trace_map

# Symmetric 6-point triangle rule of degree 4 (two orbits, barycentric).
_D4_A1 = 0.445948490915965
_D4_W1 = 0.223381589678011
_D4_A2 = 0.091576213509771
_D4_W2 = 0.109951743655322


def tri_quadrature(degree: int = 4):
    """Barycentric points and unit-sum weights of a triangle rule.

    Degree <= 4 returns the symmetric 6-point rule; higher degrees use the
    conical product of Gauss-Jacobi and Gauss-Legendre nodes, which is exact
    for total degree 2n - 1 with n points per direction.
    """
    if degree <= 4:
        pts = []
        wts = []
        for a, w in ((_D4_A1, _D4_W1), (_D4_A2, _D4_W2)):
            pts += [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]
            wts += [w, w, w]
        return np.asarray(pts), np.asarray(wts)
    from scipy.special import roots_jacobi

    n = (degree + 2) // 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xg, wg = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (xj + 1.0)
    s = 0.5 * (xg + 1.0)
    wx = wj / 4.0
    ws = wg / 2.0
    X, S = np.meshgrid(x, s, indexing="ij")
    WX, WS = np.meshgrid(wx, ws, indexing="ij")
    xi = X.ravel()
    eta = (1.0 - X).ravel() * S.ravel()
    w = 2.0 * (WX * WS).ravel()  # unit-sum normalization (reference area 1/2)
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, w


def _triangle_geometry(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]  # (t, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return p, area


def element_gradients(mesh: TriMesh):
    """Gradients of the three barycentric shape functions per triangle.

    Returns (grads, area) with grads of shape (t, 2, 3).
    """
    p, area = _triangle_geometry(mesh)
    x = p[..., 0]
    y = p[..., 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([gx, gy], axis=1) / (2.0 * area)[:, None, None]
    return grads, area


def assemble_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    """Exact P1 stiffness matrix of the Laplacian (no boundary conditions)."""
    grads, area = element_gradients(mesh)
    local = np.einsum("tdi,tdj->tij", grads, grads) * area[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.num_vertices
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return mat.tocsr()


def _clip_halfplane(poly: list, c: float, keep_left: bool) -> list:
    """Clip a convex polygon against x <= c (or x >= c)."""
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        pin = p[0] <= c if keep_left else p[0] >= c
        qin = q[0] <= c if keep_left else q[0] >= c
        if pin:
            out.append(p)
        if pin != qin:
            t = (c - p[0]) / (q[0] - p[0])
            out.append(p + t * (q - p))
    return out if len(out) >= 3 else []


def _poly_area(poly: list) -> float:
    a = 0.0
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        a += p[0] * q[1] - q[0] * p[1]
    return 0.5 * a


def _split_by_lines(tri_coords: np.ndarray, lines) -> list:
    """Cut a triangle along vertical lines into sub-triangles.

    Returns a list of (3, 2) arrays; degenerate slivers are dropped.  Used
    where the integrand is smooth on either side of a line but not across.
    """
    polys = [list(tri_coords)]
    for c in lines:
        next_polys = []
        for poly in polys:
            xs = [p[0] for p in poly]
            if min(xs) < c < max(xs):
                for piece in (_clip_halfplane(poly, c, True), _clip_halfplane(poly, c, False)):
                    if piece and abs(_poly_area(piece)) > 1e-30:
                        next_polys.append(piece)
            else:
                next_polys.append(poly)
        polys = next_polys
    tris = []
    for poly in polys:
        for i in range(1, len(poly) - 1):
            tris.append(np.stack([poly[0], poly[i], poly[i + 1]]))
    return tris


def assemble_load(
    mesh: TriMesh,
    f,
    degree: int = 4,
    refine_near: tuple | None = None,
    split_x=(),
) -> np.ndarray:
    """Load vector of integrals f * phi_i with a fixed triangle rule.

    split_x lists vertical lines across which f is allowed to jump or kink:
    crossed triangles are cut along them and integrated piecewise, keeping
    the fixed rule accurate for piecewise-smooth loads.  refine_near, if
    given, is (points, radius): triangles whose closure lies within radius
    of one of the points get one extra quadrisection of the rule.
    """
    bary, w = tri_quadrature(degree)
    coords, area = _triangle_geometry(mesh)
    load = np.zeros(mesh.num_vertices)

    near = np.zeros(mesh.num_triangles, dtype=bool)
    if refine_near is not None:
        points, radius = refine_near
        for pt in np.atleast_2d(points):
            near |= point_triangle_distances(pt, mesh) <= radius
    crossing = np.zeros(mesh.num_triangles, dtype=bool)
    xs = coords[..., 0]
    for c in split_x:
        crossing |= (xs.min(axis=1) < c) & (c < xs.max(axis=1))
    special = near | crossing

    regular = np.flatnonzero(~special)
    for start in range(0, regular.shape[0], 1 << 16):
        sel = regular[start : start + (1 << 16)]
        pts = np.einsum("qk,tkd->tqd", bary, coords[sel])
        vals = f(pts[..., 0], pts[..., 1])
        contrib = np.einsum("tq,q,qk->tk", vals, w, bary) * area[sel, None]
        np.add.at(load, mesh.triangles[sel].ravel(), contrib.ravel())

    special_idx = np.flatnonzero(special)
    grads = element_gradients(mesh)[0] if special_idx.size else None
    for t in special_idx:
        pieces = _split_by_lines(coords[t], split_x) if crossing[t] else [coords[t]]
        if near[t]:
            pieces = [child for piece in pieces for child in _split_coords_once(piece)]
        v0 = coords[t, 0]
        g = grads[t]  # (2, 3), gradients of the parent hat functions
        for sub in pieces:
            pts = bary @ sub  # (q, 2)
            vals = f(pts[:, 0], pts[:, 1])
            rel = pts - v0
            hats = rel @ g  # (q, 3) via affine hat representation
            hats[:, 0] += 1.0
            a = _tri_area_coords(sub)
            load[mesh.triangles[t]] += a * np.einsum("q,q,qk->k", vals, w, hats)
    return load


def _tri_area_coords(tri_coords: np.ndarray) -> float:
    d1 = tri_coords[1] - tri_coords[0]
    d2 = tri_coords[2] - tri_coords[0]
    return 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])


def _split_coords_once(tri_coords: np.ndarray):
    a, b, c = tri_coords
    mab = 0.5 * (a + b)
    mbc = 0.5 * (b + c)
    mca = 0.5 * (c + a)
    return (
        np.stack([a, mab, mca]),
        np.stack([b, mbc, mab]),
        np.stack([c, mca, mbc]),
        np.stack([mab, mbc, mca]),
    )


def boundary_lumped_mass(mesh: TriMesh, tmap: TraceMap) -> np.ndarray:
    """Diagonal entries <phi_j, 1> over Gamma_S per multiplier DOF.

    For a hat function at an interior trace vertex this is half the length of
    the two adjacent elements; on a uniform trace grid every entry equals the
    element length.
    """
    h = tmap.spacings()
    full = np.zeros(tmap.x.shape[0])
    full[:-1] += 0.5 * h
    full[1:] += 0.5 * h
    return full[tmap.interior]


def line_grams(x: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """1D P1 mass and stiffness matrices on the node set x (increasing)."""
    h = np.diff(x)
    n = x.shape[0]
    main_m = np.zeros(n)
    main_m[:-1] += h / 3.0
    main_m[1:] += h / 3.0
    off_m = h / 6.0
    mass = sp.diags([off_m, main_m, off_m], offsets=[-1, 0, 1], format="csr")
    main_k = np.zeros(n)
    main_k[:-1] += 1.0 / h
    main_k[1:] += 1.0 / h
    off_k = -1.0 / h
    stiff = sp.diags([off_k, main_k, off_k], offsets=[-1, 0, 1], format="csr")
    return mass, stiff


def trace_grams(mesh: TriMesh, tmap: TraceMap) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """L2 and H1 Gram matrices of the P1 trace space over all Gamma_S vertices."""
    mass, stiff = line_grams(tmap.x)
    return mass, (mass + stiff).tocsr()


def dirichlet_vertices(mesh: TriMesh, tmap: TraceMap) -> np.ndarray:
    """Vertices carrying Dirichlet data: boundary minus interior Gamma_S."""
    on_boundary = np.unique(mesh.boundary_edges.ravel())
    interior_trace = set(tmap.multiplier_vertices.tolist())
    return np.asarray([v for v in on_boundary if v not in interior_trace], dtype=np.int64)


@dataclass(frozen=True)
class FeFunction:
    """Nodal P1 function: one coefficient per mesh vertex (or trace vertex)."""

    level: int
    values: np.ndarray


@dataclass(frozen=True)
class FeSystem:
    """Assembled pieces of one discretized problem, plus index partitions."""

    mesh: TriMesh
    tmap: TraceMap
    stiffness: sp.csr_matrix
    load: np.ndarray
    lumped_mass: np.ndarray  # D_j per multiplier DOF
    dirichlet_idx: np.ndarray
    dirichlet_values: np.ndarray
    trace_dofs: np.ndarray  # global vertex ids of multiplier DOFs, by x
    free_mask: np.ndarray  # True for non-Dirichlet vertices
    interior_idx: np.ndarray  # free vertices that are not multiplier DOFs


def build_system(
    mesh: TriMesh,
    tmap: TraceMap | None,
    sol,
    load_degree: int = 4,
    refine_load_near_contact: bool = True,
) -> FeSystem:
    """Assemble stiffness, load, lumped mass and Dirichlet data for sol."""
    if tmap is None:
        tmap = trace_map(mesh)
    stiffness = assemble_stiffness(mesh)
    refine_near = None
    if refine_load_near_contact:
        pts = np.array([[sol.x_left, 0.0], [sol.x_right, 0.0]])
        refine_near = (pts, 2.0 * mesh.max_edge_length())
    load = assemble_load(
        mesh,
        sol.rhs,
        degree=load_degree,
        refine_near=refine_near,
        split_x=sol.load_split_x,
    )
    lumped = boundary_lumped_mass(mesh, tmap)
    dir_idx = dirichlet_vertices(mesh, tmap)
    dir_vals = sol.u(mesh.vertices[dir_idx, 0], mesh.vertices[dir_idx, 1])
    free_mask = np.ones(mesh.num_vertices, dtype=bool)
    free_mask[dir_idx] = False
    interior_mask = free_mask.copy()
    interior_mask[tmap.multiplier_vertices] = False
    return FeSystem(
        mesh=mesh,
        tmap=tmap,
        stiffness=stiffness,
        load=load,
        lumped_mass=lumped,
        dirichlet_idx=dir_idx,
        dirichlet_values=np.asarray(dir_vals, dtype=float),
        trace_dofs=tmap.multiplier_vertices,
        free_mask=free_mask,
        interior_idx=np.flatnonzero(interior_mask),
    )
