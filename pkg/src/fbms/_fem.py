"""P1 finite-element building blocks on embedded triangle meshes."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


def element_geometry(vertices: np.ndarray, triangles: np.ndarray):
    """Areas, unit normals and barycentric gradients of every triangle.

    Returns
    -------
    area : (F,)
    normal : (F, 3)
    grad : (F, 3, 3)
        ``grad[f, i]`` is the ambient gradient of the i-th hat function on f.
    """
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cr = np.cross(e1, e2)
    dbl = np.linalg.norm(cr, axis=1)
    n = cr / dbl[:, None]
    opp = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.cross(n[:, None, :], opp) / dbl[:, None, None]
    return 0.5 * dbl, n, grad


def scatter(triangles: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Assemble (F, 3, 3) element matrices into an n x n sparse matrix."""
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def scatter_blocks(triangles: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Assemble (F, 3, 3, 3, 3) vertex-block element matrices, vertex-major DOFs."""
    F = triangles.shape[0]
    vi = triangles[:, :, None, None, None]
    vj = triangles[:, None, None, :, None]
    c = np.arange(3)[None, None, :, None, None]
    d = np.arange(3)[None, None, None, None, :]
    rows = np.broadcast_to(3 * vi + c, (F, 3, 3, 3, 3)).ravel()
    cols = np.broadcast_to(3 * vj + d, (F, 3, 3, 3, 3)).ravel()
    # local is indexed [f, i, j, c, d]; reorder to [f, i, c, j, d]
    data = np.transpose(local, (0, 1, 3, 2, 4)).ravel()
    return sp.csr_matrix((data, (rows, cols)), shape=(3 * n, 3 * n))


def stiffness(vertices, triangles):
    area, _, grad = element_geometry(vertices, triangles)
    local = area[:, None, None] * np.einsum("fik,fjk->fij", grad, grad)
    return scatter(triangles, local, vertices.shape[0])


def mass(vertices, triangles, lumped: bool = False):
    area, _, _ = element_geometry(vertices, triangles)
    n = vertices.shape[0]
    if lumped:
        d = np.zeros(n)
        np.add.at(d, triangles.ravel(), np.repeat(area / 3.0, 3))
        return sp.diags(d).tocsr()
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return scatter(triangles, area[:, None, None] * base, n)


def vertex_areas(vertices, triangles) -> np.ndarray:
    area, _, _ = element_geometry(vertices, triangles)
    d = np.zeros(vertices.shape[0])
    np.add.at(d, triangles.ravel(), np.repeat(area / 3.0, 3))
    return d


def boundary_mass(vertices, bedges, n: int, weight=None) -> sp.csr_matrix:
    """Exact P1 line mass on boundary edges, optionally times a per-edge weight."""
    L = np.linalg.norm(vertices[bedges[:, 1]] - vertices[bedges[:, 0]], axis=1)
    if weight is not None:
        L = L * weight
    a, b = bedges[:, 0], bedges[:, 1]
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    data = np.concatenate([L / 3, L / 3, L / 6, L / 6])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def vertex_normals(vertices, triangles) -> np.ndarray:
    area, n, _ = element_geometry(vertices, triangles)
    acc = np.zeros_like(vertices)
    for k in range(3):
        np.add.at(acc, triangles[:, k], area[:, None] * n)
    return acc / np.linalg.norm(acc, axis=1)[:, None]


def kron3(A: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(A, sp.identity(3), format="csr")


def symmetrize(A: sp.spmatrix) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


def orthonormal_complement(w: np.ndarray) -> np.ndarray:
    """Two unit vectors spanning the orthogonal complement of each row of w.

    The choice is a deterministic function of w.
    """
    w = w / np.linalg.norm(w, axis=1)[:, None]
    axis = np.argmin(np.abs(w), axis=1)
    helper = np.eye(3)[axis]
    t1 = helper - np.sum(helper * w, axis=1)[:, None] * w
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(w, t1)
    return np.stack([t1, t2], axis=1)


def chart_dz_coefficients(chart: np.ndarray, triangles: np.ndarray):
    """Per-element coefficients d_i with d/dz (P1 field) = sum_i d_i F_i.

    Also returns the chart area of every element.
    """
    c = chart[triangles]
    e1 = c[:, 1] - c[:, 0]
    e2 = c[:, 2] - c[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradient of barycentric coordinates in the chart
    opp = np.stack([c[:, 2] - c[:, 1], c[:, 0] - c[:, 2], c[:, 1] - c[:, 0]], axis=1)
    gu = -opp[:, :, 1] / det[:, None]
    gv = opp[:, :, 0] / det[:, None]
    return 0.5 * (gu - 1j * gv), 0.5 * np.abs(det), np.sign(det)


def vertex_neighbourhoods(triangles: np.ndarray, n: int, rings: int = 2) -> sp.csr_matrix:
    """Boolean adjacency of each vertex to its k-ring (including itself)."""
    t = triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)) + sp.identity(n, format="csr")
    ring = adj.copy()
    for _ in range(rings - 1):
        ring = ring @ adj
    ring.data[:] = 1.0
    ring.sort_indices()
    return ring


def jet_normals(vertices: np.ndarray, triangles: np.ndarray, rings: int = 2) -> np.ndarray:
    """Unit normals from a least-squares quadric height fit over each vertex k-ring.

    The fit is done in the frame of the area-weighted normal; the normal of the
    fitted graph at the vertex is second-order accurate on smooth surfaces,
    unlike the area-weighted average on irregular refinements.
    """
    n0 = vertex_normals(vertices, triangles)
    ring = vertex_neighbourhoods(triangles, vertices.shape[0], rings)
    frames = orthonormal_complement(n0)
    out = np.empty_like(n0)
    for v in range(vertices.shape[0]):
        nb = ring.indices[ring.indptr[v]:ring.indptr[v + 1]]
        d = vertices[nb] - vertices[v]
        u = d @ frames[v, 0]
        w = d @ frames[v, 1]
        h = d @ n0[v]
        if len(nb) < 6:
            out[v] = n0[v]
            continue
        # height through the vertex itself: no constant term
        design = np.stack([u, w, u * u, u * w, w * w], axis=1)
        coef = np.linalg.lstsq(design, h, rcond=None)[0]
        nv = n0[v] - coef[0] * frames[v, 0] - coef[1] * frames[v, 1]
        out[v] = nv / np.linalg.norm(nv)
    return out
