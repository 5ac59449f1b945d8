"""Piecewise-linear finite element matrices on triangle meshes."""
import numpy as np
import scipy.sparse as sp

# integral of phi_a phi_b phi_c over a triangle, divided by its area
TRIPLE = np.empty((3, 3, 3))
for _a in range(3):
    for _b in range(3):
        for _c in range(3):
            _n = len({_a, _b, _c})
            TRIPLE[_a, _b, _c] = {1: 1 / 10, 2: 1 / 30, 3: 1 / 60}[_n]


def _edges(mesh):
    p = mesh.vertices[mesh.triangles]
    # edge opposite to local vertex a, oriented cyclically
    return np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def cotan_stiffness(mesh) -> sp.csr_matrix:
    """Stiffness matrix of the Dirichlet energy (cotangent weights)."""
    e = _edges(mesh)
    area = mesh.triangle_areas()
    local = np.einsum("tai,tbi->tab", e, e) / (4.0 * area)[:, None, None]
    return _scatter(mesh, local)


def mass_matrix(mesh, beta) -> sp.csr_matrix:
    """Consistent mass matrix for the density ``beta`` (piecewise linear)."""
    beta = np.asarray(beta, dtype=float)
    bt = beta[mesh.triangles]
    local = np.einsum("abc,tc->tab", TRIPLE, bt) * mesh.triangle_areas()[:, None, None]
    return _scatter(mesh, local)


def mass_gradient(mesh, U, V=None) -> np.ndarray:
    """Gradient with respect to the density of ``u_j^T M(beta) v_l``.

    ``U`` is (n, m) and ``V`` is (n, q) (default ``U``); the result G has
    shape (m, q, n) with ``G[j, l] @ h == U[:, j] @ M(h) @ V[:, l]``.
    """
    U = np.asarray(U, dtype=float)
    V = U if V is None else np.asarray(V, dtype=float)
    t = mesh.triangles
    Ut, Vt = U[t], V[t]   # (T, 3, m)
    loc = np.einsum("taj,tbl,abc,t->tcjl", Ut, Vt, TRIPLE, mesh.triangle_areas(), optimize=True)
    G = np.zeros((mesh.n_vertices, U.shape[1], V.shape[1]))
    np.add.at(G, t.ravel(), loc.reshape(-1, U.shape[1], V.shape[1]))
    return np.moveaxis(G, 0, -1)


def triangle_gradients(mesh, f) -> np.ndarray:
    """Per-triangle gradients of piecewise-linear fields, in an intrinsic frame.

    ``f`` is (n,) or (n, m); returns (T, 2) or (T, 2, m) components with
    respect to the orthonormal frame (e1 along the first edge, e2 = n x e1).
    """
    f = np.asarray(f, dtype=float)
    p = mesh.vertices[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    e1 = d1 / np.linalg.norm(d1, axis=1, keepdims=True)
    nrm = np.cross(d1, d2)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    e2 = np.cross(nrm, e1)
    # local 2D coordinates of the edge vectors
    A = np.stack([np.stack([np.einsum("ti,ti->t", d1, e1), np.einsum("ti,ti->t", d1, e2)], -1),
                  np.stack([np.einsum("ti,ti->t", d2, e1), np.einsum("ti,ti->t", d2, e2)], -1)], 1)
    ft = f[mesh.triangles]
    df = np.stack([ft[:, 1] - ft[:, 0], ft[:, 2] - ft[:, 0]], axis=1)
    if f.ndim == 1:
        return np.linalg.solve(A, df[..., None])[..., 0]
    return np.linalg.solve(A, df)
