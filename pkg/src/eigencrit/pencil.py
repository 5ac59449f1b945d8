"""Parametric symmetric pencils (K(x), M(x)) and their clustered spectra."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ConsistencyError, InvalidParameterError

DEFAULT_CLUSTER_TOL = 1e-6


def dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


class ParametricPencil:
    """A family of symmetric pencils indexed by a parameter vector x.

    Subclasses implement ``stiffness``, ``mass``, ``stiffness_dir`` and
    ``mass_dir``.  ``form_gradient`` has a generic (slow) implementation via
    coordinate directions and should be overridden when a closed form exists.

    Attributes:
        dim: number of degrees of freedom.
        param_dim: length of x.
        zero_modes: number of eigenvalues known to vanish identically (the
            constants of an all-Neumann Laplacian). Eigenvalue labels start at
            ``1 - zero_modes`` so the first nonzero eigenvalue is always k=1.
    """

    dim: int
    param_dim: int
    zero_modes: int = 0

    def stiffness(self, x):
        raise NotImplementedError

    def mass(self, x):
        raise NotImplementedError

    def stiffness_dir(self, x, h):
        raise NotImplementedError

    def mass_dir(self, x, h):
        raise NotImplementedError

    def admissible(self, x) -> bool:
        return bool(np.all(np.isfinite(x)))

    def param_weights(self) -> np.ndarray:
        """Diagonal weights of the inner product on parameter directions."""
        return np.ones(self.param_dim)

    def form_gradient(self, x, U, mu, V=None) -> np.ndarray:
        """Array G of shape (m, q, P) with ``G[j, l] @ h = U_j^T (K'_h - mu M'_h) V_l``."""
        U = np.atleast_2d(np.asarray(U, dtype=float).T).T
        V = U if V is None else np.atleast_2d(np.asarray(V, dtype=float).T).T
        G = np.empty((U.shape[1], V.shape[1], self.param_dim))
        for p in range(self.param_dim):
            e = np.zeros(self.param_dim)
            e[p] = 1.0
            D = dense(self.stiffness_dir(x, e)) - mu * dense(self.mass_dir(x, e))
            G[:, :, p] = U.T @ D @ V
        return G


class AffinePencil(ParametricPencil):
    """K(x) = K0 + sum x_p K_p,  M(x) = M0 + sum x_p M_p (dense matrices).

    Parameters:
        K0, M0: base matrices (n, n).
        Ks, Ms: stacks (P, n, n) of coefficient matrices; either may be None
            (treated as zeros).
        param_dim: needed only when both stacks are None.
    """

    def __init__(self, K0, M0, Ks=None, Ms=None, param_dim=None):
        self.K0 = np.asarray(K0, dtype=float)
        self.M0 = np.asarray(M0, dtype=float)
        n = self.K0.shape[0]
        P = param_dim
        for S in (Ks, Ms):
            if S is not None:
                P = len(S)
        if P is None:
            raise ArgumentError("param_dim is required when no coefficient matrices are given")
        self.Ks = np.zeros((P, n, n)) if Ks is None else np.asarray(Ks, dtype=float)
        self.Ms = np.zeros((P, n, n)) if Ms is None else np.asarray(Ms, dtype=float)
        if self.Ks.shape != (P, n, n) or self.Ms.shape != (P, n, n):
            raise ArgumentError("coefficient stacks must have shape (P, n, n)")
        self.dim = n
        self.param_dim = P

    def stiffness(self, x):
        return self.K0 + np.tensordot(x, self.Ks, axes=1)

    def mass(self, x):
        return self.M0 + np.tensordot(x, self.Ms, axes=1)

    def stiffness_dir(self, x, h):
        return np.tensordot(h, self.Ks, axes=1)

    def mass_dir(self, x, h):
        return np.tensordot(h, self.Ms, axes=1)

    def form_gradient(self, x, U, mu, V=None):
        U = np.atleast_2d(np.asarray(U, dtype=float).T).T
        V = U if V is None else np.atleast_2d(np.asarray(V, dtype=float).T).T
        D = self.Ks - mu * self.Ms
        return np.einsum("ij,pik,kl->jlp", U, D, V, optimize=True)


@dataclass
class Cluster:
    """Group of numerically coincident eigenvalues with labels start..stop."""

    mu: float
    start: int
    stop: int
    resolved: bool = True

    @property
    def size(self) -> int:
        return self.stop - self.start + 1

    def labels(self) -> range:
        return range(self.start, self.stop + 1)


@dataclass
class ClusteredSpectrum:
    """Lowest eigenpairs of a pencil at a fixed parameter, grouped in clusters.

    ``values[j]`` carries label ``k = j + first_label``; with one zero mode
    ``first_label`` is 0, otherwise 1.
    """

    x: np.ndarray
    values: np.ndarray
    vectors: np.ndarray
    clusters: list
    cluster_tol: float
    first_label: int = 1
    mass_matrix: np.ndarray = field(default=None, repr=False)
    stiffness_matrix: np.ndarray = field(default=None, repr=False)

    @property
    def k_max(self) -> int:
        return len(self.values)

    @property
    def last_label(self) -> int:
        return self.first_label + len(self.values) - 1

    def _check(self, k):
        if not self.first_label <= k <= self.last_label:
            raise ArgumentError(f"eigenvalue label {k} outside [{self.first_label}, {self.last_label}]")

    def value(self, k) -> float:
        self._check(k)
        return float(self.values[k - self.first_label])

    def vector(self, k) -> np.ndarray:
        self._check(k)
        return self.vectors[:, k - self.first_label]

    def cluster_index(self, k) -> int:
        self._check(k)
        for i, c in enumerate(self.clusters):
            if c.start <= k <= c.stop:
                return i
        raise AssertionError("cluster partition broken")

    def position(self, k) -> int:
        """p_k = k - j_{i_k} + 1."""
        return k - self.clusters[self.cluster_index(k)].start + 1

    def frame(self, i) -> np.ndarray:
        c = self.clusters[i]
        return self.vectors[:, c.start - self.first_label:c.stop - self.first_label + 1]

    def nonzero_values(self) -> np.ndarray:
        return self.values[max(0, 1 - self.first_label):]


def group_clusters(values, tol, first_label=1, next_value=None):
    """Split sorted values into clusters of width <= tol*max(1, |mu|)."""
    clusters = []
    start = 0
    for j in range(1, len(values) + 1):
        if j < len(values) and abs(values[j] - values[start]) <= tol * max(1.0, abs(values[start])):
            continue
        mu = float(np.mean(values[start:j]))
        clusters.append(Cluster(mu, start + first_label, j - 1 + first_label))
        start = j
    if clusters and next_value is not None:
        last = clusters[-1]
        v0 = values[last.start - first_label]
        last.resolved = abs(next_value - v0) > tol * max(1.0, abs(v0))
    elif clusters:
        # no eigenvalue beyond k_max exists, so the last cluster is complete
        clusters[-1].resolved = True
    return clusters


def solve_spectrum(pencil: ParametricPencil, x, k_max: int,
                   cluster_tol: float = DEFAULT_CLUSTER_TOL) -> ClusteredSpectrum:
    """Lowest ``k_max`` eigenpairs of (K(x), M(x)) with mass-orthonormal vectors.

    The pencil is reduced through the Cholesky factor of M to a standard
    symmetric problem and solved densely.  One extra eigenvalue is computed
    (when available) to decide whether the last cluster is complete.
    """
    x = np.asarray(x, dtype=float)
    if not isinstance(k_max, (int, np.integer)) or k_max < 1 or k_max > pencil.dim:
        raise ArgumentError(f"k_max must be in [1, {pencil.dim}], got {k_max!r}")
    if x.shape != (pencil.param_dim,):
        raise ArgumentError(f"parameter vector must have length {pencil.param_dim}")
    if not pencil.admissible(x):
        raise InvalidParameterError("parameter is outside the admissible set")
    K_raw, M_raw = pencil.stiffness(x), pencil.mass(x)
    K, M = dense(K_raw), dense(M_raw)
    try:
        L = sl.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InvalidParameterError(f"Cholesky factorization of the mass matrix failed: {exc}") from exc
    A = sl.solve_triangular(L, K, lower=True)
    A = sl.solve_triangular(L, A.T, lower=True)
    A = 0.5 * (A + A.T)
    n_eig = min(k_max + 1, pencil.dim)
    w, Y = sl.eigh(A, subset_by_index=[0, n_eig - 1])
    U = sl.solve_triangular(L.T, Y[:, :k_max], lower=False)
    first = 1 - pencil.zero_modes
    nxt = w[k_max] if n_eig > k_max else None
    clusters = group_clusters(w[:k_max], cluster_tol, first, nxt)
    return ClusteredSpectrum(x.copy(), w[:k_max].copy(), U, clusters, cluster_tol, first, M_raw, K_raw)


def check_fresh(spectrum: ClusteredSpectrum, x):
    if not np.array_equal(np.asarray(x, dtype=float), spectrum.x):
        raise ConsistencyError("spectrum was computed at a different parameter")


def eigen_residuals(spectrum: ClusteredSpectrum) -> np.ndarray:
    """Relative residuals ||K u - lam M u|| / (||K|| ||u||) of all stored pairs."""
    K, M, U = spectrum.stiffness_matrix, spectrum.mass_matrix, spectrum.vectors
    R = K @ U - (M @ U) * spectrum.values
    return np.linalg.norm(R, axis=0) / (spectral_norm(K) * np.linalg.norm(U, axis=0))


def spectral_norm(A) -> float:
    """2-norm of a symmetric matrix (dense or sparse)."""
    if A.shape[0] <= 200:
        return float(np.linalg.norm(dense(A), 2))
    return float(abs(spla.eigsh(A, k=1, which="LM", return_eigenvectors=False)[0]))


def solve_through(pencil: ParametricPencil, x, last_label: int,
                  cluster_tol: float = DEFAULT_CLUSTER_TOL) -> ClusteredSpectrum:
    """Solve far enough that the cluster holding ``last_label`` is complete."""
    k_max = min(pencil.dim, last_label + pencil.zero_modes)
    while True:
        spec = solve_spectrum(pencil, x, k_max, cluster_tol)
        if spec.clusters[-1].resolved or k_max == pencil.dim:
            return spec
        k_max = min(pencil.dim, k_max + 2)
