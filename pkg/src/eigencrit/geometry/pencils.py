"""Conformal-class Laplace and Steklov pencils on triangle meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ArgumentError
from ..functionals import ScalingSpec
from ..pencil import ParametricPencil
from .fem import cotan_stiffness, mass_gradient, mass_matrix

DENSITY_FLOOR = 1e-10


@dataclass
class BoundaryConditionSpec:
    """Per-arc boundary condition, ``'dirichlet'`` or ``'neumann'``."""

    conditions: dict

    @classmethod
    def neumann(cls, mesh):
        return cls({name: "neumann" for name in mesh.boundary_arcs})

    @classmethod
    def dirichlet(cls, mesh):
        if not mesh.boundary_arcs:
            raise ArgumentError("Dirichlet condition requested on a closed mesh")
        return cls({name: "dirichlet" for name in mesh.boundary_arcs})

    @classmethod
    def dirichlet_on(cls, mesh, arcs):
        arcs = set(arcs)
        unknown = arcs - set(mesh.boundary_arcs)
        if unknown:
            raise ArgumentError(f"unknown arcs {sorted(unknown)}")
        return cls({name: "dirichlet" if name in arcs else "neumann" for name in mesh.boundary_arcs})

    @classmethod
    def parse(cls, mesh, text):
        """``neumann``, ``dirichlet``, or a list such as ``A1=D,A2=N``."""
        if text is None or text in ("neumann", "N"):
            if text in ("neumann", "N") or mesh.boundary_arcs:
                return cls.neumann(mesh)
            return cls({})
        if text in ("dirichlet", "D"):
            return cls.dirichlet(mesh)
        cond = {}
        for item in text.split(","):
            name, _, kind = item.partition("=")
            kind = {"D": "dirichlet", "N": "neumann"}.get(kind.strip(), kind.strip())
            if name.strip() in cond:
                raise ArgumentError(f"arc {name.strip()!r} assigned twice")
            cond[name.strip()] = kind
        return cls(cond).validate(mesh)

    def validate(self, mesh):
        arcs = set(mesh.boundary_arcs)
        if set(self.conditions) != arcs:
            raise ArgumentError(f"boundary conditions must assign every arc exactly once: "
                                f"got {sorted(self.conditions)}, mesh has {sorted(arcs)}")
        for name, kind in self.conditions.items():
            if kind not in ("dirichlet", "neumann"):
                raise ArgumentError(f"arc {name!r}: unknown condition {kind!r}")
        return self

    def dirichlet_arcs(self):
        return sorted(n for n, k in self.conditions.items() if k == "dirichlet")


def _check_density(beta, n, what="density"):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (n,):
        raise ArgumentError(f"{what} must have length {n}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)) or beta.min() <= DENSITY_FLOOR:
        raise ArgumentError(f"{what} must be strictly positive (min > {DENSITY_FLOOR:g})")
    return beta


class ConformalLaplacePencil(ParametricPencil):
    """Dirichlet energy over the weighted L^2 norm with density beta.

    Degrees of freedom are the vertices not lying on a Dirichlet arc;
    the parameter is the density at every vertex.
    """

    def __init__(self, mesh, bc: BoundaryConditionSpec | None = None):
        if bc is None:
            bc = BoundaryConditionSpec.neumann(mesh)
        if bc.dirichlet_arcs() and not mesh.has_boundary():
            raise ArgumentError("Dirichlet condition requested on a closed mesh")
        self.mesh = mesh
        self.bc = bc.validate(mesh)
        fixed = np.zeros(mesh.n_vertices, dtype=bool)
        for name in bc.dirichlet_arcs():
            fixed[mesh.arc_vertices(name)] = True
        self.constrained = np.flatnonzero(fixed)
        self.free = np.flatnonzero(~fixed)
        self.dim = len(self.free)
        self.param_dim = mesh.n_vertices
        self.zero_modes = 0 if len(self.constrained) else 1
        self.stiffness_full = cotan_stiffness(mesh)
        self._K = self.stiffness_full[self.free][:, self.free].tocsr()
        self._weights = mesh.vertex_weights()

    def _restrict(self, A):
        return A[self.free][:, self.free].tocsr()

    def stiffness(self, x):
        return self._K

    def mass(self, x):
        return self._restrict(mass_matrix(self.mesh, x))

    def stiffness_dir(self, x, h):
        return sp.csr_matrix((self.dim, self.dim))

    def mass_dir(self, x, h):
        return self.mass(h)

    def admissible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and x.min() > DENSITY_FLOOR)

    def param_weights(self):
        return self._weights

    def scaling(self, p=1.0) -> ScalingSpec:
        """L^p norm of the density, the natural scale for this pencil."""
        return ScalingSpec.density(self._weights, p)

    def expand(self, U) -> np.ndarray:
        """Extend free-vertex vectors by zero to all vertices."""
        U = np.asarray(U, dtype=float)
        out = np.zeros((self.mesh.n_vertices,) + U.shape[1:])
        out[self.free] = U
        return out

    def form_gradient(self, x, U, mu, V=None):
        U = np.atleast_2d(np.asarray(U, dtype=float).T).T
        V = U if V is None else np.atleast_2d(np.asarray(V, dtype=float).T).T
        return -mu * mass_gradient(self.mesh, self.expand(U), self.expand(V))


class SteklovPencil(ParametricPencil):
    """Discrete Dirichlet-to-Neumann form over a boundary density.

    Degrees of freedom and parameters both live on the boundary vertices
    (in increasing vertex order, see ``boundary``).
    """

    def __init__(self, mesh):
        if not mesh.has_boundary():
            raise ArgumentError("Steklov problem needs a mesh with boundary (no boundary found)")
        self.mesh = mesh
        n = mesh.n_vertices
        self.boundary = mesh.boundary_vertices()
        mask = np.zeros(n, dtype=bool)
        mask[self.boundary] = True
        self.interior = np.flatnonzero(~mask)
        K = cotan_stiffness(mesh).tocsr()
        b, i = self.boundary, self.interior
        self.K_bb = K[b][:, b].toarray()
        self.K_bi = K[b][:, i].tocsr()
        self.K_ii = K[i][:, i].tocsc()
        self._lu = spla.splu(self.K_ii) if len(i) else None
        if self._lu is not None:
            X = self._lu.solve(self.K_bi.T.toarray())
            S = self.K_bb - self.K_bi @ X
        else:
            S = self.K_bb
        self._S = 0.5 * (S + S.T)
        self._weights = mesh.boundary_weights()[b]
        self.dim = len(b)
        self.param_dim = len(b)
        self.zero_modes = 1

    def stiffness(self, x):
        return self._S

    def mass(self, x):
        return np.diag(self._weights * np.asarray(x, dtype=float))

    def stiffness_dir(self, x, h):
        return np.zeros((self.dim, self.dim))

    def mass_dir(self, x, h):
        return self.mass(h)

    def admissible(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.isfinite(x)) and x.min() > DENSITY_FLOOR)

    def param_weights(self):
        return self._weights

    def scaling(self, p=1.0) -> ScalingSpec:
        return ScalingSpec.density(self._weights, p)

    def harmonic_extension(self, U) -> np.ndarray:
        """Discrete harmonic extension of boundary values to all vertices."""
        U = np.asarray(U, dtype=float)
        out = np.zeros((self.mesh.n_vertices,) + U.shape[1:])
        out[self.boundary] = U
        if self._lu is not None:
            rhs = -(self.K_bi.T @ U)
            out[self.interior] = self._lu.solve(rhs) if rhs.ndim == 1 else self._lu.solve(np.asarray(rhs))
        return out

    def form_gradient(self, x, U, mu, V=None):
        U = np.atleast_2d(np.asarray(U, dtype=float).T).T
        V = U if V is None else np.atleast_2d(np.asarray(V, dtype=float).T).T
        return -mu * np.einsum("pj,pl,p->jlp", U, V, self._weights)


def assemble_conformal_laplace(mesh, beta=None, bc=None) -> ConformalLaplacePencil:
    """Pencil of the Laplacian in the conformal class of the mesh metric.

    ``beta`` is optional and only validated here (the pencil is parametric).
    """
    pencil = ConformalLaplacePencil(mesh, bc)
    if beta is not None:
        _check_density(beta, mesh.n_vertices)
    return pencil


def assemble_steklov(mesh, beta_boundary=None) -> SteklovPencil:
    pencil = SteklovPencil(mesh)
    if beta_boundary is not None:
        _check_density(beta_boundary, pencil.dim, "boundary density")
    return pencil
