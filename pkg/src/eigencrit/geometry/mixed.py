"""Families of pencils sharing one density but differing in boundary conditions.

Inverse-eigenvalue sums on the sphere and its coordinate pieces combine
eigenvalues of several boundary problems; ``MixedFamily`` keeps the pencils
together and ``HERSCH_SETUPS`` records which eigenvalues enter each sum.
"""
from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from ..functionals import ScalingSpec
from ..pencil import DEFAULT_CLUSTER_TOL, solve_through
from .pencils import BoundaryConditionSpec, ConformalLaplacePencil

# model -> (list of (member, label), target value)
HERSCH_SETUPS = {
    "sphere": ([("N", 1), ("N", 2), ("N", 3)], 3.0 / (8.0 * np.pi)),
    "half_sphere": ([("D", 1), ("N", 1), ("N", 2)], 3.0 / (4.0 * np.pi)),
    "quadrant": ([("A1", 1), ("A2", 1), ("N", 1)], 3.0 / (2.0 * np.pi)),
    "octant": ([("A1", 1), ("A2", 1), ("A3", 1)], 3.0 / np.pi),
}


class MixedFamily:
    """Laplace pencils on one mesh, keyed by member name.

    Member names: ``N`` (all Neumann), ``D`` (all Dirichlet) or an arc name
    (Dirichlet on that arc, Neumann elsewhere).
    """

    def __init__(self, mesh, members):
        self.mesh = mesh
        self.pencils = {}
        for name in members:
            if name == "N":
                bc = BoundaryConditionSpec.neumann(mesh)
            elif name == "D":
                bc = BoundaryConditionSpec.dirichlet(mesh)
            elif name in mesh.boundary_arcs:
                bc = BoundaryConditionSpec.dirichlet_on(mesh, [name])
            else:
                raise ArgumentError(f"unknown family member {name!r}")
            self.pencils[name] = ConformalLaplacePencil(mesh, bc)
        self.param_dim = mesh.n_vertices

    def scaling(self) -> ScalingSpec:
        """Total mass of the density, shared by every member."""
        return ScalingSpec.density(self.mesh.vertex_weights(), 1.0)

    def param_weights(self):
        return self.mesh.vertex_weights()

    def spectra(self, beta, entries, cluster_tol=DEFAULT_CLUSTER_TOL):
        need = {}
        for member, k in entries:
            need[member] = max(need.get(member, 0), k)
        return {m: solve_through(self.pencils[m], beta, k, cluster_tol) for m, k in need.items()}

    def normalized_entries(self, beta, entries, spectra=None):
        spectra = spectra or self.spectra(beta, entries)
        sc = self.scaling().value(beta)
        return np.array([sc * spectra[m].value(k) for m, k in entries]), spectra


# disks carry the setup of the sphere piece with the same number of arcs
DISK_SETUPS = {1: "half_sphere", 2: "quadrant", 3: "octant"}


def hersch_setup_key(model, mesh):
    if model == "flat_disk":
        key = DISK_SETUPS.get(len(mesh.boundary_arcs))
        if key is None:
            raise ArgumentError("flat_disk inverse sums need 1, 2 or 3 boundary arcs")
        return key
    return model


def hersch_family(model, mesh):
    model = hersch_setup_key(model, mesh)
    if model not in HERSCH_SETUPS:
        raise ArgumentError(f"no inverse-eigenvalue sum defined for model {model!r}")
    entries, target = HERSCH_SETUPS[model]
    family = MixedFamily(mesh, sorted({m for m, _ in entries}))
    return family, entries, target


def hersch_value(model, mesh, beta=None, cluster_tol=DEFAULT_CLUSTER_TOL):
    """Inverse-eigenvalue sum of the model, with its target and deviation."""
    family, entries, target = hersch_family(model, mesh)
    beta = np.ones(mesh.n_vertices) if beta is None else np.asarray(beta, dtype=float)
    lam_bar, _ = family.normalized_entries(beta, entries, family.spectra(beta, entries, cluster_tol))
    value = float(np.sum(1.0 / lam_bar))
    return {"value": value, "target": target, "relative_deviation": value / target - 1.0,
            "setup": hersch_setup_key(model, mesh),
            "normalized_eigenvalues": lam_bar.tolist(),
            "entries": [f"{m}:{k}" for m, k in entries]}
