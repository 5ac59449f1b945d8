"""Closed-form spectra of the reference domains.

On the sphere and its coordinate pieces the eigenfunctions are spherical
harmonics of degree l (eigenvalue l(l+1)).  A Dirichlet arc lying in the plane
{x_a = 0} selects harmonics odd in x_a and a Neumann arc selects even ones, so
multiplicities follow from counting harmonic polynomials by parity:
dim H_l = dim P_l - dim P_{l-2} within each parity class.
"""
from __future__ import annotations

import numpy as np
from scipy.special import jn_zeros, jnp_zeros

from ..errors import NoClosedFormError
from .generators import PIECE_ARCS


def _count_monomials(l, parity):
    if l < 0:
        return 0
    n = 0
    for i in range(l + 1):
        for j in range(l + 1 - i):
            e = (i, j, l - i - j)
            if all(e[ax] % 2 == par for ax, par in parity.items()):
                n += 1
    return n


def _harmonic_multiplicity(l, parity):
    return _count_monomials(l, parity) - _count_monomials(l - 2, parity)


def _normalize_bc(model, bc):
    arcs = PIECE_ARCS.get(model, {})
    if bc is None or bc in ("neumann", "N"):
        return {a: "neumann" for a in arcs}
    if bc in ("dirichlet", "D"):
        return {a: "dirichlet" for a in arcs}
    if isinstance(bc, str):
        out = {}
        for item in bc.split(","):
            a, _, k = item.partition("=")
            out[a.strip()] = {"D": "dirichlet", "N": "neumann"}.get(k.strip(), k.strip())
        bc = out
    conds = getattr(bc, "conditions", bc)
    if set(conds) != set(arcs):
        raise NoClosedFormError(f"boundary conditions {conds} do not match arcs of {model}")
    return dict(conds)


def reference_spectrum(model: str, bc=None, k_max: int = 10) -> np.ndarray:
    """First ``k_max`` eigenvalues (with multiplicity, zero mode included)."""
    if model == "sphere" and bc in (None, "neumann", "N"):
        parity = {}
    elif model in PIECE_ARCS:
        conds = _normalize_bc(model, bc)
        parity = {PIECE_ARCS[model][a]: (1 if k == "dirichlet" else 0) for a, k in conds.items()}
    elif model == "flat_disk":
        return _disk_spectrum(bc, k_max)
    else:
        raise NoClosedFormError(f"no closed form for model {model!r} with bc {bc!r}")
    vals = []
    l = 0
    while len(vals) < k_max:
        vals += [l * (l + 1.0)] * _harmonic_multiplicity(l, parity)
        l += 1
    return np.array(vals[:k_max])


def _disk_spectrum(bc, k_max):
    if bc == "steklov":
        return np.array([float((k + 1) // 2) for k in range(k_max)])
    if bc in ("dirichlet", "D", "neumann", "N", None):
        zeros = jn_zeros if bc in ("dirichlet", "D") else jnp_zeros
        vals = [] if bc in ("dirichlet", "D") else [0.0]
        for m in range(k_max + 1):
            z = zeros(m, k_max + 1) ** 2
            vals += list(z) * (1 if m == 0 else 2)
        return np.sort(np.array(vals))[:k_max]
    raise NoClosedFormError(f"no closed form for flat_disk with bc {bc!r}")
