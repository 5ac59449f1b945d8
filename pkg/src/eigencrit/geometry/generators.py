"""Mesh generators for the sphere, its coordinate pieces, and the flat disk."""
from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from .mesh import SurfaceMesh, chain_edges

MODELS = ("sphere", "half_sphere", "quadrant", "octant", "flat_disk")

# arc name -> index of the coordinate that vanishes on it
PIECE_ARCS = {
    "half_sphere": {"A1": 2},
    "quadrant": {"A1": 1, "A2": 2},
    "octant": {"A1": 0, "A2": 1, "A3": 2},
}


def _icosahedron():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _octahedron_faces(signs_required):
    """Octahedron faces lying in the closed region selected by ``signs_required``.

    ``signs_required`` maps coordinate index -> +1 meaning that coordinate must
    be nonnegative on the face.
    """
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    faces = []
    for sx in (0, 1):
        for sy in (2, 3):
            for sz in (4, 5):
                tri = [sx, sy, sz]
                c = v[tri].sum(axis=0)
                if any(c[ax] * s < 0 for ax, s in signs_required.items()):
                    continue
                n = np.cross(v[sy] - v[sx], v[sz] - v[sx])
                if n @ c < 0:
                    tri = [sx, sz, sy]
                faces.append(tri)
    return v, np.array(faces)


def subdivide_sphere(v, f, level):
    """Split every triangle into four ``level`` times, projecting to the unit sphere."""
    v = [tuple(p) for p in v]
    verts = [np.array(p) for p in v]
    for _ in range(level):
        cache = {}
        new_f = []

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_f += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(new_f)
    return np.array(verts), np.asarray(f)


def icosphere(level: int) -> SurfaceMesh:
    v, f = _icosahedron()
    v, f = subdivide_sphere(v, f, level)
    return SurfaceMesh(v, f, {}, {"generator": "sphere", "level": level})


def sphere_piece(model: str, level: int) -> SurfaceMesh:
    """Geodesic mesh of the half sphere, quadrant or octant (octahedral base)."""
    arcs_def = PIECE_ARCS[model]
    v, f = _octahedron_faces({ax: 1 for ax in arcs_def.values()})
    v, f = subdivide_sphere(v, f, level)
    # drop unused octahedron vertices and renumber
    used = np.unique(f)
    remap = -np.ones(len(v), dtype=np.int64)
    remap[used] = np.arange(len(used))
    v, f = v[used], remap[f]
    v[np.abs(v) < 1e-14] = 0.0
    mesh = SurfaceMesh(v, f, {}, {"generator": model, "level": level})
    be = mesh.boundary_edges()
    arcs = {}
    for name, ax in arcs_def.items():
        on = be[(v[be[:, 0], ax] == 0.0) & (v[be[:, 1], ax] == 0.0)]
        chains = chain_edges(on)
        if len(chains) != 1:
            raise RuntimeError(f"arc {name} of {model} is not a single chain")
        arcs[name] = chains[0]
    mesh.boundary_arcs = arcs
    return mesh.validate()


def flat_disk(level: int, n_arcs: int = 1) -> SurfaceMesh:
    """Unit disk from 2**level concentric rings, ring i carrying 6i vertices.

    The boundary circle is split into ``n_arcs`` arcs of equal vertex count
    (A1, A2, ...); with a single arc the chain is a closed loop.
    """
    n = 2 ** level
    verts = [np.zeros(3)]
    rings = [np.array([0])]
    for i in range(1, n + 1):
        k = 6 * i
        th = 2 * np.pi * np.arange(k) / k
        start = len(verts)
        verts += list(np.column_stack([i / n * np.cos(th), i / n * np.sin(th), np.zeros(k)]))
        rings.append(np.arange(start, start + k))
    verts = np.array(verts)
    tris = []
    for i in range(1, n + 1):
        inner, outer = rings[i - 1], rings[i]
        if i == 1:
            for j in range(6):
                tris.append([0, outer[j], outer[(j + 1) % 6]])
            continue
        ang_in = 2 * np.pi * np.arange(len(inner)) / len(inner)
        ang_out = 2 * np.pi * np.arange(len(outer)) / len(outer)
        a = b = 0
        while a < len(inner) or b < len(outer):
            next_in = ang_in[a + 1] if a + 1 < len(inner) else 2 * np.pi
            next_out = ang_out[b + 1] if b + 1 < len(outer) else 2 * np.pi
            if b < len(outer) and (next_out <= next_in or a >= len(inner)):
                tris.append([inner[a % len(inner)], outer[b], outer[(b + 1) % len(outer)]])
                b += 1
            else:
                tris.append([inner[a % len(inner)], outer[b % len(outer)], inner[(a + 1) % len(inner)]])
                a += 1
    outer = rings[-1]
    if n_arcs < 1 or n_arcs > len(outer):
        raise ArgumentError(f"n_arcs must be in [1, {len(outer)}]")
    if n_arcs == 1:
        arcs = {"A1": np.append(outer, outer[0])}
    else:
        cuts = np.linspace(0, len(outer), n_arcs + 1).round().astype(int)
        loop = np.append(outer, outer[0])
        arcs = {f"A{j + 1}": loop[cuts[j]:cuts[j + 1] + 1] for j in range(n_arcs)}
    mesh = SurfaceMesh(verts, np.array(tris), arcs, {"generator": "flat_disk", "level": level})
    return mesh.validate()


def generate_domain(model: str, level: int, n_arcs: int = 1) -> SurfaceMesh:
    """Build one of the reference domains at refinement ``level`` (0..7)."""
    if model not in MODELS:
        raise ArgumentError(f"unknown model {model!r}; expected one of {', '.join(MODELS)}")
    if not isinstance(level, (int, np.integer)) or level < 0 or level > 7:
        raise ArgumentError(f"invalid level {level!r}; expected an integer in [0, 7]")
    if model == "sphere":
        return icosphere(int(level)).validate()
    if model == "flat_disk":
        return flat_disk(int(level), n_arcs)
    return sphere_piece(model, int(level))
