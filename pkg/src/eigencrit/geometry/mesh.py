"""Triangle surface meshes with labeled boundary arcs, plus OFF(+#ARCS) I/O.

File grammar (one token stream per line, whitespace separated)::

    file     := comment* "OFF" NL counts NL vertex{nv} face{nf} section*
    counts   := nv nf ne                      (ne is ignored, usually 0)
    vertex   := float float float
    face     := "3" int int int
    section  := "#ARCS" n NL arc{n} | "#META" key value NL | comment
    arc      := name k int{k}                 (a vertex chain; closed loops
                                               repeat the first vertex)

Floats are written with ``repr`` so that save followed by load reproduces the
vertex coordinates bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshFormatError


@dataclass
class SurfaceMesh:
    """Oriented manifold triangle mesh.

    Parameters:
        vertices: (n, 3) float array.
        triangles: (t, 3) int array, consistently oriented.
        boundary_arcs: ordered mapping ``name -> vertex chain``. Consecutive
            chain entries are boundary edges; together the arcs cover every
            boundary edge exactly once.
        metadata: free-form tags (``generator``, ``level``).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_arcs: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_arcs = {str(k): np.asarray(v, dtype=np.int64)
                              for k, v in self.boundary_arcs.items()}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    # geometry -------------------------------------------------------------
    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 0.5 * np.linalg.norm(cr, axis=1)

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def vertex_weights(self) -> np.ndarray:
        """Integral of each hat function, i.e. one third of the adjacent area."""
        w = np.zeros(self.n_vertices)
        np.add.at(w, self.triangles.ravel(), np.repeat(self.triangle_areas() / 3.0, 3))
        return w

    # topology -------------------------------------------------------------
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges (a, b) following triangle orientation."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]])
        key = np.sort(e, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return e[counts[inv.ravel()] == 1]

    def has_boundary(self) -> bool:
        return len(self.boundary_edges()) > 0

    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges())

    def boundary_weights(self) -> np.ndarray:
        """Half the length of adjacent boundary edges, per vertex (length n)."""
        be = self.boundary_edges()
        L = np.linalg.norm(self.vertices[be[:, 1]] - self.vertices[be[:, 0]], axis=1)
        w = np.zeros(self.n_vertices)
        np.add.at(w, be.ravel(), np.repeat(0.5 * L, 2))
        return w

    def arc_vertices(self, name) -> np.ndarray:
        return np.unique(self.boundary_arcs[name])

    def corner_vertices(self) -> np.ndarray:
        """Vertices shared by two or more distinct arcs."""
        count = np.zeros(self.n_vertices, dtype=int)
        for name in self.boundary_arcs:
            count[self.arc_vertices(name)] += 1
        return np.flatnonzero(count > 1)

    def validate(self, require_arcs: bool = True) -> "SurfaceMesh":
        """Check manifoldness, orientation, areas and the arc partition."""
        n = self.n_vertices
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshFormatError("malformed_body", "vertices must be an (n, 3) array")
        if self.n_triangles == 0:
            raise MeshFormatError("malformed_body", "mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= n:
            raise MeshFormatError("malformed_body", "triangle index out of range")
        t = self.triangles
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshFormatError("degenerate_triangle", "triangle with repeated vertex")
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        _, dcount = np.unique(e, axis=0, return_counts=True)
        if np.any(dcount > 1):
            raise MeshFormatError("non_manifold",
                                  "directed edge used twice (non-manifold or inconsistent orientation)")
        _, ucount = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        if np.any(ucount > 2):
            raise MeshFormatError("non_manifold", "edge shared by more than two triangles")
        areas = self.triangle_areas()
        if np.any(areas <= 1e-12 * areas.mean()):
            raise MeshFormatError("degenerate_triangle",
                                  f"{int(np.sum(areas <= 1e-12 * areas.mean()))} degenerate triangles")
        be = self.boundary_edges()
        if len(be) and not self.boundary_arcs:
            if require_arcs:
                raise MeshFormatError("unlabeled_boundary", "boundary present but no arcs given")
            self.boundary_arcs = label_boundary_loops(be)
        self._check_arcs(be)
        return self

    def _check_arcs(self, be):
        want = {tuple(sorted(map(int, ed))) for ed in be}
        seen = set()
        for name, chain in self.boundary_arcs.items():
            if len(chain) < 2:
                raise MeshFormatError("bad_arcs", f"arc {name!r} has fewer than 2 vertices")
            for a, b in zip(chain[:-1], chain[1:]):
                ed = (min(int(a), int(b)), max(int(a), int(b)))
                if ed not in want:
                    raise MeshFormatError("bad_arcs", f"arc {name!r} uses non-boundary edge {ed}")
                if ed in seen:
                    raise MeshFormatError("bad_arcs", f"edge {ed} labeled twice")
                seen.add(ed)
        if seen != want:
            raise MeshFormatError("unlabeled_boundary",
                                  f"{len(want - seen)} boundary edges not covered by any arc")


def label_boundary_loops(be) -> dict:
    """Chain directed boundary edges into closed loops named A1, A2, ..."""
    nxt = {int(a): int(b) for a, b in be}
    arcs = {}
    remaining = dict(nxt)
    while remaining:
        start = min(remaining)
        chain = [start]
        v = start
        while True:
            w = remaining.pop(v)
            chain.append(w)
            v = w
            if w == start:
                break
            if w not in remaining:
                raise MeshFormatError("non_manifold", "boundary does not form closed loops")
        arcs[f"A{len(arcs) + 1}"] = np.array(chain)
    return arcs


def chain_edges(edges) -> list:
    """Order an undirected edge set into maximal vertex chains."""
    adj = {}
    for a, b in edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    unused = {tuple(sorted((int(a), int(b)))) for a, b in edges}
    chains = []
    while unused:
        ends = sorted(v for v, nb in adj.items() if len(nb) == 1
                      and any(tuple(sorted((v, w))) in unused for w in nb))
        start = ends[0] if ends else min(v for ed in unused for v in ed)
        chain = [start]
        v = start
        while True:
            nxt = [w for w in sorted(adj[v]) if tuple(sorted((v, w))) in unused]
            if not nxt:
                break
            w = nxt[0]
            unused.discard(tuple(sorted((v, w))))
            chain.append(w)
            v = w
        chains.append(np.array(chain))
    return chains


def save_mesh(mesh: SurfaceMesh, path) -> None:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in t) for t in mesh.triangles]
    if mesh.boundary_arcs:
        lines.append(f"#ARCS {len(mesh.boundary_arcs)}")
        for name, chain in mesh.boundary_arcs.items():
            lines.append(f"{name} {len(chain)} " + " ".join(str(int(i)) for i in chain))
    for key, val in mesh.metadata.items():
        lines.append(f"#META {key} {val}")
    Path(path).write_text("\n".join(lines) + "\n")


def _meta_value(s):
    try:
        return int(s)
    except ValueError:
        return s


def load_mesh(path, require_arcs: bool = False) -> SurfaceMesh:
    """Read an OFF file with optional ``#ARCS`` and ``#META`` sections.

    Without an ``#ARCS`` section each boundary loop becomes one arc, unless
    ``require_arcs`` is set, in which case an unlabeled boundary is an error.
    """
    raw = Path(path).read_text().splitlines()
    lines = [ln.strip() for ln in raw]
    i = 0
    while i < len(lines) and (not lines[i] or (lines[i].startswith("#"))):
        i += 1
    if i >= len(lines) or lines[i] != "OFF":
        raise MeshFormatError("malformed_header", "first non-comment line must be 'OFF'")
    i += 1
    while i < len(lines) and (not lines[i] or lines[i].startswith("#")):
        i += 1
    try:
        counts = [int(tok) for tok in lines[i].split()]
        if len(counts) != 3 or counts[0] < 0 or counts[1] < 0:
            raise ValueError
    except (ValueError, IndexError):
        raise MeshFormatError("malformed_header", "counts line must be 'nv nf ne' with nv, nf >= 0")
    nv, nf = counts[0], counts[1]
    body = []
    tail_start = None
    for j in range(i + 1, len(lines)):
        if len(body) == nv + nf:
            tail_start = j
            break
        if not lines[j] or lines[j].startswith("#"):
            continue
        body.append(lines[j])
    if len(body) < nv + nf:
        raise MeshFormatError("malformed_header", f"expected {nv} vertices and {nf} faces, file too short")
    try:
        verts = np.array([[float(t) for t in ln.split()] for ln in body[:nv]], dtype=float)
        faces = []
        for ln in body[nv:]:
            tok = [int(t) for t in ln.split()]
            if tok[0] != 3 or len(tok) < 4:
                raise MeshFormatError("malformed_body", "only triangular faces are supported")
            faces.append(tok[1:4])
    except ValueError:
        raise MeshFormatError("malformed_body", "non-numeric vertex or face entry")
    if nv and verts.shape[1] != 3:
        raise MeshFormatError("malformed_body", "vertex lines must have 3 coordinates")
    arcs, meta = {}, {}
    j = tail_start if tail_start is not None else len(lines)
    while j < len(lines):
        ln = lines[j]
        j += 1
        if ln.startswith("#ARCS"):
            parts = ln.split()
            try:
                na = int(parts[1])
            except (IndexError, ValueError):
                raise MeshFormatError("bad_arcs", "'#ARCS' must be followed by an arc count")
            for _ in range(na):
                if j >= len(lines):
                    raise MeshFormatError("bad_arcs", "fewer arc lines than announced")
                tok = lines[j].split()
                j += 1
                try:
                    k = int(tok[1])
                    chain = [int(t) for t in tok[2:]]
                except (IndexError, ValueError):
                    raise MeshFormatError("bad_arcs", f"malformed arc line {lines[j - 1]!r}")
                if len(chain) != k:
                    raise MeshFormatError("bad_arcs", f"arc {tok[0]!r} announces {k} vertices, has {len(chain)}")
                arcs[tok[0]] = chain
        elif ln.startswith("#META"):
            parts = ln.split(maxsplit=2)
            if len(parts) == 3:
                meta[parts[1]] = _meta_value(parts[2])
    mesh = SurfaceMesh(verts.reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3), arcs, meta)
    return mesh.validate(require_arcs=require_arcs)
