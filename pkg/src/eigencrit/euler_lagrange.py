"""Candidate eigenmaps for critical densities and the residuals of their identities.

At a critical density the rescaled eigenfunctions phi_k of the consumed
clusters satisfy, with signs eps_k and c = sign(sum_k d_k lam_k),

    sum_k eps_k lam_k phi_k^2 = c * rho / sc      (quadric identity)

where rho is the pointwise density of the scaling gradient (1 for the total
mass), and sum_k eps_k dphi_k (x) dphi_k is pure trace (conformality).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .derivatives import consumed_clusters, normalized_values
from .errors import ArgumentError, ValidationError
from .geometry.fem import triangle_gradients
from .geometry.pencils import ConformalLaplacePencil, SteklovPencil
from .mixing import MixResult, WeightedFrameCombo, majorization_check, mix_frames
from .pencil import check_fresh, dense

EPS_ZERO = 1e-12


@dataclass
class QuadricMap:
    """Eigenmap columns with their signs, eigenvalues and mixed weights.

    ``Phi`` holds the columns in the pencil's degrees of freedom,
    ``Phi_vertices`` the same columns as fields on all mesh vertices
    (zero-extended or harmonically extended).  ``vanishing`` lists, per column,
    the boundary arcs on which the column is constrained to vanish.
    """

    labels: list
    Lambda: np.ndarray
    eps: np.ndarray
    c: float
    d_mix: np.ndarray
    Phi: np.ndarray
    S: float
    sc: float
    rho: np.ndarray
    Phi_vertices: np.ndarray | None = None
    vanishing: list = field(default_factory=list)
    members: list = field(default_factory=list)
    mixture: str = "identity"
    heuristic: bool = False
    rows: np.ndarray | None = None

    @property
    def empty(self) -> bool:
        return not np.any(self.eps)

    def target(self) -> np.ndarray:
        return self.c * self.rho / self.sc


def _sign(v, ref):
    return np.where(np.abs(v) <= EPS_ZERO * ref, 0.0, np.sign(v))


def _project_permutohedron(target, d):
    """Closest point to ``target`` in the permutohedron of d (small QP)."""
    target = np.asarray(target, dtype=float)
    ok, _ = majorization_check(target, d)
    if ok:
        return target
    order = np.argsort(-target, kind="stable")
    ds = np.sort(d)[::-1]
    m = len(d)
    cons = [{"type": "eq", "fun": lambda y: y.sum() - ds.sum()}]
    for j in range(1, m):
        cons.append({"type": "ineq", "fun": lambda y, j=j: ds[:j].sum() - y[:j].sum()})
        cons.append({"type": "ineq", "fun": lambda y, j=j: y[j - 1] - y[j]})
    t = target[order]
    res = minimize(lambda y: np.sum((y - t) ** 2), np.full(m, ds.mean()),
                   jac=lambda y: 2 * (y - t), constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 200})
    out = np.empty(m)
    out[order] = res.x
    return out


class _ClusterBlock:
    def __init__(self, labels, lam, U, d, vanishing, member):
        self.labels, self.lam, self.U, self.d = labels, lam, U, np.asarray(d, dtype=float)
        self.vanishing, self.member = vanishing, member


def _build_map(blocks, S, sc, rho, mixture, to_vertices, weights_v, rows=None):
    """Mix each cluster, rescale columns and assemble the QuadricMap."""
    heuristic = False
    mixes = []
    if mixture == "search":
        heuristic = True
        best = None
        for mode in ("identity", "uniform", "fit"):
            m = _build_map(blocks, S, sc, rho, mode, to_vertices, weights_v, rows)
            r = _quadric_sup(m)
            if best is None or r < best[0]:
                best = (r, m)
        best[1].mixture = "search:" + best[1].mixture
        best[1].heuristic = True
        return best[1]
    if mixture == "fit" and S == 0:
        mixture = "identity"
    fit_W = _fit_mixture(blocks, S, sc, rho, to_vertices, weights_v, rows) if mixture == "fit" else None
    for b, blk in enumerate(blocks):
        if isinstance(mixture, dict):
            combo = mixture.get(b, WeightedFrameCombo.identity(blk.d))
            combo = WeightedFrameCombo(combo.weights_t, combo.frames, blk.d)
            mixes.append(mix_frames(combo))
        elif mixture == "identity":
            mixes.append(mix_frames(WeightedFrameCombo.identity(blk.d)))
        elif mixture == "uniform":
            mixes.append(mix_frames(WeightedFrameCombo.cyclic_average(blk.d)))
        elif mixture == "fit":
            heuristic = True
            omega, O = np.linalg.eigh(fit_W[b])
            d_mix = _project_permutohedron(omega * abs(S), blk.d)
            order = np.argsort(-d_mix, kind="stable")
            mixes.append(MixResult(d_mix[order], O[:, order], None))
        else:
            raise ArgumentError(f"unknown mixture {mixture!r}")
    labels, lam, dm, cols, van, mem = [], [], [], [], [], []
    for blk, mx in zip(blocks, mixes):
        u = blk.U @ mx.frame
        for j in range(len(blk.labels)):
            labels.append(blk.labels[j])
            lam.append(blk.lam[j])
            dm.append(mx.d_mix[j])
            cols.append(u[:, j])
            van.append(blk.vanishing)
            mem.append(blk.member)
    dm = np.array(dm)
    ref = np.abs(dm).max(initial=0.0)
    eps = _sign(dm, ref)
    if ref == 0:
        warnings.warn("all mixed weights vanish; the eigenmap is empty", RuntimeWarning)
    scale = np.sqrt(np.abs(dm) / abs(S)) if S != 0 else np.sqrt(np.abs(dm))
    Phi_v = np.column_stack([to_vertices(col, m) for col, m in zip(cols, mem)]) * scale
    same_space = all(m == mem[0] for m in mem)
    Phi = np.column_stack(cols) * scale if same_space else None
    if mem[0] is not None:
        labels = list(zip(mem, labels))
    return QuadricMap(labels, np.array(lam), eps, float(np.sign(S)), dm, Phi, S, sc, rho,
                      Phi_v, van, mem, mixture if isinstance(mixture, str) else "custom", heuristic, rows)


def _fit_mixture(blocks, S, sc, rho, to_vertices, w, rows=None):
    """Symmetric block weights W_b fitting the quadric identity in least squares.

    With u the cluster frame, sum_k eps_k phi_k^2 = diag(u W u^T) where
    W = O diag(d_mix / |S|) O^T, so the identity is linear in the entries of W.
    """
    rows = np.arange(len(rho)) if rows is None else rows
    target = np.sign(S) * rho[rows] / sc
    w = w[rows]
    feats, index = [], []
    for b, blk in enumerate(blocks):
        Uv = np.column_stack([to_vertices(blk.U[:, j], blk.member) for j in range(blk.U.shape[1])])[rows]
        lam = float(np.mean(blk.lam))
        for j in range(Uv.shape[1]):
            for l in range(j, Uv.shape[1]):
                feats.append(lam * Uv[:, j] * Uv[:, l] * (1.0 if j == l else 2.0))
                index.append((b, j, l))
    sw = np.sqrt(w)
    coef = np.linalg.lstsq(np.column_stack(feats) * sw[:, None], target * sw, rcond=None)[0]
    Ws = [np.zeros((len(blk.labels), len(blk.labels))) for blk in blocks]
    for (b, j, l), v in zip(index, coef):
        Ws[b][j, l] = Ws[b][l, j] = v
    return Ws


def _quadric_sup(qmap):
    r = _quadric_values(qmap, qmap.rows)
    return float(np.abs(r).max())


def _quadric_values(qmap, rows=None):
    P = qmap.Phi_vertices if rows is None else qmap.Phi_vertices[rows]
    rho = qmap.rho if rows is None else qmap.rho[rows]
    return (P ** 2) @ (qmap.eps * qmap.Lambda) - qmap.c * rho / qmap.sc


def _pencil_to_vertices(pencil):
    if isinstance(pencil, ConformalLaplacePencil):
        return lambda u, _m=None: pencil.expand(u)
    if isinstance(pencil, SteklovPencil):
        return lambda u, _m=None: pencil.harmonic_extension(u)
    return lambda u, _m=None: np.asarray(u, dtype=float)


def _rho_vertices(pencil, scaling, x):
    rho = scaling.density_of_gradient(x)
    if isinstance(pencil, SteklovPencil):
        full = np.zeros(pencil.mesh.n_vertices)
        full[pencil.boundary] = rho
        return full
    return rho


def assemble_el_candidate(pencil, spectrum, combo, scaling, x, mixture="identity") -> QuadricMap:
    """Rescaled eigenmap for the combination at x.

    ``mixture`` selects the frame mixture per cluster: ``identity`` (single
    frame), ``uniform`` (average over cyclic permutations), ``fit`` (least
    squares on the quadric identity, projected onto the admissible mixed
    weights), ``search`` (best of the previous three) or a dict mapping the
    block index to a WeightedFrameCombo.  ``fit`` and ``search`` are
    heuristics and flagged as such.
    """
    check_fresh(spectrum, x)
    lam_bar = normalized_values(spectrum, scaling, x, combo.N)
    d = np.asarray(combo.partials(lam_bar), dtype=float)
    S = float(sum(d[k - 1] * spectrum.value(k) for k in range(1, combo.N + 1)))
    blocks = []
    for i in consumed_clusters(spectrum, combo.N):
        c = spectrum.clusters[i]
        labels = list(c.labels())
        w = [d[k - 1] if k <= combo.N else 0.0 for k in labels]
        lam = [spectrum.value(k) for k in labels]
        blocks.append(_ClusterBlock(labels, lam, spectrum.frame(i), w, [], None))
    rho = _rho_vertices(pencil, scaling, x)
    to_v = _pencil_to_vertices(pencil)
    if isinstance(pencil, SteklovPencil):
        rows, wv = pencil.boundary, pencil.mesh.boundary_weights()
    else:
        rows, wv = None, _vertex_weights(pencil, len(rho))
    return _build_map(blocks, S, scaling.value(x), rho, mixture, to_v, wv, rows)


def _vertex_weights(pencil, n):
    mesh = getattr(pencil, "mesh", None)
    if mesh is None:
        return np.ones(n)
    return mesh.vertex_weights()


def assemble_mixed_candidate(family, beta, entries, combo, mixture="identity", spectra=None) -> QuadricMap:
    """Eigenmap for a combination of eigenvalues drawn from several boundary problems.

    ``entries[n] = (member, label)`` says which eigenvalue enters slot n+1 of
    the combination.  Columns are zero-extended to all vertices and remember
    the arcs on which their boundary problem imposes vanishing.
    """
    beta = np.asarray(beta, dtype=float)
    if len(entries) != combo.N:
        raise ArgumentError("combination size does not match the number of entries")
    lam_bar, spectra = family.normalized_entries(beta, entries, spectra)
    d = np.asarray(combo.partials(lam_bar), dtype=float)
    S = float(sum(d[n] * spectra[m].value(k) for n, (m, k) in enumerate(entries)))
    weight = {}
    for n, (m, k) in enumerate(entries):
        weight[(m, k)] = weight.get((m, k), 0.0) + d[n]
    blocks = []
    for m, spec in sorted(spectra.items()):
        used = {spec.cluster_index(k) for (mm, k) in weight if mm == m}
        for i in sorted(used):
            c = spec.clusters[i]
            labels = list(c.labels())
            w = [weight.get((m, k), 0.0) for k in labels]
            lam = [spec.value(k) for k in labels]
            van = family.pencils[m].bc.dirichlet_arcs()
            blocks.append(_ClusterBlock(labels, lam, spec.frame(i), w, van, m))
    scaling = family.scaling()
    rho = scaling.density_of_gradient(beta)
    to_v = lambda u, m: family.pencils[m].expand(u)
    return _build_map(blocks, S, scaling.value(beta), rho, mixture, to_v, family.mesh.vertex_weights())


@dataclass
class Residual:
    sup: float
    l2: float
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.sup <= self.tol

    def to_dict(self):
        return {"sup": self.sup, "l2": self.l2, "scale": self.scale, "tol": self.tol, "pass": self.passed}


@dataclass
class ResidualReport:
    mode: str
    residuals: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residuals.values())

    def to_dict(self):
        return {"mode": self.mode, "pass": self.passed,
                "residuals": {k: r.to_dict() for k, r in self.residuals.items()}}


DEFAULT_TOLS = {"quadric": 1e-2, "conformality": 2e-2, "harmonicity": 1e-8,
                "dirichlet_vanishing": 1e-12, "neumann_normal": 1e-6}


def _quadric_scale(qmap):
    if qmap.c != 0:
        return abs(qmap.c) / qmap.sc
    P = qmap.Phi_vertices
    return float(np.max(np.abs(qmap.Lambda) * np.abs(P).max(axis=0) ** 2)) or 1.0


def _quadric_residual(qmap, rows, weights, tol):
    r = _quadric_values(qmap, rows)
    scale = _quadric_scale(qmap)
    l2 = np.sqrt(np.sum(weights * r ** 2) / np.sum(weights))
    return Residual(float(np.abs(r).max()) / scale, float(l2) / scale, scale, tol)


def conformality_residual(mesh, Phi, eps, tol=DEFAULT_TOLS["conformality"]) -> Residual:
    """Traceless part of sum eps_k dphi_k (x) dphi_k relative to the energy density."""
    g = triangle_gradients(mesh, Phi)        # (T, 2, J)
    T = np.einsum("tak,tbk,k->tab", g, g, eps)
    e = 0.5 * np.trace(T, axis1=1, axis2=2)
    dev = np.sqrt(0.5 * (T[:, 0, 0] - T[:, 1, 1]) ** 2 + 2.0 * T[:, 0, 1] ** 2)
    ae = np.abs(e)
    floor = 1e-12 * ae.max(initial=0.0) or 1e-300
    rel = dev / np.maximum(ae, floor)
    area = mesh.triangle_areas()
    l2 = np.sqrt(np.sum(area * dev ** 2) / max(np.sum(area * ae ** 2), 1e-300))
    return Residual(float(rel.max()), float(l2), float(ae.max(initial=0.0)), tol)


def el_residual(qmap: QuadricMap, pencil, mesh, x, mode="conformal_class", tols=None) -> ResidualReport:
    """Residuals of the critical-point identities for a candidate eigenmap.

    Modes: ``conformal_class`` (quadric identity at all vertices),
    ``trace_identity`` (conformality per triangle), ``steklov`` (quadric
    identity on boundary vertices plus harmonicity of the extension) and
    ``mixed_bc`` (quadric and conformality plus vanishing on Dirichlet arcs and
    normal derivatives on the remaining arcs).  For ``mixed_bc`` the
    ``pencil`` argument is the MixedFamily.
    """
    tols = {**DEFAULT_TOLS, **(tols or {})}
    res = {}
    wv = mesh.vertex_weights()
    if mode == "conformal_class":
        res["quadric"] = _quadric_residual(qmap, None, wv, tols["quadric"])
    elif mode == "trace_identity":
        res["conformality"] = conformality_residual(mesh, qmap.Phi_vertices, qmap.eps, tols["conformality"])
    elif mode == "steklov":
        if not isinstance(pencil, SteklovPencil) or not mesh.has_boundary():
            raise ArgumentError("steklov mode needs a Steklov pencil on a mesh with boundary")
        b = pencil.boundary
        res["quadric"] = _quadric_residual(qmap, b, mesh.boundary_weights()[b], tols["quadric"])
        full = qmap.Phi_vertices
        if len(pencil.interior):
            r = pencil.K_ii @ full[pencil.interior] + pencil.K_bi.T @ full[b]
            ref = np.abs(pencil.K_bi.T @ full[b]).max() or 1.0
            res["harmonicity"] = Residual(float(np.abs(r).max() / ref),
                                          float(np.linalg.norm(r) / ref), float(ref), tols["harmonicity"])
    elif mode == "mixed_bc":
        if not mesh.has_boundary():
            raise ArgumentError("mixed_bc mode needs a mesh with boundary")
        res["quadric"] = _quadric_residual(qmap, None, wv, tols["quadric"])
        res["conformality"] = conformality_residual(mesh, qmap.Phi_vertices, qmap.eps, tols["conformality"])
        res.update(_mixed_boundary_residuals(qmap, pencil, mesh, x, tols))
    else:
        raise ArgumentError(f"unknown residual mode {mode!r}")
    return ResidualReport(mode, res)


def _mixed_boundary_residuals(qmap, family, mesh, beta, tols):
    from .geometry.fem import mass_matrix
    Phi = qmap.Phi_vertices
    van = 0.0
    for j, arcs in enumerate(qmap.vanishing):
        for a in arcs:
            van = max(van, float(np.abs(Phi[mesh.arc_vertices(a), j]).max()))
    scale_phi = float(np.abs(Phi).max()) or 1.0
    out = {"dirichlet_vanishing": Residual(van / scale_phi, van / scale_phi, scale_phi,
                                           tols["dirichlet_vanishing"])}
    K = next(iter(family.pencils.values())).stiffness_full
    M = mass_matrix(mesh, beta)
    bw = mesh.boundary_weights()
    flux = (K @ Phi - (M @ Phi) * qmap.Lambda)
    bverts = mesh.boundary_vertices()
    flux_b = flux[bverts] / bw[bverts, None]
    scale = float(np.abs(flux_b).max()) or 1.0
    corners = set(mesh.corner_vertices().tolist())
    worst, acc, cnt = 0.0, 0.0, 0
    for a in mesh.boundary_arcs:
        keep = np.array([a not in arcs for arcs in qmap.vanishing])
        if not keep.any():
            continue
        for v in mesh.arc_vertices(a):
            if int(v) in corners:
                continue
            f = flux[v, keep] / bw[v]
            g = (qmap.Lambda * Phi[v])[keep]
            gn = g @ g
            perp = f - (f @ g / gn) * g if gn > 0 else f
            r = float(np.linalg.norm(perp))
            worst = max(worst, r)
            acc += r * r
            cnt += 1
    out["neumann_normal"] = Residual(worst / scale, np.sqrt(acc / max(cnt, 1)) / scale, scale,
                                     tols["neumann_normal"])
    return out


@dataclass
class ConverseResult:
    """Per-cluster orthonormal frames and weights reproducing a family of eigenfunctions."""

    blocks: list
    weights: dict

    def functional(self, pencil, x, h):
        """sum_k d_mix_k u_k^T (K'_h - mu M'_h) u_k summed over clusters."""
        total = 0.0
        for b in self.blocks:
            D = dense(pencil.stiffness_dir(x, h)) - b["mu"] * dense(pencil.mass_dir(x, h))
            total += float(np.einsum("k,ik,ij,jk->", b["d_mix"], b["frame"], D, b["frame"]))
        return total


def converse_weights(pencil, spectrum, x, eigfuns, delta, tol=1e-8) -> ConverseResult:
    """Diagonalize sum_j delta_j phi_j phi_j^T cluster by cluster.

    ``eigfuns`` is a list of (phi, label).  Each phi is normalized in the mass
    norm and expressed in the cluster frame; the symmetric matrix
    A = sum_j delta_j alpha_j alpha_j^T is diagonalized to give an orthonormal
    frame u and weights d_mix with the same trace as delta.  The combination
    weights put the positive part of d_mix on the first label of the cluster and
    the negative part on the last.
    """
    check_fresh(spectrum, x)
    delta = np.asarray(delta, dtype=float)
    if len(delta) != len(eigfuns):
        raise ArgumentError("need one weight per eigenfunction")
    K, M = spectrum.stiffness_matrix, spectrum.mass_matrix
    groups = {}
    for (phi, k), dl in zip(eigfuns, delta):
        phi = np.asarray(phi, dtype=float)
        i = spectrum.cluster_index(k)
        mu = spectrum.clusters[i].mu
        Kp, Mp = K @ phi, M @ phi
        r = np.linalg.norm(Kp - mu * Mp) / max(np.linalg.norm(Kp) + abs(mu) * np.linalg.norm(Mp), 1e-300)
        V = spectrum.frame(i)
        nq = float(np.sqrt(phi @ Mp))
        alpha = V.T @ Mp / nq
        out_of_span = abs(1.0 - alpha @ alpha)
        if r > tol or out_of_span > 1e-8:
            raise ValidationError(f"function claimed in cluster of label {k} has eigen residual {r:.2e} "
                                  f"and leaves the cluster span by {out_of_span:.2e}")
        groups.setdefault(i, []).append((alpha, dl))
    blocks, weights = [], {}
    for i, items in sorted(groups.items()):
        c = spectrum.clusters[i]
        A = sum(dl * np.outer(a, a) for a, dl in items)
        vals, W = np.linalg.eigh(A)
        order = np.argsort(-vals, kind="stable")
        vals, W = vals[order], W[:, order]
        trace_in = float(sum(dl for _, dl in items))
        zero = bool(np.abs(A).max() <= 1e-14 * max(1.0, max(abs(dl) for _, dl in items)))
        blocks.append({"cluster": i, "labels": list(c.labels()), "mu": c.mu,
                       "frame": spectrum.frame(i) @ W, "d_mix": vals, "trace_in": trace_in,
                       "trace_out": float(vals.sum()), "zero": zero})
        weights[c.start] = weights.get(c.start, 0.0) + float(vals[vals > 0].sum())
        weights[c.stop] = weights.get(c.stop, 0.0) + float(vals[vals < 0].sum())
    return ConverseResult(blocks, weights)
