"""Support functions of generalized-gradient hulls and criticality certificates.

For a combination F of normalized eigenvalues the generalized gradients at x
form a convex hull described cluster by cluster.  Its support function in a
direction h is computed by pairing the combination weights of each cluster
with the sorted eigenvalues of the cluster matrix M_i(h): equal orderings give
the maximum over orthonormal frames, opposite orderings the minimum.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .derivatives import cluster_matrix, consumed_clusters, normalized_values
from .errors import ArgumentError
from .pencil import DEFAULT_CLUSTER_TOL, check_fresh, solve_through


@dataclass
class SupportQuery:
    """Direction h and which extremum (``max`` or ``min``) of the hull to take."""

    h: np.ndarray
    extremum: str = "max"

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.extremum not in ("max", "min"):
            raise ArgumentError("extremum must be 'max' or 'min'")
        if not np.all(np.isfinite(self.h)):
            raise ArgumentError("direction must be finite")


def sorted_pairing(weights, eigvals, extremum="max") -> float:
    """max (or min) over orthonormal frames of sum_k w_k u_k^T A u_k."""
    w = np.sort(np.asarray(weights, dtype=float))[::-1]
    a = np.sort(np.asarray(eigvals, dtype=float))
    a = a[::-1] if extremum == "max" else a
    return float(w @ a)


def sorted_pairing_frame(weights, A, extremum="max"):
    """Frame attaining ``sorted_pairing``; column k pairs with weights[k]."""
    weights = np.asarray(weights, dtype=float)
    lam, V = np.linalg.eigh(A)
    order_w = np.argsort(-weights, kind="stable")
    order_a = np.arange(len(lam))[::-1] if extremum == "max" else np.arange(len(lam))
    frame = np.empty_like(V)
    frame[:, order_w] = V[:, order_a]
    return frame


class HullModel:
    """Precomputed cluster data for fast support-function evaluation.

    The cluster matrices are linear in h; ``G[i]`` stores them as a
    (m_i, m_i, P) array already multiplied by sc(x).
    """

    def __init__(self, pencil, spectrum, combo, scaling, x, precompute=True):
        check_fresh(spectrum, x)
        self.pencil, self.spectrum, self.combo, self.scaling = pencil, spectrum, combo, scaling
        self.x = np.asarray(x, dtype=float)
        lam_bar = normalized_values(spectrum, scaling, x, combo.N)
        self.lam_bar = lam_bar
        self.d = np.asarray(combo.partials(lam_bar), dtype=float)
        self.sc = scaling.value(x)
        self.sc_grad = scaling.gradient(x)
        self.S = float(sum(self.d[k - 1] * spectrum.value(k) for k in range(1, combo.N + 1)))
        self.clusters = consumed_clusters(spectrum, combo.N)
        self.weights = []
        for i in self.clusters:
            c = spectrum.clusters[i]
            self.weights.append(np.array([self.d[k - 1] if 1 <= k <= combo.N else 0.0
                                          for k in c.labels()]))
        self.G = None
        if precompute:
            self.G = [self.sc * pencil.form_gradient(self.x, spectrum.frame(i), spectrum.clusters[i].mu)
                      for i in self.clusters]

    def matrices(self, h):
        if self.G is not None:
            return [np.tensordot(G, h, axes=1) for G in self.G]
        return [self.sc * cluster_matrix(self.pencil, self.x, self.spectrum, h, i) for i in self.clusters]

    def value(self, h, extremum):
        h = np.asarray(h, dtype=float)
        total = float(self.sc_grad @ h) * self.S
        for w, A in zip(self.weights, self.matrices(h)):
            total += sorted_pairing(w, np.linalg.eigvalsh(0.5 * (A + A.T)), extremum)
        return total

    def s_max(self, h):
        return self.value(h, "max")

    def s_min(self, h):
        return self.value(h, "min")

    def extremal_gradient(self, h, extremum):
        """Hull element attaining the support value at h (needs precompute).

        For ``min`` it is a supergradient of the concave map s_min, for ``max``
        a subgradient of the convex map s_max.
        """
        g = self.S * self.sc_grad.copy()
        for w, A, G in zip(self.weights, self.matrices(h), self.G):
            F = sorted_pairing_frame(w, 0.5 * (A + A.T), extremum)
            g += np.einsum("k,jk,lk,jlp->p", w, F, F, G, optimize=True)
        return g

    def frame_gradient(self):
        """Hull element for the current eigenvector frames (no rotation)."""
        g = self.S * self.sc_grad.copy()
        for w, G in zip(self.weights, self.G):
            g += np.einsum("k,kkp->p", w, G)
        return g

    @property
    def scale(self) -> float:
        """Typical size of the normalized combination, used for tolerances."""
        return float(abs(self.d @ self.lam_bar)) or 1.0


def support_function(pencil, spectrum, combo, scaling, x, query: SupportQuery) -> float:
    return HullModel(pencil, spectrum, combo, scaling, x, precompute=False).value(query.h, query.extremum)


@dataclass
class SearchBudget:
    n_random: int = 64
    n_steps: int = 50


@dataclass
class CriticalityReport:
    """Outcome of the witness search.

    ``margin_min`` is the largest s_min(h) found over unit directions and
    ``margin_max`` the smallest s_max(h); a witness exists when
    ``margin_min > tol`` (equivalently ``margin_max < -tol`` at -h).
    ``no-witness-found`` does not prove criticality.
    """

    verdict: str
    witness: np.ndarray | None
    margin_min: float
    margin_max: float
    tol: float
    budget: SearchBudget
    combo: str
    param_hash: str
    scale: float
    mean_zero: bool = False
    evaluations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """Size of the best refutation found, max(margin_min, -margin_max)."""
        return max(self.margin_min, -self.margin_max)

    def to_dict(self):
        return {"verdict": self.verdict, "margin_min": self.margin_min, "margin_max": self.margin_max,
                "margin": self.margin, "tol": self.tol, "scale": self.scale,
                "budget": {"n_random": self.budget.n_random, "n_steps": self.budget.n_steps},
                "combo": self.combo, "param_hash": self.param_hash, "mean_zero": self.mean_zero,
                "evaluations": self.evaluations, "has_witness": self.witness is not None}


def param_hash(x) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype=float).tobytes()).hexdigest()


def _search_max_smin(model, w, mean_zero, budget, rng, seeds):
    """Projected supergradient ascent of s_min over the unit ball (weighted norm)."""
    sw = np.sqrt(w)
    P = len(w)
    basis = sw / np.linalg.norm(sw)

    def project(z):
        if mean_zero:
            z = z - (basis @ z) * basis
        n = np.linalg.norm(z)
        return z / n if n > 1.0 else z

    best_val, best_z, evals = -np.inf, None, 0
    starts = [s for s in seeds] + [rng.standard_normal(P) for _ in range(budget.n_random)]
    for z in starts:
        z = project(z / max(np.linalg.norm(z), 1e-300))
        nz = np.linalg.norm(z)
        if nz == 0:
            continue
        z = z / nz
        for it in range(1, budget.n_steps + 1):
            h = z / sw
            val = model.s_min(h)
            evals += 1
            nz = np.linalg.norm(z)
            if nz > 1e-12 and val / nz > best_val:
                best_val, best_z = val / nz, z / nz
            g = model.extremal_gradient(h, "min") / sw
            if mean_zero:
                g = g - (basis @ g) * basis
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            z = project(z + g / (gn * it))
    return best_val, (None if best_z is None else best_z / sw), evals


def criticality_certificate(pencil, x, combo, scaling, budget: SearchBudget | None = None,
                            tol=None, cluster_tol=DEFAULT_CLUSTER_TOL, mean_zero=False,
                            seed=0, spectrum=None) -> CriticalityReport:
    """Search for a direction refuting criticality of F at x.

    A witness h satisfies s_min(h) > tol: every generalized gradient has a
    positive pairing with h, so F increases along h and decreases along -h.
    Directions are measured in the weighted norm of the pencil's parameters.
    """
    budget = budget or SearchBudget()
    x = np.asarray(x, dtype=float)
    if spectrum is None:
        spectrum = solve_through(pencil, x, combo.N, cluster_tol)
    model = HullModel(pencil, spectrum, combo, scaling, x)
    if tol is None:
        tol = 1e-4 * model.scale
    w = pencil.param_weights()
    rng = np.random.default_rng(seed)
    g0 = model.frame_gradient() / np.sqrt(w)
    seeds = [g0, -g0] if np.any(g0) else []
    best, h, evals = _search_max_smin(model, w, mean_zero, budget, rng, seeds)
    witness = None
    if h is not None and best > tol:
        # independent re-evaluation through the cluster matrices
        check = support_function(pencil, spectrum, combo, scaling, x, SupportQuery(h, "min"))
        if check > tol:
            witness = h
    verdict = "noncritical-with-witness" if witness is not None else "no-witness-found"
    return CriticalityReport(verdict, witness, float(best), float(-best), float(tol), budget,
                             combo.name, param_hash(x), model.scale, mean_zero, evals)


def witness_fd_check(pencil, x, combo, scaling, h, t=1e-4, cluster_tol=DEFAULT_CLUSTER_TOL):
    """Finite differences (F(x+th)-F(x), F(x-th)-F(x)) along a witness."""
    from .derivatives import combination_value
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    step = t / max(np.abs(h).max(), 1e-300) * max(np.abs(x).max(), 1.0)
    vals = []
    for y in (x, x + step * h, x - step * h):
        s = solve_through(pencil, y, combo.N, cluster_tol)
        vals.append(combination_value(s, combo, scaling, y))
    return vals[1] - vals[0], vals[2] - vals[0]


def classical_subdiff_probe(pencil, spectrum, scaling, x, k, tol=1e-8):
    """Gaps around lam_k and the spread of single-eigenvector gradients.

    The gradient of lam_bar along u in the cluster of k is
    sc * r(u) + lam * sc_x with r(u)_p = u^T (dK/dx_p - lam dM/dx_p) u.
    Distances are taken in the dual of the weighted parameter norm.
    """
    check_fresh(spectrum, x)
    i = spectrum.cluster_index(k)
    c = spectrum.clusters[i]
    U = spectrum.frame(i)
    G = pencil.form_gradient(x, U, c.mu)
    sc = scaling.value(x)
    grads = np.array([sc * G[j, j] + c.mu * scaling.gradient(x) for j in range(c.size)])
    w = pencil.param_weights()
    dual = grads / np.sqrt(w)
    dist = np.linalg.norm(dual[:, None, :] - dual[None, :, :], axis=-1)
    scale = max(np.linalg.norm(dual, axis=1).max(), 1e-300)
    lam = spectrum.value(k)
    below = lam - spectrum.value(k - 1) if k - 1 >= spectrum.first_label else None
    above = spectrum.value(k + 1) - lam if k + 1 <= spectrum.last_label else None
    iu = np.triu_indices(c.size, 1)
    return {"gap_below": below, "gap_above": above,
            "hull_collapsed": bool(np.all(dist[iu] <= tol * scale)),
            "pairwise_distances": dist[iu], "gradient_norms": np.linalg.norm(dual, axis=1),
            "cluster_size": c.size}
