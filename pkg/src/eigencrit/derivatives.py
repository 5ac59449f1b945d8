"""One-sided directional derivatives of (normalized) eigenvalues and combinations."""
from __future__ import annotations

import numpy as np

from .errors import ArgumentError, InvalidParameterError
from .functionals import CombinationSpec, ScalingSpec
from .pencil import ClusteredSpectrum, ParametricPencil, check_fresh, solve_spectrum


def _cluster(spectrum, i):
    if not 0 <= i < len(spectrum.clusters):
        raise ArgumentError(f"cluster index {i} out of range [0, {len(spectrum.clusters) - 1}]")
    c = spectrum.clusters[i]
    if not c.resolved:
        raise ArgumentError(f"cluster {i} is not fully resolved; increase k_max")
    return c


def cluster_matrix(pencil: ParametricPencil, x, spectrum: ClusteredSpectrum, h, i) -> np.ndarray:
    """The m x m matrix U^T (K'_h - mu M'_h) U over the frame of cluster i."""
    check_fresh(spectrum, x)
    c = _cluster(spectrum, i)
    U = spectrum.frame(i)
    D = pencil.stiffness_dir(x, h) - c.mu * pencil.mass_dir(x, h)
    A = U.T @ (D @ U)
    return 0.5 * (A + A.T)


def directional_derivative(pencil: ParametricPencil, x, spectrum: ClusteredSpectrum, h, i,
                           return_frame: bool = False):
    """Ascending eigenvalues nu_1 <= ... <= nu_m of the cluster matrix.

    The right derivative along h of the eigenvalue at position p of cluster i
    is nu_p; its left derivative is nu_{m-p+1}.  With ``return_frame`` the
    cluster frame rotated to diagonalize the cluster matrix is returned too.
    """
    h = np.asarray(h, dtype=float)
    c = _cluster(spectrum, i)
    check_fresh(spectrum, x)
    if not np.any(h):
        nu = np.zeros(c.size)
        return (nu, spectrum.frame(i).copy()) if return_frame else nu
    nu, W = np.linalg.eigh(cluster_matrix(pencil, x, spectrum, h, i))
    if return_frame:
        return nu, spectrum.frame(i) @ W
    return nu


def one_sided_derivatives(pencil, x, spectrum, h, k):
    """(right, left) derivatives of lam_k along h."""
    i = spectrum.cluster_index(k)
    p = spectrum.position(k)
    nu = directional_derivative(pencil, x, spectrum, h, i)
    return float(nu[p - 1]), float(nu[len(nu) - p])


def normalized_value_and_derivative(pencil, spectrum, scaling: ScalingSpec, x, h, k):
    """(lam_bar_k, right derivative of lam_bar_k along h) with lam_bar = sc * lam."""
    h = np.asarray(h, dtype=float)
    lam = spectrum.value(k)
    right, _ = one_sided_derivatives(pencil, x, spectrum, h, k)
    sc = scaling.value(x)
    return sc * lam, sc * right + float(scaling.gradient(x) @ h) * lam


def normalized_values(spectrum, scaling, x, N) -> np.ndarray:
    """lam_bar_1..lam_bar_N (labels from the first nonzero eigenvalue)."""
    if N > spectrum.last_label:
        raise ArgumentError(f"combination needs {N} eigenvalues, spectrum has labels up to {spectrum.last_label}")
    return scaling.value(x) * np.array([spectrum.value(k) for k in range(1, N + 1)])


def combination_value(spectrum, combo: CombinationSpec, scaling, x) -> float:
    return combo.evaluate(normalized_values(spectrum, scaling, x, combo.N))


def consumed_clusters(spectrum, N):
    """Indices of clusters meeting labels 1..N, each checked to be resolved."""
    idx = sorted({spectrum.cluster_index(k) for k in range(1, N + 1)})
    for i in idx:
        _cluster(spectrum, i)
    return idx


def combination_right_derivative(pencil, spectrum, combo, scaling, x, h) -> float:
    """Chain rule sum_k d_k [lam_bar_k]'_r(x; h) with cluster-ordered nu values."""
    h = np.asarray(h, dtype=float)
    lam_bar = normalized_values(spectrum, scaling, x, combo.N)
    d = np.asarray(combo.partials(lam_bar), dtype=float)
    sc = scaling.value(x)
    gs = float(scaling.gradient(x) @ h)
    total = 0.0
    for i in consumed_clusters(spectrum, combo.N):
        nu = directional_derivative(pencil, x, spectrum, h, i)
        c = spectrum.clusters[i]
        for k in c.labels():
            if 1 <= k <= combo.N:
                total += d[k - 1] * (sc * nu[k - c.start] + gs * spectrum.value(k))
    return total


def lipschitz_probe(pencil, scaling, x, radius, samples, k_max, seed=0):
    """Empirical local Lipschitz constants of lam_bar_k on a ball around x.

    Pairs are drawn uniformly in the ball of the given radius (weighted
    parameter norm).  Returns a dict with the per-label estimates, the labels
    and the number of skipped inadmissible samples.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    w = pencil.param_weights()
    P = len(x)

    def draw():
        v = rng.standard_normal(P)
        v /= np.sqrt(w @ v ** 2)
        return x + radius * rng.random() ** (1.0 / P) * v

    est = np.zeros(k_max)
    skipped = 0
    for _ in range(samples):
        y1, y2 = draw(), draw()
        try:
            s1 = solve_spectrum(pencil, y1, k_max)
            s2 = solve_spectrum(pencil, y2, k_max)
        except InvalidParameterError:
            skipped += 1
            continue
        diff = np.abs(scaling.value(y1) * s1.values - scaling.value(y2) * s2.values)
        dist = np.sqrt(w @ (y1 - y2) ** 2)
        est = np.maximum(est, diff / dist)
    first = 1 - pencil.zero_modes
    return {"labels": list(range(first, first + k_max)), "estimates": est, "skipped": skipped}
