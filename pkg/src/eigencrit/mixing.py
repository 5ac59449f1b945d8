"""Collapse convex combinations of frame-weighted quadratic images into one frame.

Given frames O_a with weights t_a and a weight vector d, the symmetric matrix
S = sum_a t_a O_a diag(d) O_a^T has an eigendecomposition O diag(d_mix) O^T.
Then d_mix = Q d for the doubly stochastic Q_jk = sum_a t_a (O^T O_a)_jk^2, so
d_mix lies in the permutohedron of d, and for every quadratic map A

    sum_a t_a sum_k d_k A(O_a e_k) = sum_l d_mix_l A(O e_l).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError, DecompositionError, ValidationError

BIRKHOFF_THRESHOLD = 1e-10


@dataclass
class WeightedFrameCombo:
    """Convex combination of orthonormal m x m frames acting on weights d."""

    weights_t: np.ndarray
    frames: list
    d: np.ndarray

    def __post_init__(self):
        self.weights_t = np.atleast_1d(np.asarray(self.weights_t, dtype=float))
        self.frames = [np.asarray(O, dtype=float) for O in self.frames]
        self.d = np.asarray(self.d, dtype=float)

    @property
    def m(self) -> int:
        return len(self.d)

    @classmethod
    def identity(cls, d):
        d = np.asarray(d, dtype=float)
        return cls([1.0], [np.eye(len(d))], d)

    @classmethod
    def cyclic_average(cls, d):
        """Uniform mixture of the cyclic permutation frames (spreads d evenly)."""
        d = np.asarray(d, dtype=float)
        m = len(d)
        frames = [np.roll(np.eye(m), s, axis=0) for s in range(m)]
        return cls(np.full(m, 1.0 / m), frames, d)

    def validate(self):
        if len(self.weights_t) != len(self.frames) or not self.frames:
            raise ValidationError("need one weight per frame and at least one frame")
        if np.any(self.weights_t < -1e-15) or abs(self.weights_t.sum() - 1.0) > 1e-12:
            raise ValidationError(f"frame weights must be a probability vector (sum={self.weights_t.sum()!r})")
        for a, O in enumerate(self.frames):
            if O.shape != (self.m, self.m):
                raise ValidationError(f"frame {a} has shape {O.shape}, expected {(self.m, self.m)}")
            res = np.abs(O.T @ O - np.eye(self.m)).max()
            if res > 1e-10:
                raise ValidationError(f"frame {a} is not orthonormal (Gram residual {res:.3e})")
        return self


@dataclass
class MixResult:
    """Mixed weights (descending), their frame, and the doubly stochastic certificate."""

    d_mix: np.ndarray
    frame: np.ndarray
    Q: np.ndarray


def mix_frames(combo: WeightedFrameCombo) -> MixResult:
    combo.validate()
    S = sum(t * (O * combo.d) @ O.T for t, O in zip(combo.weights_t, combo.frames))
    S = 0.5 * (S + S.T)
    w, O = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    d_mix, O = w[order], O[:, order]
    Q = sum(t * (O.T @ Oa) ** 2 for t, Oa in zip(combo.weights_t, combo.frames))
    return MixResult(d_mix, O, Q)


def majorization_check(d_mix, d, tol=1e-10):
    """Membership of d_mix in the permutohedron of d.

    Returns ``(ok, margin)`` where margin is the smallest slack among the
    sorted partial-sum inequalities (negative when violated) and the totals
    must agree within ``tol`` times the scale of d.
    """
    a = np.sort(np.asarray(d_mix, dtype=float))[::-1]
    b = np.sort(np.asarray(d, dtype=float))[::-1]
    if a.shape != b.shape:
        raise ArgumentError("majorization_check needs vectors of equal length")
    scale = max(1.0, np.abs(b).max(initial=0.0))
    ca, cb = np.cumsum(a), np.cumsum(b)
    slack = cb[:-1] - ca[:-1]
    margin = float(slack.min()) if len(slack) else 0.0
    total_ok = abs(ca[-1] - cb[-1]) <= tol * scale * len(a)
    return bool(total_ok and margin >= -tol * scale * len(a)), margin


def _bottleneck_matching(R, threshold):
    """Permutation maximizing the smallest selected entry, or None."""
    m = len(R)
    vals = np.unique(R[R > threshold])
    lo, hi, best = 0, len(vals) - 1, None
    while lo <= hi:
        mid = (lo + hi) // 2
        ok = R >= vals[mid]
        rows, cols = linear_sum_assignment(ok, maximize=True)
        if ok[rows, cols].all():
            best = cols.copy()
            lo = mid + 1
        else:
            hi = mid - 1
    return best if best is None or len(best) == m else None


def _caratheodory_reduce(weights, perms, m):
    """Drop terms until at most (m-1)^2 + 1 remain, keeping the same sum."""
    weights = list(weights)
    perms = list(perms)
    limit = (m - 1) ** 2 + 1
    while len(weights) > limit:
        A = np.array([np.eye(m)[p].ravel() for p in perms]).T
        A = np.vstack([A, np.ones(len(perms))])
        c = np.linalg.svd(A)[2][-1]
        if c.max() <= 0:
            c = -c
        pos = c > 1e-14
        step = np.min(np.array(weights)[pos] / c[pos])
        new = np.array(weights) - step * c
        keep = new > 1e-15
        weights = list(new[keep])
        perms = [p for p, k in zip(perms, keep) if k]
    return weights, perms


def birkhoff_decompose(Q, threshold=BIRKHOFF_THRESHOLD):
    """Write a doubly stochastic Q as sum_i w_i P_i over permutation matrices.

    Each step takes the permutation whose smallest entry in the residual is
    largest and subtracts it with that weight.  Returns a list of
    ``(weight, perm)`` where ``perm[r]`` is the column selected in row r, so
    ``P[r, perm[r]] = 1``.
    """
    Q = np.asarray(Q, dtype=float)
    m = Q.shape[0]
    if Q.shape != (m, m):
        raise ArgumentError("Q must be square")
    if (np.abs(Q.sum(0) - 1).max() > 1e-8 or np.abs(Q.sum(1) - 1).max() > 1e-8
            or Q.min() < -1e-8):
        raise ArgumentError("Q is not doubly stochastic within 1e-8")
    R = Q.copy()
    weights, perms = [], []
    while R.max() > threshold:
        perm = _bottleneck_matching(R, threshold)
        if perm is None:
            raise DecompositionError("no perfect matching above threshold", residual=R)
        w = R[np.arange(m), perm].min()
        R[np.arange(m), perm] -= w
        weights.append(w)
        perms.append(perm)
        if len(weights) > m * m:
            raise DecompositionError("decomposition did not terminate", residual=R)
    weights, perms = _caratheodory_reduce(weights, perms, m)
    return [(float(w), np.asarray(p)) for w, p in zip(weights, perms)]


def permutation_matrix(perm) -> np.ndarray:
    m = len(perm)
    P = np.zeros((m, m))
    P[np.arange(m), perm] = 1.0
    return P
