"""Scaling factors sc(x) and eigenvalue combinations F(lam_1, ..., lam_N)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError


@dataclass
class ScalingSpec:
    """Scaling factor multiplying eigenvalues: lam_bar = sc(x) * lam.

    kind:
        ``none``          sc = 1.
        ``volume-power``  sc = (w . x) ** q, the weighted volume to a power.
        ``density-Lp``    sc = ||x||_{L^p} = (sum_v w_v x_v^p) ** (1/p).
    ``weights`` are the quadrature weights of the parameter (vertex areas for a
    density on a surface, boundary lengths for a boundary density).
    """

    kind: str = "none"
    weights: np.ndarray | None = None
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "volume-power", "density-Lp"):
            raise ArgumentError(f"unknown scaling kind {self.kind!r}")
        if self.kind != "none" and self.weights is None:
            raise ArgumentError(f"scaling {self.kind!r} needs quadrature weights")
        if self.kind == "density-Lp" and self.p < 1:
            raise ArgumentError("density-Lp scaling needs p >= 1")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)

    @classmethod
    def density(cls, weights, p=1.0):
        return cls("density-Lp", weights, p=p)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return 1.0
        if self.kind == "volume-power":
            return float((self.weights @ x) ** self.q)
        return float((self.weights @ np.abs(x) ** self.p) ** (1.0 / self.p))

    def gradient(self, x) -> np.ndarray:
        """Vector g with <sc_x(x), h> = g @ h."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "volume-power":
            V = self.weights @ x
            return self.q * V ** (self.q - 1.0) * self.weights
        norm = self.value(x)
        return self.weights * np.abs(x) ** (self.p - 1.0) * np.sign(x) / norm ** (self.p - 1.0)

    def density_of_gradient(self, x) -> np.ndarray:
        """Gradient divided by the quadrature weights (a pointwise field)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        return self.gradient(x) / self.weights


@dataclass
class CombinationSpec:
    """Smooth function F of the first N normalized eigenvalues.

    ``evaluate`` and ``partials`` take an array of length N holding
    lam_bar_1..lam_bar_N (labels counted from the first nonzero eigenvalue).
    """

    N: int
    evaluate: Callable
    partials: Callable
    name: str = "custom"

    @classmethod
    def single(cls, k: int):
        if k < 1:
            raise ArgumentError("eigenvalue label must be >= 1")
        e = np.zeros(k)
        e[k - 1] = 1.0
        return cls(k, lambda lam: float(lam[k - 1]), lambda lam: e.copy(), f"single:{k}")

    @classmethod
    def sum(cls, N: int):
        return cls(N, lambda lam: float(np.sum(lam)), lambda lam: np.ones(N), f"sum:{N}")

    @classmethod
    def inverse_sum(cls, N: int):
        """Hersch-type functional sum_k 1 / lam_bar_k."""
        return cls(N, lambda lam: float(np.sum(1.0 / np.asarray(lam))),
                   lambda lam: -1.0 / np.asarray(lam, dtype=float) ** 2, f"inverse-sum:{N}")

    @classmethod
    def linear(cls, weights):
        w = np.asarray(weights, dtype=float)
        return cls(len(w), lambda lam: float(w @ np.asarray(lam)), lambda lam: w.copy(),
                   "linear:" + ",".join(repr(float(v)) for v in w))

    @classmethod
    def parse(cls, text: str):
        """Build from ``single:k``, ``sum:N``, ``inverse-sum:N`` or ``linear:w1,w2,...``."""
        kind, _, arg = text.partition(":")
        try:
            if kind == "single":
                return cls.single(int(arg))
            if kind == "sum":
                return cls.sum(int(arg))
            if kind == "inverse-sum":
                return cls.inverse_sum(int(arg))
            if kind == "linear":
                return cls.linear([float(v) for v in arg.split(",")])
        except ValueError as exc:
            raise ArgumentError(f"bad combination argument in {text!r}: {exc}") from exc
        raise ArgumentError(f"unknown combination {text!r}")
