"""Projected subgradient iteration on densities for eigenvalue combinations."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .derivatives import combination_value
from .errors import ArgumentError, InvalidParameterError
from .functionals import CombinationSpec
from .pencil import DEFAULT_CLUSTER_TOL, solve_through
from .subdiff import HullModel, SearchBudget, criticality_certificate


@dataclass
class OptimizeConfig:
    """Settings of the projected subgradient iteration.

    Parameters:
        combo: the functional to optimize.
        sense: ``ascend`` or ``descend``.
        step: base step length, measured in the weighted parameter norm
            relative to the norm of the current density.
        schedule: ``constant`` or ``1/iter``.
        max_iter: iteration cap.
        floor: positivity floor applied after every step.
        normalize: keep the total mass sum_v w_v beta_v fixed.
        cluster_tol: clustering tolerance for the solves.
        certificate_cluster_tol: clustering tolerance of the criticality
            snapshots; looser than ``cluster_tol`` so that nearly coincident
            eigenvalues are treated as one cluster.
        margin_every: take a criticality snapshot every this many iterations.
        stop_tol: stop when a snapshot margin falls to this value or below
            (``None`` runs to the iteration cap).
        budget: witness search budget of the snapshots.
        seed: seed of the snapshot searches.
    """

    combo: CombinationSpec
    sense: str = "ascend"
    step: float = 0.05
    schedule: str = "1/iter"
    max_iter: int = 100
    floor: float = 1e-3
    normalize: bool = True
    cluster_tol: float = DEFAULT_CLUSTER_TOL
    certificate_cluster_tol: float = 1e-2
    margin_every: int = 10
    stop_tol: float | None = None
    budget: SearchBudget = field(default_factory=lambda: SearchBudget(16, 30))
    seed: int = 0

    def validate(self):
        if self.sense not in ("ascend", "descend"):
            raise ArgumentError(f"sense must be 'ascend' or 'descend', got {self.sense!r}")
        if self.schedule not in ("constant", "1/iter"):
            raise ArgumentError(f"schedule must be 'constant' or '1/iter', got {self.schedule!r}")
        if self.step < 0:
            raise ArgumentError("step must be nonnegative")
        if self.floor <= 0:
            raise ArgumentError("floor must be positive")
        if self.max_iter < 0 or self.margin_every < 1:
            raise ArgumentError("max_iter must be >= 0 and margin_every >= 1")
        return self


@dataclass
class Trajectory:
    iterations: list = field(default_factory=list)
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    margins: list = field(default_factory=list)
    hashes: list = field(default_factory=list)

    def append(self, it, value, gnorm, margin, x):
        self.iterations.append(it)
        self.values.append(float(value))
        self.grad_norms.append(float(gnorm))
        self.margins.append(None if margin is None else float(margin))
        self.hashes.append(hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()[:16])

    def __len__(self):
        return len(self.iterations)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "value", "grad_norm", "margin"])
            for row in zip(self.iterations, self.values, self.grad_norms, self.margins):
                wr.writerow([row[0], repr(row[1]), repr(row[2]), "" if row[3] is None else repr(row[3])])

    def to_dict(self):
        return {"iteration": self.iterations, "value": self.values, "grad_norm": self.grad_norms,
                "margin": self.margins, "checkpoint_hash": self.hashes}


def subgradient(pencil, spectrum, combo, scaling, x) -> np.ndarray:
    """Riesz representative of the hull element given by the current frames."""
    g = HullModel(pencil, spectrum, combo, scaling, x).frame_gradient()
    return g / pencil.param_weights()


def _project(beta, floor, mass, w, normalize):
    """Clamp at the floor; with ``normalize`` find s so that max(floor, s beta) has the given mass."""
    beta = np.maximum(beta, floor)
    if not normalize:
        return beta
    if floor * w.sum() >= mass:
        raise InvalidParameterError("floor is too high for the prescribed total mass")
    mass_of = lambda s: w @ np.maximum(floor, s * beta) - mass
    hi = mass / (w @ beta)
    while mass_of(hi) < 0:
        hi *= 2.0
    s = brentq(mass_of, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.maximum(floor, s * beta)


def optimize(pencil, beta0, config: OptimizeConfig, scaling=None):
    """Projected subgradient iteration; returns (beta, trajectory, final report)."""
    config.validate()
    beta = np.asarray(beta0, dtype=float).copy()
    if not pencil.admissible(beta):
        raise InvalidParameterError("initial density is not admissible")
    scaling = scaling or pencil.scaling()
    w = pencil.param_weights()
    mass = float(w @ beta)
    sign = 1.0 if config.sense == "ascend" else -1.0
    traj = Trajectory()
    combo = config.combo

    def snapshot(x):
        return criticality_certificate(pencil, x, combo, scaling, config.budget,
                                       cluster_tol=config.certificate_cluster_tol,
                                       mean_zero=config.normalize, seed=config.seed)

    for it in range(config.max_iter):
        spec = solve_through(pencil, beta, combo.N, config.cluster_tol)
        value = combination_value(spec, combo, scaling, beta)
        r = subgradient(pencil, spec, combo, scaling, beta)
        if config.normalize:
            r = r - (w @ r) / w.sum()
        rnorm = float(np.sqrt(w @ r ** 2))
        margin = None
        if it % config.margin_every == 0:
            margin = snapshot(beta).margin
        traj.append(it, value, rnorm, margin, beta)
        if margin is not None and config.stop_tol is not None and margin <= config.stop_tol:
            break
        t = config.step if config.schedule == "constant" else config.step / (it + 1)
        if t == 0 or rnorm == 0:
            continue
        scale = np.sqrt(w @ beta ** 2)
        trial = _project(beta + sign * t * scale * r / rnorm, config.floor, mass, w, config.normalize)
        if not pencil.admissible(trial):
            break
        beta = trial
    final = snapshot(beta)
    return beta, traj, final
