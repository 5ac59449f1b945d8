"""Command-line entry point: configuration, dispatch and JSON reports.

Exit codes: 0 success, 2 invalid input (flags, config file, mesh file),
3 numerical failure.  A report is written on 0 and 3, to ``--output`` or to
standard output.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import (ArgumentError, ConfigError, ConsistencyError, EigencritError, MeshFormatError,
                     NoClosedFormError, NumericalError, ValidationError)
from .expressions import evaluate_expression

SCHEMA_VERSION = "1.0"
COMMANDS = ("spectrum", "derivative", "criticality", "hersch", "optimize", "verify-el", "mix")
GEOMETRY_COMMANDS = COMMANDS[:-1]
CONVENTIONS = {
    "zero_mode": "on meshes without Dirichlet conditions the constant mode has label k=0; "
                 "label k=1 is the first nonzero eigenvalue",
    "corners": "vertices shared by a Dirichlet arc and another arc are Dirichlet vertices",
    "criticality": "no-witness-found means the witness search failed, not that criticality is proven",
}


@dataclass
class RunConfig:
    command: str = "spectrum"
    model: str | None = None
    mesh: str | None = None
    level: int = 3
    n_arcs: int = 1
    kmax: int = 10
    density: str = "1"
    bc: str = "neumann"
    combo: str = "single:1"
    k: int = 1
    direction: str = "random"
    cluster_tol: float = 1e-6
    tol: float | None = None
    n_random: int = 64
    n_steps: int = 50
    mean_zero: bool = False
    mixture: str = "uniform"
    mode: str = "auto"
    sense: str = "ascend"
    step: float = 0.05
    schedule: str = "1/iter"
    iters: int = 100
    floor: float = 1e-3
    normalize: bool = True
    margin_every: int = 10
    trajectory: str | None = None
    save_density: str | None = None
    dim: int = 5
    frames: str = "random:3"
    weights: str = "random"
    output: str | None = None
    seed: int = 0
    threads: int | None = None


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def _field_type(name):
    t = _FIELDS[name].type
    return _TYPES[t.split("|")[0].strip()], "None" in t


def _coerce(key, value):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}", key)
    typ, optional = _field_type(key)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"config key {key!r} may not be null", key)
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigError(f"config key {key!r} expects int, got bool", key)
    if not isinstance(value, typ):
        raise ConfigError(f"config key {key!r} expects {typ.__name__}, got {type(value).__name__}", key)
    return value


def _bool(text):
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigencrit", description="Eigenvalue criticality toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
        p.add_argument("--output", "-o", default=S, help="report path (default: stdout)")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--threads", type=int, default=S, help="BLAS thread cap (env EIGENCRIT_THREADS)")

    def geometry(p):
        p.add_argument("--model", default=S, help="sphere, half_sphere, quadrant, octant or flat_disk")
        p.add_argument("--mesh", default=S, help="OFF mesh file (alternative to --model)")
        p.add_argument("--level", type=int, default=S)
        p.add_argument("--n-arcs", dest="n_arcs", type=int, default=S)
        p.add_argument("--density", default=S, help="number, expression over x,y,z,r, or file:PATH")
        p.add_argument("--bc", default=S, help="neumann, dirichlet, steklov or A1=D,A2=N,...")
        p.add_argument("--kmax", type=int, default=S)
        p.add_argument("--cluster-tol", dest="cluster_tol", type=float, default=S)

    def combo(p):
        p.add_argument("--combo", default=S, help="single:k, sum:N, inverse-sum:N, linear:w,... or hersch")

    def search(p):
        p.add_argument("--tol", type=float, default=S)
        p.add_argument("--n-random", dest="n_random", type=int, default=S)
        p.add_argument("--n-steps", dest="n_steps", type=int, default=S)
        p.add_argument("--mean-zero", dest="mean_zero", type=_bool, default=S)

    helps = {"spectrum": "eigenvalues and clusters", "derivative": "one-sided directional derivatives",
             "criticality": "witness search for non-criticality", "hersch": "inverse-eigenvalue sums",
             "optimize": "projected subgradient iteration", "verify-el": "critical-point residuals",
             "mix": "frame mixing and Birkhoff decomposition"}
    parsers = {name: sub.add_parser(name, help=helps[name]) for name in COMMANDS}
    for name, p in parsers.items():
        common(p)
        if name in GEOMETRY_COMMANDS:
            geometry(p)
    for name in ("criticality", "optimize", "verify-el"):
        combo(parsers[name])
    for name in ("criticality", "optimize"):
        search(parsers[name])
    d = parsers["derivative"]
    d.add_argument("--k", type=int, default=S)
    d.add_argument("--direction", default=S, help="random, expression over x,y,z,r, or file:PATH")
    v = parsers["verify-el"]
    v.add_argument("--mixture", default=S, help="identity, uniform, fit or search")
    v.add_argument("--mode", default=S, help="auto, conformal_class, trace_identity, steklov or mixed_bc")
    o = parsers["optimize"]
    o.add_argument("--sense", default=S, choices=["ascend", "descend"])
    o.add_argument("--step", type=float, default=S)
    o.add_argument("--schedule", default=S, choices=["constant", "1/iter"])
    o.add_argument("--iters", type=int, default=S)
    o.add_argument("--floor", type=float, default=S)
    o.add_argument("--normalize", type=_bool, default=S)
    o.add_argument("--margin-every", dest="margin_every", type=int, default=S)
    o.add_argument("--trajectory", default=S, help="CSV path for the trajectory")
    o.add_argument("--save-density", dest="save_density", default=S)
    m = parsers["mix"]
    m.add_argument("--dim", type=int, default=S)
    m.add_argument("--frames", default=S, help="random:N, cyclic or identity")
    m.add_argument("--weights", default=S, help="random, uniform or comma-separated t values")
    return parser


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, an optional JSON file and command-line flags (flags win)."""
    ns = vars(build_parser().parse_args(argv))
    values = {}
    path = ns.pop("config", None)
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file {path!r} does not exist", "config")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}", "config") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", "config")
        for key, val in data.items():
            values[key] = _coerce(key, val)
    values.update(ns)
    if "command" in values and values["command"] != ns["command"]:
        raise ConfigError(f"config command {values['command']!r} conflicts with {ns['command']!r}", "command")
    cfg = RunConfig(**values)
    if cfg.threads is None and os.environ.get("EIGENCRIT_THREADS"):
        try:
            cfg.threads = int(os.environ["EIGENCRIT_THREADS"])
        except ValueError:
            raise ConfigError("EIGENCRIT_THREADS must be an integer", "threads") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    from .geometry.generators import MODELS
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", "command")
    if cfg.command in GEOMETRY_COMMANDS:
        if (cfg.model is None) == (cfg.mesh is None):
            raise ConfigError("give exactly one of model or mesh", "model")
        if cfg.model is not None and cfg.model not in MODELS:
            raise ConfigError(f"unknown model {cfg.model!r}; choose from {', '.join(MODELS)}", "model")
        if cfg.mesh is not None and not os.path.isfile(cfg.mesh):
            raise ConfigError(f"mesh file {cfg.mesh!r} does not exist", "mesh")
        if not 0 <= cfg.level <= 7:
            raise ConfigError("level must be in 0..7", "level")
        if cfg.n_arcs < 1:
            raise ConfigError("n_arcs must be positive", "n_arcs")
        if cfg.kmax < 1:
            raise ConfigError("kmax must be positive", "kmax")
        if cfg.density.startswith("file:") and not os.path.isfile(cfg.density[5:]):
            raise ConfigError(f"density file {cfg.density[5:]!r} does not exist", "density")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be positive", "threads")
    if cfg.cluster_tol <= 0:
        raise ConfigError("cluster_tol must be positive", "cluster_tol")
    if cfg.command == "optimize":
        if cfg.step < 0:
            raise ConfigError("step must be nonnegative", "step")
        if cfg.floor <= 0:
            raise ConfigError("floor must be positive", "floor")
        if cfg.iters < 0:
            raise ConfigError("iters must be nonnegative", "iters")
    if cfg.command == "mix" and not 1 <= cfg.dim <= 64:
        raise ConfigError("dim must be in 1..64", "dim")


# --- inputs -----------------------------------------------------------------

def _sha256(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def load_geometry(cfg: RunConfig):
    from .geometry.generators import generate_domain
    from .geometry.mesh import load_mesh
    if cfg.mesh is not None:
        return load_mesh(cfg.mesh)
    return generate_domain(cfg.model, cfg.level, cfg.n_arcs)


def build_pencil(cfg, mesh):
    from .geometry.pencils import BoundaryConditionSpec, ConformalLaplacePencil, SteklovPencil
    bc = cfg.bc.strip()
    if bc.lower() == "steklov":
        if not mesh.has_boundary():
            raise ConfigError("steklov needs a mesh with boundary", "bc")
        return SteklovPencil(mesh)
    if bc.lower() == "neumann":
        spec = BoundaryConditionSpec.neumann(mesh)
    elif bc.lower() == "dirichlet":
        if not mesh.has_boundary():
            raise ConfigError("dirichlet needs a mesh with boundary", "bc")
        spec = BoundaryConditionSpec.dirichlet(mesh)
    else:
        spec = BoundaryConditionSpec.parse(mesh, bc)
    return ConformalLaplacePencil(mesh, spec)


def _field_on(text, points, what, rng=None):
    text = text.strip()
    if text.startswith("file:"):
        vals = np.loadtxt(text[5:], dtype=float, ndmin=1)
        if vals.shape != (len(points),):
            raise ConfigError(f"{what} file has {vals.size} values, expected {len(points)}", what)
        return vals
    if text == "random" and rng is not None:
        return rng.standard_normal(len(points))
    return evaluate_expression(text, points)


def build_density(cfg, mesh, pencil):
    from .geometry.pencils import SteklovPencil
    pts = mesh.vertices[pencil.boundary] if isinstance(pencil, SteklovPencil) else mesh.vertices
    beta = _field_on(cfg.density, pts, "density")
    if not np.all(np.isfinite(beta)) or beta.min() <= 0:
        raise ConfigError("density must be finite and positive at every vertex", "density")
    return beta


def _constant_density(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def _combo(cfg):
    from .functionals import CombinationSpec
    return CombinationSpec.parse(cfg.combo)


# --- commands ---------------------------------------------------------------

def _clusters(spec):
    return [{"mu": c.mu, "labels": [c.start, c.stop], "size": c.size, "resolved": c.resolved}
            for c in spec.clusters]


def cmd_spectrum(cfg, mesh, pencil, beta):
    from .geometry.reference import reference_spectrum
    from .pencil import eigen_residuals, solve_through
    spec = solve_through(pencil, beta, cfg.kmax, cfg.cluster_tol)
    sc = pencil.scaling().value(beta)
    labels = list(range(spec.first_label, spec.last_label + 1))
    out = {"labels": labels, "eigenvalues": spec.values.tolist(),
           "normalized": (sc * spec.values).tolist(), "scaling": sc, "first_label": spec.first_label,
           "clusters": _clusters(spec), "max_eigen_residual": float(eigen_residuals(spec).max()),
           "area": mesh.area(), "n_vertices": mesh.n_vertices, "reference": None}
    if cfg.model is not None and _constant_density(cfg.density):
        try:
            ref = reference_spectrum(cfg.model, cfg.bc, len(spec.values))
        except NoClosedFormError:
            ref = None
        if ref is not None:
            # closed forms are for unit density; eigenvalues scale as 1/beta
            ref = ref / float(cfg.density)
            err = np.abs(spec.values - ref) / np.maximum(np.abs(ref), 1.0)
            out["reference"] = {"values": ref.tolist(), "max_relative_error": float(err.max())}
    return out, []


def _direction(cfg, mesh, pencil, rng):
    from .geometry.pencils import SteklovPencil
    pts = mesh.vertices[pencil.boundary] if isinstance(pencil, SteklovPencil) else mesh.vertices
    h = _field_on(cfg.direction, pts, "direction", rng)
    if not np.all(np.isfinite(h)):
        raise ConfigError("direction must be finite", "direction")
    return h


def cmd_derivative(cfg, mesh, pencil, beta):
    from .derivatives import directional_derivative, normalized_value_and_derivative
    from .pencil import solve_through
    rng = np.random.default_rng(cfg.seed)
    h = _direction(cfg, mesh, pencil, rng)
    spec = solve_through(pencil, beta, cfg.k, cfg.cluster_tol)
    i = spec.cluster_index(cfg.k)
    p = spec.position(cfg.k)
    nu = directional_derivative(pencil, beta, spec, h, i)
    scaling = pencil.scaling()
    lam_bar, dbar = normalized_value_and_derivative(pencil, spec, scaling, beta, h, cfg.k)
    return {"k": cfg.k, "eigenvalue": spec.value(cfg.k), "cluster": _clusters(spec)[i], "position": p,
            "nu": nu.tolist(), "right": float(nu[p - 1]), "left": float(nu[len(nu) - p]),
            "normalized_value": lam_bar, "normalized_right": dbar,
            "direction_hash": _sha256(h)}, []


def cmd_criticality(cfg, mesh, pencil, beta):
    from .subdiff import SearchBudget, criticality_certificate, witness_fd_check
    combo = _combo(cfg)
    scaling = pencil.scaling()
    rep = criticality_certificate(pencil, beta, combo, scaling, SearchBudget(cfg.n_random, cfg.n_steps),
                                  cfg.tol, cfg.cluster_tol, cfg.mean_zero, cfg.seed)
    out = rep.to_dict()
    out["fd_check"] = None
    if rep.witness is not None:
        plus, minus = witness_fd_check(pencil, beta, combo, scaling, rep.witness, cluster_tol=cfg.cluster_tol)
        out["fd_check"] = {"forward": plus, "backward": minus, "confirmed": bool(plus > 0 and minus < 0)}
    return out, []


def cmd_hersch(cfg, mesh, pencil, beta):
    from .geometry.mixed import hersch_value
    if cfg.model is None:
        raise ConfigError("hersch needs a generated model", "model")
    if len(beta) != mesh.n_vertices:
        raise ConfigError("hersch uses a vertex density; drop --bc steklov", "bc")
    out = hersch_value(cfg.model, mesh, beta, cfg.cluster_tol)
    out["equality_case"] = cfg.model != "flat_disk"
    return out, []


def _hersch_setup(cfg, mesh):
    from .geometry.mixed import hersch_family
    return hersch_family(cfg.model, mesh)


def cmd_verify_el(cfg, mesh, pencil, beta):
    from .euler_lagrange import (assemble_el_candidate, assemble_mixed_candidate, el_residual,
                                 ResidualReport)
    from .functionals import CombinationSpec
    from .geometry.pencils import SteklovPencil
    from .pencil import solve_through
    mode = cfg.mode
    if mode == "auto":
        if isinstance(pencil, SteklovPencil):
            mode = "steklov"
        elif mesh.has_boundary() and cfg.combo == "hersch":
            mode = "mixed_bc"
        else:
            mode = "conformal_class"
    if mode == "mixed_bc":
        if cfg.model is None or cfg.combo != "hersch":
            raise ConfigError("mixed_bc residuals need a generated model and --combo hersch", "mode")
        family, entries, _ = _hersch_setup(cfg, mesh)
        combo = CombinationSpec.inverse_sum(len(entries))
        spectra = family.spectra(beta, entries, cfg.cluster_tol)
        qmap = assemble_mixed_candidate(family, beta, entries, combo, cfg.mixture, spectra)
        rep = el_residual(qmap, family, mesh, beta, "mixed_bc")
    else:
        if cfg.combo == "hersch":
            combo = CombinationSpec.inverse_sum(3)
        else:
            combo = _combo(cfg)
        spec = solve_through(pencil, beta, combo.N, cfg.cluster_tol)
        scaling = pencil.scaling()
        qmap = assemble_el_candidate(pencil, spec, combo, scaling, beta, cfg.mixture)
        rep = el_residual(qmap, pencil, mesh, beta, mode)
        if mode in ("conformal_class", "steklov"):
            extra = el_residual(qmap, pencil, mesh, beta, "trace_identity")
            rep = ResidualReport(mode, {**rep.residuals, **extra.residuals})
    out = rep.to_dict()
    out.update({"d_mix": np.asarray(qmap.d_mix, dtype=float).tolist(),
                "eps": np.asarray(qmap.eps, dtype=float).tolist(),
                "eigenvalues": np.asarray(qmap.Lambda, dtype=float).tolist(),
                "c": float(qmap.c), "mixture": str(cfg.mixture), "heuristic": bool(qmap.heuristic)})
    table = [{"name": k, **v} for k, v in out["residuals"].items()]
    return out, table


def cmd_optimize(cfg, mesh, pencil, beta):
    from .functionals import CombinationSpec
    from .optimizer import OptimizeConfig, optimize
    from .subdiff import SearchBudget
    combo = CombinationSpec.inverse_sum(3) if cfg.combo == "hersch" else _combo(cfg)
    oc = OptimizeConfig(combo, cfg.sense, cfg.step, cfg.schedule, cfg.iters, cfg.floor, cfg.normalize,
                        cfg.cluster_tol, margin_every=cfg.margin_every,
                        budget=SearchBudget(cfg.n_random, cfg.n_steps), seed=cfg.seed)
    if cfg.tol is not None:
        oc.stop_tol = cfg.tol
    beta_star, traj, final = optimize(pencil, beta, oc)
    if cfg.trajectory:
        traj.to_csv(cfg.trajectory)
    if cfg.save_density:
        np.savetxt(cfg.save_density, beta_star, fmt="%.17g")
    return {"initial_value": traj.values[0] if len(traj) else None,
            "final_value": traj.values[-1] if len(traj) else None,
            "iterations": len(traj), "trajectory": traj.to_dict(),
            "final_certificate": final.to_dict(), "density_hash": _sha256(beta_star),
            "density_min": float(beta_star.min())}, []


def _random_frames(spec, m, rng):
    from scipy.stats import ortho_group
    if spec == "identity":
        return [np.eye(m)]
    if spec == "cyclic":
        return [np.roll(np.eye(m), s, axis=0) for s in range(m)]
    kind, _, n = spec.partition(":")
    if kind != "random":
        raise ConfigError(f"unknown frames spec {spec!r}", "frames")
    try:
        n = int(n)
    except ValueError:
        raise ConfigError(f"bad frame count in {spec!r}", "frames") from None
    if m == 1:
        return [np.eye(1) * rng.choice([-1.0, 1.0]) for _ in range(n)]
    return [ortho_group.rvs(m, random_state=rng) for _ in range(n)]


def cmd_mix(cfg):
    from .mixing import WeightedFrameCombo, birkhoff_decompose, majorization_check, mix_frames, \
        permutation_matrix
    rng = np.random.default_rng(cfg.seed)
    m = cfg.dim
    frames = _random_frames(cfg.frames, m, rng)
    if cfg.weights == "random":
        t = rng.random(len(frames)) + 0.05
    elif cfg.weights == "uniform":
        t = np.ones(len(frames))
    else:
        try:
            t = np.array([float(v) for v in cfg.weights.split(",")])
        except ValueError:
            raise ConfigError(f"bad weights {cfg.weights!r}", "weights") from None
        if len(t) != len(frames) or np.any(t < 0):
            raise ConfigError("weights must be nonnegative, one per frame", "weights")
    t = t / t.sum()
    d = np.sort(rng.standard_normal(m))[::-1]
    combo = WeightedFrameCombo(t, frames, d)
    res = mix_frames(combo)
    S = sum(ta * (O * d) @ O.T for ta, O in zip(t, frames))
    identity_err = float(np.abs(S - (res.frame * res.d_mix) @ res.frame.T).max())
    ok, margin = majorization_check(res.d_mix, d)
    terms = birkhoff_decompose(res.Q)
    recon = sum(w * permutation_matrix(p) for w, p in terms)
    return {"dim": m, "n_frames": len(frames), "t": t.tolist(), "d": d.tolist(),
            "d_mix": res.d_mix.tolist(), "identity_error": identity_err,
            "qd_error": float(np.abs(res.Q @ d - res.d_mix).max()),
            "majorization": {"pass": bool(ok), "margin": float(margin)},
            "birkhoff": {"n_terms": len(terms), "weights": [w for w, _ in terms],
                         "permutations": [p.tolist() for _, p in terms],
                         "reconstruction_error": float(np.abs(recon - res.Q).max())}}, []


DISPATCH = {"spectrum": cmd_spectrum, "derivative": cmd_derivative, "criticality": cmd_criticality,
            "hersch": cmd_hersch, "optimize": cmd_optimize, "verify-el": cmd_verify_el}


# --- reports ----------------------------------------------------------------

def load_schema() -> dict:
    return json.loads(resources.files("eigencrit").joinpath("report.schema.json").read_text())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def run(cfg: RunConfig):
    """Execute a validated config; returns (report, exit code).

    Invalid input raises (exit code 2, no report); numerical failures are
    caught and reported with exit code 3.
    """
    t0 = time.perf_counter()
    inputs = {"config": dataclasses.asdict(cfg), "hashes": {}}
    results, table, status, error = None, [], "ok", None
    try:
        if cfg.command == "mix":
            results, table = cmd_mix(cfg)
        else:
            mesh = load_geometry(cfg)
            inputs["hashes"]["mesh"] = _sha256(mesh.vertices, mesh.triangles)
            if cfg.mesh is not None:
                with open(cfg.mesh, "rb") as fh:
                    inputs["hashes"]["mesh_file"] = hashlib.sha256(fh.read()).hexdigest()
            pencil = build_pencil(cfg, mesh)
            beta = build_density(cfg, mesh, pencil)
            inputs["hashes"]["density"] = _sha256(beta)
            results, table = DISPATCH[cfg.command](cfg, mesh, pencil, beta)
    except (NumericalError, ConsistencyError, np.linalg.LinAlgError) as exc:
        status, error = "numerical_failure", f"{type(exc).__name__}: {exc}"
    report = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "status": status, "error": error,
              "input": inputs, "conventions": CONVENTIONS, "results": results, "residuals": table,
              "timing": {"seconds": time.perf_counter() - t0}}
    report = _jsonable(report)
    import jsonschema
    jsonschema.validate(report, load_schema())
    return report, (0 if status == "ok" else 3)


def write_report(report, path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:   # argparse usage errors already printed
        return int(exc.code or 0)
    except (ConfigError, EigencritError) as exc:
        key = getattr(exc, "key", None)
        print(f"eigencrit: error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=cfg.threads):
                report, code = run(cfg)
        else:
            report, code = run(cfg)
    except (ConfigError, ArgumentError, ValidationError, MeshFormatError, NoClosedFormError,
            OSError, ValueError) as exc:
        key = getattr(exc, "key", None)
        print(f"eigencrit: error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return 2
    write_report(report, cfg.output)
    if code:
        print(f"eigencrit: numerical failure: {report['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
