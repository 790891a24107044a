"""Command-line front end.

    shapedesc run <config.toml>
    shapedesc compare <config.toml>
    shapedesc oracle --c1 <v> --n <k>
    shapedesc check

Configs are flat TOML. ``SHAPEDESC_OUT`` overrides the output directory.
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import io
from .mesh import TriMesh
from .optimizer import DescentConfig, DescentResult, run_descent
from .problem import AnalyticProvider, IllustrativeProblem, OracleError, ParseError, levelset_oracle, load_external_sensitivity
from .remesh import RemeshError, generate_annulus, generate_diamond_annulus
from .updates import TAGS, UpdateMethod
from .verify import run_checks

logger = logging.getLogger("shapedesc")

RUN_HEADER = ["iter", "J", "G", "alpha", "min_quality_deg", "n_boundary_nodes"]
COMPARE_HEADER = ["method", "iter", "J", "G", "alpha", "min_quality"]
METHOD_KEYS = ("sigma", "A", "lam", "mu", "eps", "p", "extension", "solver")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


@dataclass
class RunConfig:
    c1: float = 0.0
    c2: float = 0.0
    sensitivity_file: str | None = None
    geometry: str = "annulus"
    annulus_R: float = 1.0
    annulus_r: float = 0.3
    diamond_circumradius: float = 1.0
    diamond_r: float = 0.3
    h: float = 0.05
    method: str = "SP-SM"
    methods: list = field(default_factory=list)
    sigma: float = 0.1
    A: float = 0.1
    lam: float = 0.0
    mu: float = 1.0
    eps: float | None = None
    p: float = 4.0
    extension: str = "wall-distance"
    solver: str = "direct"
    step: str = "line-search"
    theta_max: float | None = None
    alpha0: float | None = None
    quality_gate: float = 2.0
    remesh_every: int = 0
    remesh_on_stall: bool = False
    max_iter: int = 50
    g_tol: float = 1e-4
    j_rel_tol: float = 1e-3
    out: str = "out"
    seed: int = 0
    jobs: int = 1

    def method_defaults(self) -> dict:
        return {k: getattr(self, k) for k in METHOD_KEYS}


_FLOAT_KEYS = {"c1", "c2", "annulus_R", "annulus_r", "diamond_circumradius", "diamond_r", "h", "sigma", "A", "lam", "mu",
               "eps", "p", "theta_max", "alpha0", "quality_gate", "g_tol", "j_rel_tol"}
_INT_KEYS = {"remesh_every", "max_iter", "seed", "jobs"}
_BOOL_KEYS = {"remesh_on_stall"}
_STR_KEYS = {"sensitivity_file", "method", "extension", "solver", "step", "out"}


def _coerce(key: str, value):
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        value = float(value)
        if not np.isfinite(value):
            raise ConfigError(key, "must be finite")
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if key == "methods":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, "expected a non-empty list")
        return value
    raise ConfigError(key, "unknown key")


def parse_config(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)} - {"geometry"}
    values = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        values[key] = _coerce(key, value)
    has_annulus = any(k.startswith("annulus_") for k in values)
    has_diamond = any(k.startswith("diamond_") for k in values)
    if has_annulus and has_diamond:
        raise ConfigError("diamond_circumradius" if "diamond_circumradius" in values else "diamond_r",
                          "annulus and diamond geometries are mutually exclusive")
    cfg = RunConfig(**values, geometry="diamond" if has_diamond else "annulus")
    if "sensitivity_file" in values and ("c1" in values or "c2" in values):
        raise ConfigError("sensitivity_file", "give either c1/c2 or a sensitivity file, not both")
    if not cfg.h > 0:
        raise ConfigError("h", f"must be positive, got {cfg.h}")
    if cfg.step not in ("line-search", "max-displacement"):
        raise ConfigError("step", f"expected 'line-search' or 'max-displacement', got {cfg.step!r}")
    if cfg.theta_max is not None and not cfg.theta_max > 0:
        raise ConfigError("theta_max", "must be positive")
    if not 0 < cfg.quality_gate < 60:
        raise ConfigError("quality_gate", "must lie in (0, 60) degrees")
    if cfg.max_iter < 1:
        raise ConfigError("max_iter", "must be >= 1")
    if cfg.remesh_every < 0:
        raise ConfigError("remesh_every", "must be >= 0")
    if cfg.jobs < 1:
        raise ConfigError("jobs", "must be >= 1")
    if cfg.sensitivity_file is not None:
        # a file holds one sensitivity for one mesh; J cannot be re-evaluated along a step
        if cfg.step != "max-displacement":
            raise ConfigError("step", "an external sensitivity file requires step = 'max-displacement'")
        for key in ("remesh_every", "remesh_on_stall"):
            if getattr(cfg, key):
                raise ConfigError(key, "remeshing needs an analytic provider")
    if cfg.geometry == "annulus" and not 0 < cfg.annulus_r < cfg.annulus_R:
        raise ConfigError("annulus_r", "need 0 < annulus_r < annulus_R")
    if cfg.geometry == "diamond" and not 0 < cfg.diamond_r < cfg.diamond_circumradius / np.sqrt(2):
        raise ConfigError("diamond_r", "need 0 < diamond_r < diamond_circumradius / sqrt(2)")
    parse_method(cfg.method, cfg.method_defaults(), "method")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(data)


_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def parse_method(spec, defaults: dict, key: str = "methods") -> UpdateMethod:
    """``"TAG"``, ``"TAG:k=v,k=v"`` or a TOML table ``{tag = "TAG", k = v}``."""
    params = dict(defaults)
    if isinstance(spec, dict):
        spec = dict(spec)
        tag = spec.pop("tag", None)
        overrides = spec
    elif isinstance(spec, str):
        tag, _, rest = spec.partition(":")
        overrides = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            k, eq, v = item.partition("=")
            if not eq:
                raise ConfigError(key, f"malformed method parameter {item!r}")
            overrides[k.strip()] = float(v) if _NUM.match(v.strip()) else v.strip()
    else:
        raise ConfigError(key, f"method must be a string or table, got {spec!r}")
    if tag not in TAGS:
        raise ConfigError(key, f"unknown method {tag!r}; expected one of {', '.join(TAGS)}")
    for k, v in overrides.items():
        if k not in METHOD_KEYS:
            raise ConfigError(key, f"unknown method parameter {k!r}")
        params[k] = v
    try:
        return UpdateMethod(tag, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def build_mesh(cfg: RunConfig) -> TriMesh:
    if cfg.geometry == "diamond":
        return generate_diamond_annulus(cfg.diamond_circumradius, cfg.diamond_r, cfg.h)
    return generate_annulus(cfg.annulus_R, cfg.annulus_r, cfg.h)


def build_provider(cfg: RunConfig, mesh: TriMesh, base: Path):
    if cfg.sensitivity_file is None:
        return AnalyticProvider(IllustrativeProblem(cfg.c1, cfg.c2))
    path = Path(cfg.sensitivity_file)
    if not path.is_absolute():
        path = base / path
    return load_external_sensitivity(path, mesh)


def descent_config(cfg: RunConfig, method: UpdateMethod) -> DescentConfig:
    return DescentConfig(
        method=method,
        step_mode=cfg.step,
        theta_max=cfg.theta_max,
        alpha0=cfg.alpha0,
        quality_gate=cfg.quality_gate,
        remesh_every=cfg.remesh_every,
        remesh_on_stall=cfg.remesh_on_stall,
        remesh_h=cfg.h,
        max_iter=cfg.max_iter,
        g_tol=cfg.g_tol,
        j_rel_tol=cfg.j_rel_tol,
    )


def output_dir(configured: str | None) -> Path:
    out = Path(os.environ.get("SHAPEDESC_OUT") or configured or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _record_rows(result: DescentResult) -> list[list]:
    return [[r.iteration, float(r.J), float(r.G), float(r.alpha), float(r.min_quality), int(r.n_boundary_nodes)]
            for r in result.records]


def write_run(result: DescentResult, out: Path) -> None:
    io.write_table(out / "run.csv", RUN_HEADER, _record_rows(result))
    snap = out / "boundary"
    snap.mkdir(exist_ok=True)
    for i, curves in enumerate(result.snapshots):
        io.write_boundary_csv(curves, snap / f"iter_{i:04d}.csv")
    io.write_vtk(result.mesh, out / "final_mesh.vtk")
    io.write_off(result.mesh, out / "final_mesh.off")


def _execute(cfg: RunConfig, method: UpdateMethod, base: Path) -> DescentResult:
    mesh = build_mesh(cfg)
    provider = build_provider(cfg, mesh, base)
    return run_descent(provider, mesh, descent_config(cfg, method), keep_snapshots=True)


def cmd_run(path: str) -> int:
    try:
        cfg = load_config(path)
        method = parse_method(cfg.method, cfg.method_defaults(), "method")
        out = output_dir(cfg.out)
        result = _execute(cfg, method, Path(path).resolve().parent)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, RemeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_run(result, out)
    last = result.records[-1]
    print(f"method={method.label} final_J={io.fmt(last.J)} iterations={last.iteration} reason={result.reason}")
    return 1 if result.error is not None else 0


def _compare_one(args) -> tuple[list[list], str, str | None]:
    cfg, method, base, out = args
    try:
        result = _execute(cfg, method, base)
    except (ParseError, RemeshError, ValueError) as exc:
        return [], "error", str(exc)
    out.mkdir(parents=True, exist_ok=True)
    write_run(result, out)
    err = None if result.error is None else str(result.error)
    return _record_rows(result), result.reason, err


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.=-]+", "_", label).strip("_")


def cmd_compare(path: str, jobs: int | None = None) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    specs = cfg.methods or [cfg.method]
    methods, labels = [], []
    for spec in specs:
        try:
            m = parse_method(spec, cfg.method_defaults())
        except ConfigError as exc:
            print(f"warning: skipping method {spec!r}: {exc}", file=sys.stderr)
            continue
        label = m.label
        if label in labels:
            label = f"{label}#{labels.count(label) + 1}"
        methods.append(m)
        labels.append(label)
    out = output_dir(cfg.out)
    base = Path(path).resolve().parent
    tasks = [(cfg, m, base, out / "methods" / _slug(lb)) for m, lb in zip(methods, labels)]
    jobs = jobs or cfg.jobs
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_compare_one, tasks))
    else:
        outcomes = [_compare_one(t) for t in tasks]
    merged = []
    n_ok = 0
    for label, (rows, reason, err) in zip(labels, outcomes):
        if err is not None:
            print(f"warning: method {label} failed: {err}", file=sys.stderr)
        if rows:
            n_ok += 1
        merged += [[label, r[0], r[1], r[2], r[3], r[4]] for r in rows]
        final = io.fmt(rows[-1][1]) if rows else "nan"
        print(f"method={label} final_J={final} iterations={len(rows) - 1 if rows else 0} reason={reason}")
    io.write_table(out / "compare.csv", COMPARE_HEADER, merged)
    return 0 if n_ok > 0 else 1


def cmd_oracle(c1: float, n: int, out: str | None = None) -> int:
    if n < 1:
        print("error: --n must be >= 1", file=sys.stderr)
        return 2
    problem = IllustrativeProblem(c1, 0.0)
    rows, failures = [], 0
    for i in range(n):
        phi = 2 * np.pi * i / n
        try:
            r = levelset_oracle(phi, problem)
            rows.append([phi, r * np.cos(phi), r * np.sin(phi), 1])
        except OracleError:
            failures += 1
            rows.append([phi, float("nan"), float("nan"), 0])
    io.write_table(output_dir(out) / "oracle.csv", ["phi", "x", "y", "ok"], rows)
    if failures:
        print(f"warning: oracle failed at {failures} of {n} angles", file=sys.stderr)
    return 0


def cmd_check(perturb_stiffness: float = 0.0) -> int:
    results = run_checks(perturb_stiffness)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="shapedesc", description="Shape optimization by steepest descent on triangle meshes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one optimization")
    p_run.add_argument("config")
    p_cmp = sub.add_parser("compare", help="run several update methods on one setup")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--jobs", type=int, default=None)
    p_or = sub.add_parser("oracle", help="write the analytic optimal boundary")
    p_or.add_argument("--c1", type=float, default=0.0)
    p_or.add_argument("--n", type=int, default=360)
    p_or.add_argument("--out", default=None)
    p_chk = sub.add_parser("check", help="run the verification suite")
    p_chk.add_argument("--perturb-stiffness", type=float, default=0.0, help=argparse.SUPPRESS)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "compare":
        return cmd_compare(args.config, args.jobs)
    if args.command == "oracle":
        return cmd_oracle(args.c1, args.n, args.out)
    return cmd_check(args.perturb_stiffness)


if __name__ == "__main__":
    sys.exit(main())
