"""Batch front door: config ingestion, named experiments, persistence.

Subcommands: solve, continue, green, report, tm-test.  Flags mirror the
config fields and override them.  Every run writes into a fresh directory
named by timestamp + config hash; a manifest records the config echo,
artifact versions, wall-clock per stage, and a sha256 for every emitted
file.  Identical config + seed gives byte-identical JSON reports (only
the manifest carries time-dependent fields).

Exit codes: 0 success, 1 invalid input, 2 valid but unconverged.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, serialize
from .analysis import (
    blowup_energy_floor,
    compare_to_bubble,
    concentration_masses,
    energy_inequality_check,
    existence_condition,
    zero_avoidance_report,
)
from .backend import backend_name
from .errors import InvalidConfig, LabError, UnsupportedMetric
from .fields import (
    BUILTIN_WEIGHTS,
    builtin_weight,
    conformal_from_spec,
    random_smooth,
)
from .functional import RHO_CRITICAL, jensen_gap, tm_sweep
from .green import extract_expansion, robin_constant_oracle, solve_green
from .minimizer import (
    MinimizeOptions,
    continuation,
    default_schedule,
    minimize_subcritical,
)
from .surface import build_torus, load_field, save_field

DEFAULT_CONFIG = {
    "schema": 1,
    "geometry": {"n": 64, "conformal": None},
    "h": {"kind": "constant"},
    "epsilon": 4.0 * math.pi,
    "schedule": {"kind": "default-geometric", "count": 12},
    "blowup_lambda": 30.0,
    "growth_tol": 0.1,
    "radii": [0.025, 0.05, 0.1, 0.2],
    "threshold_frac": 0.01,
    "window_radius": 0.05,
    "h_min_threshold_frac": 1e-8,
    "solver": {
        "grad_tol": 1e-8,
        "max_iters": 50_000,
        "step_init": 1.0,
        "armijo_c": 1e-4,
        "armijo_backtrack": 0.5,
        "preconditioned": False,
    },
    "green": {
        "px": 0.0,
        "py": 0.0,
        "r_min": None,   # -> max(4*spacing, 0.03)
        "r_max": 0.125,
        "oracle_terms": 10_000,
    },
    "outputs": "runs",
    "seed": 0,
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    cfg = DEFAULT_CONFIG
    if path is not None:
        import json
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise InvalidConfig("config must be a JSON object")
        if user.get("schema", 1) != 1:
            raise InvalidConfig(f"unsupported schema {user.get('schema')!r}")
        cfg = _merge(cfg, user)
    return cfg


def apply_flags(cfg: dict, args) -> dict:
    over = {}
    if getattr(args, "n", None) is not None:
        over["geometry"] = {"n": args.n}
    if getattr(args, "h", None) is not None:
        over["h"] = {"kind": args.h}
    if getattr(args, "epsilon", None) is not None:
        over["epsilon"] = args.epsilon
    if getattr(args, "schedule_count", None) is not None:
        over["schedule"] = {"kind": "default-geometric",
                            "count": args.schedule_count}
    if getattr(args, "outputs", None) is not None:
        over["outputs"] = args.outputs
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    solver = {}
    for name in ("grad_tol", "max_iters", "step_init"):
        v = getattr(args, name, None)
        if v is not None:
            solver[name] = v
    if getattr(args, "preconditioned", None) is not None:
        solver["preconditioned"] = args.preconditioned
    if solver:
        over["solver"] = solver
    green = {}
    for flag, key in (("px", "px"), ("py", "py"),
                      ("r_min", "r_min"), ("r_max", "r_max")):
        v = getattr(args, flag, None)
        if v is not None:
            green[key] = v
    if green:
        over["green"] = green
    for name in ("blowup_lambda", "growth_tol", "threshold_frac",
                 "window_radius"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    return _merge(cfg, over)


def build_geometry(cfg: dict):
    geom = cfg["geometry"]
    n = geom.get("n")
    if not isinstance(n, int):
        raise InvalidConfig("geometry.n must be an integer")
    return build_torus(n, conformal_from_spec(geom.get("conformal")))


def build_weight(grid, cfg: dict):
    spec = cfg["h"]
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "file":
        h = load_field(grid, spec["path"])
        if np.any(h.values < 0) or not np.any(h.values > 0):
            raise InvalidConfig("weight file must be >= 0 and not all zero")
        return h
    if kind in BUILTIN_WEIGHTS:
        return builtin_weight(grid, spec)
    raise InvalidConfig(f"unknown h kind {kind!r} "
                        f"(builtins: {', '.join(BUILTIN_WEIGHTS)})")


def build_schedule(cfg: dict):
    sched = cfg["schedule"]
    if isinstance(sched, dict):
        if sched.get("kind") != "default-geometric":
            raise InvalidConfig("schedule.kind must be default-geometric "
                                "or an explicit list")
        count = sched.get("count", 12)
        if not isinstance(count, int) or count < 1:
            raise InvalidConfig("schedule.count must be a positive integer")
        return default_schedule(count)
    if not isinstance(sched, list) or len(sched) == 0:
        raise InvalidConfig("schedule must be a nonempty list or descriptor")
    return [float(e) for e in sched]


def build_options(cfg: dict) -> MinimizeOptions:
    s = cfg["solver"]
    return MinimizeOptions(
        grad_tol=float(s["grad_tol"]),
        max_iters=int(s["max_iters"]),
        step_init=float(s["step_init"]),
        armijo_c=float(s["armijo_c"]),
        armijo_backtrack=float(s["armijo_backtrack"]),
        preconditioned=bool(s["preconditioned"]),
    )


class RunDir:
    """A fresh output directory plus the bookkeeping for its manifest."""

    def __init__(self, cfg: dict, command: str):
        base = Path(os.environ.get("MFLAB_OUTPUT_DIR") or cfg["outputs"])
        base.mkdir(parents=True, exist_ok=True)
        stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
        digest = hashlib.sha256(
            serialize.dumps(cfg).encode()).hexdigest()[:8]
        path = base / f"{stamp}-{digest}"
        k = 0
        while path.exists():
            k += 1
            path = base / f"{stamp}-{digest}-{k}"
        path.mkdir()
        self.path = path
        self.cfg = cfg
        self.command = command
        self.stages = {}
        self._t0 = time.perf_counter()
        self._stage_start = self._t0

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = now - self._stage_start
        self._stage_start = now

    def write_json(self, name: str, obj) -> Path:
        obj = dict(obj)
        obj.setdefault("seed", self.cfg["seed"])
        p = self.path / name
        serialize.dump_json(obj, p)
        return p

    def write_csv(self, name: str, header, rows) -> Path:
        p = self.path / name
        serialize.dump_csv(p, header, rows)
        return p

    def save_field(self, field, name: str, description: str):
        return save_field(field, self.path / name, description)

    def finish(self) -> Path:
        files = []
        for p in sorted(self.path.iterdir()):
            if p.name == "manifest.json":
                continue
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            files.append({"path": p.name, "sha256": digest,
                          "bytes": p.stat().st_size})
        manifest = {
            "command": self.command,
            "config": self.cfg,
            "versions": {
                "mflab": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
                "backend": backend_name(),
            },
            "wall_clock": self.stages,
            "total_seconds": time.perf_counter() - self._t0,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                         time.gmtime()),
            "files": files,
        }
        p = self.path / "manifest.json"
        serialize.dump_json(manifest, p)
        return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(cfg: dict) -> int:
    grid = build_geometry(cfg)
    h = build_weight(grid, cfg)
    eps = float(cfg["epsilon"])
    run = RunDir(cfg, "solve")
    run.stage("setup")
    res = minimize_subcritical(grid, h, eps, build_options(cfg))
    run.stage("minimize")
    run.save_field(res.u, "u_field", f"minimizer at epsilon={eps}")
    run.write_json("solve_report.json", {
        "epsilon": eps,
        "converged": res.converged,
        "iters": res.iters,
        "grad_norm": res.grad_norm,
        "report": res.report.as_dict(),
        "options": res.options.as_dict(),
    })
    run.stage("write")
    run.finish()
    print(f"solve: converged={res.converged} value={res.report.value:.12g} "
          f"-> {run.path}")
    return 0 if res.converged else 2


def cmd_continue(cfg: dict) -> int:
    grid = build_geometry(cfg)
    h = build_weight(grid, cfg)
    schedule = build_schedule(cfg)
    run = RunDir(cfg, "continue")
    run.stage("setup")

    radii = [float(r) for r in cfg["radii"]]
    window_radius = float(cfg["window_radius"])
    diag_files = []
    final = {}

    def on_step(step, res):
        diag = concentration_masses(grid, h, res.u, radii,
                                    epsilon=step.epsilon)
        dev = None
        if step.u_max >= 3.0 and step.h_at_peak > 0.0:
            dev = compare_to_bubble(grid, h, res.u, step.u_max, step.peak,
                                    window_radius)
        k = len(diag_files)
        p = run.write_json(f"diagnostics_step_{k:02d}.json", {
            "epsilon": diag.epsilon,
            "u_max": diag.u_max,
            "peak": diag.peak.as_dict(),
            "h_at_peak": diag.h_at_peak,
            "masses": [{"r": r, "mass": m} for r, m in diag.masses],
            "bubble_dev": dev,
        })
        diag_files.append(p)
        final["u"] = res.u

    result = continuation(grid, h, schedule, build_options(cfg),
                          blowup_lambda=float(cfg["blowup_lambda"]),
                          growth_tol=float(cfg["growth_tol"]),
                          step_callback=on_step)
    run.stage("continuation")

    run.write_json("continuation.json", result.as_dict())
    run.write_csv(
        "steps.csv",
        ["epsilon", "u_max", "peak_i", "peak_j", "peak_x1", "peak_x2",
         "h_at_peak", "value", "grad_norm", "dirichlet", "iters",
         "converged"],
        [[s.epsilon, s.u_max, s.peak.i, s.peak.j, s.peak.x1, s.peak.x2,
          s.h_at_peak, s.value, s.grad_norm, s.dirichlet, s.iters,
          s.converged] for s in result.steps],
    )
    za = zero_avoidance_report(result, h, float(cfg["threshold_frac"]))
    run.write_json("zero_avoidance.json", za)
    if "u" in final:
        run.save_field(final["u"], "final_u",
                       f"last continuation minimizer, "
                       f"epsilon={result.steps[-1].epsilon}")
    run.stage("write")
    run.finish()
    print(f"continue: {result.classification} "
          f"zero-avoidance={'pass' if za['passes'] else 'FAIL'} "
          f"-> {run.path}")
    return 0 if result.classification != "stalled" else 2


def _green_annulus(cfg: dict, grid):
    gcfg = cfg["green"]
    r_min = gcfg.get("r_min")
    if r_min is None:
        r_min = max(4.0 * grid.spacing, 0.03)
    return float(r_min), float(gcfg["r_max"])


def cmd_green(cfg: dict) -> int:
    grid = build_geometry(cfg)
    if not grid.flat:
        raise UnsupportedMetric("green subcommand requires flat geometry")
    gcfg = cfg["green"]
    p = grid.nearest_point(float(gcfg["px"]), float(gcfg["py"]))
    r_min, r_max = _green_annulus(cfg, grid)
    run = RunDir(cfg, "green")
    run.stage("setup")
    G = solve_green(grid, p)
    run.stage("solve")
    exp = extract_expansion(grid, G, p, r_min, r_max)
    oracle = robin_constant_oracle(int(gcfg["oracle_terms"]))
    run.stage("extract")
    run.save_field(G, "green_field", f"Green function, source=({p.i},{p.j})")
    run.write_json("expansion.json", exp.as_dict())
    run.write_json("oracle.json", {
        "A_fit": exp.A,
        "A_oracle": oracle,
        "abs_diff": abs(exp.A - oracle),
        "oracle_terms": int(gcfg["oracle_terms"]),
    })
    run.stage("write")
    run.finish()
    print(f"green: A={exp.A:.8f} oracle={oracle:.8f} "
          f"diff={abs(exp.A - oracle):.2e} -> {run.path}")
    return 0


def cmd_report(cfg: dict) -> int:
    grid = build_geometry(cfg)
    h = build_weight(grid, cfg)
    if not grid.flat:
        raise UnsupportedMetric(
            "report needs flat geometry (expansion data is flat-only)")
    run = RunDir(cfg, "report")
    run.stage("setup")

    gcfg = cfg["green"]
    p0 = grid.nearest_point(float(gcfg["px"]), float(gcfg["py"]))
    r_min, r_max = _green_annulus(cfg, grid)
    G = solve_green(grid, p0)
    exp = extract_expansion(grid, G, p0, r_min, r_max)
    run.stage("green")

    threshold = float(cfg["h_min_threshold_frac"]) * float(np.max(h.values))
    floor = blowup_energy_floor(grid, h, exp.A, threshold)
    cond = existence_condition(grid, h, floor.argmax_point, exp.b1, exp.b2)
    run.write_json("energy_floor.json", floor.as_dict())
    run.write_json("condition.json", cond.as_dict())
    run.stage("floor")

    sweep = tm_sweep(grid)
    c_emp = max(e["tm_ratio"] for e in sweep)
    run.write_csv("tm_sweep.csv",
                  ["label", "param", "tm_ratio", "dirichlet", "mass"],
                  [[e["label"], e["param"], e["tm_ratio"], e["dirichlet"],
                    e["mass"]] for e in sweep])
    run.write_json("tm_summary.json", {
        "c_emp": c_emp,
        "entries": len(sweep),
        "all_finite": all(math.isfinite(e["tm_ratio"]) for e in sweep),
    })
    run.stage("tm")

    rng = np.random.default_rng(cfg["seed"])
    gaps = [jensen_gap(grid, random_smooth(grid, rng, 6, 0.8))
            for _ in range(20)]
    run.write_json("jensen.json", {
        "count": len(gaps),
        "min_gap": min(gaps),
        "max_gap": max(gaps),
        "all_nonnegative": all(g >= -1e-12 for g in gaps),
    })
    run.stage("jensen")
    run.finish()
    print(f"report: floor={floor.floor:.6f} condition_margin="
          f"{cond.margin:.6f} c_emp={c_emp:.6f} -> {run.path}")
    return 0


def cmd_tm_test(cfg: dict) -> int:
    grid = build_geometry(cfg)
    run = RunDir(cfg, "tm-test")
    run.stage("setup")
    sweep = tm_sweep(grid)
    run.write_csv("tm_sweep.csv",
                  ["label", "param", "tm_ratio", "dirichlet", "mass"],
                  [[e["label"], e["param"], e["tm_ratio"], e["dirichlet"],
                    e["mass"]] for e in sweep])
    run.write_json("tm_summary.json", {
        "c_emp": max(e["tm_ratio"] for e in sweep),
        "entries": len(sweep),
        "all_finite": all(math.isfinite(e["tm_ratio"]) for e in sweep),
    })
    run.stage("sweep")
    run.finish()
    print(f"tm-test: c_emp={max(e['tm_ratio'] for e in sweep):.6f} "
          f"-> {run.path}")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "continue": cmd_continue,
    "green": cmd_green,
    "report": cmd_report,
    "tm-test": cmd_tm_test,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mflab",
        description="Minimize subcritical mean-field functionals on tori "
                    "and probe their blow-up behavior.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--n", type=int, help="grid nodes per side")
        p.add_argument("--h", choices=BUILTIN_WEIGHTS,
                       help="builtin weight field")
        p.add_argument("--outputs", help="output root directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--grad-tol", dest="grad_tol", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--step-init", dest="step_init", type=float)
        p.add_argument("--preconditioned", dest="preconditioned",
                       action="store_true", default=None)
        if name == "solve":
            p.add_argument("--epsilon", type=float)
        if name == "continue":
            p.add_argument("--schedule-count", dest="schedule_count",
                           type=int)
            p.add_argument("--blowup-lambda", dest="blowup_lambda",
                           type=float)
            p.add_argument("--growth-tol", dest="growth_tol", type=float)
            p.add_argument("--threshold-frac", dest="threshold_frac",
                           type=float)
            p.add_argument("--window-radius", dest="window_radius",
                           type=float)
        if name in ("green", "report"):
            p.add_argument("--px", type=float)
            p.add_argument("--py", type=float)
            p.add_argument("--r-min", dest="r_min", type=float)
            p.add_argument("--r-max", dest="r_max", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_flags(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except LabError as exc:
        sys.stderr.write(serialize.dumps(
            {"error": exc.kind, "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
