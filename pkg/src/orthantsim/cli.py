"""Command-line front end.

Commands: ``validate``, ``solve``, ``simulate-srbm``, ``simulate-cbp``,
``approximate``, ``verify``.  Configuration is JSON; trajectories are CSV
with JSON events sidecars.  Exit codes: 0 success, 1 config/IO error,
2 validation or suite failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import comparison
from .errors import (
    ConfigError,
    ConvergenceError,
    OrthantSimError,
)
from .mmatrix import ReflectionMatrix, validate_reflection_m_matrix
from .paths import (
    BrownianSpec,
    RegularPath,
    SampledPath,
    sample_brownian,
    standard_regular_approximation,
)
from .particles import (
    CbpSpec,
    CollisionParams,
    simulate_cbp,
    solve_competing,
)
from . import particles as particles_mod
from . import skorokhod as skorokhod_mod
from .skorokhod import (
    simulate_srbm,
    solve_continuous,
    solve_grid_oracle,
    solve_regular,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors (exit 1), not argparse's 2
    def error(self, message):
        raise ConfigError(message)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load_path(cfg, base: Path):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("path source needs a 'kind' field")
    kind = cfg["kind"]
    if kind == "regular":
        return RegularPath.from_jsonable(cfg)
    if kind == "csv":
        file = base / cfg["file"]
        try:
            with open(file) as fh:
                return SampledPath.from_csv(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read path CSV {file}: {exc}") from exc
    if kind == "brownian":
        return sample_brownian(BrownianSpec.from_jsonable(cfg))
    raise ConfigError(f"unknown path kind {cfg['kind']!r}")


def _collision_params(cfg) -> CollisionParams:
    if "symmetric" in cfg:
        return CollisionParams.symmetric(int(cfg["symmetric"]))
    return CollisionParams.from_jsonable(cfg)


def cmd_validate(cfg: dict, args) -> int:
    """Validate a reflection matrix and/or collision parameters."""
    report = {}
    accepted = True
    if "matrix" not in cfg and "collision_params" not in cfg:
        raise ConfigError("config needs 'matrix' and/or 'collision_params'")
    if "matrix" in cfg:
        res = validate_reflection_m_matrix(np.asarray(cfg["matrix"], dtype=float),
                                           tol=args.tol or 1e-8)
        report["matrix"] = {
            "accepted": res.accepted,
            "reason": res.reason,
            "spectral_radius": res.spectral_radius,
        }
        accepted &= res.accepted
    if "collision_params" in cfg:
        try:
            q = _collision_params(cfg["collision_params"])
            report["collision_params"] = {"accepted": True,
                                          "n_particles": q.n_particles}
        except OrthantSimError as exc:
            report["collision_params"] = {"accepted": False, "reason": str(exc)}
            accepted = False
    report["accepted"] = accepted
    _emit(report)
    return EXIT_OK if accepted else EXIT_VALIDATION


def _out_dir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_solution(sol, out: Path, stem: str, writer) -> dict:
    csv_path = out / f"{stem}.csv"
    events_path = out / f"{stem}_events.json"
    with open(csv_path, "w") as fh:
        with open(events_path, "w") as eh:
            writer(sol, fh, eh)
    return {"csv": str(csv_path), "events": str(events_path)}


def cmd_solve(cfg: dict, args) -> int:
    """Solve one Skorohod or competing-particle problem and export it."""
    out = _out_dir(cfg, args)
    method = args.method or cfg.get("method", "exact")
    level = args.level or cfg.get("level")
    tol = args.tol or cfg.get("tol", 1e-8)
    path = _load_path(cfg.get("path"), Path(args.config).parent)
    summary = {"method": method}

    if "matrix" in cfg:
        R = ReflectionMatrix(np.asarray(cfg["matrix"], dtype=float))
        grid_points = int(cfg.get("grid_points", 2000))
        if isinstance(path, RegularPath):
            regrid = SampledPath(
                np.linspace(0.0, path.horizon, grid_points + 1),
                path.values_at(np.linspace(0.0, path.horizon, grid_points + 1)))
            sol = (solve_regular(R, path) if method == "exact"
                   else solve_grid_oracle(R, regrid, tol=tol))
        else:
            regrid = path
            sol = (solve_continuous(R, path, level or len(path.times) - 1)
                   if method == "exact"
                   else solve_grid_oracle(R, path, tol=tol))
        if cfg.get("compare_methods"):
            other = solve_grid_oracle(R, regrid, tol=tol)
            ts = other.Z.times
            summary["sup_difference"] = float(
                np.abs(sol.Z.values_at(ts) - other.Z.values).max())
        summary["files"] = _write_solution(sol, out, "skorokhod",
                                           skorokhod_mod.write_solution)
        summary["final_l"] = sol.final_boundary_terms.tolist()
    elif "collision_params" in cfg:
        q = _collision_params(cfg["collision_params"])
        sol = solve_competing(q, path, n=level,
                              method="exact" if method == "exact" else "grid",
                              tol=tol)
        summary["files"] = _write_solution(sol, out, "particles",
                                           particles_mod.write_solution)
        summary["final_l"] = sol.final_collision_terms.tolist()
    else:
        raise ConfigError("config needs 'matrix' or 'collision_params'")

    summary["phases"] = len(sol.events) + 1
    _emit(summary)
    return EXIT_OK


def cmd_simulate_srbm(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    R = ReflectionMatrix(np.asarray(cfg["matrix"], dtype=float))
    sol = simulate_srbm(
        R,
        np.asarray(cfg["mu"], dtype=float),
        np.asarray(cfg["covariance"], dtype=float),
        np.asarray(cfg["z0"], dtype=float),
        float(cfg["horizon"]),
        int(cfg["steps"]),
        int(args.seed if args.seed is not None else cfg["seed"]),
        method=args.method or cfg.get("method", "exact"),
        level=args.level or cfg.get("level"),
        tol=args.tol or cfg.get("tol", 1e-8),
    )
    files = _write_solution(sol, out, "srbm", skorokhod_mod.write_solution)
    _emit({"files": files, "phases": len(sol.events) + 1,
           "final_l": sol.final_boundary_terms.tolist()})
    return EXIT_OK


def cmd_simulate_cbp(cfg: dict, args) -> int:
    out = _out_dir(cfg, args)
    spec_cfg = dict(cfg.get("cbp", cfg))
    if args.seed is not None:
        spec_cfg["seed"] = args.seed
    spec = CbpSpec.from_jsonable(spec_cfg)
    sol = simulate_cbp(spec, method=args.method or cfg.get("method", "exact"),
                       level=args.level or cfg.get("level"))
    files = _write_solution(sol, out, "cbp", particles_mod.write_solution)
    summary = {"files": files, "phases": len(sol.events) + 1,
               "final_l": sol.final_collision_terms.tolist()}
    if cfg.get("gap_check"):
        summary["gap_srbm_discrepancy"] = _gap_check(spec, sol,
                                                     args.level or cfg.get("level"))
    _emit(summary)
    return EXIT_OK


def _gap_check(spec: CbpSpec, sol, level) -> float:
    from .particles import gap_drift_and_covariance, reflection_matrix_from_params
    from .paths import brownian_components

    mu, A = gap_drift_and_covariance(spec.g, spec.sigma2)
    R = reflection_matrix_from_params(spec.q)
    B = brownian_components(spec.n_particles, spec.horizon, spec.steps,
                            spec.seed, spec.stream_offset)
    sig = np.sqrt(spec.sigma2)
    noise = SampledPath(B.times,
                        sig[1:] * B.values[:, 1:] - sig[:-1] * B.values[:, :-1])
    srbm = simulate_srbm(R, mu, A, np.diff(spec.y0), spec.horizon, spec.steps,
                         spec.seed, method="exact",
                         level=level or spec.steps, noise=noise)
    ts = np.union1d(sol.Z.times, srbm.Z.times)
    return float(np.abs(sol.Z.values_at(ts) - srbm.Z.values_at(ts)).max())


def cmd_approximate(cfg: dict, args) -> int:
    path = _load_path(cfg.get("path"), Path(args.config).parent)
    if isinstance(path, RegularPath):
        raise ConfigError("approximate expects a sampled path source")
    level = args.level or cfg.get("level", 1)
    reg = standard_regular_approximation(path, int(level))
    obj = reg.to_jsonable()
    obj["kind"] = "regular"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        _emit({"file": str(out), "segments": len(reg.axes)})
    else:
        _emit(obj)
    return EXIT_OK


def cmd_verify(cfg: dict, args) -> int:
    """Run the named comparison suites and report per-instance outcomes."""
    suites = cfg.get("suites")
    if not isinstance(suites, list) or not suites:
        raise ConfigError("config needs a nonempty 'suites' list")
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    results = []
    all_passed = True
    for entry in suites:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError("each suite entry needs a 'name'")
        opts = {k: v for k, v in entry.items() if k not in ("name", "instances")}
        if args.tol is not None:
            opts["tol"] = args.tol
        if args.level is not None:
            opts["level"] = args.level
        res = comparison.run_suite(entry["name"],
                                   int(entry.get("instances", 1)),
                                   seed, **opts)
        results.append(res.to_jsonable())
        all_passed &= res.passed
    report = {"passed": all_passed, "seed": seed, "suites": results}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
    _emit({"passed": all_passed,
           "suites": {r["suite"]: r["passed"] for r in results}})
    return EXIT_OK if all_passed else EXIT_VALIDATION


def _build_parser() -> _Parser:
    parser = _Parser(prog="orthantsim",
                     description="Oblique reflection and competing-particle "
                                 "simulation and verification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory/file")
        p.add_argument("--method", choices=["exact", "grid"], default=None)
        p.add_argument("--level", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "simulate-srbm": cmd_simulate_srbm,
    "simulate-cbp": cmd_simulate_cbp,
    "approximate": cmd_approximate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = _load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, TypeError, ValueError) as exc:
        print(json.dumps({"error": "config", "message": repr(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(json.dumps({"error": "solver", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_SOLVER
    except OrthantSimError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
