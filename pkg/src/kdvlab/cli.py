"""Command-line entry point ``kdvlab``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import conserved, dynamics, fourier, hill
from .averaging import (
    QuadratureConfig,
    averaged_coefficients,
    coefficients_from_system,
    khasminskii_defect,
    load_system,
    simulate_fast_slow,
    simulate_whitham,
)
from .harness import (
    RunConfig,
    Table,
    derived_constants,
    load_run,
    run_ensemble,
    stationary_stats,
    theorem_a_report,
    theorem_b_report,
    versions,
    write_gap_table,
)
from .observers import StandardObserver
from .records import write_json
from .rng import stream
from .stats import law_distance


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _out(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out_dir if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate_kdv(args) -> int:
    cfg = _config(args)
    out = run_ensemble(cfg)
    print(out / "manifest.json")
    return 0


def cmd_hill_actions(args) -> int:
    cfg = _config(args)
    u = fourier.read_field(args.field) if args.field else cfg.initial_field()
    K_spec = args.k_spec or cfg.K_spec
    M = args.m_trunc or max(4 * K_spec, u.K)
    path = _out(args, cfg) / "hill_actions.csv"
    write_gap_table(hill.gap_action_table(u, K_spec, M), path)
    print(path)
    return 0


def cmd_verify_conservation(args) -> int:
    cfg = _config(args)
    u0 = cfg.initial_field()
    if args.k is not None:
        u0 = fourier.from_modes([tuple(p) for p in cfg.u0], args.k)
    out = _out(args, cfg)
    step = dynamics.SdeStepperConfig(args.dt, 0.0, cfg.scheme)
    rec = dynamics.integrate_path(u0, args.t_final, step, None, None, [StandardObserver(cfg.m_obs)],
                                  obs_interval=args.obs_interval)
    rec.to_csv(out / "conservation_trajectory.csv")
    report = conserved.conservation_report(rec).to_dict()
    report["tolerance"] = args.tol
    report["passed"] = all(v < args.tol for v in report["max_relative_drift"].values())
    report["j_coefficients"] = derived_constants()["j_coefficients"]
    write_json(out / "conservation.json", report)
    rows = [[k, v, report["time_of_max"][k]] for k, v in report["max_relative_drift"].items()]
    Table(["functional", "max_relative_drift", "time_of_max"], rows).write(out / "conservation.csv")
    print(json.dumps(report["max_relative_drift"]))
    return 0 if report["passed"] else 1


def _parse_actions(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def cmd_average_system(args) -> int:
    sys_ = load_system(args.system)
    quad = QuadratureConfig(nodes=args.nodes)
    if args.actions:
        I = np.array([_parse_actions(a) for a in args.actions])
    else:
        seed = 0 if args.seed is None else args.seed
        I = stream(seed, 0).uniform(0.1, 2.0, size=(args.points, sys_.m))
    co = averaged_coefficients(sys_, I, quad)
    m = sys_.m
    header = [f"I_{k}" for k in range(1, m + 1)] + [f"avgF_{k}" for k in range(1, m + 1)]
    header += [f"avgA_{i}{j}" for i in range(1, m + 1) for j in range(1, m + 1)]
    header += [f"sigma0_{i}{j}" for i in range(1, m + 1) for j in range(1, m + 1)]
    rows = [list(map(float, np.concatenate([I[r], co.F[r], co.A[r].ravel(), co.sigma0[r].ravel()])))
            for r in range(I.shape[0])]
    path = _out(args) / "average_system.csv"
    Table(header, rows).write(path)
    print(path)
    return 0


def cmd_whitham_compare(args) -> int:
    sys_ = load_system(args.system)
    seed = 0 if args.seed is None else args.seed
    quad = QuadratureConfig(nodes=args.nodes)
    I0 = _parse_actions(args.I0) if args.I0 else np.full(sys_.m, 0.5)
    phi0 = np.zeros(sys_.m)
    nus = [float(v) for v in args.nu]
    dt_w = args.dt_whitham
    whit = simulate_whitham(coefficients_from_system(sys_, quad), I0, args.T, dt_w, stream(seed, 0),
                            n_paths=args.n_paths, record_every=max(1, int(round(args.T / dt_w))))
    dist = Table(["nu", "dt", "distance_to_whitham", "n_fast_slow", "n_whitham", "clamp_fraction"])
    defect = Table(["nu", "k", "defect", "stderr", "n"])
    for j, nu in enumerate(nus):
        dt = nu / args.steps_per_nu
        path = simulate_fast_slow(sys_, nu, I0, phi0, args.T, dt, stream(seed, 1, j), n_paths=args.n_paths)
        dist.rows.append([nu, dt, law_distance(path.final_I, whit.final_I), path.n_paths, whit.n_paths,
                          path.clamp_fraction()])
        d = khasminskii_defect(path, sys_, quad)
        for k in range(sys_.m):
            defect.rows.append([nu, k + 1, float(d.value[k]), float(d.stderr[k]), d.n_paths])
    out = _out(args)
    dist.write(out / "whitham_distances.csv")
    defect.write(out / "khasminskii_defect.csv")
    print(out / "whitham_distances.csv")
    return 0


def cmd_stationary_stats(args) -> int:
    run_dir = Path(args.run or args.out or "out")
    data = load_run(run_dir)
    report = stationary_stats(data.samples, data.config.noise())
    for p in report.write(Path(args.out or run_dir)):
        print(p)
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run or args.out or "out")
    data = load_run(run_dir)
    if args.which == "theorem-a":
        report = theorem_a_report(data.samples)
    else:
        report = theorem_b_report(data.samples)
    for p in report.write(Path(args.out or run_dir)):
        print(p)
    return 0


def _global_flags(default) -> argparse.ArgumentParser:
    # Subcommands get SUPPRESS defaults so they do not clobber flags given before the subcommand.
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", default=default, help="RunConfig JSON document")
    g.add_argument("--seed", type=int, default=default, help="master seed (overrides the config)")
    g.add_argument("--out", default=default, help="output directory")
    g.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="kdvlab", parents=[_global_flags(None)], description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-kdv", parents=[common], help="run and persist SPDE ensembles")
    s.set_defaults(func=cmd_simulate_kdv)

    s = sub.add_parser("hill-actions", parents=[common], help="band edges, gaps and actions of a field")
    s.add_argument("--field", help="field CSV (s,amplitude); default: the config's u0")
    s.add_argument("--k-spec", type=int)
    s.add_argument("--m-trunc", type=int)
    s.set_defaults(func=cmd_hill_actions)

    s = sub.add_parser("verify-conservation", parents=[common], help="deterministic KdV run and J drift")
    s.add_argument("--k", type=int, help="cutoff K (default: config)")
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-final", type=float, default=10.0)
    s.add_argument("--obs-interval", type=float, default=0.1)
    s.add_argument("--tol", type=float, default=1e-6)
    s.set_defaults(func=cmd_verify_conservation)

    s = sub.add_parser("average-system", parents=[common], help="averaged coefficients of a system")
    s.add_argument("system", help="catalog name (rotating-ou, twist) or JSON system file")
    s.add_argument("--actions", action="append", help="comma-separated action vector; repeatable")
    s.add_argument("--points", type=int, default=5, help="random interior points if no --actions")
    s.add_argument("--nodes", type=int, default=8)
    s.set_defaults(func=cmd_average_system)

    s = sub.add_parser("whitham-compare", parents=[common], help="fast-slow ensembles against the averaged SDE")
    s.add_argument("system")
    s.add_argument("--nu", nargs="+", default=["0.2", "0.1", "0.05"])
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--n-paths", type=int, default=1000)
    s.add_argument("--steps-per-nu", type=int, default=20, help="dt = nu / steps_per_nu")
    s.add_argument("--dt-whitham", type=float, default=1e-2)
    s.add_argument("--I0", help="comma-separated initial actions")
    s.add_argument("--nodes", type=int, default=4)
    s.set_defaults(func=cmd_whitham_compare)

    s = sub.add_parser("stationary-stats", parents=[common], help="energy balance from a persisted run")
    s.add_argument("--run", help="run directory (default: --out)")
    s.set_defaults(func=cmd_stationary_stats)

    s = sub.add_parser("report", parents=[common], help="limit-theorem reports from a persisted run")
    s.add_argument("which", choices=["theorem-a", "theorem-b"])
    s.add_argument("--run", help="run directory (default: --out)")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("version", help="print package and library versions")
    s.set_defaults(func=lambda a: print(json.dumps(versions())) or 0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    return int(args.func(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
