"""Command line experiment runner.

    seqaction run BENCHMARK [--config PATH] [--out DIR] [--override KEY=VALUE ...]
    seqaction verify SUITE [--seed N] [--out DIR]
    seqaction sweep-ics [--count N] [--seed N] [--out DIR]

Exit codes: 0 ok, 1 numeric failure (or a failed check), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .benchmarks import DEFAULTS, build_benchmark
from .sac_core import run_closed_loop
from .errors import NumericError, SacError, UsageError
from .objectives import eval_comparison_metric, eval_cost

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2


# -- config -------------------------------------------------------------------


def parse_override(text: str) -> dict:
    """``"controller.T=0.5"`` -> ``{"controller": {"T": 0.5}}``; values are parsed as YAML."""
    if "=" not in text:
        raise UsageError(f"override {text!r} is not KEY=VALUE")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise UsageError(f"override {text!r} has an empty key")
    value = yaml.safe_load(raw)
    out: dict = {}
    node = out
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides=()) -> dict:
    cfg: dict = {}
    if path:
        try:
            with open(path) as fh:
                cfg = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise UsageError(f"config is not valid YAML: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a mapping")
    for text in overrides:
        cfg = _deep_merge(cfg, parse_override(text))
    return cfg


def resolve_benchmark(name: str | None, cfg: dict):
    cfg = dict(cfg)
    name = name or cfg.pop("benchmark", None)
    cfg.pop("benchmark", None)
    cfg.pop("seed", None)
    if not name:
        raise UsageError("no benchmark given (positional argument or 'benchmark' key)")
    return build_benchmark(name, cfg)


# -- outputs -------------------------------------------------------------------


def write_trajectory_csv(path: Path, result, model) -> int:
    """One row per stored node (duplicated times at transitions); returns the row count."""
    traj = result.trajectory
    n, m = model.n, model.m
    header = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)] + ["location", "J_accum"]
    rows = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        if len(traj.times) > 1:
            for t, x, u, q, J in zip(traj.times, traj.states, traj.controls, traj.locations, result.J_accum):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in u] + [model.locations[int(q)], repr(float(J))])
                rows += 1
    return rows


def run_summary(bench, result, rows: int) -> dict:
    traj = result.trajectory
    lams = [s.lam for s in result.log if s.outcome == "accepted" and s.lam is not None]
    summary = {
        "benchmark": bench.name,
        "J1": eval_cost(bench.cost, traj) if len(traj.times) > 1 else 0.0,
        "transitions": int(result.transitions),
        "wall_time": float(result.wall_time),
        "cycles": len(result.log),
        "accepted": int(result.accepted),
        "rejected": int(result.rejected),
        "mean_lambda": float(np.mean(lams)) if lams else None,
        "rows": rows,
        "final_state": [float(v) for v in traj.states[-1]],
        "final_location": bench.model.locations[int(traj.locations[-1])],
        "switched_at": result.switched_at,
        "error": None if result.error is None else str(result.error),
    }
    mc = bench.metric
    if mc and traj.tf - traj.t0 >= mc["T_opt"] - 1e-9:
        summary["J_pend"] = eval_comparison_metric(
            traj, np.diag(mc["Q"]), np.diag(mc["R"]), mc["T_opt"], angle_indices=mc.get("angle_indices", ()),
        )
    return summary


def _out_dir(path: str | None) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ----------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.override)
    bench = resolve_benchmark(args.benchmark, cfg)
    result = run_closed_loop(
        bench.model, bench.cost, bench.params, bench.x0, bench.duration, q0=bench.q0,
        supervisor=bench.stabilizer, plant_dt=bench.plant_dt, raise_on_error=False,
    )
    out = _out_dir(args.out)
    rows = write_trajectory_csv(out / f"{bench.name}.csv", result, bench.model)
    summary = run_summary(bench, result, rows)
    (out / f"{bench.name}.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_NUMERIC if result.error is not None else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite(args.suite, args.seed)
    report = {"suite": args.suite, "seed": args.seed, "passed": all(c.passed for c in checks), "checks": [c.as_dict() for c in checks]}
    if args.out:
        (_out_dir(args.out) / f"verify_{args.suite}.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


def ic_grid(n_theta: int = 20, n_omega: int = 37) -> np.ndarray:
    """Angles uniform on ``[0, 2 pi)`` paired with rates uniform on ``[0, 4 pi]``."""
    if n_theta < 1 or n_omega < 1:
        raise UsageError("grid counts must be positive")
    th = 2.0 * np.pi * np.arange(n_theta) / n_theta
    om = np.linspace(0.0, 4.0 * np.pi, n_omega) if n_omega > 1 else np.zeros(1)
    return np.array([(a, b) for a in th for b in om])


def converged(x, tol: float = 1e-3) -> bool:
    th = (x[0] + np.pi) % (2.0 * np.pi) - np.pi
    return bool(abs(th) < tol and abs(x[1]) < tol)


def sweep_ics(ics, config: dict | None = None) -> list:
    """Run the reduced cart-pendulum from each initial condition; one result dict per IC."""
    bench = build_benchmark("cart_pendulum_ics", config or {})
    rows = []
    for x0 in np.atleast_2d(ics):
        try:
            r = run_closed_loop(bench.model, bench.cost, bench.params, x0, bench.duration, raise_on_error=False)
            xf = r.trajectory.states[-1]
            err = None if r.error is None else str(r.error)
            wall = r.wall_time
        except SacError as exc:
            xf, err, wall = np.full(2, np.nan), str(exc), 0.0
        rows.append({
            "theta0": float(x0[0]), "omega0": float(x0[1]),
            "theta_f": float(xf[0]), "omega_f": float(xf[1]),
            "converged": err is None and converged(xf), "wall_time": wall, "error": err,
        })
    return rows


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.override)
    cfg.pop("benchmark", None)
    cfg.pop("seed", None)
    grid = ic_grid(args.n_theta, args.n_omega)
    rng = np.random.default_rng(args.seed)
    if args.count and args.count < len(grid):
        grid = grid[np.sort(rng.choice(len(grid), size=args.count, replace=False))]
    rows = sweep_ics(grid, cfg)
    out = _out_dir(args.out)
    with open(out / "sweep_ics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    ok = sum(r["converged"] for r in rows)
    print(json.dumps({"count": len(rows), "converged": ok}))
    return EXIT_OK if ok == len(rows) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="dotted config key, repeatable")

    ap = argparse.ArgumentParser(prog="seqaction", description="Sequential action control experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="closed-loop run of a benchmark")
    p.add_argument("benchmark", nargs="?", help=f"one of {', '.join(sorted(DEFAULTS))}")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", parents=[common], help="numerical self-checks")
    p.add_argument("suite", help="bounce1d, adjoint, gradient, optimality or all")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("sweep-ics", parents=[common], help="cart-pendulum initial-condition sweep")
    p.add_argument("--count", type=int, default=20, help="random subset size (0 for the full grid)")
    p.add_argument("--n-theta", type=int, default=20)
    p.add_argument("--n-omega", type=int, default=37)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, SacError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
