"""Command line: ``trailnav run | suite | gradcheck | bench``.

Exit codes: 0 success, 2 invalid configuration, 3 no path from the start,
1 a check or benchmark over its limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigInvalid
from .checks import BENCH_LIMITS_MS, bench, gradient_check
from .pipeline import METHODS, Environment
from .scenario import load_scenario
from .suite import load_suite_config, run_suite_config, run_trials, write_tables

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_NO_PATH = 3

GRAD_TOLERANCE = 1e-4


def _cmd_run(args: argparse.Namespace) -> int:
    sc = load_scenario(args.scenario)
    seed = sc.sim.seed if args.seed is None else args.seed
    trials = sc.sim.trials if args.trials is None else args.trials
    if trials < 1:
        raise ConfigInvalid("--trials must be at least 1")
    out = Path(args.out)
    results = run_trials(sc, args.method, trials, seed, out, figures=not args.no_figures, env=Environment.build(sc))
    rows = [r.metrics for r in results]
    write_tables(rows, out, figures=False)
    for m in rows:
        status = "ok  " if m.success else "FAIL"
        print(f"{status} {m.scenario} {m.method} trial={m.trial} seed={m.seed} progress={m.progress:.3f}"
              + (f" time={m.time:.2f}s length={m.length:.2f}m az_max={m.az_max:.3f}" if m.success else
                 f" reason={m.failure_reason}"))
    print(f"wrote {out / 'metrics.csv'} and {out / 'metrics.json'}")
    if any(m.failure_reason == "no_path" for m in rows):
        print("no path from the start pose", file=sys.stderr)
        return EXIT_NO_PATH
    return EXIT_OK


def _cmd_suite(args: argparse.Namespace) -> int:
    cfg = load_suite_config(args.config)
    if args.out:
        cfg = type(cfg)(cfg.scenarios, cfg.methods, cfg.trials, cfg.seed, args.out, cfg.figures)
    doc = run_suite_config(cfg)
    print(f"{'scenario':<14}{'method':<18}{'succ':>6}{'progress':>10}{'time':>9}{'length':>9}{'az_mean':>9}{'az_max':>9}")
    for e in doc["summary"]:
        def f(k):
            v = e[k]["mean"]
            return f"{v:9.3f}" if v is not None else f"{'-':>9}"
        print(f"{e['scenario']:<14}{e['method']:<18}{e['successes']:>3}/{e['trials']:<2}{e['progress']['mean']:>10.3f}"
              f"{f('time')}{f('length')}{f('az_rms_mean')}{f('az_max')}")
    print(f"wrote {cfg.out}")
    return EXIT_OK


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    res = gradient_check(args.configs, args.seed, args.step)
    for i, e in enumerate(res.errors):
        print(f"config {i:2d}: max relative error {e:.3e}")
    ok = res.max_error < GRAD_TOLERANCE
    print(f"{'PASS' if ok else 'FAIL'} max relative error {res.max_error:.3e} (limit {GRAD_TOLERANCE:g}) "
          f"in {res.seconds:.2f}s")
    return EXIT_OK if ok else EXIT_CHECK


def _cmd_bench(args: argparse.Namespace) -> int:
    times = bench(args.repeats, args.seed)
    ok = True
    labels = {"objective_ms": "objective + gradient (30 pts, 64 dense, 3x3 footprint)",
              "astar_ms": "A* on 100x100 grid", "mpc_ms": "MPC solve (horizon 20)"}
    for k, v in times.items():
        lim = BENCH_LIMITS_MS[k]
        ok &= v <= lim
        print(f"{'PASS' if v <= lim else 'FAIL'} {labels[k]:<56} {v:8.2f} ms  (limit {lim:g} ms)")
    if args.json:
        Path(args.json).write_text(json.dumps(times, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trailnav", description="Terrain-aware planning trials and checks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="closed-loop trials of one method on one scenario")
    r.add_argument("--scenario", required=True, help="scenario JSON file or builtin name")
    r.add_argument("--method", required=True, choices=METHODS)
    r.add_argument("--trials", type=int, default=None, help="default: the scenario's sim.trials")
    r.add_argument("--seed", type=int, default=None, help="base seed; trial i uses seed + i")
    r.add_argument("--out", default="run_out", help="output directory")
    r.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("suite", help="every listed method on every listed scenario")
    s.add_argument("--config", required=True, help="suite JSON file")
    s.add_argument("--out", default=None, help="override the suite's output directory")
    s.set_defaults(func=_cmd_suite)

    g = sub.add_parser("gradcheck", help="analytic vs finite-difference objective gradient")
    g.add_argument("--configs", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--step", type=float, default=1e-5)
    g.set_defaults(func=_cmd_gradcheck)

    b = sub.add_parser("bench", help="per-stage timing report")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", default=None, help="also write timings to this file")
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
