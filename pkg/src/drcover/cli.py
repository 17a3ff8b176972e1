"""Command-line interface: ``drcover {gen,solve,enumerate,saa,oos,bench}``."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    BENCH_COLUMNS,
    OOS_COLUMNS,
    GeneratorSpec,
    generate_instance,
    run_benchmark,
    run_oos_study,
    write_csv,
)
from .model import SolveConfig, Tolerances, read_instance, write_instance, write_solution
from .solvers import enumerate_optimum, solve_drc, solve_saa

MODE_FLAGS = {"two-stage": "two_stage", "single": "plus_single", "cross": "plus_cross"}
OOS_DELTAS = "0.05,0.07,0.09,0.11,0.13,0.15,0.17,0.19,0.21,0.23,0.25,0.27"


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _config(args) -> SolveConfig:
    return SolveConfig(
        mode=MODE_FLAGS[args.mode],
        time_limit_seconds=args.time_limit,
        seed=args.seed,
        tolerances=Tolerances(gap=args.gap_tol),
    )


def _emit_solution(sol, out) -> None:
    if out:
        write_solution(sol, out)
    else:
        json.dump(sol.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drcover", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output path (default: stdout)"):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help=out_help)

    def solve_flags(p):
        p.add_argument("--time-limit", type=float, default=60.0)
        p.add_argument("--gap-tol", type=float, default=1e-6)

    g = sub.add_parser("gen", help="generate an instance JSON")
    common(g)
    g.add_argument("--n", type=int, default=30)
    g.add_argument("--targets", type=int, default=10, help="number of targets I")
    g.add_argument("--samples", type=int, default=100, help="number of scenarios N")
    g.add_argument("--delta", type=float, default=0.1)
    g.add_argument("--epsilon", type=float, default=0.1)
    g.add_argument("--p", type=float, default=2.0)
    g.add_argument("--noise", type=float, default=0.25)
    g.add_argument("--v", default=None, help="comma-separated coverage levels (default all ones)")

    s = sub.add_parser("solve", help="solve the robust model")
    common(s)
    s.add_argument("instance")
    s.add_argument("--mode", choices=sorted(MODE_FLAGS), default="single")
    solve_flags(s)

    e = sub.add_parser("enumerate", help="exhaustive oracle (n <= 25)")
    common(e)
    e.add_argument("instance")

    a = sub.add_parser("saa", help="solve the sample-average baseline")
    common(a)
    a.add_argument("instance")
    solve_flags(a)
    a.set_defaults(mode="single")

    o = sub.add_parser("oos", help="out-of-sample reliability study (CSV)")
    common(o, "CSV path (default: stdout)")
    o.add_argument("--deltas", default=OOS_DELTAS)
    o.add_argument("--samples", default="100,200,300,400,500")
    o.add_argument("--epsilon", type=float, default=0.1)
    o.add_argument("--reps", type=int, default=5)
    o.add_argument("--n", type=int, default=30)
    o.add_argument("--targets", type=int, default=10)
    o.add_argument("--p", type=float, default=2.0)
    o.add_argument("--mode", choices=sorted(MODE_FLAGS), default="two-stage")
    o.add_argument("--solutions-dir", default=None, help="persist per-replication solutions here")
    solve_flags(o)

    b = sub.add_parser("bench", help="benchmark sweep (CSV)")
    common(b, "CSV path (default: stdout)")
    b.add_argument("--n", default="20")
    b.add_argument("--targets", default="10")
    b.add_argument("--samples", default="50")
    b.add_argument("--deltas", default="0.05,0.1,0.2,0.3")
    b.add_argument("--epsilons", default="0.05,0.1")
    b.add_argument("--modes", default="two-stage,single,cross")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--p", type=float, default=2.0)
    b.add_argument("--v", default=None, help="comma-separated coverage levels")
    b.add_argument("--time-limit", type=float, default=60.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    if cmd == "gen":
        spec = GeneratorSpec(
            seed=args.seed, n=args.n, I=args.targets, N=args.samples, noise_scale=args.noise,
            v=tuple(_ints(args.v)) if args.v else None,
        )
        inst, q = generate_instance(spec, args.delta, args.epsilon, args.p)
        if args.out:
            write_instance(inst, args.out)
        else:
            json.dump(inst.to_dict(), sys.stdout)
            sys.stdout.write("\n")
        return 0
    if cmd in ("solve", "saa"):
        inst = read_instance(args.instance)
        solver = solve_drc if cmd == "solve" else solve_saa
        _emit_solution(solver(inst, _config(args)), args.out)
        return 0
    if cmd == "enumerate":
        _emit_solution(enumerate_optimum(read_instance(args.instance)), args.out)
        return 0
    if cmd == "oos":
        rows = run_oos_study(
            _floats(args.deltas), _ints(args.samples), args.epsilon, args.reps, args.seed,
            n=args.n, I=args.targets, p=args.p, config=_config(args), out_dir=args.solutions_dir,
        )
        write_csv(rows, args.out or sys.stdout, OOS_COLUMNS)
        return 0
    if cmd == "bench":
        rows = run_benchmark(
            _ints(args.n), _ints(args.targets), _floats(args.deltas), _floats(args.epsilons),
            _ints(args.samples), [MODE_FLAGS[m] for m in args.modes.split(",")],
            args.reps, args.time_limit, args.seed, args.p,
            v=_ints(args.v) if args.v else None,
        )
        write_csv(rows, args.out or sys.stdout, BENCH_COLUMNS)
        return 0
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
