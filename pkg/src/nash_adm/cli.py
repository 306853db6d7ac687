"""Command-line front end.

Subcommands: generate (sample a game plus a tree graph), run (one
experiment from a JSON config, flags overriding file values), compare
(several configs on one game, combined CSV and SVG), validate-schedule
(per-iteration certificate report), and gap (evaluate the gap function at
a point). Exit codes: 0 success, 2 configuration or input error, 3 numeric
failure during iteration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import InputError, NumericError
from .games import (
    KIND_MERELY,
    KIND_STRONG,
    generate_game,
    generate_rotational_game,
    load_game,
    save_game,
)
from .harness import compare, load_config, run_experiment
from .metrics import gap_function
from .network import mixing_matrix, mixing_to_dict, random_tree
from .schedules import monotone_schedule, strong_schedule, validate_schedule

_KIND_ALIASES = {
    "strong": KIND_STRONG,
    "merely": KIND_MERELY,
    KIND_STRONG: KIND_STRONG,
    KIND_MERELY: KIND_MERELY,
}


def _cmd_generate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "rotational":
        game = generate_rotational_game(
            args.n, args.d, seed=args.seed, kappa=args.kappa,
            bounds=(args.lo, args.hi),
        )
    else:
        game = generate_game(
            args.n,
            args.d,
            kind=_KIND_ALIASES[args.kind],
            seed=args.seed,
            bounds=(args.lo, args.hi),
            mu=args.mu,
            gamma=args.gamma,
        )
    mix = mixing_matrix(args.n, random_tree(args.n, seed=args.seed), rule=args.rule)
    game_path = out / "game.json"
    graph_path = out / "graph.json"
    try:
        save_game(game, game_path)
        graph_path.write_text(json.dumps(mixing_to_dict(mix), indent=2) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    print(game_path)
    print(graph_path)
    return 0


def _schedule_from_flags(args) -> dict | None:
    if args.regime is None:
        return None
    spec: dict = {"regime": args.regime}
    if args.epsilon is not None:
        spec["epsilon"] = args.epsilon
    if args.A is not None:
        spec["A"] = args.A
    if args.alpha is not None and args.regime == "explicit":
        spec["alpha"] = args.alpha
    if args.lam is not None:
        spec["lambda"] = args.lam
    return spec


def _cmd_run(args) -> int:
    data = load_config(args.config) if args.config else {}
    overrides = {
        "game": args.game,
        "graph": args.graph,
        "algorithm": args.algorithm,
        "K": args.K,
        "seed": args.seed,
        "gap_every": args.gap_every,
        "snapshot_every": args.snapshot_every,
        "out_dir": args.out_dir,
        "label": args.label,
        "alpha": args.alpha,
        "x_star": args.x_star,
        "x0": args.x0,
        "schedule": _schedule_from_flags(args),
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    summary = run_experiment(data)
    print(f"algorithm        {summary['algorithm']}")
    print(f"iterations       {summary['K']}")
    if summary["final_rel_error"] is not None:
        print(f"final rel_error  {summary['final_rel_error']:.6e}")
    if summary["final_gap"] is not None:
        print(f"final gap        {summary['final_gap']:.6e}")
    print(f"outputs          {summary['out_dir']}")
    return 0


def _cmd_compare(args) -> int:
    configs = [load_config(p) for p in args.configs]
    report = compare(configs, args.out_dir)
    print(f"metric  {report['metric']}")
    print(f"csv     {report['csv']}")
    print(f"svg     {report['svg']}")
    return 0


def _cmd_validate_schedule(args) -> int:
    if args.regime == "strong":
        if args.mu is None or args.mu <= 0:
            raise InputError("strong regime needs --mu > 0")
        schedule = strong_schedule(args.L, args.mu, args.n, args.sigma, args.norm_iw)
    else:
        if args.epsilon is None:
            raise InputError("monotone regime needs --epsilon")
        schedule = monotone_schedule(
            args.L, args.epsilon, A_override=args.A,
            gap_rate_averaging=args.gap_rate_averaging,
        )
    report = validate_schedule(
        schedule,
        L=args.L,
        mu=args.mu if args.mu is not None else 0.0,
        sigma=args.sigma,
        norm_iw=args.norm_iw,
        n=args.n,
        K=args.K,
    )
    print(f"regime            {report.regime}")
    print(f"horizon           {report.K}")
    print(f"product identity  {'ok' if report.product_ok else 'FAILED'}")
    if report.damping_ok is not None:
        print(f"extrapolation     {'ok' if report.damping_ok else 'FAILED'}")
    if report.regime == "monotone":
        found = report.threshold_T
        where = "not within horizon" if found is None else f"t = {found}"
        print(f"dominance from    {where}")
    if report.strong_checks is not None:
        for name, ok in sorted(report.strong_checks.items()):
            print(f"{name:<17} {'ok' if ok else 'FAILED'}")
    if args.out:
        report.to_csv(args.out)
        print(f"report csv        {args.out}")
    return 0


def _parse_point(args) -> np.ndarray:
    if args.y is not None:
        try:
            return np.array([float(v) for v in args.y.split(",")], dtype=float)
        except ValueError as exc:
            raise InputError(f"cannot parse --y: {exc}") from exc
    if args.y_file is not None:
        try:
            data = json.loads(Path(args.y_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read {args.y_file}: {exc}") from exc
        return np.asarray(data, dtype=float)
    raise InputError("give the evaluation point via --y or --y-file")


def _cmd_gap(args) -> int:
    game = load_game(args.game)
    y = _parse_point(args)
    result = gap_function(game, y, tol=args.tol)
    print(f"gap         {result.value:.12e}")
    print(f"iterations  {result.iterations}")
    print(f"residual    {result.residual:.3e}")
    print(f"converged   {result.converged}")
    if args.out:
        record = {
            "value": result.value,
            "maximizer": result.maximizer.tolist(),
            "iterations": result.iterations,
            "residual": result.residual,
            "converged": result.converged,
        }
        Path(args.out).write_text(json.dumps(record, indent=2) + "\n")
        print(f"audit json  {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nash-adm",
        description="Distributed Nash equilibrium seeking experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample a game and a tree graph")
    gen.add_argument("--n", type=int, required=True, help="number of players")
    gen.add_argument("--d", type=int, default=1, help="action dimension per player")
    gen.add_argument(
        "--kind",
        default="strong",
        choices=sorted(set(_KIND_ALIASES)) + ["rotational"],
        help="monotonicity class of the sampled game",
    )
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--mu", type=float, default=None, help="strong monotonicity target")
    gen.add_argument("--gamma", type=float, default=None, help="condition number target")
    gen.add_argument("--kappa", type=float, default=4.0, help="rotational coupling scale")
    gen.add_argument("--lo", type=float, default=-2.0, help="box lower bound")
    gen.add_argument("--hi", type=float, default=2.0, help="box upper bound")
    gen.add_argument(
        "--rule", default="metropolis", choices=["metropolis", "lazy_metropolis"],
    )
    gen.add_argument("--out-dir", default=".")
    gen.set_defaults(func=_cmd_generate)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", default=None, help="JSON config; flags override it")
    run.add_argument("--game", default=None, help="game JSON path")
    run.add_argument("--graph", default=None, help="graph JSON path")
    run.add_argument("--algorithm", default=None, choices=["adm", "ddp", "centralized"])
    run.add_argument("--K", type=int, default=None, help="iteration budget")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--gap-every", type=int, default=None, dest="gap_every")
    run.add_argument("--snapshot-every", type=int, default=None, dest="snapshot_every")
    run.add_argument("--out-dir", default=None, dest="out_dir")
    run.add_argument("--label", default=None)
    run.add_argument("--alpha", type=float, default=None, help="constant step size")
    run.add_argument("--x-star", default=None, dest="x_star", help="reference point JSON")
    run.add_argument("--x0", default=None, choices=["center", "random"])
    run.add_argument("--regime", default=None, choices=["strong", "monotone", "explicit"])
    run.add_argument("--epsilon", type=float, default=None, help="monotone rate offset")
    run.add_argument("--A", type=float, default=None, help="monotone step scale override")
    run.add_argument("--lambda", type=float, default=None, dest="lam",
                     help="explicit extrapolation weight")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="run several configs on one game")
    cmp_.add_argument("configs", nargs="+", help="config JSON paths")
    cmp_.add_argument("--out-dir", default="runs/compare", dest="out_dir")
    cmp_.set_defaults(func=_cmd_compare)

    val = sub.add_parser("validate-schedule", help="certificate report for a schedule")
    val.add_argument("--regime", required=True, choices=["strong", "monotone"])
    val.add_argument("--L", type=float, required=True, help="Lipschitz constant")
    val.add_argument("--mu", type=float, default=None, help="strong monotonicity constant")
    val.add_argument("--epsilon", type=float, default=None, help="monotone rate offset")
    val.add_argument("--A", type=float, default=None, help="monotone step scale override")
    val.add_argument("--gap-rate-averaging", action="store_true",
                     dest="gap_rate_averaging")
    val.add_argument("--n", type=int, default=2, help="number of players")
    val.add_argument("--sigma", type=float, default=0.5, help="mixing contraction factor")
    val.add_argument("--norm-iw", type=float, default=1.0, dest="norm_iw",
                     help="norm of I minus the mixing matrix")
    val.add_argument("--K", type=int, default=1000, help="horizon to certify")
    val.add_argument("--out", default=None, help="write the per-iteration CSV here")
    val.set_defaults(func=_cmd_validate_schedule)

    gap = sub.add_parser("gap", help="evaluate the gap function at a point")
    gap.add_argument("--game", required=True, help="game JSON path")
    gap.add_argument("--y", default=None, help="comma-separated joint action")
    gap.add_argument("--y-file", default=None, dest="y_file", help="JSON array point")
    gap.add_argument("--tol", type=float, default=1e-8)
    gap.add_argument("--out", default=None, help="write value and maximizer JSON here")
    gap.set_defaults(func=_cmd_gap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
