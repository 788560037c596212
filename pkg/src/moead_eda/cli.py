"""Command-line interface.

Subcommands: ``run`` (single run), ``batch`` (one run per seed plus a summary),
``front`` (print a problem's true optimal front), ``aggregate-structure``
(merge structure logs into a frequency matrix and heat map).
"""
from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError
from .core import run
from .problems import genotype_to_string, make_problem
from .runner import (
    FRONT_HEADER,
    aggregate_structure,
    parse_config,
    read_structure_log,
    run_batch,
    write_pgm,
    write_run_artifacts,
    write_structure_matrix_csv,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="key = value configuration file")
    parser.add_argument("--problem", help="problem name (bitrap)")
    parser.add_argument("--n", type=int, help="genotype length (multiple of 5)")
    parser.add_argument("--algo", help="variation operator: ga, umda, pbil or tree")
    parser.add_argument("--h", type=int, help="weight-vector granularity (population size is h+1)")
    parser.add_argument("--ts", type=int, help="selection neighborhood size")
    parser.add_argument("--tr", type=int, help="replacement neighborhood size")
    parser.add_argument("--nr", type=int, help="replacement cap per offspring")
    parser.add_argument("--scalarization", choices=["tchebycheff", "weighted_sum"])
    parser.add_argument("--ds", dest="ds", action="store_const", const=True, default=None,
                        help="resample offspring that duplicate a neighbor (default)")
    parser.add_argument("--no-ds", dest="ds", action="store_const", const=False,
                        help="accept the first sample unconditionally")
    parser.add_argument("--generations", type=int, help="generations to run (default 5*n)")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--crossover-rate", type=float)
    parser.add_argument("--mutation-rate", type=float)
    parser.add_argument("--alpha", type=float, help="incremental learning rate")
    parser.add_argument("--prior-r", type=float, help="Bayesian prior strength for frequency estimates")
    parser.add_argument("--mi-threshold", type=float, help="drop dependency edges at or below this weight")
    parser.add_argument("--structure-log", action="store_const", const=True, default=None,
                        help="record learned dependency edges (tree operator only)")
    parser.add_argument("--structure-stride", type=int, help="log structure every k-th generation")
    parser.add_argument("--structure-subs", help="comma-separated subproblem indices to log")
    parser.add_argument("--out", help="directory for run artifacts")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "problem": args.problem,
        "n": args.n,
        "algorithm": args.algo,
        "h": args.h,
        "t_s": args.ts,
        "t_r": args.tr,
        "n_r": args.nr,
        "scalarization": args.scalarization,
        "diversity_sampling": args.ds,
        "max_generations": args.generations,
        "seed": args.seed,
        "crossover_rate": args.crossover_rate,
        "mutation_rate": args.mutation_rate,
        "alpha": args.alpha,
        "prior_r": args.prior_r,
        "mi_threshold": args.mi_threshold,
        "structure_log": args.structure_log,
        "structure_stride": args.structure_stride,
        "structure_subproblems": args.structure_subs,
        "output_dir": args.out,
    }


def _load_config(args: argparse.Namespace):
    text = None
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            text = f.read()
    return parse_config(text, _overrides(args))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    result = run(cfg)
    if cfg.output_dir:
        write_run_artifacts(result, cfg.output_dir)
    final = result.final
    print(
        f"seed={result.seed} generations={final.generation} evaluations={result.evaluations} "
        f"igd={final.igd:.6f} true_count={final.true_count} archive_size={final.archive_size}"
    )
    if cfg.output_dir:
        print(f"artifacts written to {cfg.output_dir}")
    return 0


def _cmd_batch(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.seeds:
        try:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip() != "")
        except ValueError as exc:
            raise ConfigError(f"--seeds: {exc}") from exc
    elif args.runs:
        base = cfg.seed if args.seed_base is None else args.seed_base
        seeds = tuple(range(base, base + args.runs))
    else:
        raise ConfigError("batch needs --seeds or --runs")
    summary = run_batch(cfg, seeds, jobs=args.jobs)
    for outcome in summary.outcomes:
        if outcome.result is None:
            print(f"seed={outcome.seed} FAILED: {outcome.error}")
        else:
            final = outcome.result.final
            note = f" ({outcome.error})" if outcome.error else ""
            print(f"seed={outcome.seed} igd={final.igd:.6f} true_count={final.true_count} "
                  f"archive_size={final.archive_size}{note}")
    if summary.mean_igd is not None:
        print(f"mean igd={summary.mean_igd:.6f} (std {summary.std_igd:.6f}) "
              f"mean true_count={summary.mean_true_count:.4f} (std {summary.std_true_count:.4f})")
    if cfg.output_dir:
        print(f"artifacts written to {cfg.output_dir}")
    return 0 if all(o.result is not None for o in summary.outcomes) else 1


def _cmd_front(args: argparse.Namespace) -> int:
    problem = make_problem(args.problem, args.n)
    front = problem.true_front()
    rows = sorted(zip(front.points, front.genotypes), key=lambda t: -t[0][0])
    lines = [FRONT_HEADER]
    lines.extend(f"{float(p[0])!r},{float(p[1])!r},{genotype_to_string(g)}" for p, g in rows)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    logs = [read_structure_log(path) for path in args.logs]
    subs = None
    if args.subproblems:
        subs = tuple(int(s) for s in args.subproblems.split(",") if s.strip() != "")
    matrix = aggregate_structure(
        logs,
        subproblems=subs,
        min_generation=args.from_gen,
        last_only=args.gens == "final",
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "structure_matrix.csv")
    pgm_path = os.path.join(args.out, "structure_heatmap.pgm")
    write_structure_matrix_csv(matrix, csv_path)
    write_pgm(matrix, pgm_path)
    print(f"aggregated {len(logs)} log(s); peak pair count {int(matrix.max())}")
    print(f"wrote {csv_path} and {pgm_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moead-eda",
        description="Decomposition-based multi-objective optimization with per-subproblem variation models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single optimization run")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_batch = sub.add_parser("batch", help="run one optimization per seed and summarize")
    _add_config_flags(p_batch)
    p_batch.add_argument("--seeds", help="comma-separated seed list")
    p_batch.add_argument("--runs", type=int, help="number of runs (seeds count up from --seed-base)")
    p_batch.add_argument("--seed-base", type=int, help="first seed when using --runs")
    p_batch.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_batch.set_defaults(func=_cmd_batch)

    p_front = sub.add_parser("front", help="print a problem's true optimal front as CSV")
    p_front.add_argument("--problem", default="bitrap")
    p_front.add_argument("--n", type=int, required=True)
    p_front.add_argument("--out", help="write to this file instead of stdout")
    p_front.set_defaults(func=_cmd_front)

    p_agg = sub.add_parser("aggregate-structure", help="merge structure logs into a frequency matrix")
    p_agg.add_argument("logs", nargs="+", help="structure log files (structure.jsonl.gz)")
    p_agg.add_argument("--subproblems", help="comma-separated subproblem indices to include")
    p_agg.add_argument("--from-gen", type=int, default=0, help="ignore generations before this one")
    p_agg.add_argument("--gens", choices=["all", "final"], default="all",
                       help="use all logged generations or only each run's final one")
    p_agg.add_argument("--out", required=True, help="output directory")
    p_agg.set_defaults(func=_cmd_aggregate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
