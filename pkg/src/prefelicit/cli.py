"""Batch entry point: offline solves, plan evaluation, simulations, serving.

Exit codes: 0 success, 2 validation or usage error, 1 solver failure.
Plans are written as "first:second" pairs with the 1-based item indices,
e.g. ``--plan 1:2,3:4``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .model import (
    NoiseConfig,
    ParseError,
    PreferencePolyhedron,
    Query,
    QueryPlan,
    UncertaintyModel,
    ValidationError,
    budget_gamma,
    load_item_bank,
)
from .offline_mmu import (
    CcgOptions,
    build_mmu_milp,
    ccg_mmu,
    evaluate_queries_mmu,
    greedy_mmu,
    solve_offline,
)
from .offline_mmr import (
    build_mmr_milp,
    ccg_mmr,
    evaluate_queries_mmr,
    greedy_mmr,
)
from .simulate import (
    OfflineExperimentConfig,
    OnlineExperimentConfig,
    benchmarks,
    run_offline_experiment,
    run_online_experiment,
    summary_table,
    write_csv,
)

U0_BUILDERS = {
    "simplex": PreferencePolyhedron.simplex,
    "box": PreferencePolyhedron.box,
}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


def parse_plan(text: str) -> QueryPlan:
    queries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise CliError(f"bad plan element {chunk!r}; expected i:j")
        try:
            first, second = int(parts[0]), int(parts[1])
        except ValueError:
            raise CliError(f"bad plan element {chunk!r}; indices must be integers")
        queries.append(Query(first, second))
    return QueryPlan(tuple(queries))


def format_plan(plan: QueryPlan) -> str:
    return ",".join(f"{q.first}:{q.second}" for q in plan)


def _load_bank(path: str):
    p = Path(path)
    if not p.exists():
        raise CliError(f"bank file not found: {path}")
    try:
        return load_item_bank(p.read_text())
    except (ParseError, ValidationError) as exc:
        raise CliError(f"invalid bank file {path}: {exc}")


def _base(args, bank) -> PreferencePolyhedron:
    return U0_BUILDERS[args.u0](bank.num_attributes)


def _gamma(args, k: int) -> float:
    if args.gamma is not None:
        return args.gamma
    return max(0.0, budget_gamma(NoiseConfig(args.sigma, args.confidence), k))


def _opts(args) -> CcgOptions:
    return CcgOptions(delta=args.delta, use_symmetry=args.symmetry,
                      time_limit=args.time_limit)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, default=float))
    else:
        print(human)


def cmd_solve_offline(args) -> int:
    bank = _load_bank(args.bank)
    if args.k < 1:
        raise CliError("--k must be >= 1")
    base = _base(args, bank)
    umodel = UncertaintyModel(base, _gamma(args, args.k))
    opts = _opts(args)
    mmu = args.criterion == "mmu"
    if args.method == "milp":
        build = build_mmu_milp if mmu else build_mmr_milp
        sol = solve_offline(build(bank, args.k, umodel, opts))
        plan, value = sol.plan, sol.value
    elif args.method == "ccg":
        res = (ccg_mmu if mmu else ccg_mmr)(bank, args.k, umodel, opts)
        plan, value = res.plan, res.value
    else:
        res = (greedy_mmu if mmu else greedy_mmr)(bank, args.k, umodel, opts)
        plan, value = res.plan, res.values[-1]
    marks = benchmarks(bank, base, args.criterion)
    normalized = marks.normalized(value, args.criterion)
    _emit(args, {
        "plan": format_plan(plan), "value": value, "normalized": normalized,
        "criterion": args.criterion, "k": args.k, "gamma": umodel.gamma,
        "method": args.method,
    }, f"plan {format_plan(plan)}\nvalue {value:.6f}\n"
       f"normalized {normalized:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    bank = _load_bank(args.bank)
    plan = parse_plan(args.plan)
    base = _base(args, bank)
    umodel = UncertaintyModel(base, _gamma(args, len(plan)))
    evaluate = evaluate_queries_mmu if args.criterion == "mmu" \
        else evaluate_queries_mmr
    value = evaluate(plan, bank, umodel, _opts(args))
    marks = benchmarks(bank, base, args.criterion)
    _emit(args, {
        "plan": format_plan(plan), "value": value,
        "normalized": marks.normalized(value, args.criterion),
        "criterion": args.criterion, "gamma": umodel.gamma,
    }, f"{value:.6f}")
    return 0


def _write_rows(args, rows) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_csv(rows, fh)
        print(f"wrote {len(rows)} rows to {args.output}", file=sys.stderr)


def cmd_simulate_offline(args) -> int:
    bank = _load_bank(args.bank)
    k_values = tuple(int(x) for x in args.k_values.split(","))
    config = OfflineExperimentConfig(
        bank=bank, base=_base(args, bank), criterion=args.criterion,
        k_values=k_values, noise=NoiseConfig(args.sigma, args.confidence),
        rand_draws=args.rand_draws, seed=args.seed, method=args.method,
        opts=_opts(args),
    )
    rows = run_offline_experiment(config)
    _write_rows(args, rows)
    if args.json:
        print(json.dumps([r.as_record() for r in rows], default=float))
    else:
        print(summary_table(rows))
    return 0


def cmd_simulate_online(args) -> int:
    bank = _load_bank(args.bank)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    base_config = OnlineExperimentConfig(
        bank=bank, base=_base(args, bank), criterion=args.criterion,
        agents=args.agents, k_max=args.k_max, sigma_true=args.sigma_true,
        sigma_assumed=args.sigma_assumed, confidence=args.confidence,
        seed=args.seed, methods=methods,
    )
    if args.jobs > 1 and args.agents > 1:
        rows, escalations, truth = _run_online_parallel(base_config, args.jobs)
    else:
        result = run_online_experiment(base_config)
        rows = result.rows
        escalations = result.escalations
        truth = result.final_sets_contain_truth
    rows.sort(key=lambda r: (r.agent_seed or 0, r.method, r.k))
    _write_rows(args, rows)
    if args.json:
        print(json.dumps({
            "rows": [r.as_record() for r in rows],
            "escalations": escalations,
            "final_sets_contain_truth": truth,
        }, default=float))
    else:
        print(summary_table(rows))
        print(f"budget escalations: {escalations}")
    return 0


def _run_online_parallel(config: OnlineExperimentConfig, jobs: int):
    from concurrent.futures import ProcessPoolExecutor

    chunks = [dataclasses.replace(config, agent_indices=[i])
              for i in config.indices()]
    rows, escalations = [], 0
    truth_flags = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for result in pool.map(run_online_experiment, chunks):
            rows.extend(result.rows)
            escalations += result.escalations
            if result.final_sets_contain_truth is not None:
                truth_flags.append(result.final_sets_contain_truth)
    truth = all(truth_flags) if truth_flags else None
    return rows, escalations, truth


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, solver_time_limit=args.time_limit,
                     ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_common(parser, bank_required=True):
    parser.add_argument("--bank", required=bank_required,
                        help="item bank CSV path")
    parser.add_argument("--criterion", choices=("mmu", "mmr"), default="mmu")
    parser.add_argument("--u0", choices=tuple(U0_BUILDERS), default="simplex",
                        help="prior weight set (default: simplex)")
    parser.add_argument("--gamma", type=float, default=None,
                        help="explicit inconsistency budget (overrides sigma)")
    parser.add_argument("--sigma", type=float, default=0.0,
                        help="response noise scale for the budget schedule")
    parser.add_argument("--confidence", type=float, default=0.9)
    parser.add_argument("--delta", type=float, default=1e-3,
                        help="optimality tolerance of the decomposition")
    parser.add_argument("--symmetry", action=argparse.BooleanOptionalAction,
                        default=True)
    parser.add_argument("--time-limit", type=float, default=None,
                        help="per-solve time limit in seconds")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable output")
    parser.add_argument("--output", default=None, help="results CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefelicit",
        description="Robust pairwise preference elicitation",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="log solver iteration traces")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-offline", help="compute an optimal query plan")
    _add_common(p)
    p.add_argument("--k", type=int, required=True, help="number of queries")
    p.add_argument("--method", choices=("milp", "ccg", "greedy"),
                   default="ccg")
    p.set_defaults(func=cmd_solve_offline)

    p = sub.add_parser("evaluate", help="score a fixed query plan")
    _add_common(p)
    p.add_argument("--plan", required=True, help='plan as "i:j,i:j,..."')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate-offline",
                       help="offline plans vs random baseline")
    _add_common(p)
    p.add_argument("--k-values", default="1,2,3")
    p.add_argument("--rand-draws", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("milp", "ccg", "greedy"),
                   default="greedy")
    p.set_defaults(func=cmd_simulate_offline)

    p = sub.add_parser("simulate-online",
                       help="simulated agents answering online sessions")
    _add_common(p)
    p.add_argument("--agents", type=int, default=50)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--sigma-true", type=float, default=0.0)
    p.add_argument("--sigma-assumed", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default="lookahead,rand")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers across agents")
    p.set_defaults(func=cmd_simulate_online)

    p = sub.add_parser("serve", help="run the session service")
    env = os.environ
    p.add_argument("--data-dir",
                   default=env.get("PREFELICIT_DATA_DIR", "./prefelicit-data"))
    p.add_argument("--host", default=env.get("PREFELICIT_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(env.get("PREFELICIT_PORT", "8080")))
    p.add_argument("--time-limit", type=float,
                   default=float(env["PREFELICIT_TIME_LIMIT"])
                   if "PREFELICIT_TIME_LIMIT" in env else None)
    p.add_argument("--ui-dir", default=env.get("PREFELICIT_UI_DIR"),
                   help="static assets directory served under /ui")
    p.set_defaults(func=cmd_serve)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
