"""Command-line interface.

Subcommands: roofline, cost, plan, fuse-check, convergence-lab, simulate,
report.  Tabular output is CSV, structured output is JSON (schema version
1); both are byte-stable for identical inputs and seeds.  Exit codes:
0 success, 1 domain error (printed as "ErrorName: detail"), 2 usage error.

The CODESIGN_THREADS environment variable caps grid-search parallelism
(0 = one worker per CPU; default 1).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import convergence, optimizer, reparam, simulator
from .cost_model import PartitionPlan, evaluate_plan
from .errors import CodesignError, InvalidConfig, SchemaMismatch
from .profiles import FULL_STRUCTURE, Config, FusionStrategy, load_config, parse_strategy

SCHEMA_VERSION = 1

PLAN_COLUMNS = ["model", "cut", "theta1", "theta2", "t1", "t2", "t3",
                "t_total", "dA", "L", "feasible1", "feasible2"]

_STRATEGY_NAMES = [s.value for s in FusionStrategy]


def _thread_count() -> int:
    raw = os.environ.get("CODESIGN_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfig(f"CODESIGN_THREADS={raw!r} is not an integer") from None
    if value < 0:
        raise InvalidConfig(f"CODESIGN_THREADS={raw!r} must be >= 0")
    return value


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_text(header: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _plan_row(model_name: str, plan: PartitionPlan) -> list:
    c = plan.cost
    return [model_name, plan.cut_index, plan.theta1.value, plan.theta2.value,
            repr(c.t1), repr(c.t2), repr(c.t3), repr(c.t_total),
            repr(c.accuracy_loss), repr(c.lagrangian),
            str(plan.feasible[0]).lower(), str(plan.feasible[1]).lower()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_roofline(args) -> int:
    from . import roofline
    from .profiles import total_load

    config = load_config(args.config)
    strategy = parse_strategy(args.theta, "--theta")
    flops, data = total_load(config.model, strategy)
    rows = []
    for device in config.devices:
        rep = roofline.report(flops, data, device)
        rows.append([config.model.name, device.name, repr(rep.intensity),
                     repr(roofline.machine_balance(device)), rep.bottleneck.value])
    _emit(_csv_text(["model", "device", "intensity", "balance", "class"], rows), args.out)
    return 0


def _cmd_cost(args) -> int:
    config = load_config(args.config)
    plan = evaluate_plan(config.model, args.cut, parse_strategy(args.theta1, "--theta1"),
                         parse_strategy(args.theta2, "--theta2"), config.device1,
                         config.device2, config.link, config.penalties, config.lambda1)
    c = plan.cost
    _emit(_dump_json({
        "schema_version": SCHEMA_VERSION,
        "model": config.model.name,
        "cut": plan.cut_index,
        "theta1": plan.theta1.value,
        "theta2": plan.theta2.value,
        "lambda_c": plan.lambda_c,
        "lambda_m": plan.lambda_m,
        "t1": c.t1, "t2": c.t2, "t3": c.t3, "t_total": c.t_total,
        "dA": c.accuracy_loss, "L": c.lagrangian,
        "feasible1": plan.feasible[0], "feasible2": plan.feasible[1],
    }), args.out)
    return 0


def _best_plan(config: Config, strict: bool) -> tuple[PartitionPlan, list[PartitionPlan]]:
    plans = optimizer.enumerate_plans(config.model, config.device1, config.device2,
                                      config.link, config.penalties, config.lambda1,
                                      threads=_thread_count())
    if strict:
        plans = [p for p in plans if p.feasible[0] and p.feasible[1]]
        if not plans:
            from .errors import NoFeasiblePlan
            raise NoFeasiblePlan("every candidate violates an intensity requirement")
    return plans[0], plans


def _cmd_plan(args) -> int:
    config = load_config(args.config)
    winner, plans = _best_plan(config, args.strict)
    if args.refine:
        refined, lam_star, trace = optimizer.refine_and_snap(
            config.model, winner, config.device1, config.device2, config.link,
            config.penalties, config.lambda1)
        if optimizer.plan_sort_key(refined) < optimizer.plan_sort_key(winner):
            winner = refined  # cannot happen with an exhaustive grid; kept as a guard
        if args.trace_out:
            rows = [[i, repr(lam), repr(t)] for i, (lam, t) in enumerate(trace)]
            Path(args.trace_out).write_text(
                _csv_text(["iteration", "lambda", "t_total"], rows))
    rows = [_plan_row(config.model.name, p) for p in plans]
    _emit(_csv_text(PLAN_COLUMNS, rows), args.out)
    return 0


def _cmd_fuse_check(args) -> int:
    worst = reparam.run_equivalence_suite(args.seed, trials=args.trials)
    rows = [[s.value, args.trials, repr(err)] for s, err in worst.items()]
    _emit(_csv_text(["strategy", "trials", "max_rel_error"], rows), args.out)
    return 0


def _cmd_convergence_lab(args) -> int:
    result = convergence.run_lab(args.seed, args.dim, args.steps)
    rows = [[r["step"], repr(r["gap"]), repr(r["bound"]), repr(r["ratio"]),
             str(r["within_bound"]).lower()] for r in result["rows"]]
    _emit(_csv_text(["step", "gap", "bound", "ratio", "within_bound"], rows), args.out)
    print(f"eta={result['eta']!r} mu={result['mu']!r} lip={result['lip']!r} "
          f"violated_at={result['violated_at']}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    if args.cut is not None:
        plan = evaluate_plan(config.model, args.cut,
                             parse_strategy(args.theta1, "--theta1"),
                             parse_strategy(args.theta2, "--theta2"),
                             config.device1, config.device2, config.link,
                             config.penalties, config.lambda1)
    else:
        plan, _ = _best_plan(config, strict=False)
    cost = plan.cost
    sim_config = simulator.SimConfig(
        arrival_rate=args.rate,
        service_times=(cost.t1, cost.t3, cost.t2),
        horizon=args.horizon,
        seed=args.seed,
        warmup=args.warmup,
    )
    report = simulator.run(sim_config, keep_log=args.csv is not None)
    if args.csv:
        rows = [[r.id, repr(r.arrival), repr(r.start1), repr(r.end1),
                 repr(r.end_link), repr(r.end2)] for r in report.records]
        Path(args.csv).write_text(
            _csv_text(["id", "arrival", "start1", "end1", "end_link", "end2"], rows))
    _emit(_dump_json({
        "schema_version": SCHEMA_VERSION,
        "model": config.model.name,
        "plan": {"cut": plan.cut_index, "theta1": plan.theta1.value,
                 "theta2": plan.theta2.value},
        "service_times": {"t1": cost.t1, "t3": cost.t3, "t2": cost.t2},
        "arrival_rate": args.rate,
        "horizon": args.horizon,
        "seed": args.seed,
        "throughput": report.throughput,
        "response_time": report.response_time,
        "queue_occupancy": report.queue_occupancy,
        "completed": report.completed,
        "arrivals": report.arrivals,
        "completed_total": report.completed_total,
        "in_system_at_end": report.in_system_at_end,
    }), args.out)
    return 0


def read_plan_csv(path) -> tuple[str, dict, int]:
    """(model name, winning row, candidate count) from a plan CSV."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except OSError as exc:
        raise InvalidConfig(f"{path}: {exc.strerror or exc}") from None
    if not rows or any(col not in rows[0] for col in PLAN_COLUMNS):
        raise SchemaMismatch(f"{path} is not a plan table (expected columns {PLAN_COLUMNS})")
    return rows[0]["model"], rows[0], len(rows)


def build_report(plan_path, sim_path=None) -> dict:
    """Merge a plan table and a simulation report into one document."""
    model, winner, candidates = read_plan_csv(plan_path)
    document = {
        "schema_version": SCHEMA_VERSION,
        "model": model,
        "plan": {
            "cut": int(winner["cut"]),
            "theta1": winner["theta1"],
            "theta2": winner["theta2"],
            "t1": float(winner["t1"]), "t2": float(winner["t2"]),
            "t3": float(winner["t3"]), "t_total": float(winner["t_total"]),
            "dA": float(winner["dA"]), "L": float(winner["L"]),
            "feasible1": winner["feasible1"] == "true",
            "feasible2": winner["feasible2"] == "true",
        },
        "candidates": candidates,
        "simulation": None,
        "analytical_only": True,
    }
    if sim_path is not None:
        try:
            sim = json.loads(Path(sim_path).read_text())
        except OSError as exc:
            raise InvalidConfig(f"{sim_path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{sim_path}: {exc}") from None
        if sim:
            if "model" not in sim or "throughput" not in sim:
                raise SchemaMismatch(f"{sim_path} is not a simulation report")
            if sim["model"] != model:
                raise SchemaMismatch(
                    f"plan is for model {model!r} but simulation is for {sim['model']!r}")
            document["simulation"] = sim
            document["analytical_only"] = False
    return document


def _cmd_report(args) -> int:
    _emit(_dump_json(build_report(args.plan, args.sim)), args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codesign",
        description="Joint cut-point / branch-fusion planner for a two-device "
                    "edge inference pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="planning config JSON")
        p.add_argument("--out", help="write output to this path instead of stdout")

    p = sub.add_parser("roofline", help="per-device compute/memory classification as CSV")
    add_config(p)
    p.add_argument("--theta", default=FULL_STRUCTURE.value, choices=_STRATEGY_NAMES,
                   help="strategy used for the model's intensity (default: full structure)")
    p.set_defaults(func=_cmd_roofline)

    p = sub.add_parser("cost", help="cost breakdown of one candidate plan as JSON")
    add_config(p)
    p.add_argument("--cut", type=int, required=True, help="layer boundary index (1-based)")
    p.add_argument("--theta1", required=True, choices=_STRATEGY_NAMES)
    p.add_argument("--theta2", required=True, choices=_STRATEGY_NAMES)
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("plan", help="grid-search the best plan; CSV of ranked candidates")
    add_config(p)
    p.add_argument("--strict", action="store_true",
                   help="drop candidates whose segments miss their device's balance point")
    p.add_argument("--refine", action="store_true",
                   help="also run the continuous cut refinement and snap-compare it")
    p.add_argument("--trace-out", help="with --refine: write the descent trace CSV here")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("fuse-check", help="randomized fused-vs-branch-sum equivalence suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fuse_check)

    p = sub.add_parser("convergence-lab",
                       help="split-update geometric convergence check on a random quadratic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_convergence_lab)

    p = sub.add_parser("simulate", help="event simulation of a plan; report as JSON")
    add_config(p)
    p.add_argument("--rate", type=float, required=True, help="arrival rate, requests/s")
    p.add_argument("--horizon", type=float, required=True, help="simulated seconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=float, help="seconds excluded from stats (default 10%% of horizon)")
    p.add_argument("--cut", type=int, help="simulate this cut instead of the grid winner")
    p.add_argument("--theta1", choices=_STRATEGY_NAMES, default=FULL_STRUCTURE.value)
    p.add_argument("--theta2", choices=_STRATEGY_NAMES, default=FULL_STRUCTURE.value)
    p.add_argument("--csv", help="also write a per-request completion CSV here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="merge a plan CSV and a simulate JSON into one document")
    p.add_argument("--plan", required=True, help="CSV produced by `codesign plan`")
    p.add_argument("--sim", help="JSON produced by `codesign simulate`")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CodesignError as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
