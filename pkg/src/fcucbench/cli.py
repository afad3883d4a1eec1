"""Command-line entry point.

Subcommands cover the full pipeline: operating-point generation and
labeling, model training, scheduling, outage simulation, suite
benchmarking, and report emission.  Exit codes: 0 success, 1 input or
validation problem, 2 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

from . import bench as bench_mod
from . import learn as learn_mod
from .milp.backend import BackendUnavailableError, get_backend, solve
from .milp.model import SolveOptions
from .sfr import SimConfig, save_trace_csv, simulate_outage, sweep_outages
from .system import (ScenarioParseError, ScenarioValidationError,
                     load_scenario)
from .ucbase import (extract_schedule, load_schedule_csv, save_schedule_csv,
                     schedule_cost, validate_schedule, violations_report,
                     cost_model_from)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix="~")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _add_solve_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default=os.environ.get("FCUC_SOLVER", "highs"),
                   help="solve backend (env FCUC_SOLVER)")
    p.add_argument("--gap", type=float, default=0.001,
                   help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=900.0,
                   help="solver time limit, s")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _solve_options(args) -> SolveOptions:
    return SolveOptions(relative_gap=args.gap, time_limit=args.time_limit,
                        thread_count=args.threads, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fcucbench",
                     description="frequency-aware unit-commitment benchmark "
                                 "toolkit for island grids")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[], help="generate and label "
                       "operating points")
    p.add_argument("--scenario", required=True)
    p.add_argument("--profiles", default=None)
    p.add_argument("--count", type=int, default=120,
                   help="operating points to generate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.add_argument("--sim-dt", type=float, default=0.005)
    p.add_argument("--gap", type=float, default=0.001)
    p.add_argument("--time-limit", type=float, default=120.0)

    p = sub.add_parser("train", help="train a model from a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--target", choices=("nadir", "ufls"), required=True)
    p.add_argument("--nadir-threshold", type=float, default=None,
                   help="acceptability threshold, Hz (nadir target)")
    p.add_argument("--min-points", type=int, default=500)
    p.add_argument("--out", required=True, help="output model file")

    p = sub.add_parser("schedule", help="build and solve one formulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--profiles", default=None)
    p.add_argument("--formulation", required=True,
                   choices=bench_mod.FORMULATIONS)
    p.add_argument("--nadir-threshold", type=float, default=None,
                   help="preventive sweep value, Hz")
    p.add_argument("--ufls-cost", type=float, default=None,
                   help="corrective sweep value, kEUR/MW")
    p.add_argument("--model", default=None, help="trained model file "
                   "(data-driven formulations)")
    p.add_argument("--pwl-breakpoints", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    _add_solve_flags(p)

    p = sub.add_parser("simulate", help="evaluate a schedule with the "
                       "frequency simulator")
    p.add_argument("--scenario", required=True)
    p.add_argument("--profiles", default=None)
    p.add_argument("--schedule", required=True, help="schedule CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--sim-dt", type=float, default=0.005)
    p.add_argument("--traces", action="store_true",
                   help="write one trace CSV per outage")

    p = sub.add_parser("bench", help="run a declarative suite")
    p.add_argument("--scenario", required=True)
    p.add_argument("--profiles", default=None)
    p.add_argument("--suite", required=True, help="suite JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel runs (1 = sequential)")
    p.add_argument("--format", default="csv,markdown,structured-text")

    p = sub.add_parser("report", help="re-emit reports from saved results")
    p.add_argument("--results", required=True,
                   help="directory holding results.jsonl")
    p.add_argument("--format", default="csv,markdown")

    return parser


def _cmd_gen_data(args) -> int:
    scenario = load_scenario(args.scenario, args.profiles)
    opts = SolveOptions(relative_gap=args.gap, time_limit=args.time_limit)
    points = learn_mod.generate_operating_points(scenario, args.count,
                                                 args.seed, opts)
    dataset = learn_mod.label_dataset(points, scenario,
                                      SimConfig(dt=args.sim_dt))
    _atomic_write(args.out, lambda tmp: learn_mod.save_dataset(dataset, tmp))
    print(f"wrote {len(dataset)} labeled outages from {args.count} "
          f"operating points to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset = learn_mod.load_dataset(args.dataset)
    if args.target == "nadir":
        if args.nadir_threshold is None:
            print("error: --nadir-threshold is required for the nadir target",
                  file=sys.stderr)
            return EXIT_INPUT
        model = learn_mod.train_logistic_nadir(dataset, args.nadir_threshold,
                                               min_points=args.min_points)
        extra = (f"accuracy {model.metadata['train_accuracy']:.3f}, "
                 f"false-acceptable {model.metadata['false_acceptable_rate']:.3f}")
    else:
        model = learn_mod.train_ufls_tree(dataset, min_points=args.min_points)
        extra = f"train MAE {model.metadata.get('train_mae_mw', 0.0):.3f} MW"
    _atomic_write(args.out, lambda tmp: learn_mod.save_model(model, tmp))
    print(f"trained {args.target} model on {len(dataset)} points ({extra}) "
          f"-> {args.out}")
    return EXIT_OK


def _cmd_schedule(args) -> int:
    scenario = load_scenario(args.scenario, args.profiles)
    get_backend(args.solver)  # fail fast on unknown backends
    param = None
    if args.formulation.startswith("pfcuc"):
        param = args.nadir_threshold
        if args.ufls_cost is not None:
            print("error: --ufls-cost applies to corrective formulations only",
                  file=sys.stderr)
            return EXIT_INPUT
    elif args.formulation.startswith("cfcuc"):
        param = args.ufls_cost
        if args.nadir_threshold is not None:
            print("error: --nadir-threshold applies to preventive "
                  "formulations only", file=sys.stderr)
            return EXIT_INPUT
    spec = bench_mod.RunSpec(
        formulation=args.formulation, param=param, model_path=args.model,
        solve_options=_solve_options(args),
        pwl_breakpoints=args.pwl_breakpoints,
    )
    try:
        spec.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    uc = bench_mod.build_formulation(scenario, spec)
    sol = solve(uc.model, backend=args.solver, options=spec.solve_options)
    if not sol.ok:
        print(f"solver finished with status {sol.status}", file=sys.stderr)
        return EXIT_SOLVER
    schedule = extract_schedule(sol, scenario)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "schedule.csv")
    _atomic_write(out_csv, lambda tmp: save_schedule_csv(schedule, tmp))
    report = violations_report(validate_schedule(schedule, scenario))
    _atomic_write(os.path.join(args.out, "validation.txt"),
                  lambda tmp: open(tmp, "w").write(report))
    cost = schedule_cost(schedule, uc.cost_model)
    print(f"status {sol.status}; objective {sol.objective:.2f} EUR; "
          f"schedule cost {cost:.2f} EUR; wrote {out_csv}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario, args.profiles)
    schedule = load_schedule_csv(args.schedule, scenario)
    config = SimConfig(dt=args.sim_dt,
                       trace_decimation=10 if args.traces else 0)
    sweep = sweep_outages(scenario, schedule, config)
    os.makedirs(args.out, exist_ok=True)

    def write_summary(tmp):
        import csv as _csv
        with open(tmp, "w", newline="") as f:
            wr = _csv.writer(f)
            wr.writerow(["hour", "lost_unit", "nadir_hz", "max_rocof_hz_s",
                         "shed_mw", "qss_hz"])
            for (t, unit), res in sweep.results.items():
                wr.writerow([t + 1, unit, repr(res.nadir),
                             repr(res.max_rocof), repr(res.shed_mw),
                             repr(res.qss)])
    out_csv = os.path.join(args.out, "outages.csv")
    _atomic_write(out_csv, write_summary)
    if args.traces:
        for (t, unit), res in sweep.results.items():
            path = os.path.join(args.out, f"trace_h{t + 1}_u{unit}.csv")
            _atomic_write(path, lambda tmp, r=res: save_trace_csv(r, tmp))
    print(f"{sweep.n_outages} outages: total shed "
          f"{sweep.total_shed_mw:.2f} MW, average nadir "
          f"{sweep.avg_nadir_hz:.4f} Hz; wrote {out_csv}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    scenario = load_scenario(args.scenario, args.profiles)
    specs = bench_mod.load_suite(args.suite)
    results = bench_mod.run_suite(scenario, specs, out_dir=args.out)
    formats = tuple(args.format.split(","))
    bench_mod.emit_report(results, args.out, formats)
    failed = [r for r in results if r.operation_cost is None]
    for r in failed:
        print(f"run {r.formulation}@{r.param}: {r.status}", file=sys.stderr)
    print(f"completed {len(results) - len(failed)}/{len(results)} runs; "
          f"reports in {args.out}")
    return EXIT_SOLVER if failed else EXIT_OK


def _cmd_report(args) -> int:
    jsonl = os.path.join(args.results, "results.jsonl")
    if not os.path.exists(jsonl):
        print(f"error: {jsonl} not found", file=sys.stderr)
        return EXIT_INPUT
    results = bench_mod.load_results_jsonl(jsonl)
    written = bench_mod.emit_report(results, args.results,
                                    tuple(args.format.split(",")))
    print(f"wrote {len(written)} report files to {args.results}")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "schedule": _cmd_schedule,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return _COMMANDS[args.command](args)
    except (ScenarioParseError, ScenarioValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
