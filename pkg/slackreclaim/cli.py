#!/usr/bin/env python3
"""
Command line interface.

    slackreclaim generate    emit task graph files
    slackreclaim schedule    graph -> schedule CSV
    slackreclaim reclaim     graph (+ schedule) + algorithm -> assignment CSV + energy
    slackreclaim experiment  config/profile -> result files
    slackreclaim report      result -> csv/json/summary
    slackreclaim serve       start the HTTP service

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .errors import ConfigError, SlackReclaimError
from .experiment import check_orderings, config_from_dict, config_from_profile, load_config, load_result, run
from .powermodel import resolve_cpu
from .reclaim import Algorithm, reclaim_schedule, write_assignments_csv
from .report import ReportFormat, write_report
from .scheduler import (
    Priority,
    list_schedule,
    read_schedule_csv,
    slack_windows,
    validate_schedule,
    write_schedule_csv,
)
from .settings import settings
from .taskgraph import STRUCTURED_COMM, gen_gauss_jordan, gen_lu, gen_random, levels_for_size, load, save

logger = logging.getLogger("slackreclaim")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got '{text}'") from e


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    multiple = args.count > 1
    if multiple:
        out.mkdir(parents=True, exist_ok=True)

    for index in range(args.count):
        seed = args.seed + index
        if args.family == "random":
            graph = gen_random(args.size, seed)
        else:
            levels = args.levels or levels_for_size(args.size)
            generator = gen_lu if args.family == "lu" else gen_gauss_jordan
            comm = args.comm if args.comm is not None else STRUCTURED_COMM
            graph = generator(levels, comm=comm, seed=seed if args.jitter else None)
        path = out / f"{args.family}-{index}.json" if multiple else out
        save(graph, path)
        logger.info(f"wrote {path} ({len(graph.tasks)} tasks, {len(graph.edges)} edges)")
    return EXIT_OK


def cmd_schedule(args: argparse.Namespace) -> int:
    model = resolve_cpu(args.cpu)
    graph = load(args.graph)
    schedule = list_schedule(graph, args.procs, model, args.sched)
    windows = slack_windows(schedule, graph)
    write_schedule_csv(schedule, windows, args.out)
    print(f"makespan {schedule.makespan:.6f} s on {args.procs} processors -> {args.out}")
    return EXIT_OK


def cmd_reclaim(args: argparse.Namespace) -> int:
    model = resolve_cpu(args.cpu)
    graph = load(args.graph)
    if args.schedule:
        schedule = read_schedule_csv(args.schedule, args.procs)
        validate_schedule(schedule, graph, model)
    else:
        schedule = list_schedule(graph, args.procs, model, args.sched)

    baseline = reclaim_schedule(schedule, graph, model, Algorithm.NONE)
    reclaimed = reclaim_schedule(schedule, graph, model, args.alg, workers=args.workers)
    reclaimed.revalidate(graph)
    write_assignments_csv(reclaimed, args.out)

    savings = 100.0 * (1.0 - reclaimed.total_energy / baseline.total_energy)
    print(
        f"{reclaimed.algorithm.value}: {reclaimed.total_energy:.3f} mJ "
        f"(baseline {baseline.total_energy:.3f} mJ, savings {savings:.3f}%) -> {args.out}"
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    overrides = {
        "seed": args.seed,
        "cpu": args.cpu,
        "processor_counts": args.procs,
        "schedulers": args.sched,
        "algorithms": args.alg,
        "workers": args.workers,
    }
    if args.config:
        base = load_config(args.config).model_dump(mode="json")
        base.update({key: value for key, value in overrides.items() if value is not None})
        config = config_from_dict(base)
    else:
        config = config_from_profile(args.profile, **overrides)
    if config.output_csv is None:
        config = config.model_copy(update={"output_csv": str(out_dir / "records.csv")})

    result = run(config)
    write_report(result, ReportFormat.JSON, out_dir)
    write_report(result, ReportFormat.SUMMARY, out_dir)
    orderings = check_orderings(result)
    print(
        f"{len(result.records)} records, {len(result.failures)} failed cells, "
        f"ordering {'ok' if orderings.ok else 'VIOLATED'} -> {out_dir}"
    )
    return EXIT_OK if not result.failures else EXIT_RUNTIME


def cmd_report(args: argparse.Namespace) -> int:
    result = load_result(args.result)
    for path in write_report(result, args.format, args.out):
        print(path)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slackreclaim",
        description="DVFS slack reclamation simulator for task graphs on multiprocessors",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--log-level", default=None, help="logging level (default from SLACKRECLAIM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    cpu_default = settings.get_config("cpu")
    schedulers = [p.value for p in Priority]
    algorithms = [a.value for a in Algorithm]

    gen = sub.add_parser("generate", help="generate task graph files")
    gen.add_argument("--family", choices=["random", "lu", "gauss_jordan"], default="random")
    gen.add_argument("--size", type=int, default=100, help="task count (structured families: closest level count)")
    gen.add_argument("--levels", type=int, default=None, help="explicit level count for lu/gauss_jordan")
    gen.add_argument("--count", type=int, default=1, help="number of graphs; >1 writes into --out as a directory")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--comm", type=float, default=None, help="edge communication cost in seconds")
    gen.add_argument("--jitter", action="store_true", help="draw structured cycles from [5, 10] Mc")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    sched = sub.add_parser("schedule", help="list-schedule a graph at f_N")
    sched.add_argument("graph")
    sched.add_argument("--procs", type=int, required=True)
    sched.add_argument("--sched", choices=schedulers, default=Priority.FIFO.value)
    sched.add_argument("--cpu", default=cpu_default, help="preset name or processor model file")
    sched.add_argument("--out", required=True)
    sched.set_defaults(func=cmd_schedule)

    rec = sub.add_parser("reclaim", help="apply a reclamation algorithm to a schedule")
    rec.add_argument("graph")
    rec.add_argument("--schedule", default=None, help="schedule CSV; list-scheduled when omitted")
    rec.add_argument("--procs", type=int, default=None)
    rec.add_argument("--sched", choices=schedulers, default=Priority.FIFO.value)
    rec.add_argument("--alg", choices=algorithms, default=Algorithm.MFS.value)
    rec.add_argument("--cpu", default=cpu_default)
    rec.add_argument(
        "--workers", type=int, default=settings.get_int("workers"), help="threads; ordering only, no speedup"
    )
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_reclaim)

    exp = sub.add_parser("experiment", help="run an experiment sweep")
    exp.add_argument("--config", default=None, help="JSON experiment config")
    exp.add_argument("--profile", choices=["quick", "full"], default="quick")
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--cpu", default=None)
    exp.add_argument("--procs", type=_int_list, default=None, help="e.g. 2,4,8")
    exp.add_argument("--sched", type=_str_list, default=None, help="e.g. fifo,lpt")
    exp.add_argument("--alg", type=_str_list, default=None, help="e.g. none,rdvfs,mfs")
    exp.add_argument("--workers", type=int, default=None, help="threads; ordering only, no speedup")
    exp.add_argument("--out", default=settings.get_config("output_dir"))
    exp.set_defaults(func=cmd_experiment)

    rep = sub.add_parser("report", help="render reports from a result file")
    rep.add_argument("result", help="result.json or records.csv")
    rep.add_argument("--format", choices=[f.value for f in ReportFormat], default=ReportFormat.SUMMARY.value)
    rep.add_argument("--out", default=settings.get_config("output_dir"))
    rep.set_defaults(func=cmd_report)

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default=settings.get_config("host"))
    srv.add_argument("--port", type=int, default=settings.get_int("port"))
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.get_config("log_level")).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.command == "reclaim" and args.schedule is None and args.procs is None:
        logger.error("reclaim needs --procs when no --schedule is given")
        return EXIT_CONFIG

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"{e.code}: {e.message}")
        return EXIT_CONFIG
    except (SlackReclaimError, OSError) as e:
        code = getattr(e, "code", type(e).__name__)
        logger.error(f"{code}: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
