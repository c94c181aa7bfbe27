"""Command-line interface.

Subcommands mirror the pipeline: `plan` enumerates a sweep, `run` /
`resume` execute it (replay mode reads stored artifacts), `aggregate`
reduces the store, `report` / `plotdata` / `frontier` emit documents,
and `measure` drives a streaming endpoint directly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, economics, latency, sweep, telemetry
from .adapters import MockEndpoint, measure_requests
from .model import (
    Configuration,
    EconomicModel,
    read_aggregates,
    write_aggregates,
)


def _load_econ(path: str | None) -> EconomicModel | None:
    if path is None:
        return None
    return economics.load_economic_model(path)


def _replay_artifacts_loader(replay_dir: Path):
    def load(config: Configuration, run_index: int) -> sweep.ReplayArtifacts:
        base = replay_dir / config.config_id
        trace = telemetry.read_trace(base / f"run{run_index}.trace")
        timings = latency.read_timings(base / f"run{run_index}.requests")
        scores = [
            float(line)
            for line in (base / f"run{run_index}.scores").read_text().split()
            if line.strip()
        ]
        memory_path = base / f"run{run_index}.memory"
        memory: list[tuple[int, float]] = []
        if memory_path.exists():
            for line in memory_path.read_text().splitlines():
                if line.strip():
                    t_str, gb_str = line.split()
                    memory.append((int(t_str), float(gb_str)))
        return sweep.ReplayArtifacts(
            trace=trace,
            timings=tuple(timings),
            score_passes=tuple(scores),
            memory_series=tuple(memory),
        )

    return load


def cmd_plan(args) -> int:
    plan = sweep.load_plan(args.plan)
    configs = sweep.enumerate_plan(plan)
    for config in configs:
        print(config.config_id)
    print(f"# {len(configs)} configurations, {plan.runs_per_config} runs each", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    plan = sweep.load_plan(args.plan)
    store = sweep.RunStore(args.store)
    adapter = sweep.ReplayRunAdapter(_replay_artifacts_loader(Path(args.replay_dir)))
    adapters = {a: adapter for a in plan.adaptations}
    sweep.execute(plan, adapters, None, store, n_requests=args.requests)
    done = sum(
        1
        for c in sweep.enumerate_plan(plan)
        for k in range(plan.runs_per_config)
        if store.status_of(c, k) == sweep.DONE
    )
    failed = sum(
        1
        for c in sweep.enumerate_plan(plan)
        for k in range(plan.runs_per_config)
        if store.status_of(c, k) == sweep.FAILED
    )
    print(f"done={done} failed={failed} store={args.store}")
    return 0 if failed == 0 else 1


def cmd_aggregate(args) -> int:
    store = sweep.RunStore(args.store)
    econ = _load_econ(args.econ)
    aggregates = sweep.aggregate_all(store, econ=econ, alpha=args.alpha)
    if not aggregates:
        print("no completed runs in store", file=sys.stderr)
        return 1
    write_aggregates(aggregates, args.out)
    print(f"wrote {len(aggregates)} aggregates to {args.out}")
    return 0


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
        print(f"wrote {out}", file=sys.stderr)


def cmd_report(args) -> int:
    aggregates = read_aggregates(args.aggregates)
    _emit(analysis.emit_report(aggregates, args.format), args.out)
    return 0


def cmd_plotdata(args) -> int:
    aggregates = read_aggregates(args.aggregates) if args.aggregates else []
    trace = telemetry.read_trace(args.trace) if args.trace else None
    _emit(analysis.emit_plot_data(aggregates, args.figure, trace=trace), args.out)
    return 0


def cmd_frontier(args) -> int:
    aggregates = read_aggregates(args.aggregates)
    points = [
        analysis.FrontierPoint(
            a.config, a.fields["T_put"].median, a.fields["E_infer"].median
        )
        for a in aggregates
    ]
    frontier = analysis.pareto_frontier(points, maximize_x=True, minimize_y=True)
    lines = ["config_id,T_put,E_infer"]
    lines += [f"{p.config.config_id},{p.x!r},{p.y!r}" for p in frontier]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_measure(args) -> int:
    endpoint = MockEndpoint() if args.endpoint == "mock" else args.endpoint
    try:
        timings = measure_requests(
            endpoint, args.requests, max_tokens=args.max_tokens, gap_ms=args.gap_ms
        )
    except Exception as exc:  # noqa: BLE001 - surface as exit status
        print(f"measurement failed: {exc}", file=sys.stderr)
        return 1
    latency.write_timings(timings, args.timings_out)
    print(f"wrote {len(timings)} request timings to {args.timings_out}", file=sys.stderr)

    if args.trace_out:
        if args.provider == "replay":
            if not args.trace_in:
                print("--provider replay requires --trace-in", file=sys.stderr)
                return 2
            provider = telemetry.ReplayProvider(telemetry.read_trace(args.trace_in))
            trace = telemetry.record_trace(provider)
        else:
            import threading

            provider = telemetry.LiveGpuProvider()
            stop = threading.Event()
            window_s = max(t.token_times[-1] for t in timings) / 1000.0
            threading.Timer(window_s, stop.set).start()
            trace = telemetry.record_trace(provider, args.period_ms, stop)
        telemetry.write_trace(trace, args.trace_out)
        print(f"wrote trace to {args.trace_out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deploybench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="enumerate a sweep plan")
    p.add_argument("--plan", required=True)
    p.set_defaults(func=cmd_plan)

    for name in ("run", "resume"):
        p = sub.add_parser(name, help="execute pending runs of a sweep (replay mode)")
        p.add_argument("--plan", required=True)
        p.add_argument("--store", required=True)
        p.add_argument("--replay-dir", required=True)
        p.add_argument("--requests", type=int, default=100)
        p.set_defaults(func=cmd_run)

    p = sub.add_parser("aggregate", help="aggregate completed runs")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--econ", default=None)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="emit benchmark tables")
    p.add_argument("--aggregates", required=True)
    p.add_argument("--format", default="markdown-table", choices=list(analysis.REPORT_FORMATS))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plotdata", help="emit columnar data for one figure")
    p.add_argument("--aggregates", default=None)
    p.add_argument("--figure", required=True, choices=list(analysis.PLOT_FIGURES))
    p.add_argument("--trace", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("frontier", help="emit the throughput/energy frontier")
    p.add_argument("--aggregates", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("measure", help="drive a streaming completion endpoint")
    p.add_argument("--endpoint", required=True, help="URL, or 'mock' for the built-in mock")
    p.add_argument("--requests", type=int, default=100)
    p.add_argument("--max-tokens", type=int, default=128)
    p.add_argument("--gap-ms", type=int, default=0)
    p.add_argument("--provider", choices=["live", "replay"], default="replay")
    p.add_argument("--trace-in", default=None)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--period-ms", type=int, default=100)
    p.add_argument("--timings-out", required=True)
    p.set_defaults(func=cmd_measure)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
