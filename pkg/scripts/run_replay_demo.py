#!/usr/bin/env python3
"""End-to-end replay demo: corpus -> sweep -> aggregates -> reports.

    python scripts/generate_replay_corpus.py --out corpus/ --runs 5
    python scripts/run_replay_demo.py --corpus corpus/ --out results/

Executes the full factorial sweep in replay mode, aggregates every
configuration under the corpus economic model, and emits the markdown /
csv / json reports plus the per-figure plot datasets.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from deploybench import analysis, sweep
from deploybench.cli import _replay_artifacts_loader
from deploybench.economics import load_economic_model
from deploybench.model import write_aggregates
from deploybench.telemetry import read_trace


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--alpha", type=float, default=1.0)
    args = parser.parse_args()

    corpus = Path(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    plan = sweep.load_plan(corpus / "plan.cfg")
    econ = load_economic_model(corpus / "econ.cfg")
    store = sweep.RunStore(out / "runs.jsonl")
    adapter = sweep.ReplayRunAdapter(_replay_artifacts_loader(corpus / "replay"))
    sweep.execute(plan, {a: adapter for a in plan.adaptations}, None, store)

    aggregates = sweep.aggregate_all(store, econ=econ, alpha=args.alpha)
    write_aggregates(aggregates, out / "aggregates.jsonl")

    (out / "report.md").write_text(analysis.emit_report(aggregates, "markdown-table"))
    (out / "report.csv").write_text(analysis.emit_report(aggregates, "csv"))
    (out / "report.json").write_text(analysis.emit_report(aggregates, "json"))

    for figure in ("roi_quadrant", "density", "pareto", "coldstart", "fidelity"):
        (out / f"{figure}.csv").write_text(analysis.emit_plot_data(aggregates, figure))
    sample_config = sweep.enumerate_plan(plan)[0]
    sample_trace = read_trace(corpus / "replay" / sample_config.config_id / "run0.trace")
    (out / "power.csv").write_text(analysis.emit_plot_data([], "power", trace=sample_trace))

    n_done = len(store.records())
    print(f"executed {n_done} runs over {len(aggregates)} configurations")
    print(f"reports and plot data under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
