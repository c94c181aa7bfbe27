#!/usr/bin/env python3
"""Synthesize a deterministic replay corpus for a full factorial sweep.

Writes, per configuration, one trace / request-timing / score / memory
file per run, plus a plan file and an economic model, so the whole
pipeline can be exercised end-to-end without hardware:

    python scripts/generate_replay_corpus.py --out corpus/ --runs 5

Magnitudes are loosely realistic for low-batch serving on a legacy
16 GB accelerator (idle ~12 W, inference ~35-70 W, sub-GB INT4
footprints for the smallest tier); they are demo data, not
measurements.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from deploybench.economics import save_economic_model
from deploybench.latency import write_timings
from deploybench.model import (
    Adaptation,
    Configuration,
    EconomicModel,
    PowerSample,
    Precision,
    RequestTiming,
    Stage,
    StageSpan,
    Task,
    TelemetryTrace,
    Tier,
)
from deploybench.sweep import SweepPlan, enumerate_plan, save_plan
from deploybench.telemetry import write_trace

TIER_SCALE = {Tier.MICRO: 1.0, Tier.COMPACT: 2.2, Tier.STANDARD: 4.5}
PRECISION_POWER = {Precision.FP16: 1.0, Precision.INT8: 0.75, Precision.INT4: 0.55}
PRECISION_SPEED = {Precision.FP16: 1.0, Precision.INT8: 1.4, Precision.INT4: 1.9}
VRAM_GB = {
    (Tier.MICRO, Precision.FP16): 1.25,
    (Tier.MICRO, Precision.INT8): 0.85,
    (Tier.MICRO, Precision.INT4): 0.625,
    (Tier.COMPACT, Precision.FP16): 3.8,
    (Tier.COMPACT, Precision.INT8): 2.6,
    (Tier.COMPACT, Precision.INT4): 1.9,
    (Tier.STANDARD, Precision.FP16): 8.8,
    (Tier.STANDARD, Precision.INT8): 6.0,
    (Tier.STANDARD, Precision.INT4): 4.4,
}
TASK_SCORE = {Task.CHAT: 7.3, Task.RAG: 0.76, Task.SUMMARIZATION: 0.85}


def synthesize_run(config: Configuration, run_index: int, n_requests: int):
    rng = np.random.default_rng(abs(hash((config.config_id, run_index))) % 2**32)
    scale = TIER_SCALE[config.tier]
    precision = config.precision_at_inference

    adapt_s = int(8 * scale * (2.2 if config.adaptation == Adaptation.QLORA_INT4 else 1.0))
    adapt_w = 45.0 + 18.0 * scale
    load_s = max(1, int(scale))
    load_w = 60.0 + 10.0 * scale
    infer_s = 10
    infer_w = (22.0 + 14.0 * scale) * PRECISION_POWER[precision]

    idle_end = 6000
    adapt_start, adapt_end = idle_end + 1000, idle_end + 1000 + adapt_s * 1000
    load_start, load_end = adapt_end + 500, adapt_end + 500 + load_s * 1000
    infer_start, infer_end = load_end + 500, load_end + 500 + infer_s * 1000
    tail_end = infer_end + 500

    def watts_at(t: int) -> float:
        if adapt_start <= t <= adapt_end:
            base = adapt_w
        elif load_start <= t <= load_end:
            base = load_w
        elif infer_start <= t <= infer_end:
            base = infer_w
        else:
            base = 12.0
        return max(0.0, base + float(rng.normal(0.0, 0.6)))

    samples = tuple(PowerSample(t, watts_at(t)) for t in range(0, tail_end + 1, 100))
    trace = TelemetryTrace(
        samples=samples,
        spans=(
            StageSpan(Stage.IDLE, 0, idle_end),
            StageSpan(Stage.ADAPTATION, adapt_start, adapt_end),
            StageSpan(Stage.LOAD, load_start, load_end),
            StageSpan(Stage.INFERENCE, infer_start, infer_end),
        ),
        nominal_period_ms=100,
        device_memory_gb=16.0,
    )

    # Sequential batch-1 requests until the inference window is full (or the
    # request cap is hit), so sustained throughput reflects tier and precision.
    itl_ms = max(2, round(10 * scale / PRECISION_SPEED[precision]))
    ttft_ms = max(20, round(40 * scale / PRECISION_SPEED[precision]))
    tokens = 40
    timings = []
    cursor = infer_start
    while len(timings) < n_requests:
        first = cursor + ttft_ms
        token_times = tuple(first + itl_ms * j for j in range(tokens))
        if token_times[-1] > infer_end:
            break
        timings.append(RequestTiming(submit=cursor, first_token=first, token_times=token_times))
        cursor = token_times[-1] + 5

    base_score = TASK_SCORE[config.task]
    drop = 0.995 if precision == Precision.INT4 else 1.0
    scores = [
        round(float(base_score * drop + rng.normal(0.0, base_score * 0.01)), 4)
        for _ in range(3)
    ]

    vram = VRAM_GB[(config.tier, precision)]
    memory = [(infer_start, vram * 0.9), (infer_start + 2000, vram), (infer_end, vram * 0.95)]
    return trace, timings, scores, memory


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus output directory")
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--requests", type=int, default=200, help="cap on requests per run")
    args = parser.parse_args()

    out = Path(args.out)
    replay_dir = out / "replay"
    plan = SweepPlan(runs_per_config=args.runs)
    save_plan_path = out / "plan.cfg"
    out.mkdir(parents=True, exist_ok=True)
    save_plan(plan, save_plan_path)
    save_economic_model(
        EconomicModel(C_setup=0.05, C_api=0.002, electricity_price=0.30, carbon_intensity=0.4),
        out / "econ.cfg",
    )

    configs = enumerate_plan(plan)
    for config in configs:
        config_dir = replay_dir / config.config_id
        config_dir.mkdir(parents=True, exist_ok=True)
        for run in range(args.runs):
            trace, timings, scores, memory = synthesize_run(config, run, args.requests)
            write_trace(trace, config_dir / f"run{run}.trace")
            write_timings(timings, config_dir / f"run{run}.requests")
            (config_dir / f"run{run}.scores").write_text(
                "\n".join(str(s) for s in scores) + "\n"
            )
            (config_dir / f"run{run}.memory").write_text(
                "\n".join(f"{t} {gb}" for t, gb in memory) + "\n"
            )
    print(f"wrote {len(configs)} configurations x {args.runs} runs under {replay_dir}")
    print(f"plan: {save_plan_path}")
    print(f"economic model: {out / 'econ.cfg'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
