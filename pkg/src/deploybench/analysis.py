"""Frontier and report generation over run aggregates.

Pareto dominance and quadrant labeling are pure functions. Report
emission renders five table layouts (efficiency summary, adaptation
energy, inference efficiency, fidelity by family/task, task-level
quality) as markdown, a flat per-configuration CSV, or full-precision
JSON. Formatted cells follow fixed precisions (energies 3 decimals,
percents 1, ratios 1-2) with deterministic row order, so a report
re-parses to its source values at the declared precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from . import stats
from .metrics import quantization_fidelity, std_delta as score_std_delta
from .model import (
    NEVER,
    Adaptation,
    BreakEven,
    Configuration,
    PrecisionScorePair,
    RunAggregate,
    Task,
    TelemetryTrace,
    aggregate_to_obj,
    axis_rank,
)

REPORT_FORMATS = ("markdown-table", "csv", "json")

# Score-scale labels for the task-level quality table.
TASK_METRIC_LABEL = {
    Task.CHAT: "Helpfulness (1-10)",
    Task.RAG: "Entailment (0-1)",
    Task.SUMMARIZATION: "ROUGE-L (0-1)",
}


# ---------------------------------------------------------------------------
# Pareto frontier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrontierPoint:
    config: Configuration
    x: float
    y: float
    dominated: bool = False


def _oriented(p: FrontierPoint, maximize_x: bool, minimize_y: bool) -> tuple[float, float]:
    bx = p.x if maximize_x else -p.x
    by = -p.y if minimize_y else p.y
    return bx, by


def annotate_dominance(
    points: Sequence[FrontierPoint],
    maximize_x: bool = True,
    minimize_y: bool = True,
) -> list[FrontierPoint]:
    """Return all points with their dominated flags set.

    A point is dominated when another point is at least as good on both
    oriented axes and strictly better on one. Exact coordinate ties keep
    only the lexicographically-first config on the frontier; the
    duplicates are flagged.
    """
    if not points:
        raise ValueError("empty point set")
    order = sorted(
        range(len(points)),
        key=lambda i: (
            -_oriented(points[i], maximize_x, minimize_y)[0],
            -_oriented(points[i], maximize_x, minimize_y)[1],
            points[i].config.config_id,
        ),
    )
    flags = [True] * len(points)
    best_by = -math.inf
    kept_coords: set[tuple[float, float]] = set()
    for i in order:
        bx, by = _oriented(points[i], maximize_x, minimize_y)
        if by > best_by and (bx, by) not in kept_coords:
            flags[i] = False
            kept_coords.add((bx, by))
            best_by = by
    return [replace(p, dominated=flags[i]) for i, p in enumerate(points)]


def pareto_frontier(
    points: Sequence[FrontierPoint],
    maximize_x: bool = True,
    minimize_y: bool = True,
) -> list[FrontierPoint]:
    """The non-dominated subset, sorted by x."""
    annotated = annotate_dominance(points, maximize_x, minimize_y)
    return sorted((p for p in annotated if not p.dominated), key=lambda p: (p.x, p.y))


# ---------------------------------------------------------------------------
# ROI-efficiency quadrants
# ---------------------------------------------------------------------------

QUADRANTS = ("top-left", "top-right", "bottom-left", "bottom-right")


def _never_to_inf(n_break: BreakEven) -> float:
    return math.inf if n_break == NEVER else float(n_break)


def default_thresholds(
    points: Sequence[tuple[Configuration, BreakEven, float]],
) -> tuple[float, float]:
    """Median break-even and median efficiency of the plotted set."""
    if not points:
        raise ValueError("empty point set")
    n_breaks = [_never_to_inf(nb) for _, nb, _ in points]
    ipws = [ipw for _, _, ipw in points]
    return stats.median(n_breaks), stats.median(ipws)


def roi_quadrant(
    points: Sequence[tuple[Configuration, BreakEven, float]],
    thresholds: tuple[float, float] | None = None,
) -> list[str]:
    """Quadrant label per point: fast ROI is N_break <= n0, high IPW >= i0.

    Points exactly on a threshold land on the favorable side (top-left).
    A "never" break-even maps to +inf and is always on the slow half.
    """
    if thresholds is None:
        thresholds = default_thresholds(points)
    n0, i0 = thresholds
    if not (math.isfinite(n0) or n0 == math.inf) or not math.isfinite(i0):
        raise ValueError("thresholds must be finite (n0 may be +inf)")
    labels = []
    for _, n_break, ipw in points:
        fast = _never_to_inf(n_break) <= n0
        high = ipw >= i0
        if fast and high:
            labels.append("top-left")
        elif high:
            labels.append("top-right")
        elif fast:
            labels.append("bottom-left")
        else:
            labels.append("bottom-right")
    return labels


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


def fmt_energy(v: float) -> str:
    return f"{v:.3f}"


def fmt_percent(v: float) -> str:
    return f"{v:.1f}%"


def fmt_signed_percent(v: float) -> str:
    rounded = round(v, 1)
    if rounded == 0.0:
        return "±0.0%"
    return f"{rounded:+.1f}%"


def fmt_ratio(v: float, decimals: int = 1) -> str:
    return f"{v:.{decimals}f}x"


def fmt_thousands(v: float) -> str:
    return f"{v:,.0f}"


def fmt_score(median_v: float, std_v: float) -> str:
    return f"{median_v:.2f} ± {std_v:.2f}"


def fmt_energy_iqr(median_v: float, q25: float, q75: float) -> str:
    return f"{fmt_energy(median_v)} [{fmt_energy(q25)}-{fmt_energy(q75)}]"


def fmt_break_even(v: float) -> str:
    if math.isinf(v):
        return NEVER
    return f"{v:,.0f} Reqs"


# ---------------------------------------------------------------------------
# Table builders
# ---------------------------------------------------------------------------


def _med(values: Sequence[float]) -> float | None:
    finite = [v for v in values if v is not None]
    return stats.median(finite) if finite else None


def _group(aggregates: Iterable[RunAggregate]):
    by_key: dict[tuple, RunAggregate] = {}
    for agg in aggregates:
        by_key[agg.config.key] = agg
    return by_key


def _pick(by_key, family, tier, task, adaptation) -> RunAggregate | None:
    return by_key.get((family.value, tier.value, task.value, adaptation.value))


def _families_tiers(aggregates) -> list[tuple]:
    seen = {}
    for agg in aggregates:
        c = agg.config
        seen[(axis_rank(c.family), axis_rank(c.tier))] = (c.family, c.tier)
    return [seen[k] for k in sorted(seen)]


def _tasks_of(aggregates, family, tier) -> list[Task]:
    present = {
        agg.config.task
        for agg in aggregates
        if agg.config.family == family and agg.config.tier == tier
    }
    return sorted(present, key=axis_rank)


def _stat_or_none(agg: RunAggregate | None, name: str, component: str = "median"):
    if agg is None or name not in agg.fields:
        return None
    return getattr(agg.fields[name], component)


def build_efficiency_summary(aggregates: Sequence[RunAggregate]) -> list[dict]:
    """Five-metric rows per family/tier, medians of the INT4 task configs."""
    by_key = _group(aggregates)
    rows = []
    for family, tier in _families_tiers(aggregates):
        int4_aggs = [
            a
            for a in (
                _pick(by_key, family, tier, task, Adaptation.LORA_INT4_PTQ)
                for task in _tasks_of(aggregates, family, tier)
            )
            if a is not None
        ]
        if not int4_aggs:
            continue
        q_rets = []
        for agg in int4_aggs:
            fp16 = _pick(by_key, family, tier, agg.config.task, Adaptation.LORA_FP16)
            s_fp16 = _stat_or_none(fp16, "S_task")
            s_int4 = _stat_or_none(agg, "S_task")
            if s_fp16 and s_fp16 > 0 and s_int4 is not None:
                q_rets.append(quantization_fidelity(PrecisionScorePair(s_fp16, s_int4)))
        rows.append(
            {
                "family": family.value,
                "tier": tier.value,
                "N_break": _med([_stat_or_none(a, "N_break") for a in int4_aggs]),
                "IPW": _med([_stat_or_none(a, "IPW") for a in int4_aggs]),
                "rho_sys": _med([_stat_or_none(a, "rho_sys") for a in int4_aggs]),
                "Q_ret": _med(q_rets) if q_rets else None,
                "C_tax": _med([_stat_or_none(a, "C_tax") for a in int4_aggs]),
            }
        )
    return rows


def build_adaptation_energy(aggregates: Sequence[RunAggregate]) -> list[dict]:
    """Training-energy rows (median with IQR bracket) per family/tier/method."""
    by_key = _group(aggregates)
    rows = []
    for family, tier in _families_tiers(aggregates):
        tasks = _tasks_of(aggregates, family, tier)

        def pooled(adaptation):
            aggs = [a for a in (_pick(by_key, family, tier, t, adaptation) for t in tasks) if a]
            if not aggs:
                return None
            return (
                stats.median([a.fields["E_train"].median for a in aggs]),
                stats.median([a.fields["E_train"].q25 for a in aggs]),
                stats.median([a.fields["E_train"].q75 for a in aggs]),
            )

        base = pooled(Adaptation.LORA_FP16)
        for adaptation in (Adaptation.LORA_FP16, Adaptation.QLORA_INT4):
            pool = pooled(adaptation)
            if pool is None:
                continue
            median_v, q25, q75 = pool
            ratio = None
            if base is not None and base[0] > 0:
                ratio = median_v / base[0]
            rows.append(
                {
                    "family": family.value,
                    "tier": tier.value,
                    "method": adaptation.value,
                    "E_train_median": median_v,
                    "E_train_q25": q25,
                    "E_train_q75": q75,
                    "ratio": ratio,
                }
            )
    return rows


def build_inference_efficiency(aggregates: Sequence[RunAggregate]) -> list[dict]:
    """Throughput/speedup and energy/savings rows, FP16 baseline vs INT4."""
    by_key = _group(aggregates)
    rows = []
    for family, tier in _families_tiers(aggregates):
        tasks = _tasks_of(aggregates, family, tier)

        def pooled(adaptation, field_name):
            values = [
                _stat_or_none(_pick(by_key, family, tier, t, adaptation), field_name)
                for t in tasks
            ]
            return _med(values)

        fp16_tput = pooled(Adaptation.LORA_FP16, "T_put")
        fp16_energy = pooled(Adaptation.LORA_FP16, "E_infer")
        int4_tput = pooled(Adaptation.LORA_INT4_PTQ, "T_put")
        int4_energy = pooled(Adaptation.LORA_INT4_PTQ, "E_infer")
        if fp16_tput is not None:
            rows.append(
                {
                    "family": family.value,
                    "tier": tier.value,
                    "precision": "FP16",
                    "T_put": fp16_tput,
                    "speedup": 1.0,
                    "E_infer": fp16_energy,
                    "savings": None,
                }
            )
        if int4_tput is not None:
            speedup = int4_tput / fp16_tput if fp16_tput else None
            savings = (
                (1.0 - int4_energy / fp16_energy) * 100.0
                if fp16_energy and int4_energy is not None
                else None
            )
            rows.append(
                {
                    "family": family.value,
                    "tier": tier.value,
                    "precision": "INT4",
                    "T_put": int4_tput,
                    "speedup": speedup,
                    "E_infer": int4_energy,
                    "savings": savings,
                }
            )
    return rows


def _score_pair(by_key, aggregates, family, task) -> PrecisionScorePair | None:
    tiers = sorted(
        {a.config.tier for a in aggregates if a.config.family == family and a.config.task == task},
        key=axis_rank,
    )

    def pooled(adaptation, component):
        values = [
            _stat_or_none(_pick(by_key, family, tier, task, adaptation), "S_task", component)
            for tier in tiers
        ]
        return _med(values)

    s_fp16 = pooled(Adaptation.LORA_FP16, "median")
    s_int4 = pooled(Adaptation.LORA_INT4_PTQ, "median")
    if s_fp16 is None or s_int4 is None:
        return None
    return PrecisionScorePair(
        S_FP16=s_fp16,
        S_INT4=s_int4,
        std_FP16=pooled(Adaptation.LORA_FP16, "std") or 0.0,
        std_INT4=pooled(Adaptation.LORA_INT4_PTQ, "std") or 0.0,
    )


def build_fidelity(aggregates: Sequence[RunAggregate]) -> list[dict]:
    """Score retention and variance shift per family and task."""
    by_key = _group(aggregates)
    families = sorted({a.config.family for a in aggregates}, key=axis_rank)
    rows = []
    for family in families:
        tasks = sorted(
            {a.config.task for a in aggregates if a.config.family == family}, key=axis_rank
        )
        for task in tasks:
            pair = _score_pair(by_key, aggregates, family, task)
            fp16_any = any(
                a.config.family == family
                and a.config.task == task
                and a.config.adaptation == Adaptation.LORA_FP16
                for a in aggregates
            )
            int4_any = any(
                a.config.family == family
                and a.config.task == task
                and a.config.adaptation == Adaptation.LORA_INT4_PTQ
                for a in aggregates
            )
            if not (fp16_any or int4_any):
                continue
            row = {
                "family": family.value,
                "task": task.value,
                "S_FP16": pair.S_FP16 if pair else None,
                "std_FP16": pair.std_FP16 if pair else None,
                "S_INT4": pair.S_INT4 if pair else None,
                "std_INT4": pair.std_INT4 if pair else None,
                "retention": None,
                "std_delta": None,
            }
            if pair and pair.S_FP16 > 0:
                row["retention"] = quantization_fidelity(pair)
                if pair.std_FP16 > 0:
                    row["std_delta"] = score_std_delta(pair)
            rows.append(row)
    return rows


def build_task_quality(aggregates: Sequence[RunAggregate]) -> list[dict]:
    """Per-task, per-family, per-tier FP16/INT4 scores and percent change."""
    by_key = _group(aggregates)
    rows = []
    tasks = sorted({a.config.task for a in aggregates}, key=axis_rank)
    for task in tasks:
        combos = sorted(
            {
                (axis_rank(a.config.family), axis_rank(a.config.tier))
                for a in aggregates
                if a.config.task == task
            }
        )
        for fam_rank, tier_rank in combos:
            family = list(type(aggregates[0].config.family))[fam_rank]
            tier = list(type(aggregates[0].config.tier))[tier_rank]
            fp16 = _pick(by_key, family, tier, task, Adaptation.LORA_FP16)
            int4 = _pick(by_key, family, tier, task, Adaptation.LORA_INT4_PTQ)
            if fp16 is None and int4 is None:
                continue
            s_fp16 = _stat_or_none(fp16, "S_task")
            s_int4 = _stat_or_none(int4, "S_task")
            change = None
            if s_fp16 and s_fp16 > 0 and s_int4 is not None:
                change = (s_int4 / s_fp16 - 1.0) * 100.0
            rows.append(
                {
                    "task": task.value,
                    "metric": TASK_METRIC_LABEL[task],
                    "family": family.value,
                    "tier": tier.value,
                    "S_FP16": s_fp16,
                    "std_FP16": _stat_or_none(fp16, "S_task", "std"),
                    "S_INT4": s_int4,
                    "std_INT4": _stat_or_none(int4, "S_task", "std"),
                    "change": change,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _md_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |"]
    lines.append("|" + "|".join(" --- " for _ in headers) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def _dash(value: str | None) -> str:
    return value if value is not None else "-"


def emit_report(aggregates: Sequence[RunAggregate], format: str = "markdown-table") -> str:
    """Render the five benchmark tables from run aggregates.

    `format` is one of `markdown-table`, `csv` (flat, one row per
    configuration, full precision), or `json` (tables plus raw
    aggregates, full precision).
    """
    if not aggregates:
        raise ValueError("no aggregates to report")
    aggregates = sorted(aggregates, key=lambda a: a.config.sort_rank)
    if format in ("markdown-table", "md", "markdown"):
        return _emit_markdown(aggregates)
    if format == "csv":
        return _emit_csv(aggregates)
    if format == "json":
        return _emit_json(aggregates)
    raise ValueError(f"unknown report format: {format!r} (expected one of {REPORT_FORMATS})")


def _emit_markdown(aggregates: Sequence[RunAggregate]) -> str:
    sections = ["# Deployment benchmark report", ""]

    rows = build_efficiency_summary(aggregates)
    if rows:
        sections += [
            "## Efficiency summary (INT4 medians across tasks)",
            "",
            _md_table(
                ["Family", "Tier", "ROI velocity (N_break)", "Efficiency (IPW)",
                 "Density (tok/s/GB)", "Fidelity (Q_ret)", "Cold-start tax (C_tax)"],
                [
                    [
                        r["family"],
                        r["tier"],
                        _dash(fmt_break_even(r["N_break"]) if r["N_break"] is not None else None),
                        _dash(f"{r['IPW']:.2f}" if r["IPW"] is not None else None),
                        _dash(fmt_thousands(r["rho_sys"]) if r["rho_sys"] is not None else None),
                        _dash(fmt_percent(r["Q_ret"]) if r["Q_ret"] is not None else None),
                        _dash(fmt_ratio(r["C_tax"], 0) if r["C_tax"] is not None else None),
                    ]
                    for r in rows
                ],
            ),
            "",
        ]

    rows = build_adaptation_energy(aggregates)
    if rows:
        sections += [
            "## Adaptation energy by precision regime",
            "",
            _md_table(
                ["Family", "Tier", "Method", "Median energy (kWh)", "Ratio"],
                [
                    [
                        r["family"],
                        r["tier"],
                        r["method"],
                        fmt_energy_iqr(r["E_train_median"], r["E_train_q25"], r["E_train_q75"]),
                        _dash(fmt_ratio(r["ratio"], 1) if r["ratio"] is not None else None),
                    ]
                    for r in rows
                ],
            ),
            "",
        ]

    rows = build_inference_efficiency(aggregates)
    if rows:
        sections += [
            "## Inference efficiency (FP16 vs INT4)",
            "",
            _md_table(
                ["Family", "Tier", "Precision", "Throughput (tok/s)", "Speedup",
                 "Energy/req (J)", "Savings"],
                [
                    [
                        r["family"],
                        r["tier"],
                        r["precision"],
                        _dash(fmt_thousands(r["T_put"]) if r["T_put"] is not None else None),
                        _dash(fmt_ratio(r["speedup"], 2) if r["speedup"] is not None else None),
                        _dash(fmt_energy(r["E_infer"]) if r["E_infer"] is not None else None),
                        _dash(fmt_percent(r["savings"]) if r["savings"] is not None else None),
                    ]
                    for r in rows
                ],
            ),
            "",
        ]

    rows = build_fidelity(aggregates)
    if rows:
        sections += [
            "## Quantization fidelity by family and task",
            "",
            _md_table(
                ["Family", "Task", "FP16 score", "INT4 score", "Retention", "STD delta"],
                [
                    [
                        r["family"],
                        r["task"],
                        _dash(
                            fmt_score(r["S_FP16"], r["std_FP16"])
                            if r["S_FP16"] is not None
                            else None
                        ),
                        _dash(
                            fmt_score(r["S_INT4"], r["std_INT4"])
                            if r["S_INT4"] is not None
                            else None
                        ),
                        _dash(fmt_percent(r["retention"]) if r["retention"] is not None else None),
                        _dash(
                            fmt_signed_percent(r["std_delta"])
                            if r["std_delta"] is not None
                            else None
                        ),
                    ]
                    for r in rows
                ],
            ),
            "",
        ]

    rows = build_task_quality(aggregates)
    if rows:
        sections += [
            "## Task-level quality (FP16 vs INT4)",
            "",
            _md_table(
                ["Task", "Metric", "Family", "Tier", "FP16", "INT4", "Retention"],
                [
                    [
                        r["task"],
                        r["metric"],
                        r["family"],
                        r["tier"],
                        _dash(
                            fmt_score(r["S_FP16"], r["std_FP16"])
                            if r["S_FP16"] is not None
                            else None
                        ),
                        _dash(
                            fmt_score(r["S_INT4"], r["std_INT4"])
                            if r["S_INT4"] is not None
                            else None
                        ),
                        _dash(
                            fmt_signed_percent(r["change"]) if r["change"] is not None else None
                        ),
                    ]
                    for r in rows
                ],
            ),
            "",
        ]

    return "\n".join(sections)


_CSV_MEDIAN_FIELDS = (
    "E_train", "E_load", "E_infer", "T_put", "M_vram", "S_task",
    "ttft_ms.median", "itl_ms.median",
    "N_break", "IPW", "rho_sys", "C_tax", "speedup", "energy_savings",
)


def _emit_csv(aggregates: Sequence[RunAggregate]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["config_id", "family", "tier", "task", "adaptation", "precision", "n_runs"]
    header += [f"{name}_median" for name in _CSV_MEDIAN_FIELDS]
    writer.writerow(header)
    for agg in aggregates:
        c = agg.config
        row = [
            c.config_id, c.family.value, c.tier.value, c.task.value,
            c.adaptation.value, c.precision_at_inference.value, agg.n_runs,
        ]
        for name in _CSV_MEDIAN_FIELDS:
            st = agg.fields.get(name)
            row.append(repr(st.median) if st is not None else "")
        writer.writerow(row)
    return buf.getvalue()


def _emit_json(aggregates: Sequence[RunAggregate]) -> str:
    def clean(rows: list[dict]) -> list[dict]:
        out = []
        for row in rows:
            out.append(
                {
                    k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                    for k, v in row.items()
                }
            )
        return out

    doc = {
        "schema": "deploybench-report v1",
        "tables": {
            "efficiency_summary": clean(build_efficiency_summary(aggregates)),
            "adaptation_energy": clean(build_adaptation_energy(aggregates)),
            "inference_efficiency": clean(build_inference_efficiency(aggregates)),
            "fidelity": clean(build_fidelity(aggregates)),
            "task_quality": clean(build_task_quality(aggregates)),
        },
        "configs": [aggregate_to_obj(agg) for agg in aggregates],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

PLOT_FIGURES = ("roi_quadrant", "density", "pareto", "coldstart", "fidelity", "power")


def _require_fields(agg: RunAggregate, names: Sequence[str]) -> None:
    missing = [n for n in names if n not in agg.fields]
    if missing:
        raise ValueError(
            f"missing fields for {agg.config.config_id}: " + ", ".join(missing)
        )


def _plot_csv(schema: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _cell(value: float) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return repr(value) if isinstance(value, float) else str(value)


def emit_plot_data(
    aggregates: Sequence[RunAggregate],
    figure: str,
    *,
    trace: TelemetryTrace | None = None,
    thresholds: tuple[float, float] | None = None,
) -> str:
    """Columnar CSV (with a `# schema:` header line) for one figure."""
    if figure not in PLOT_FIGURES:
        raise ValueError(f"unknown figure: {figure!r} (expected one of {PLOT_FIGURES})")

    if figure == "power":
        if trace is None:
            raise ValueError("power figure requires a trace")
        rows = []
        bucket_ms = 1000
        start = trace.start_ms
        buckets: dict[int, list[float]] = {}
        for sample in trace.samples:
            buckets.setdefault((sample.t - start) // bucket_ms, []).append(sample.watts)
        for index in sorted(buckets):
            rows.append([index, repr(stats.mean(buckets[index]))])
        return _plot_csv("power t_s:int,watts_mean:W", ["t_s", "watts_mean"], rows)

    aggregates = sorted(aggregates, key=lambda a: a.config.sort_rank)
    if not aggregates:
        raise ValueError("no aggregates")

    if figure == "roi_quadrant":
        for agg in aggregates:
            _require_fields(agg, ["N_break", "IPW"])
        points = [
            (a.config, a.fields["N_break"].median, a.fields["IPW"].median) for a in aggregates
        ]
        quad_points = [
            (c, NEVER if math.isinf(nb) else int(nb), ipw) for c, nb, ipw in points
        ]
        labels = roi_quadrant(quad_points, thresholds)
        rows = [
            [a.config.config_id, _cell(a.fields["N_break"].median),
             _cell(a.fields["IPW"].median), label]
            for a, label in zip(aggregates, labels)
        ]
        return _plot_csv(
            "roi_quadrant config_id:str,N_break:requests,IPW:score/J,quadrant:str",
            ["config_id", "N_break", "IPW", "quadrant"],
            rows,
        )

    if figure == "density":
        for agg in aggregates:
            _require_fields(agg, ["T_put", "M_vram"])
        rows = []
        for a in aggregates:
            t_put = a.fields["T_put"].median
            m_vram = a.fields["M_vram"].median
            rows.append(
                [a.config.config_id, _cell(t_put), _cell(m_vram), _cell(t_put / m_vram)]
            )
        return _plot_csv(
            "density config_id:str,T_put:tok/s,M_vram:GB,rho_sys:tok/s/GB",
            ["config_id", "T_put", "M_vram", "rho_sys"],
            rows,
        )

    if figure == "pareto":
        for agg in aggregates:
            _require_fields(agg, ["T_put", "E_infer"])
        points = [
            FrontierPoint(a.config, a.fields["T_put"].median, a.fields["E_infer"].median)
            for a in aggregates
        ]
        annotated = annotate_dominance(points, maximize_x=True, minimize_y=True)
        rows = [
            [p.config.config_id, _cell(p.x), _cell(p.y), str(not p.dominated).lower()]
            for p in annotated
        ]
        return _plot_csv(
            "pareto config_id:str,T_put:tok/s,E_infer:J,on_frontier:bool",
            ["config_id", "T_put", "E_infer", "on_frontier"],
            rows,
        )

    if figure == "coldstart":
        for agg in aggregates:
            _require_fields(agg, ["E_load", "E_infer"])
        rows = []
        for a in aggregates:
            e_load = a.fields["E_load"].median
            e_infer = a.fields["E_infer"].median
            tax = e_load / e_infer if e_infer > 0 else math.inf
            rows.append([a.config.config_id, _cell(e_load), _cell(e_infer), _cell(tax)])
        return _plot_csv(
            "coldstart config_id:str,E_load:J,E_infer:J,C_tax:ratio",
            ["config_id", "E_load", "E_infer", "C_tax"],
            rows,
        )

    # fidelity
    rows_data = build_fidelity(aggregates)
    rows_data = [r for r in rows_data if r["retention"] is not None]
    if not rows_data:
        raise ValueError("missing fields: no FP16/INT4 score pairs present")
    rows = [
        [
            r["family"], r["task"], _cell(r["S_FP16"]), _cell(r["S_INT4"]),
            _cell(r["retention"]),
            _cell(r["std_delta"]) if r["std_delta"] is not None else "",
        ]
        for r in rows_data
    ]
    return _plot_csv(
        "fidelity family:str,task:str,S_FP16:score,S_INT4:score,Q_ret:percent,std_delta:percent",
        ["family", "task", "S_FP16", "S_INT4", "Q_ret", "std_delta"],
        rows,
    )
