"""Factorial sweep planning, execution, persistence, and aggregation.

A sweep enumerates the cartesian product of the four configuration axes
in a fixed order, runs each configuration `runs_per_config` times
through registered stage adapters, and appends one validated
`LifecycleRecord` per run to an append-only `RunStore`. Failed runs are
marked and skipped on restart, so execution is resumable; reruns of a
finished sweep are no-ops.

One configuration runs at a time: power traces must not interleave
workloads. Aggregation reads completed records only and may run
concurrently with execution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from . import stats
from .latency import aggregate_latency
from .model import (
    J_PER_KWH,
    NEVER,
    RECORD_SCHEMA_HEADER,
    RECORD_SCALAR_FIELDS,
    RECORD_STATSET_FIELDS,
    Adaptation,
    Configuration,
    EconomicModel,
    Family,
    FieldStats,
    LifecycleRecord,
    RequestTiming,
    RunAggregate,
    Stage,
    Task,
    TelemetryTrace,
    Tier,
    axis_rank,
    record_from_line,
    record_to_line,
    validate_record,
)
from .metrics import deployment_metrics
from .telemetry import ReplayProvider, TraceRecorder, replay_into
from .adapters import probe_vram


@dataclass(frozen=True)
class SweepPlan:
    """The factorial configuration space plus repetition counts."""

    families: tuple[Family, ...] = tuple(Family)
    tiers: tuple[Tier, ...] = tuple(Tier)
    tasks: tuple[Task, ...] = tuple(Task)
    adaptations: tuple[Adaptation, ...] = tuple(Adaptation)
    runs_per_config: int = 20
    evaluation_passes: int = 3
    model_ids: Mapping[tuple[Family, Tier], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("families", "tiers", "tasks", "adaptations"):
            deduped = tuple(dict.fromkeys(getattr(self, name)))
            object.__setattr__(self, name, deduped)
        if self.runs_per_config < 1:
            raise ValueError("runs_per_config must be >= 1")
        if self.evaluation_passes < 1:
            raise ValueError("evaluation_passes must be >= 1")

    def model_id_for(self, family: Family, tier: Tier) -> str:
        return self.model_ids.get((family, tier), f"{family.value}-{tier.value}")


def enumerate_plan(plan: SweepPlan) -> list[Configuration]:
    """Deterministic enumeration of the plan's configuration space.

    Axes sort by enum declaration order; the product nests
    family > tier > task > adaptation. Enumerating twice yields the
    identical sequence.
    """
    for name in ("families", "tiers", "tasks", "adaptations"):
        if not getattr(plan, name):
            raise ValueError(f"empty axis: {name}")
    families = sorted(plan.families, key=axis_rank)
    tiers = sorted(plan.tiers, key=axis_rank)
    tasks = sorted(plan.tasks, key=axis_rank)
    adaptations = sorted(plan.adaptations, key=axis_rank)
    return [
        Configuration(
            family=f, tier=p, task=t, adaptation=a, model_id=plan.model_id_for(f, p)
        )
        for f, p, t, a in product(families, tiers, tasks, adaptations)
    ]


# ---------------------------------------------------------------------------
# Plan config file: keyed text listing axis values.
# ---------------------------------------------------------------------------


def save_plan(plan: SweepPlan, path) -> None:
    lines = [
        "# deploybench sweep plan",
        "families = " + ", ".join(f.value for f in plan.families),
        "tiers = " + ", ".join(t.value for t in plan.tiers),
        "tasks = " + ", ".join(t.value for t in plan.tasks),
        "adaptations = " + ", ".join(a.value for a in plan.adaptations),
        f"runs_per_config = {plan.runs_per_config}",
        f"evaluation_passes = {plan.evaluation_passes}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_plan(path) -> SweepPlan:
    values: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()

    def split(key: str) -> list[str]:
        return [v.strip() for v in values.get(key, "").split(",") if v.strip()]

    kwargs: dict = {}
    if "families" in values:
        kwargs["families"] = tuple(Family(v) for v in split("families"))
    if "tiers" in values:
        kwargs["tiers"] = tuple(Tier(v) for v in split("tiers"))
    if "tasks" in values:
        kwargs["tasks"] = tuple(Task(v) for v in split("tasks"))
    if "adaptations" in values:
        kwargs["adaptations"] = tuple(Adaptation(v) for v in split("adaptations"))
    if "runs_per_config" in values:
        kwargs["runs_per_config"] = int(values["runs_per_config"])
    if "evaluation_passes" in values:
        kwargs["evaluation_passes"] = int(values["evaluation_passes"])
    return SweepPlan(**kwargs)


# ---------------------------------------------------------------------------
# RunStore: append-only record file plus a status sidecar.
# ---------------------------------------------------------------------------

PENDING = "pending"
DONE = "done"
FAILED = "failed"


class RunStore:
    """Append-only store of lifecycle records keyed by (configuration, run).

    Records live one-per-line in a schema-headed file; run status lives
    in a sidecar (`<path>.status`, last entry wins). Appends are atomic
    at line granularity: a run is never left pending with partial record
    data. One writer, any number of readers.
    """

    def __init__(self, path) -> None:
        self.path = Path(path)
        self.status_path = Path(str(path) + ".status")
        self._records: dict[tuple, LifecycleRecord] = {}
        self._status: dict[tuple, tuple[str, str]] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    record = record_from_line(line)
                    self._records[record.key] = record
        if self.status_path.exists():
            for raw in self.status_path.read_text(encoding="utf-8").splitlines():
                if not raw.strip():
                    continue
                parts = raw.split(" ", 3)
                config_id, run_str, status = parts[0], parts[1], parts[2]
                diag = parts[3] if len(parts) > 3 else ""
                self._status[(config_id, int(run_str))] = (status, diag)

    @staticmethod
    def _skey(config: Configuration, run_index: int) -> tuple[str, int]:
        return (config.config_id, run_index)

    def append(self, record: LifecycleRecord) -> None:
        violations = validate_record(record)
        if violations:
            raise ValueError(f"record violates invariants: {violations}")
        if record.key in self._records:
            raise ValueError(
                f"duplicate record for {record.config.config_id} run {record.run_index}"
            )
        is_new = not self.path.exists()
        with open(self.path, "a", encoding="utf-8") as fh:
            if is_new:
                fh.write(RECORD_SCHEMA_HEADER + "\n")
            fh.write(record_to_line(record) + "\n")
            fh.flush()
        self._records[record.key] = record
        self._write_status(record.config, record.run_index, DONE, "")

    def _write_status(
        self, config: Configuration, run_index: int, status: str, diagnostic: str
    ) -> None:
        diagnostic = diagnostic.replace("\n", " ")
        with open(self.status_path, "a", encoding="utf-8") as fh:
            line = f"{config.config_id} {run_index} {status}"
            if diagnostic:
                line += f" {diagnostic}"
            fh.write(line + "\n")
        self._status[self._skey(config, run_index)] = (status, diagnostic)

    def mark_failed(self, config: Configuration, run_index: int, diagnostic: str) -> None:
        self._write_status(config, run_index, FAILED, diagnostic)

    def status_of(self, config: Configuration, run_index: int) -> str:
        return self._status.get(self._skey(config, run_index), (PENDING, ""))[0]

    def diagnostic_of(self, config: Configuration, run_index: int) -> str:
        return self._status.get(self._skey(config, run_index), (PENDING, ""))[1]

    def records(self, config: Configuration | None = None) -> list[LifecycleRecord]:
        if config is None:
            return sorted(self._records.values(), key=lambda r: (r.config.sort_rank, r.run_index))
        return sorted(
            (r for r in self._records.values() if r.config.key == config.key),
            key=lambda r: r.run_index,
        )

    def done_records(self, config: Configuration) -> list[LifecycleRecord]:
        return [
            r
            for r in self.records(config)
            if self.status_of(r.config, r.run_index) == DONE
        ]

    def configs(self) -> list[Configuration]:
        seen: dict[tuple, Configuration] = {}
        for record in self._records.values():
            seen.setdefault(record.config.key, record.config)
        return sorted(seen.values(), key=lambda c: c.sort_rank)

    def __len__(self) -> int:
        return len(self._records)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass
class RunMeasurement:
    """Raw per-run outputs handed back by a stage adapter."""

    trace: TelemetryTrace
    timings: list[RequestTiming]
    score_passes: Sequence[float]
    vram_gb: float
    E_train_kwh: float | None = None  # set when adaptation was skipped or replayed


class RunAdapter(Protocol):
    def execute_run(
        self,
        config: Configuration,
        run_index: int,
        provider,
        *,
        n_requests: int,
        adapt: bool,
    ) -> RunMeasurement: ...


@dataclass(frozen=True)
class ReplayArtifacts:
    """Stored inputs for one replayed run."""

    trace: TelemetryTrace
    timings: tuple[RequestTiming, ...]
    score_passes: tuple[float, ...]
    memory_series: tuple[tuple[int, float], ...] = ()
    vram_gb: float | None = None


class ReplayRunAdapter:
    """Replays stored traces and timings instead of driving a workload.

    `artifacts_for` maps (configuration, run_index) to the stored
    artifacts. The stored trace is re-streamed through a recorder and
    its spans re-marked, so segmentation follows the same path as a live
    run.
    """

    def __init__(
        self,
        artifacts_for: Callable[[Configuration, int], ReplayArtifacts],
    ) -> None:
        self._artifacts_for = artifacts_for

    def execute_run(
        self,
        config: Configuration,
        run_index: int,
        provider=None,
        *,
        n_requests: int = 100,
        adapt: bool = True,
    ) -> RunMeasurement:
        artifacts = self._artifacts_for(config, run_index)
        replay = ReplayProvider(artifacts.trace, artifacts.memory_series)
        recorder = TraceRecorder()
        replay_into(recorder, replay)
        for span in sorted(artifacts.trace.spans, key=lambda s: s.start):
            recorder.mark(span.stage, "begin", span.start)
            recorder.mark(span.stage, "end", span.end)
        trace = recorder.finish()

        if artifacts.vram_gb is not None:
            vram = artifacts.vram_gb
        else:
            vram = probe_vram(replay, trace.span_for(Stage.INFERENCE))
        return RunMeasurement(
            trace=trace,
            timings=list(artifacts.timings),
            score_passes=tuple(artifacts.score_passes),
            vram_gb=vram,
        )


class ProcessRunAdapter:
    """Drives real stage processes around a live power provider.

    The adaptation command is a blocking process that emits Adaptation
    markers (or is wrapped by wall time). The serve command is a
    long-lived process expected to emit `MARK Load begin/end` while it
    loads and, optionally, an `ENDPOINT <url>` log line announcing its
    completion endpoint; the harness then drives `n_requests` streaming
    requests inside an Inference span and terminates it.

    `scores` supplies the externally-computed evaluation passes for one
    run (task scoring is ingested, never computed here).
    """

    def __init__(
        self,
        serve_cmd: Sequence[str],
        adapt_cmd: Sequence[str] | None = None,
        endpoint=None,
        *,
        period_ms: int = 100,
        prompt: str = "benchmark",
        max_tokens: int = 64,
        load_timeout_s: float = 120.0,
        scores: Callable[[Configuration, int], Sequence[float]] | None = None,
        vram_gb_fallback: float | None = None,
    ) -> None:
        self.serve_cmd = list(serve_cmd)
        self.adapt_cmd = list(adapt_cmd) if adapt_cmd else None
        self.endpoint = endpoint
        self.period_ms = period_ms
        self.prompt = prompt
        self.max_tokens = max_tokens
        self.load_timeout_s = load_timeout_s
        self.scores = scores or (lambda config, run_index: (0.0,))
        self.vram_gb_fallback = vram_gb_fallback

    def execute_run(
        self,
        config: Configuration,
        run_index: int,
        provider,
        *,
        n_requests: int = 100,
        adapt: bool = True,
    ) -> RunMeasurement:
        import subprocess
        import threading
        import time

        from .adapters import (
            is_marker_line,
            measure_requests,
            parse_marker,
            probe_vram,
            run_stage_process,
        )

        recorder = TraceRecorder(nominal_period_ms=self.period_ms)
        recorder.start_live(provider, self.period_ms)
        try:
            if adapt and self.adapt_cmd is not None:
                run_stage_process(self.adapt_cmd, Stage.ADAPTATION, recorder)

            launch_t = recorder.now_ms()
            proc = subprocess.Popen(
                self.serve_cmd,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
            endpoint = self.endpoint
            load_done = threading.Event()
            marker_failure: list[Exception] = []

            def pump(stream) -> None:
                nonlocal endpoint
                for line in iter(stream.readline, ""):
                    line = line.rstrip("\n")
                    if is_marker_line(line):
                        try:
                            message = parse_marker(line)
                            recorder.mark(message.stage, message.edge, launch_t + message.t)
                        except ValueError as exc:
                            marker_failure.append(exc)
                            load_done.set()
                            return
                        if message.stage == Stage.LOAD and message.edge == "end":
                            load_done.set()
                    elif line.startswith("ENDPOINT ") and endpoint is None:
                        endpoint = line.split(" ", 1)[1].strip()

            pumps = [
                threading.Thread(target=pump, args=(stream,), daemon=True)
                for stream in (proc.stdout, proc.stderr)
            ]
            for thread in pumps:
                thread.start()
            try:
                if not load_done.wait(self.load_timeout_s):
                    raise RuntimeError("serving process never closed its Load span")
                if marker_failure:
                    raise marker_failure[0]
                if endpoint is None:
                    raise RuntimeError("no endpoint configured or announced by the server")

                begin_t = recorder.now_ms()
                recorder.mark(Stage.INFERENCE, "begin", begin_t)
                timings = measure_requests(
                    endpoint, n_requests, self.prompt, self.max_tokens
                )
                # Energy integration needs at least two samples inside the span.
                shortfall_ms = 2 * self.period_ms - (recorder.now_ms() - begin_t)
                if shortfall_ms > 0:
                    time.sleep(shortfall_ms / 1000.0)
                recorder.mark(Stage.INFERENCE, "end")
                # Let a trailing sample land past the final marker so every
                # span stays inside the sampled range.
                time.sleep(2.5 * self.period_ms / 1000.0)
            finally:
                proc.terminate()
                try:
                    proc.wait(timeout=10)
                except subprocess.TimeoutExpired:
                    proc.kill()
                for thread in pumps:
                    thread.join(timeout=5)
        finally:
            recorder.stop_live()

        trace = recorder.finish()
        if recorder.memory_log:
            vram = probe_vram(recorder, trace.span_for(Stage.INFERENCE))
        elif self.vram_gb_fallback is not None:
            vram = self.vram_gb_fallback
        else:
            raise ValueError("provider reports no memory and no vram fallback configured")
        return RunMeasurement(
            trace=trace,
            timings=timings,
            score_passes=tuple(self.scores(config, run_index)),
            vram_gb=vram,
        )


def build_record(
    config: Configuration,
    run_index: int,
    measurement: RunMeasurement,
    prior_E_train_kwh: float | None = None,
) -> LifecycleRecord:
    """Segment a measured run into the lifecycle variables.

    Adaptation and compression span energies are folded together into
    the one-time specialization energy (compression overhead is reported
    nowhere else). A missing adaptation span falls back to the
    measurement override, then to the prior run's value for
    adapt-once-infer-many sweeps.
    """
    from .telemetry import integrate_energy

    trace = measurement.trace
    inference_span = trace.span_for(Stage.INFERENCE)
    if inference_span is None:
        raise ValueError("missing Inference span")
    load_span = trace.span_for(Stage.LOAD)
    if load_span is None:
        raise ValueError("missing Load span")

    adaptation_span = trace.span_for(Stage.ADAPTATION)
    if adaptation_span is not None:
        e_train_j = integrate_energy(trace, adaptation_span)
        compression_span = trace.span_for(Stage.COMPRESSION)
        if compression_span is not None:
            e_train_j += integrate_energy(trace, compression_span)
        e_train_kwh = e_train_j / J_PER_KWH
    elif measurement.E_train_kwh is not None:
        e_train_kwh = measurement.E_train_kwh
    elif prior_E_train_kwh is not None:
        e_train_kwh = prior_E_train_kwh
    else:
        e_train_kwh = 0.0

    e_load = integrate_energy(trace, load_span)
    e_infer_total = integrate_energy(trace, inference_span)
    n = len(measurement.timings)
    if n == 0:
        raise ValueError("run produced no request timings")
    latency = aggregate_latency(measurement.timings, inference_span)

    return LifecycleRecord(
        config=config,
        E_train=e_train_kwh,
        E_load=e_load,
        E_infer=e_infer_total / n,
        T_put=latency.throughput_tok_s,
        ttft_ms=latency.ttft_ms,
        itl_ms=latency.itl_ms,
        M_vram=measurement.vram_gb,
        S_task=stats.mean(list(measurement.score_passes)),
        run_index=run_index,
    )


def execute(
    plan: SweepPlan,
    adapters: Mapping[Adaptation, RunAdapter],
    providers: Callable[[Configuration, int], object] | None,
    store: RunStore,
    *,
    n_requests: int = 100,
    readapt_each_run: bool = False,
) -> RunStore:
    """Run every pending (configuration, run) of the plan.

    Runs already done or failed are skipped, making execution resumable.
    An adapter failure marks that run failed with a diagnostic and the
    sweep continues; store write failures propagate.
    """
    configs = enumerate_plan(plan)
    missing = {c.adaptation for c in configs} - set(adapters)
    if missing:
        raise ValueError(
            "no adapter registered for: " + ", ".join(sorted(a.value for a in missing))
        )

    for config in configs:
        adapter = adapters[config.adaptation]
        for run_index in range(plan.runs_per_config):
            if store.status_of(config, run_index) != PENDING:
                continue
            provider = providers(config, run_index) if providers is not None else None
            adapt = readapt_each_run or run_index == 0
            try:
                measurement = adapter.execute_run(
                    config, run_index, provider, n_requests=n_requests, adapt=adapt
                )
                prior = store.done_records(config)
                prior_e_train = prior[0].E_train if prior else None
                record = build_record(config, run_index, measurement, prior_e_train)
                violations = validate_record(record)
                if violations:
                    raise ValueError(f"record violates invariants: {violations}")
            except Exception as exc:  # noqa: BLE001 - isolate per-run failures
                store.mark_failed(config, run_index, f"{type(exc).__name__}: {exc}")
                continue
            store.append(record)
    return store


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _field_stats(values: Sequence[float]) -> FieldStats:
    return FieldStats(
        mean=stats.mean(values),
        median=stats.median(values),
        std=stats.sample_std(values),
        q25=stats.quantile_linear(values, 0.25),
        q75=stats.quantile_linear(values, 0.75),
    )


def aggregate(
    store: RunStore,
    config: Configuration,
    *,
    econ: EconomicModel | None = None,
    alpha: float = 1.0,
) -> RunAggregate:
    """Per-field statistics over the completed runs of one configuration.

    With an economic model, per-run deployment metrics are aggregated
    too; break-even values of "never" enter as +inf. Speedup and savings
    appear when the store holds a matching FP16 baseline run.
    """
    records = store.done_records(config)
    if not records:
        raise ValueError(f"no done runs for {config.config_id}")

    fields: dict[str, FieldStats] = {}
    for name in RECORD_SCALAR_FIELDS:
        fields[name] = _field_stats([getattr(r, name) for r in records])
    for name in RECORD_STATSET_FIELDS:
        for component in ("median", "p95", "mean", "std"):
            fields[f"{name}.{component}"] = _field_stats(
                [getattr(getattr(r, name), component) for r in records]
            )

    if econ is not None:
        baseline_config = None
        if config.adaptation != Adaptation.LORA_FP16:
            baseline_config = Configuration(
                family=config.family,
                tier=config.tier,
                task=config.task,
                adaptation=Adaptation.LORA_FP16,
                model_id=config.model_id,
            )
        baselines = (
            {r.run_index: r for r in store.done_records(baseline_config)}
            if baseline_config is not None
            else {}
        )
        metric_values: dict[str, list[float]] = {}
        for record in records:
            bundle = deployment_metrics(
                record, econ, alpha=alpha, fp16_baseline=baselines.get(record.run_index)
            )
            n_break = math.inf if bundle.N_break == NEVER else float(bundle.N_break)
            metric_values.setdefault("N_break", []).append(n_break)
            metric_values.setdefault("IPW", []).append(bundle.IPW)
            metric_values.setdefault("rho_sys", []).append(bundle.rho_sys)
            metric_values.setdefault("C_tax", []).append(bundle.C_tax)
            if bundle.speedup is not None:
                metric_values.setdefault("speedup", []).append(bundle.speedup)
            if bundle.energy_savings is not None:
                metric_values.setdefault("energy_savings", []).append(bundle.energy_savings)
        for name, values in metric_values.items():
            if values:
                fields[name] = _field_stats(values)

    return RunAggregate(config=config, n_runs=len(records), fields=fields)


def aggregate_all(
    store: RunStore,
    *,
    econ: EconomicModel | None = None,
    alpha: float = 1.0,
) -> list[RunAggregate]:
    out = []
    for config in store.configs():
        if store.done_records(config):
            out.append(aggregate(store, config, econ=econ, alpha=alpha))
    return out
