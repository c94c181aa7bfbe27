"""Shared domain types for the deployment lifecycle benchmark.

Everything here is an immutable value object: configurations, power
traces, per-request timings, lifecycle measurement records, metric
bundles, and run aggregates. Construction validates structural
invariants (ordering, span containment, enum consistency); numeric
plausibility of measurement records is checked separately by
`validate_record` so that suspect data can be inspected instead of
raised away.

Units are fixed package-wide: timestamps are integer milliseconds from
a per-trace epoch, power in watts, adaptation energy in kWh, load and
per-request inference energy in joules, memory in GB (2**30 bytes).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Literal, Union

J_PER_KWH = 3.6e6

# Break-even marker for configurations whose local cost never undercuts
# the per-request API cost.
NEVER: Literal["never"] = "never"
BreakEven = Union[int, Literal["never"]]


class Family(str, Enum):
    """Model family axis. Extend by adding members."""

    LLAMA = "LLaMA"
    QWEN = "Qwen"


class Tier(str, Enum):
    """Parameter-count tier: Micro <2B, Compact 3B, Standard 7B-8B."""

    MICRO = "Micro"
    COMPACT = "Compact"
    STANDARD = "Standard"


class Task(str, Enum):
    SUMMARIZATION = "Summarization"
    RAG = "RAG"
    CHAT = "Chat"


class Adaptation(str, Enum):
    LORA_FP16 = "LoRA-FP16"
    LORA_INT8 = "LoRA-INT8"
    LORA_INT4_PTQ = "LoRA-INT4-PTQ"
    QLORA_INT4 = "QLoRA-INT4"


class Precision(str, Enum):
    FP16 = "FP16"
    INT8 = "INT8"
    INT4 = "INT4"


class Stage(str, Enum):
    ADAPTATION = "Adaptation"
    COMPRESSION = "Compression"
    LOAD = "Load"
    INFERENCE = "Inference"
    IDLE = "Idle"


# Each adaptation strategy implies exactly one serving precision.
PRECISION_FOR_ADAPTATION = {
    Adaptation.LORA_FP16: Precision.FP16,
    Adaptation.LORA_INT8: Precision.INT8,
    Adaptation.LORA_INT4_PTQ: Precision.INT4,
    Adaptation.QLORA_INT4: Precision.INT4,
}

# Native score scale per task: judge ratings are 1-10, the grounded
# tasks score on 0-1. Used to normalize S_task before energy weighting.
TASK_SCALE_MAX = {
    Task.CHAT: 10.0,
    Task.RAG: 1.0,
    Task.SUMMARIZATION: 1.0,
}


def task_scale_max(task: Task) -> float:
    return TASK_SCALE_MAX[task]


def axis_rank(member: Enum) -> int:
    """Declaration-order rank of an enum member, for deterministic sorts."""
    return list(type(member)).index(member)


@dataclass(frozen=True)
class Configuration:
    """One point in the factorial sweep space.

    `precision_at_inference` may be omitted; it is derived from the
    adaptation strategy. Passing an inconsistent precision raises.
    """

    family: Family
    tier: Tier
    task: Task
    adaptation: Adaptation
    model_id: str = ""
    precision_at_inference: Precision | None = None

    def __post_init__(self) -> None:
        implied = PRECISION_FOR_ADAPTATION[self.adaptation]
        if self.precision_at_inference is None:
            object.__setattr__(self, "precision_at_inference", implied)
        elif self.precision_at_inference != implied:
            raise ValueError(
                f"adaptation {self.adaptation.value} implies precision "
                f"{implied.value}, got {self.precision_at_inference.value}"
            )

    @property
    def key(self) -> tuple[str, str, str, str]:
        """Identity within one sweep: (family, tier, task, adaptation)."""
        return (
            self.family.value,
            self.tier.value,
            self.task.value,
            self.adaptation.value,
        )

    @property
    def config_id(self) -> str:
        return "_".join(self.key)

    @property
    def sort_rank(self) -> tuple[int, int, int, int]:
        return (
            axis_rank(self.family),
            axis_rank(self.tier),
            axis_rank(self.task),
            axis_rank(self.adaptation),
        )


@dataclass(frozen=True, order=True)
class PowerSample:
    t: int
    watts: float

    def __post_init__(self) -> None:
        if self.watts < 0:
            raise ValueError(f"watts must be >= 0, got {self.watts}")


@dataclass(frozen=True)
class StageSpan:
    stage: Stage
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError(f"span end must exceed start, got [{self.start}, {self.end}]")

    @property
    def duration_ms(self) -> int:
        return self.end - self.start


def _check_spans_disjoint(spans: Iterable[StageSpan]) -> None:
    ordered = sorted(spans, key=lambda s: s.start)
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise ValueError(
                f"overlapping spans: {prev.stage.value} [{prev.start}, {prev.end}] and "
                f"{cur.stage.value} [{cur.start}, {cur.end}]"
            )


@dataclass(frozen=True)
class TelemetryTrace:
    """A timestamped power series plus the stage spans that segment it.

    `flags` carries sampler jitter annotations, `error` a truncation
    diagnostic when the provider failed mid-trace. Completed traces are
    immutable and safe to share across threads.
    """

    samples: tuple[PowerSample, ...]
    spans: tuple[StageSpan, ...] = ()
    nominal_period_ms: int = 100
    jitter_tol_pct: int = 50
    device_memory_gb: float | None = None
    idle_baseline_w: float | None = None
    flags: tuple[str, ...] = ()
    error: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "spans", tuple(self.spans))
        object.__setattr__(self, "flags", tuple(self.flags))
        if self.nominal_period_ms <= 0:
            raise ValueError("nominal_period_ms must be > 0")
        if not self.samples:
            raise ValueError("empty trace")
        for a, b in zip(self.samples, self.samples[1:]):
            if b.t <= a.t:
                raise ValueError(f"samples must be strictly time-ordered at t={b.t}")
        t0, t1 = self.samples[0].t, self.samples[-1].t
        for span in self.spans:
            if span.start < t0 or span.end > t1:
                raise ValueError(
                    f"span {span.stage.value} [{span.start}, {span.end}] outside "
                    f"trace bounds [{t0}, {t1}]"
                )
        _check_spans_disjoint(self.spans)
        if self.idle_baseline_w is not None and self.idle_baseline_w < 0:
            raise ValueError("idle_baseline_w must be >= 0")

    @property
    def start_ms(self) -> int:
        return self.samples[0].t

    @property
    def end_ms(self) -> int:
        return self.samples[-1].t

    def span_for(self, stage: Stage) -> StageSpan | None:
        for span in self.spans:
            if span.stage == stage:
                return span
        return None


@dataclass(frozen=True)
class RequestTiming:
    """Client-side timestamps for one streamed generation request."""

    submit: int
    first_token: int
    token_times: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "token_times", tuple(self.token_times))
        if self.first_token < self.submit:
            raise ValueError("first_token precedes submit")
        for a, b in zip(self.token_times, self.token_times[1:]):
            if b <= a:
                raise ValueError("token_times must be strictly increasing")
        if self.token_times and self.token_times[0] < self.first_token:
            raise ValueError("first_token exceeds a token timestamp")

    @property
    def tokens_out(self) -> int:
        return len(self.token_times)


@dataclass(frozen=True)
class StatSet:
    """The four summary statistics reported for a latency quantity."""

    median: float
    p95: float
    mean: float
    std: float

    def as_dict(self) -> dict[str, float]:
        return {"median": self.median, "p95": self.p95, "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict) -> "StatSet":
        return cls(median=d["median"], p95=d["p95"], mean=d["mean"], std=d["std"])


@dataclass(frozen=True)
class LifecycleRecord:
    """All measured variables for one run of one configuration.

    Numeric plausibility is intentionally not enforced here; use
    `validate_record` to collect violations as data.
    """

    config: Configuration
    E_train: float  # kWh
    E_load: float  # J
    E_infer: float  # J per request
    T_put: float  # tokens/s
    ttft_ms: StatSet
    itl_ms: StatSet
    M_vram: float  # GB
    S_task: float
    run_index: int = 0

    @property
    def key(self) -> tuple[str, str, str, str, int]:
        return (*self.config.key, self.run_index)


# Scalar numeric record fields aggregated over runs, plus the nested
# latency stat sets which contribute dotted names like "ttft_ms.median".
RECORD_SCALAR_FIELDS = ("E_train", "E_load", "E_infer", "T_put", "M_vram", "S_task")
RECORD_STATSET_FIELDS = ("ttft_ms", "itl_ms")


def validate_record(record: LifecycleRecord) -> list[str]:
    """Check numeric invariants, returning one message per violation.

    An empty list means the record is clean. Violations name the field
    and the rule it breaks; they are data, not exceptions.
    """
    violations: list[str] = []
    for name in ("E_train", "E_load", "E_infer"):
        if getattr(record, name) < 0:
            violations.append(f"{name} >= 0")
    if record.T_put < 0:
        violations.append("T_put >= 0")
    carries_inference = record.T_put > 0 or record.E_infer > 0
    if carries_inference and record.M_vram <= 0:
        violations.append("M_vram > 0")
    elif record.M_vram < 0:
        violations.append("M_vram >= 0")
    for name in RECORD_STATSET_FIELDS:
        stats: StatSet = getattr(record, name)
        for stat_name, value in stats.as_dict().items():
            if value < 0:
                violations.append(f"{name}.{stat_name} >= 0")
    if record.run_index < 0:
        violations.append("run_index >= 0")
    return violations


@dataclass(frozen=True)
class PrecisionScorePair:
    """Task scores for the same configuration under FP16 and INT4 serving."""

    S_FP16: float
    S_INT4: float
    std_FP16: float = 0.0
    std_INT4: float = 0.0

    def __post_init__(self) -> None:
        if self.std_FP16 < 0 or self.std_INT4 < 0:
            raise ValueError("score standard deviations must be >= 0")


@dataclass(frozen=True)
class EconomicModel:
    """Prices and factors mapping measured energy to currency and carbon."""

    C_setup: float = 0.0  # currency, one-time
    C_api: float = 0.01  # currency per request
    electricity_price: float = 0.30  # currency per kWh
    carbon_intensity: float = 0.0  # kg CO2 per kWh
    amortization: float = 0.0  # currency per GPU-hour

    def __post_init__(self) -> None:
        for name in ("C_setup", "C_api", "electricity_price", "carbon_intensity", "amortization"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.C_api <= 0:
            raise ValueError("C_api must be > 0")


@dataclass(frozen=True)
class DeploymentMetrics:
    """The five deployment metrics plus derived inference comparisons.

    Fields that require a counterpart measurement (an FP16 baseline or a
    precision score pair) are None when that counterpart is absent.
    """

    N_break: BreakEven
    IPW: float
    rho_sys: float
    C_tax: float
    Q_ret: float | None = None  # percent
    speedup: float | None = None  # ratio vs FP16
    energy_savings: float | None = None  # percent vs FP16
    std_delta: float | None = None  # percent

    def __post_init__(self) -> None:
        if self.N_break != NEVER and (not isinstance(self.N_break, int) or self.N_break < 0):
            raise ValueError(f"N_break must be a non-negative int or {NEVER!r}")
        if self.IPW < 0:
            raise ValueError("IPW must be >= 0")
        if self.rho_sys < 0:
            raise ValueError("rho_sys must be >= 0")
        if self.C_tax < 0:
            raise ValueError("C_tax must be >= 0")


METRIC_FIELDS = ("N_break", "IPW", "rho_sys", "C_tax", "Q_ret", "speedup", "energy_savings", "std_delta")


@dataclass(frozen=True)
class FieldStats:
    """Per-field summary over repeated runs: mean/median/std and IQR bounds."""

    mean: float
    median: float
    std: float
    q25: float
    q75: float

    def __post_init__(self) -> None:
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if not (self.q25 <= self.median <= self.q75):
            raise ValueError(
                f"IQR ordering violated: q25={self.q25} median={self.median} q75={self.q75}"
            )


@dataclass(frozen=True)
class RunAggregate:
    """Statistics over the repeated runs of one configuration.

    `fields` maps field names (scalar record fields, dotted stat-set
    components such as "ttft_ms.median", and metric names when an
    economic model was supplied) to their FieldStats. Break-even values
    of "never" enter aggregation as +inf.
    """

    config: Configuration
    n_runs: int
    fields: dict[str, FieldStats] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")

    def stat(self, name: str) -> FieldStats:
        return self.fields[name]

    def median(self, name: str) -> float:
        return self.fields[name].median


# ---------------------------------------------------------------------------
# Canonical serialization: self-describing keyed text (JSON object per line,
# schema header naming units). decode(encode(x)) == x field-for-field.
# ---------------------------------------------------------------------------

RECORD_SCHEMA_HEADER = (
    "# schema: lifecycle-record v1 | E_train:kWh E_load:J E_infer:J/req "
    "T_put:tok/s ttft_ms:ms itl_ms:ms M_vram:GB S_task:task-scale"
)

AGGREGATE_SCHEMA_HEADER = "# schema: run-aggregate v1 | per-field mean/median/std/q25/q75"


def _finite_out(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _finite_in(x: float | str) -> float:
    if isinstance(x, str):
        return float(x)
    return x


def config_to_obj(config: Configuration) -> dict:
    return {
        "family": config.family.value,
        "tier": config.tier.value,
        "task": config.task.value,
        "adaptation": config.adaptation.value,
        "model_id": config.model_id,
        "precision_at_inference": config.precision_at_inference.value,
    }


def config_from_obj(obj: dict) -> Configuration:
    return Configuration(
        family=Family(obj["family"]),
        tier=Tier(obj["tier"]),
        task=Task(obj["task"]),
        adaptation=Adaptation(obj["adaptation"]),
        model_id=obj.get("model_id", ""),
        precision_at_inference=Precision(obj["precision_at_inference"])
        if "precision_at_inference" in obj
        else None,
    )


def record_to_obj(record: LifecycleRecord) -> dict:
    return {
        "config": config_to_obj(record.config),
        "E_train": record.E_train,
        "E_load": record.E_load,
        "E_infer": record.E_infer,
        "T_put": record.T_put,
        "ttft_ms": record.ttft_ms.as_dict(),
        "itl_ms": record.itl_ms.as_dict(),
        "M_vram": record.M_vram,
        "S_task": record.S_task,
        "run_index": record.run_index,
    }


def record_from_obj(obj: dict) -> LifecycleRecord:
    return LifecycleRecord(
        config=config_from_obj(obj["config"]),
        E_train=obj["E_train"],
        E_load=obj["E_load"],
        E_infer=obj["E_infer"],
        T_put=obj["T_put"],
        ttft_ms=StatSet.from_dict(obj["ttft_ms"]),
        itl_ms=StatSet.from_dict(obj["itl_ms"]),
        M_vram=obj["M_vram"],
        S_task=obj["S_task"],
        run_index=obj["run_index"],
    )


def record_to_line(record: LifecycleRecord) -> str:
    return json.dumps(record_to_obj(record), separators=(",", ":"), sort_keys=True)


def record_from_line(line: str) -> LifecycleRecord:
    return record_from_obj(json.loads(line))


def score_pair_to_obj(pair: PrecisionScorePair) -> dict:
    return {
        "S_FP16": pair.S_FP16,
        "S_INT4": pair.S_INT4,
        "std_FP16": pair.std_FP16,
        "std_INT4": pair.std_INT4,
    }


def score_pair_from_obj(obj: dict) -> PrecisionScorePair:
    return PrecisionScorePair(
        S_FP16=obj["S_FP16"],
        S_INT4=obj["S_INT4"],
        std_FP16=obj.get("std_FP16", 0.0),
        std_INT4=obj.get("std_INT4", 0.0),
    )


def metrics_to_obj(metrics: DeploymentMetrics) -> dict:
    obj: dict = {"N_break": metrics.N_break}
    for name in METRIC_FIELDS[1:]:
        value = getattr(metrics, name)
        obj[name] = None if value is None else _finite_out(value)
    return obj


def metrics_from_obj(obj: dict) -> DeploymentMetrics:
    kwargs: dict = {"N_break": obj["N_break"]}
    for name in METRIC_FIELDS[1:]:
        value = obj.get(name)
        kwargs[name] = None if value is None else _finite_in(value)
    return DeploymentMetrics(**kwargs)


def field_stats_to_obj(stats: FieldStats) -> dict:
    return {
        "mean": _finite_out(stats.mean),
        "median": _finite_out(stats.median),
        "std": _finite_out(stats.std),
        "q25": _finite_out(stats.q25),
        "q75": _finite_out(stats.q75),
    }


def field_stats_from_obj(obj: dict) -> FieldStats:
    return FieldStats(
        mean=_finite_in(obj["mean"]),
        median=_finite_in(obj["median"]),
        std=_finite_in(obj["std"]),
        q25=_finite_in(obj["q25"]),
        q75=_finite_in(obj["q75"]),
    )


def aggregate_to_obj(agg: RunAggregate) -> dict:
    return {
        "config": config_to_obj(agg.config),
        "n_runs": agg.n_runs,
        "fields": {name: field_stats_to_obj(st) for name, st in sorted(agg.fields.items())},
    }


def aggregate_from_obj(obj: dict) -> RunAggregate:
    return RunAggregate(
        config=config_from_obj(obj["config"]),
        n_runs=obj["n_runs"],
        fields={name: field_stats_from_obj(st) for name, st in obj["fields"].items()},
    )


def write_aggregates(aggregates: Iterable[RunAggregate], path) -> None:
    lines = [AGGREGATE_SCHEMA_HEADER]
    for agg in aggregates:
        lines.append(json.dumps(aggregate_to_obj(agg), separators=(",", ":"), sort_keys=True))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_aggregates(path) -> list[RunAggregate]:
    out: list[RunAggregate] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append(aggregate_from_obj(json.loads(line)))
    return out


def iter_jsonl(path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield json.loads(line)
