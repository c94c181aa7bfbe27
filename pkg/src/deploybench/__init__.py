"""Lifecycle deployment benchmarking for language models.

Measures or replays the adaptation/compression/inference pipeline,
integrates power telemetry into per-stage energy, and reduces lifecycle
variables into deployment metrics, frontier analyses, and reports.
"""

from .model import (
    NEVER,
    Adaptation,
    Configuration,
    DeploymentMetrics,
    EconomicModel,
    Family,
    FieldStats,
    LifecycleRecord,
    PowerSample,
    PrecisionScorePair,
    Precision,
    RequestTiming,
    RunAggregate,
    Stage,
    StageSpan,
    StatSet,
    Task,
    TelemetryTrace,
    Tier,
    validate_record,
)

__all__ = [
    "NEVER",
    "Adaptation",
    "Configuration",
    "DeploymentMetrics",
    "EconomicModel",
    "Family",
    "FieldStats",
    "LifecycleRecord",
    "PowerSample",
    "PrecisionScorePair",
    "Precision",
    "RequestTiming",
    "RunAggregate",
    "Stage",
    "StageSpan",
    "StatSet",
    "Task",
    "TelemetryTrace",
    "Tier",
    "validate_record",
]

__version__ = "0.1.0"
