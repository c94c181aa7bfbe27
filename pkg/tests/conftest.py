from __future__ import annotations

from pathlib import Path

import pytest

from deploybench.model import (
    Adaptation,
    Configuration,
    EconomicModel,
    Family,
    LifecycleRecord,
    PowerSample,
    RequestTiming,
    Stage,
    StageSpan,
    StatSet,
    Task,
    TelemetryTrace,
    Tier,
)

DATA_DIR = Path(__file__).parent / "data"


def make_config(
    family=Family.LLAMA,
    tier=Tier.MICRO,
    task=Task.SUMMARIZATION,
    adaptation=Adaptation.LORA_INT4_PTQ,
    model_id="",
) -> Configuration:
    return Configuration(
        family=family, tier=tier, task=task, adaptation=adaptation, model_id=model_id
    )


def make_record(
    config=None,
    E_train=0.039,
    E_load=457.5,
    E_infer=2.5,
    T_put=4331.0,
    M_vram=0.625,
    S_task=0.8,
    run_index=0,
    ttft=StatSet(48.0, 52.0, 48.5, 1.2),
    itl=StatSet(10.0, 12.0, 10.1, 0.4),
) -> LifecycleRecord:
    return LifecycleRecord(
        config=config or make_config(),
        E_train=E_train,
        E_load=E_load,
        E_infer=E_infer,
        T_put=T_put,
        ttft_ms=ttft,
        itl_ms=itl,
        M_vram=M_vram,
        S_task=S_task,
        run_index=run_index,
    )


def _golden_watts(t: int) -> float:
    if t <= 5900:
        return 12.0
    if t <= 12000:
        return 60.0
    if t <= 13500:
        return 70.0
    if t <= 19000:
        return 35.0
    return 12.0


GOLDEN_SPANS = (
    StageSpan(Stage.IDLE, 0, 5000),
    StageSpan(Stage.ADAPTATION, 6000, 12000),
    StageSpan(Stage.LOAD, 12500, 13500),
    StageSpan(Stage.INFERENCE, 14000, 19000),
)

GOLDEN_MEMORY = ((14000, 0.5), (16000, 0.625), (18000, 0.6))

GOLDEN_ECON = EconomicModel(
    C_setup=0.5, C_api=0.01, electricity_price=0.36, carbon_intensity=0.0, amortization=0.0
)


def golden_trace() -> TelemetryTrace:
    samples = tuple(PowerSample(t, _golden_watts(t)) for t in range(0, 19501, 100))
    return TelemetryTrace(
        samples=samples,
        spans=GOLDEN_SPANS,
        nominal_period_ms=100,
        device_memory_gb=16.0,
    )


def golden_timings() -> list[RequestTiming]:
    timings = []
    for i in range(10):
        submit = 14000 + 500 * i
        first = submit + 48
        token_times = tuple(first + 10 * j for j in range(20))
        timings.append(RequestTiming(submit=submit, first_token=first, token_times=token_times))
    return timings


def golden_config() -> Configuration:
    return make_config(
        family=Family.LLAMA,
        tier=Tier.MICRO,
        task=Task.SUMMARIZATION,
        adaptation=Adaptation.LORA_INT4_PTQ,
        model_id="LLaMA-Micro",
    )


GOLDEN_SCORE_PASSES = (0.5, 0.75, 1.0)  # mean is exactly 0.75


@pytest.fixture(scope="session")
def golden_files(tmp_path_factory) -> Path:
    """Golden artifacts serialized through the real file formats."""
    from deploybench.latency import write_timings
    from deploybench.telemetry import write_trace

    root = tmp_path_factory.mktemp("golden")
    write_trace(golden_trace(), root / "golden.trace")
    write_timings(golden_timings(), root / "golden.requests")
    (root / "golden.scores").write_text(
        "\n".join(str(s) for s in GOLDEN_SCORE_PASSES) + "\n"
    )
    (root / "golden.memory").write_text(
        "\n".join(f"{t} {gb}" for t, gb in GOLDEN_MEMORY) + "\n"
    )
    return root
