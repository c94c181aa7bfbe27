"""The five deployment metrics and derived inference comparisons.

Every function here is pure and stateless: identical inputs give
bit-identical outputs, so they are safe to map over configurations in
parallel. Percent values are returned at full precision; rounding to
one decimal happens only at report emission.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .economics import lifecycle_costs
from .model import (
    NEVER,
    BreakEven,
    DeploymentMetrics,
    EconomicModel,
    LifecycleRecord,
    PrecisionScorePair,
    task_scale_max,
)


@dataclass(frozen=True)
class IPWInput:
    """Inputs for energy-normalized task performance.

    `task_scale_max` is the native top of the task's score scale (10 for
    judge-rated chat, 1 for the grounded tasks); the score is normalized
    to [0, 1] before applying the complexity weight `alpha`.
    """

    S_task: float
    task_scale_max: float
    alpha: float = 1.0
    E_req: float = 1.0  # J per request

    def __post_init__(self) -> None:
        if self.task_scale_max <= 0:
            raise ValueError("task_scale_max must be > 0")
        if not 0.0 <= self.S_task <= self.task_scale_max:
            raise ValueError(
                f"S_task must lie in [0, {self.task_scale_max}], got {self.S_task}"
            )
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.E_req <= 0:
            raise ValueError("E_req must be > 0")


def break_even(C_train: float, C_setup: float, C_api: float, C_infer: float) -> BreakEven:
    """Requests until cumulative local cost undercuts cumulative API cost.

    Whole requests only, so the real-valued crossover is ceiled. When the
    per-request API price does not exceed local cost the crossover never
    happens and the "never" marker is returned as a value, not an error.
    """
    for name, value in (("C_train", C_train), ("C_setup", C_setup),
                        ("C_api", C_api), ("C_infer", C_infer)):
        if value < 0:
            raise ValueError(f"{name} must be >= 0")
    if C_api <= C_infer:
        return NEVER
    return math.ceil((C_train + C_setup) / (C_api - C_infer))


def intelligence_per_watt(inputs: IPWInput) -> float:
    """Normalized task score, weighted by alpha, per joule of request energy."""
    return (inputs.S_task / inputs.task_scale_max) * inputs.alpha / inputs.E_req


def system_density(T_put: float, M_vram: float) -> float:
    """Sustained tokens per second per gigabyte of allocated device memory."""
    if M_vram <= 0:
        raise ValueError(f"M_vram must be > 0, got {M_vram}")
    return T_put / M_vram


def cold_start_tax(E_load: float, E_infer: float) -> float:
    """Model-loading energy as a multiple of steady-state per-request energy."""
    if E_infer <= 0:
        raise ValueError(f"E_infer must be > 0, got {E_infer}")
    return E_load / E_infer


def quantization_fidelity(pair: PrecisionScorePair) -> float:
    """INT4 task score as a percentage of the FP16 score."""
    if pair.S_FP16 <= 0:
        raise ValueError("S_FP16 must be > 0 for fidelity")
    return pair.S_INT4 / pair.S_FP16 * 100.0


def std_delta(pair: PrecisionScorePair) -> float:
    """Relative shift of the score standard deviation, FP16 -> INT4, in percent."""
    if pair.std_FP16 <= 0:
        raise ValueError("variance shift undefined: std_FP16 is 0")
    return (pair.std_INT4 - pair.std_FP16) / pair.std_FP16 * 100.0


def speedup_and_savings(fp16: LifecycleRecord, int4: LifecycleRecord) -> tuple[float, float]:
    """Throughput speedup and per-request energy savings of INT4 over FP16.

    Returns (speedup ratio, savings percent). Both records must describe
    the same family/tier/task.
    """
    if (fp16.config.family, fp16.config.tier, fp16.config.task) != (
        int4.config.family,
        int4.config.tier,
        int4.config.task,
    ):
        raise ValueError(
            f"mismatched configurations: {fp16.config.config_id} vs {int4.config.config_id}"
        )
    if fp16.T_put <= 0:
        raise ValueError("baseline throughput must be > 0")
    if fp16.E_infer <= 0:
        raise ValueError("baseline E_infer must be > 0")
    speedup = int4.T_put / fp16.T_put
    savings = (1.0 - int4.E_infer / fp16.E_infer) * 100.0
    return speedup, savings


def adaptation_energy_ratio(lora: LifecycleRecord, qlora: LifecycleRecord) -> float:
    """Training-energy multiplier of quantization-aware over plain adaptation."""
    if (lora.config.family, lora.config.tier, lora.config.task) != (
        qlora.config.family,
        qlora.config.tier,
        qlora.config.task,
    ):
        raise ValueError(
            f"mismatched configurations: {lora.config.config_id} vs {qlora.config.config_id}"
        )
    if lora.E_train <= 0:
        raise ValueError("baseline E_train must be > 0")
    return qlora.E_train / lora.E_train


def deployment_metrics(
    record: LifecycleRecord,
    econ: EconomicModel,
    *,
    alpha: float = 1.0,
    wall_hours: float = 0.0,
    request_seconds: float = 0.0,
    fp16_baseline: LifecycleRecord | None = None,
    score_pair: PrecisionScorePair | None = None,
) -> DeploymentMetrics:
    """Assemble the full metric bundle for one measured record.

    Comparison fields (speedup, savings, fidelity, variance shift) are
    filled only when the corresponding counterpart is supplied.
    """
    costs = lifecycle_costs(record, econ, wall_hours, request_seconds=request_seconds)
    n_break = break_even(costs.C_train, costs.C_setup, econ.C_api, costs.C_infer)
    ipw = intelligence_per_watt(
        IPWInput(
            S_task=record.S_task,
            task_scale_max=task_scale_max(record.config.task),
            alpha=alpha,
            E_req=record.E_infer,
        )
    )
    rho = system_density(record.T_put, record.M_vram)
    tax = cold_start_tax(record.E_load, record.E_infer)

    speedup = savings = None
    if fp16_baseline is not None:
        speedup, savings = speedup_and_savings(fp16_baseline, record)
    q_ret = delta = None
    if score_pair is not None:
        q_ret = quantization_fidelity(score_pair)
        if score_pair.std_FP16 > 0:
            delta = std_delta(score_pair)

    return DeploymentMetrics(
        N_break=n_break,
        IPW=ipw,
        rho_sys=rho,
        C_tax=tax,
        Q_ret=q_ret,
        speedup=speedup,
        energy_savings=savings,
        std_delta=delta,
    )
