"""Energy-to-currency and energy-to-carbon mapping.

The default mapping is pure-energy costing: electricity price times
energy, with hardware amortization switched off. A per-GPU-hour
amortization knob exists for realistic total-cost estimates; its
per-request share is allocated by request wall time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import J_PER_KWH, EconomicModel, LifecycleRecord


@dataclass(frozen=True)
class CostBreakdown:
    C_train: float
    C_setup: float
    C_infer: float  # per request
    carbon_train: float  # kg CO2
    carbon_per_req: float  # kg CO2

    def __post_init__(self) -> None:
        for name in ("C_train", "C_setup", "C_infer", "carbon_train", "carbon_per_req"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def cost_of_energy(energy_kwh: float, model: EconomicModel) -> float:
    if energy_kwh < 0:
        raise ValueError("energy must be >= 0")
    return energy_kwh * model.electricity_price


def lifecycle_costs(
    record: LifecycleRecord,
    model: EconomicModel,
    wall_hours: float = 0.0,
    *,
    request_seconds: float = 0.0,
) -> CostBreakdown:
    """Currency and carbon for one record under an economic model.

    `wall_hours` is the adaptation wall time for amortization;
    `request_seconds` the per-request wall time for the amortized
    per-request share (the record itself does not carry it). Both are
    irrelevant at the default amortization of 0.
    """
    if wall_hours < 0:
        raise ValueError("wall_hours must be >= 0")
    if request_seconds < 0:
        raise ValueError("request_seconds must be >= 0")
    e_infer_kwh = record.E_infer / J_PER_KWH
    return CostBreakdown(
        C_train=cost_of_energy(record.E_train, model) + model.amortization * wall_hours,
        C_setup=model.C_setup,
        C_infer=cost_of_energy(e_infer_kwh, model)
        + model.amortization * (request_seconds / 3600.0),
        carbon_train=record.E_train * model.carbon_intensity,
        carbon_per_req=e_infer_kwh * model.carbon_intensity,
    )


# ---------------------------------------------------------------------------
# Economic model config file: keyed text, units in comments.
# ---------------------------------------------------------------------------

_ECON_TEMPLATE = """\
# deploybench economic model
# electricity_price: currency per kWh
# C_api: currency per request
# C_setup: currency, one-time infrastructure overhead
# carbon_intensity: kg CO2 per kWh
# amortization: currency per GPU-hour
electricity_price = {electricity_price!r}
C_api = {C_api!r}
C_setup = {C_setup!r}
carbon_intensity = {carbon_intensity!r}
amortization = {amortization!r}
"""


def save_economic_model(model: EconomicModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            _ECON_TEMPLATE.format(
                electricity_price=model.electricity_price,
                C_api=model.C_api,
                C_setup=model.C_setup,
                carbon_intensity=model.carbon_intensity,
                amortization=model.amortization,
            )
        )


def load_economic_model(path) -> EconomicModel:
    values: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in ("electricity_price", "C_api", "C_setup", "carbon_intensity", "amortization"):
                raise ValueError(f"unknown economic model key: {key!r}")
            values[key] = float(value.strip())
    return EconomicModel(**values)
