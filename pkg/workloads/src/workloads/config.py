from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

# The four adaptation strategies the benchmark sweeps over.
STRATEGIES = ("LoRA-FP16", "LoRA-INT8", "LoRA-INT4-PTQ", "QLoRA-INT4")


@dataclass(frozen=True)
class WorkloadConfig:
    """One adaptation/serving workload.

    `lora_rank`/`lora_scale` follow the common low-rank adapter recipe
    (rank 16, scale 32); `sample_budget` is the number of training
    samples drawn from the task dataset (typically 5000-10000).
    """

    model_id: str
    strategy: str
    lora_rank: int = 16
    lora_scale: int = 32
    sample_budget: int = 5000
    dataset: str = ""

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}"
            )
        if self.lora_rank <= 0 or self.lora_scale <= 0:
            raise ValueError("lora_rank and lora_scale must be positive")
        if self.sample_budget <= 0:
            raise ValueError("sample_budget must be positive")

    @property
    def workload_id(self) -> str:
        safe_model = re.sub(r"[^A-Za-z0-9_.-]+", "-", self.model_id)
        return f"{safe_model}_{self.strategy}"

    def artifacts_dir(self, root: str | Path = "artifacts") -> Path:
        return Path(root) / self.workload_id / "adapter"
