#!/usr/bin/env python3
"""Adaptation stage driver: low-rank fine-tune under a precision regime.

Emits `MARK Adaptation begin/end` around the work and writes adapter
artifacts to `artifacts/<workload-id>/adapter/` (or --artifacts).

`--dry-run` replaces training with a short sleep, which is enough to
exercise the marker protocol and the artifact layout. The real path
needs torch, transformers, and peft, plus a local dataset file with one
training text per line; optimizer settings are exposed as flags with
conventional defaults and make no claim of matching any published
energy figures.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from .config import WorkloadConfig
from .markers import emit, log


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="workload-adapt", description=__doc__)
    parser.add_argument("--model-id", required=True)
    parser.add_argument("--strategy", required=True)
    parser.add_argument("--dataset", default="", help="path to a one-text-per-line file")
    parser.add_argument("--rank", type=int, default=16)
    parser.add_argument("--scale", type=int, default=32)
    parser.add_argument("--samples", type=int, default=5000)
    parser.add_argument("--artifacts", default=None)
    parser.add_argument("--dry-run", action="store_true")
    parser.add_argument("--sleep-ms", type=int, default=50, help="dry-run span duration")
    parser.add_argument("--steps", type=int, default=10)
    parser.add_argument("--lr", type=float, default=2e-4)
    parser.add_argument("--max-length", type=int, default=256)
    return parser


def _write_metadata(config: WorkloadConfig, artifacts: Path, mode: str) -> None:
    artifacts.mkdir(parents=True, exist_ok=True)
    (artifacts / "adapter_config.json").write_text(
        json.dumps(
            {
                "model_id": config.model_id,
                "strategy": config.strategy,
                "lora_rank": config.lora_rank,
                "lora_scale": config.lora_scale,
                "sample_budget": config.sample_budget,
                "dataset": config.dataset,
                "mode": mode,
            },
            indent=2,
        )
        + "\n"
    )


def _dry_run(config: WorkloadConfig, artifacts: Path, sleep_ms: int) -> int:
    emit("Adaptation", "begin")
    time.sleep(sleep_ms / 1000.0)
    _write_metadata(config, artifacts, mode="dry-run")
    emit("Adaptation", "end")
    log(f"dry-run adapter metadata written to {artifacts}")
    return 0


def _train(config: WorkloadConfig, artifacts: Path, args) -> int:
    try:
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer
    except ImportError as exc:
        log(f"adaptation requires torch and transformers: {exc}")
        return 1
    try:
        from peft import LoraConfig, get_peft_model
    except ImportError as exc:
        log(f"adaptation requires peft for low-rank adapters: {exc}")
        return 1

    if not config.dataset or not Path(config.dataset).exists():
        log(f"dataset file not found: {config.dataset!r}")
        return 1
    texts = [
        line.strip()
        for line in Path(config.dataset).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ][: config.sample_budget]
    if not texts:
        log("dataset file is empty")
        return 1

    load_kwargs: dict = {}
    if config.strategy == "QLoRA-INT4":
        try:
            from transformers import BitsAndBytesConfig

            load_kwargs["quantization_config"] = BitsAndBytesConfig(load_in_4bit=True)
        except ImportError as exc:
            log(f"QLoRA-INT4 requires bitsandbytes support: {exc}")
            return 1
    elif config.strategy == "LoRA-INT8":
        load_kwargs["load_in_8bit"] = True
    elif torch.cuda.is_available():
        load_kwargs["torch_dtype"] = torch.float16
    # LoRA-INT4-PTQ trains at FP16; quantization happens after adaptation.

    emit("Adaptation", "begin")
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        if tokenizer.pad_token is None:
            tokenizer.pad_token = tokenizer.eos_token
        model = AutoModelForCausalLM.from_pretrained(config.model_id, **load_kwargs)
        lora = LoraConfig(
            r=config.lora_rank, lora_alpha=config.lora_scale, task_type="CAUSAL_LM"
        )
        model = get_peft_model(model, lora)
        model.train()
        optimizer = torch.optim.AdamW(
            (p for p in model.parameters() if p.requires_grad), lr=args.lr
        )
        for step in range(args.steps):
            text = texts[step % len(texts)]
            batch = tokenizer(
                text,
                return_tensors="pt",
                truncation=True,
                max_length=args.max_length,
            ).to(model.device)
            out = model(**batch, labels=batch["input_ids"])
            out.loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            log(f"step {step + 1}/{args.steps} loss {out.loss.item():.4f}")
        model.save_pretrained(str(artifacts))
        _write_metadata(config, artifacts, mode="train")
    except Exception as exc:  # noqa: BLE001 - OOM / load failures exit nonzero
        log(f"adaptation failed: {exc}")
        return 1
    emit("Adaptation", "end")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = WorkloadConfig(
            model_id=args.model_id,
            strategy=args.strategy,
            lora_rank=args.rank,
            lora_scale=args.scale,
            sample_budget=args.samples,
            dataset=args.dataset,
        )
    except ValueError as exc:
        log(str(exc))
        return 2
    artifacts = Path(args.artifacts) if args.artifacts else config.artifacts_dir()
    if args.dry_run:
        return _dry_run(config, artifacts, args.sleep_ms)
    return _train(config, artifacts, args)


if __name__ == "__main__":
    raise SystemExit(main())
