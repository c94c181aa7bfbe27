"""Boundary between the harness and real or simulated workloads.

Covers the streaming-completion client (with a deterministic in-process
mock for exact timing tests), the line-oriented stage-marker protocol
spoken by external workload processes, and the device-memory probe.

Marker protocol, one line on the process status stream per event:

    MARK <stage> <begin|end> <t_ms> [key=value ...]

Timestamps are milliseconds since the emitting process started; the
harness offsets them onto the trace clock at ingestion. Lines not
starting with the MARK token are treated as ordinary logging and
ignored; a MARK line that fails to parse fails the run.
"""

from __future__ import annotations

import json
import subprocess
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import httpx

from .model import RequestTiming, Stage, StageSpan
from .telemetry import ReplayProvider, TraceRecorder


class MarkerError(ValueError):
    """A MARK line violated the marker grammar."""


class StreamingError(RuntimeError):
    """The completion endpoint misbehaved (non-streaming, empty, timeout)."""


@dataclass(frozen=True)
class MarkerMessage:
    stage: Stage
    edge: str
    t: int
    aux: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.edge not in ("begin", "end"):
            raise MarkerError(f"edge must be begin or end, got {self.edge!r}")

    @property
    def aux_dict(self) -> dict[str, str]:
        return dict(self.aux)


def parse_marker(line: str) -> MarkerMessage:
    """Parse one MARK line; raises MarkerError quoting the offending line."""
    parts = line.rstrip("\n").split(" ")
    if len(parts) < 4 or parts[0] != "MARK":
        raise MarkerError(f"malformed marker line: {line!r}")
    try:
        stage = Stage(parts[1])
    except ValueError as exc:
        raise MarkerError(f"malformed marker line (unknown stage): {line!r}") from exc
    edge = parts[2]
    if edge not in ("begin", "end"):
        raise MarkerError(f"malformed marker line (bad edge): {line!r}")
    try:
        t = int(parts[3])
    except ValueError as exc:
        raise MarkerError(f"malformed marker line (bad timestamp): {line!r}") from exc
    aux: list[tuple[str, str]] = []
    for token in parts[4:]:
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise MarkerError(f"malformed marker line (bad aux token {token!r}): {line!r}")
        aux.append((key, value))
    return MarkerMessage(stage=stage, edge=edge, t=t, aux=tuple(aux))


def format_marker(message: MarkerMessage) -> str:
    parts = ["MARK", message.stage.value, message.edge, str(message.t)]
    parts.extend(f"{k}={v}" for k, v in message.aux)
    return " ".join(parts)


def is_marker_line(line: str) -> bool:
    return line.split(" ", 1)[0] == "MARK"


# ---------------------------------------------------------------------------
# Streaming inference client
# ---------------------------------------------------------------------------


@dataclass
class MockEndpoint:
    """Deterministic stand-in for a streaming completion endpoint.

    Chunk timing is scripted on a virtual clock, so timings derived from
    it are exact: the first chunk arrives `first_chunk_delay_ms` after
    submission and subsequent chunks follow at `inter_chunk_ms` spacing.
    An explicit per-chunk `schedule_ms` (offsets from submit) overrides
    both knobs.
    """

    n_chunks: int = 4
    first_chunk_delay_ms: int = 48
    inter_chunk_ms: int = 10
    schedule_ms: Sequence[int] | None = None
    chunk_text: str = "tok"
    calls: int = field(default=0, init=False)

    def chunk_offsets(self) -> list[int]:
        if self.schedule_ms is not None:
            return list(self.schedule_ms)
        return [
            self.first_chunk_delay_ms + i * self.inter_chunk_ms for i in range(self.n_chunks)
        ]

    def stream(self, prompt: str, max_tokens: int) -> Iterator[tuple[int, str]]:
        self.calls += 1
        offsets = self.chunk_offsets()[:max_tokens]
        for offset in offsets:
            yield offset, self.chunk_text


def stream_inference(
    endpoint: "str | MockEndpoint",
    prompt: str,
    max_tokens: int = 128,
    *,
    model: str = "default",
    timeout_s: float = 120.0,
    submit_ms: int = 0,
) -> RequestTiming:
    """Issue one streaming completion and record client-side timestamps.

    `endpoint` is either a URL of an OpenAI-style completion endpoint
    with server-sent-event streaming, or a `MockEndpoint` whose scripted
    schedule makes the resulting timing exact. Timestamps are offset by
    `submit_ms` so batches can share one trace clock.
    """
    if isinstance(endpoint, MockEndpoint):
        token_times = [submit_ms + off for off, _ in endpoint.stream(prompt, max_tokens)]
        if not token_times:
            raise StreamingError("empty generation")
        return RequestTiming(
            submit=submit_ms, first_token=token_times[0], token_times=tuple(token_times)
        )
    return _stream_http(endpoint, prompt, max_tokens, model=model,
                        timeout_s=timeout_s, submit_ms=submit_ms)


def _stream_http(
    url: str,
    prompt: str,
    max_tokens: int,
    *,
    model: str,
    timeout_s: float,
    submit_ms: int,
) -> RequestTiming:
    payload = {"model": model, "prompt": prompt, "max_tokens": max_tokens, "stream": True}
    token_times: list[int] = []
    start = time.monotonic()

    def now_ms() -> int:
        return submit_ms + int((time.monotonic() - start) * 1000)

    try:
        with httpx.Client(timeout=timeout_s) as client:
            with client.stream("POST", url, json=payload) as response:
                response.raise_for_status()
                content_type = response.headers.get("content-type", "")
                if "text/event-stream" not in content_type:
                    raise StreamingError(
                        f"streaming required: endpoint answered {content_type or 'no content-type'}"
                    )
                for line in response.iter_lines():
                    if not line.startswith("data:"):
                        continue
                    data = line[len("data:") :].strip()
                    if data == "[DONE]":
                        break
                    t = now_ms()
                    if _chunk_has_content(data):
                        t = max(t, token_times[-1] + 1) if token_times else t
                        token_times.append(t)
    except httpx.TimeoutException as exc:
        raise StreamingError(f"request timed out after {timeout_s} s") from exc

    if not token_times:
        raise StreamingError("empty generation")
    return RequestTiming(
        submit=submit_ms, first_token=token_times[0], token_times=tuple(token_times)
    )


def _chunk_has_content(data: str) -> bool:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError:
        return bool(data)
    choices = obj.get("choices") or []
    if not choices:
        return False
    choice = choices[0]
    text = choice.get("text")
    if text is None:
        text = (choice.get("delta") or {}).get("content")
    return bool(text)


def measure_requests(
    endpoint: "str | MockEndpoint",
    n_requests: int,
    prompt: str = "benchmark",
    max_tokens: int = 128,
    *,
    model: str = "default",
    timeout_s: float = 120.0,
    gap_ms: int = 0,
) -> list[RequestTiming]:
    """Issue requests sequentially (batch-size-1 serving) on one clock."""
    timings: list[RequestTiming] = []
    cursor = 0
    for _ in range(n_requests):
        timing = stream_inference(
            endpoint, prompt, max_tokens, model=model, timeout_s=timeout_s, submit_ms=cursor
        )
        timings.append(timing)
        cursor = timing.token_times[-1] + gap_ms if timing.token_times else cursor + gap_ms
    return timings


# ---------------------------------------------------------------------------
# External stage processes
# ---------------------------------------------------------------------------


@dataclass
class StageProcessResult:
    returncode: int
    markers: list[MarkerMessage]
    span: StageSpan | None
    output_lines: list[str]


def run_stage_process(
    cmd: Sequence[str],
    stage: Stage,
    recorder: TraceRecorder,
    *,
    t_launch_ms: int | None = None,
    timeout_s: float | None = None,
) -> StageProcessResult:
    """Run an external stage process and apply its markers to the recorder.

    Marker lines are collected from both stdout and stderr; non-MARK
    lines are passed through as logs. Marker timestamps (the process's
    own milliseconds) are offset by the launch time on the trace clock.
    If the process emits no marker for `stage`, a span covering its wall
    time is applied instead. Nonzero exit fails the stage.
    """
    if t_launch_ms is None:
        t_launch_ms = recorder.now_ms()
    wall_start = time.monotonic()
    proc = subprocess.run(
        list(cmd),
        capture_output=True,
        text=True,
        timeout=timeout_s,
    )
    wall_ms = int((time.monotonic() - wall_start) * 1000)

    markers: list[MarkerMessage] = []
    logs: list[str] = []
    for stream_text in (proc.stdout, proc.stderr):
        for line in stream_text.splitlines():
            if is_marker_line(line):
                markers.append(parse_marker(line))
            elif line.strip():
                logs.append(line)

    if proc.returncode != 0:
        raise RuntimeError(
            f"stage {stage.value} process exited {proc.returncode}: "
            f"{(proc.stderr or proc.stdout).strip()[:500]}"
        )

    markers.sort(key=lambda m: m.t)
    saw_stage_marker = any(m.stage == stage for m in markers)
    for message in markers:
        recorder.mark(message.stage, message.edge, t_launch_ms + message.t)

    span: StageSpan | None = None
    if not saw_stage_marker:
        end = t_launch_ms + max(wall_ms, 1)
        recorder.mark(stage, "begin", t_launch_ms)
        recorder.mark(stage, "end", end)
        span = StageSpan(stage=stage, start=t_launch_ms, end=end)
    else:
        begins = [m.t for m in markers if m.stage == stage and m.edge == "begin"]
        ends = [m.t for m in markers if m.stage == stage and m.edge == "end"]
        if begins and ends:
            span = StageSpan(
                stage=stage, start=t_launch_ms + min(begins), end=t_launch_ms + max(ends)
            )
    return StageProcessResult(
        returncode=proc.returncode, markers=markers, span=span, output_lines=logs
    )


# ---------------------------------------------------------------------------
# Device memory probe
# ---------------------------------------------------------------------------


def probe_vram(source, span: StageSpan | None = None) -> float:
    """Peak used device memory in GB (2**30 bytes) over a span.

    `source` is anything exposing a memory timeline: a `ReplayProvider`
    with a scripted series, or a `TraceRecorder` that logged memory
    samples during live recording. Without a span the peak over the
    whole timeline is returned.
    """
    if isinstance(source, ReplayProvider):
        timeline = source.memory_timeline()
    elif isinstance(source, TraceRecorder):
        timeline = source.memory_log
    elif hasattr(source, "memory_timeline"):
        timeline = source.memory_timeline()
    else:
        raise ValueError(f"provider {type(source).__name__} does not support memory query")
    if span is not None:
        timeline = [(t, gb) for t, gb in timeline if span.start <= t <= span.end]
    if not timeline:
        raise ValueError("no memory samples available" + (" inside span" if span else ""))
    return max(gb for _, gb in timeline)
