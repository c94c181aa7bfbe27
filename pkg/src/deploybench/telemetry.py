"""Power telemetry: collection, replay, stage segmentation, energy integration.

Two providers satisfy the polling contract: `LiveGpuProvider` wraps the
NVML management interface of a physical device, `ReplayProvider` streams
a stored trace deterministically so every downstream computation can be
reproduced without hardware.

A `TraceRecorder` is the mutable trace-in-progress. The sampler is its
single sample writer; workload threads append stage markers through
`mark_stage`. `finish()` freezes everything into an immutable
`TelemetryTrace`.

Energy integration is trapezoidal with linear interpolation of power at
span boundaries. Accumulation happens in watt-milliseconds and converts
to joules once, so integer-millisecond traces with simple wattages
integrate to exact decimal values.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from math import fsum
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .model import PowerSample, Stage, StageSpan, TelemetryTrace
from .stats import median


class ProviderError(RuntimeError):
    """A telemetry provider failed while polling."""


@dataclass(frozen=True)
class ProviderCapabilities:
    sampling_floor_ms: int
    device_memory_gb: float | None = None


@runtime_checkable
class TelemetryProvider(Protocol):
    def poll(self) -> float:
        """Instantaneous device power draw in watts. Must not block."""
        ...

    def capabilities(self) -> ProviderCapabilities: ...


class ReplayProvider:
    """Streams a stored trace's samples deterministically.

    Optionally carries a scripted used-memory timeline (t_ms, GB) so the
    memory probe works identically in replay mode.
    """

    is_replay = True

    def __init__(
        self,
        trace: TelemetryTrace,
        memory_series: Sequence[tuple[int, float]] = (),
    ) -> None:
        self.trace = trace
        self._memory = tuple(memory_series)
        self._pos = 0

    def poll(self) -> float:
        if self._pos >= len(self.trace.samples):
            raise ProviderError("replay exhausted")
        watts = self.trace.samples[self._pos].watts
        self._pos += 1
        return watts

    def capabilities(self) -> ProviderCapabilities:
        return ProviderCapabilities(
            sampling_floor_ms=0,
            device_memory_gb=self.trace.device_memory_gb,
        )

    def memory_timeline(self) -> tuple[tuple[int, float], ...]:
        return self._memory

    def replay_samples(self) -> Iterable[PowerSample]:
        return self.trace.samples


class LiveGpuProvider:
    """Polls a physical GPU through the NVML management library.

    Requires the `pynvml` package and a visible device; construction
    fails with a clear error otherwise.
    """

    is_replay = False

    def __init__(self, device_index: int = 0) -> None:
        try:
            import pynvml
        except ImportError as exc:  # pragma: no cover - depends on host
            raise ProviderError(
                "LiveGpuProvider requires the pynvml package (pip install nvidia-ml-py)"
            ) from exc
        pynvml.nvmlInit()
        self._nvml = pynvml
        self._handle = pynvml.nvmlDeviceGetHandleByIndex(device_index)

    def poll(self) -> float:  # pragma: no cover - depends on host
        return self._nvml.nvmlDeviceGetPowerUsage(self._handle) / 1000.0

    def poll_memory_gb(self) -> float:  # pragma: no cover - depends on host
        info = self._nvml.nvmlDeviceGetMemoryInfo(self._handle)
        return info.used / 2**30

    def capabilities(self) -> ProviderCapabilities:  # pragma: no cover
        info = self._nvml.nvmlDeviceGetMemoryInfo(self._handle)
        return ProviderCapabilities(sampling_floor_ms=20, device_memory_gb=info.total / 2**30)


def _jitter_flags(samples: Sequence[PowerSample], period_ms: int, tol_pct: int) -> tuple[str, ...]:
    """Annotate out-of-tolerance sample gaps instead of dropping samples."""
    flags: list[str] = []
    tol = period_ms * tol_pct / 100.0
    for a, b in zip(samples, samples[1:]):
        gap = b.t - a.t
        if gap > 3 * period_ms:
            flags.append(f"gap@{b.t}")
        elif abs(gap - period_ms) > tol:
            flags.append(f"jitter@{b.t}")
    return tuple(flags)


class TraceRecorder:
    """Mutable trace-in-progress accepting interleaved samples and markers.

    Samples are appended by exactly one sampler (thread or replay loop);
    markers may arrive from any workload thread. `finish()` merges both
    streams into an immutable trace.
    """

    def __init__(
        self,
        nominal_period_ms: int = 100,
        jitter_tol_pct: int = 50,
        device_memory_gb: float | None = None,
        idle_baseline_w: float | None = None,
    ) -> None:
        self.nominal_period_ms = nominal_period_ms
        self.jitter_tol_pct = jitter_tol_pct
        self.device_memory_gb = device_memory_gb
        self.idle_baseline_w = idle_baseline_w
        self._samples: list[PowerSample] = []
        self._spans: list[StageSpan] = []
        self._open_stage: Stage | None = None
        self._open_t: int = 0
        self._last_marker_t: int | None = None
        self._marker_lock = threading.Lock()
        self._memory_log: list[tuple[int, float]] = []
        self._error: str | None = None
        self._flags_extra: list[str] = []
        self._thread: threading.Thread | None = None
        self._thread_stop = threading.Event()
        self._epoch: float | None = None

    # -- sample side -------------------------------------------------------

    def add_sample(self, t_ms: int, watts: float) -> None:
        if self._samples and t_ms <= self._samples[-1].t:
            raise ValueError(f"sample timestamps must be strictly increasing at t={t_ms}")
        self._samples.append(PowerSample(t=t_ms, watts=watts))

    def add_memory_sample(self, t_ms: int, used_gb: float) -> None:
        self._memory_log.append((t_ms, used_gb))

    def annotate_error(self, message: str) -> None:
        self._error = message

    def now_ms(self) -> int:
        """Milliseconds on this trace's monotonic clock (live mode only)."""
        if self._epoch is None:
            raise ValueError("recorder has no live clock; pass explicit timestamps")
        return int((time.monotonic() - self._epoch) * 1000)

    # -- marker side -------------------------------------------------------

    def mark(self, stage: Stage, edge: str, t_ms: int | None = None) -> None:
        if edge not in ("begin", "end"):
            raise ValueError(f"edge must be 'begin' or 'end', got {edge!r}")
        if t_ms is None:
            t_ms = self.now_ms()
        with self._marker_lock:
            if self._last_marker_t is not None and t_ms < self._last_marker_t:
                raise ValueError(
                    f"marker timestamps must be monotone: {t_ms} < {self._last_marker_t}"
                )
            if edge == "begin":
                if self._open_stage is not None:
                    raise ValueError(
                        f"overlapping spans: {stage.value} begins at {t_ms} while "
                        f"{self._open_stage.value} is open"
                    )
                self._open_stage = stage
                self._open_t = t_ms
            else:
                if self._open_stage is None:
                    raise ValueError(f"end without begin for stage {stage.value}")
                if self._open_stage != stage:
                    raise ValueError(
                        f"end for {stage.value} while {self._open_stage.value} is open"
                    )
                self._spans.append(StageSpan(stage=stage, start=self._open_t, end=t_ms))
                self._open_stage = None
            self._last_marker_t = t_ms

    # -- live sampling -----------------------------------------------------

    def start_live(
        self,
        provider: TelemetryProvider,
        period_ms: int,
        external_stop: threading.Event | None = None,
    ) -> None:
        floor = provider.capabilities().sampling_floor_ms
        if period_ms < floor:
            raise ValueError(f"period {period_ms} ms below provider floor {floor} ms")
        if self._thread is not None:
            raise ValueError("sampler already running")
        self._thread_stop.clear()
        self._epoch = time.monotonic()

        def _loop() -> None:
            tick = 0
            while not self._thread_stop.is_set() and not (
                external_stop is not None and external_stop.is_set()
            ):
                target = self._epoch + tick * period_ms / 1000.0
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                if self._thread_stop.is_set() or (
                    external_stop is not None and external_stop.is_set()
                ):
                    break
                t_ms = int((time.monotonic() - self._epoch) * 1000)
                try:
                    watts = provider.poll()
                except Exception as exc:  # noqa: BLE001 - annotate and truncate
                    self._error = f"provider failed at t={t_ms}: {exc}"
                    break
                if self._samples and t_ms <= self._samples[-1].t:
                    t_ms = self._samples[-1].t + 1
                self._samples.append(PowerSample(t=t_ms, watts=max(watts, 0.0)))
                poll_mem = getattr(provider, "poll_memory_gb", None)
                if poll_mem is not None:
                    try:
                        self._memory_log.append((t_ms, poll_mem()))
                    except Exception:  # noqa: BLE001 - memory probe is best-effort
                        pass
                tick += 1

        self._thread = threading.Thread(target=_loop, name="deploybench-sampler", daemon=True)
        self._thread.start()

    def stop_live(self) -> None:
        if self._thread is None:
            return
        self._thread_stop.set()
        self._thread.join()
        self._thread = None

    # -- completion --------------------------------------------------------

    @property
    def memory_log(self) -> tuple[tuple[int, float], ...]:
        return tuple(self._memory_log)

    def finish(self) -> TelemetryTrace:
        self.stop_live()
        if self._open_stage is not None:
            raise ValueError(f"unclosed span for stage {self._open_stage.value}")
        if not self._samples:
            raise ValueError("empty trace")
        flags = _jitter_flags(self._samples, self.nominal_period_ms, self.jitter_tol_pct)
        return TelemetryTrace(
            samples=tuple(self._samples),
            spans=tuple(self._spans),
            nominal_period_ms=self.nominal_period_ms,
            jitter_tol_pct=self.jitter_tol_pct,
            device_memory_gb=self.device_memory_gb,
            idle_baseline_w=self.idle_baseline_w,
            flags=tuple(list(flags) + self._flags_extra),
            error=self._error,
        )


def mark_stage(recorder: TraceRecorder, stage: Stage, edge: str, t_ms: int | None = None) -> None:
    """Append a begin/end stage marker to a trace-in-progress."""
    recorder.mark(stage, edge, t_ms)


def record_trace(
    provider: TelemetryProvider,
    period_ms: int = 100,
    stop: threading.Event | None = None,
    recorder: TraceRecorder | None = None,
) -> TelemetryTrace:
    """Record a power trace from a provider.

    Replay providers are drained synchronously and reproduce the stored
    samples and metadata exactly. Live providers sample on a dedicated
    thread every `period_ms` until `stop` is set; the sampler never
    blocks the measured workload. A provider failure mid-trace returns
    the truncated trace with an error annotation; producing zero samples
    raises.
    """
    if getattr(provider, "is_replay", False):
        rec = recorder or TraceRecorder()
        replay_into(rec, provider, stop)
        return rec.finish()

    if stop is None:
        raise ValueError("live recording requires a stop signal")
    rec = recorder or TraceRecorder(nominal_period_ms=period_ms)
    rec.nominal_period_ms = period_ms
    caps = provider.capabilities()
    if rec.device_memory_gb is None:
        rec.device_memory_gb = caps.device_memory_gb
    rec.start_live(provider, period_ms, external_stop=stop)
    stop.wait()
    rec.stop_live()
    return rec.finish()


def replay_into(
    recorder: TraceRecorder,
    provider: "ReplayProvider",
    stop: threading.Event | None = None,
) -> None:
    """Drain a replay provider's samples into a recorder without finishing it.

    Leaves the recorder open so the caller can apply stage markers (for
    example from a stored marker stream) before calling `finish()`.
    """
    src = provider.trace
    recorder.nominal_period_ms = src.nominal_period_ms
    recorder.jitter_tol_pct = src.jitter_tol_pct
    recorder.device_memory_gb = src.device_memory_gb
    recorder.idle_baseline_w = src.idle_baseline_w
    if src.error is not None:
        recorder.annotate_error(src.error)
    for sample in provider.replay_samples():
        if stop is not None and stop.is_set():
            break
        recorder.add_sample(sample.t, sample.watts)


# ---------------------------------------------------------------------------
# Energy integration
# ---------------------------------------------------------------------------


def _interp_watts(samples: Sequence[PowerSample], t: int) -> float:
    lo, hi = 0, len(samples) - 1
    if t <= samples[0].t:
        return samples[0].watts
    if t >= samples[-1].t:
        return samples[-1].watts
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if samples[mid].t <= t:
            lo = mid
        else:
            hi = mid
    a, b = samples[lo], samples[hi]
    if a.t == t:
        return a.watts
    return a.watts + (b.watts - a.watts) * (t - a.t) / (b.t - a.t)


def integrate_energy(
    trace: TelemetryTrace,
    span: StageSpan,
    subtract_idle: bool = False,
) -> float:
    """Trapezoidal energy of a stage span, in joules.

    Power at the span boundaries is linearly interpolated between the
    neighboring samples. With `subtract_idle`, each knot is replaced by
    max(0, watts - idle_baseline) before integration (clipping happens
    at the knots, not at segment crossings).
    """
    if span.start < trace.start_ms or span.end > trace.end_ms:
        raise ValueError(
            f"span [{span.start}, {span.end}] outside trace bounds "
            f"[{trace.start_ms}, {trace.end_ms}]"
        )
    baseline = 0.0
    if subtract_idle:
        if trace.idle_baseline_w is None:
            raise ValueError("subtract_idle requires an idle_baseline on the trace")
        baseline = trace.idle_baseline_w

    inside = [s for s in trace.samples if span.start <= s.t <= span.end]
    if len(inside) < 2:
        raise ValueError(
            f"insufficient samples: {len(inside)} inside span [{span.start}, {span.end}]"
        )

    knots: list[tuple[int, float]] = []
    if inside[0].t != span.start:
        knots.append((span.start, _interp_watts(trace.samples, span.start)))
    knots.extend((s.t, s.watts) for s in inside)
    if inside[-1].t != span.end:
        knots.append((span.end, _interp_watts(trace.samples, span.end)))

    if subtract_idle:
        knots = [(t, max(0.0, w - baseline)) for t, w in knots]

    terms = [
        (t2 - t1) * (w1 + w2) / 2.0
        for (t1, w1), (t2, w2) in zip(knots, knots[1:])
    ]
    return fsum(terms) / 1000.0


def estimate_idle_baseline(trace: TelemetryTrace, min_duration_ms: int = 5000) -> float:
    """Median power over the trace's longest Idle span (>= 5 s by default)."""
    idle_spans = [s for s in trace.spans if s.stage == Stage.IDLE]
    if not idle_spans:
        raise ValueError("no Idle span in trace")
    span = max(idle_spans, key=lambda s: s.duration_ms)
    if span.duration_ms < min_duration_ms:
        raise ValueError(
            f"Idle span of {span.duration_ms} ms is shorter than {min_duration_ms} ms"
        )
    watts = [s.watts for s in trace.samples if span.start <= s.t <= span.end]
    if not watts:
        raise ValueError("no samples inside Idle span")
    return median(watts)


# ---------------------------------------------------------------------------
# Trace file format: header line, then one line per sample and per marker.
# Canonical encoding round-trips bit-exactly.
# ---------------------------------------------------------------------------

_TRACE_VERSION = "v1"


def encode_trace(trace: TelemetryTrace) -> str:
    header = [f"T {_TRACE_VERSION}"]
    header.append(f"period_ms={trace.nominal_period_ms}")
    header.append(f"jitter_tol_pct={trace.jitter_tol_pct}")
    if trace.device_memory_gb is not None:
        header.append(f"device_gb={trace.device_memory_gb!r}")
    if trace.idle_baseline_w is not None:
        header.append(f"idle_w={trace.idle_baseline_w!r}")
    if trace.flags:
        header.append("flags=" + ";".join(trace.flags))
    if trace.error is not None:
        header.append(f"error={trace.error}")
    lines = [" ".join(header)]
    lines.extend(f"S {s.t} {s.watts!r}" for s in trace.samples)
    for span in sorted(trace.spans, key=lambda s: s.start):
        lines.append(f"M {span.stage.value} begin {span.start}")
        lines.append(f"M {span.stage.value} end {span.end}")
    return "\n".join(lines) + "\n"


def decode_trace(text: str) -> TelemetryTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(f"T {_TRACE_VERSION}"):
        raise ValueError("not a trace file: missing header")
    header = lines[0]
    meta: dict[str, str] = {}
    rest = header[len(f"T {_TRACE_VERSION}") :].strip()
    while rest:
        if rest.startswith("error="):
            meta["error"] = rest[len("error=") :]
            break
        token, _, rest = rest.partition(" ")
        key, _, value = token.partition("=")
        meta[key] = value
        rest = rest.strip()

    samples: list[PowerSample] = []
    spans: list[StageSpan] = []
    open_spans: dict[str, int] = {}
    for line in lines[1:]:
        kind, _, payload = line.partition(" ")
        if kind == "S":
            t_str, _, w_str = payload.partition(" ")
            samples.append(PowerSample(t=int(t_str), watts=float(w_str)))
        elif kind == "M":
            parts = payload.split()
            if len(parts) != 3:
                raise ValueError(f"malformed marker line: {line!r}")
            stage_str, edge, t_str = parts
            stage = Stage(stage_str)
            t = int(t_str)
            if edge == "begin":
                if stage_str in open_spans:
                    raise ValueError(f"double begin for stage {stage_str}")
                open_spans[stage_str] = t
            elif edge == "end":
                if stage_str not in open_spans:
                    raise ValueError(f"end without begin for stage {stage_str}")
                spans.append(StageSpan(stage=stage, start=open_spans.pop(stage_str), end=t))
            else:
                raise ValueError(f"malformed marker edge: {line!r}")
        else:
            raise ValueError(f"unknown trace line kind: {line!r}")
    if open_spans:
        raise ValueError(f"unclosed spans in trace file: {sorted(open_spans)}")

    return TelemetryTrace(
        samples=tuple(samples),
        spans=tuple(sorted(spans, key=lambda s: s.start)),
        nominal_period_ms=int(meta.get("period_ms", "100")),
        jitter_tol_pct=int(meta.get("jitter_tol_pct", "50")),
        device_memory_gb=float(meta["device_gb"]) if "device_gb" in meta else None,
        idle_baseline_w=float(meta["idle_w"]) if "idle_w" in meta else None,
        flags=tuple(meta["flags"].split(";")) if meta.get("flags") else (),
        error=meta.get("error"),
    )


def write_trace(trace: TelemetryTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(encode_trace(trace))


def read_trace(path) -> TelemetryTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return decode_trace(fh.read())
