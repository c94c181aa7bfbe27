"""Per-request timing reductions: TTFT, inter-token latency, throughput.

All functions are pure over immutable inputs. Inter-token latency of a
request is the median of its consecutive token gaps (robust to a single
stalled token); p95 is nearest-rank so every statistic is reproducible
by a sort-based oracle. Throughput is sustained: total tokens over the
inference window, not a mean of per-request rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import RequestTiming, StageSpan, StatSet
from .stats import mean, median, nearest_rank, sample_std


@dataclass(frozen=True)
class LatencyStats:
    ttft_ms: StatSet
    itl_ms: StatSet
    throughput_tok_s: float
    n_requests: int

    def __post_init__(self) -> None:
        if self.n_requests < 1:
            raise ValueError("n_requests must be >= 1")
        if self.throughput_tok_s < 0:
            raise ValueError("throughput must be >= 0")


def ttft(request: RequestTiming) -> float:
    """Time to first token, in milliseconds."""
    return float(request.first_token - request.submit)


def itl(request: RequestTiming) -> float:
    """Median gap between consecutive token timestamps, in milliseconds."""
    if request.tokens_out < 2:
        raise ValueError(f"undefined ITL: request has {request.tokens_out} token(s)")
    gaps = [b - a for a, b in zip(request.token_times, request.token_times[1:])]
    return median(gaps)


def throughput(batch: Sequence[RequestTiming], window: StageSpan) -> float:
    """Sustained tokens per second over the inference window."""
    duration_s = window.duration_ms / 1000.0
    if duration_s <= 0:
        raise ValueError("zero-duration window")
    total = sum(r.tokens_out for r in batch)
    return total / duration_s


def _stat_set(values: Sequence[float]) -> StatSet:
    return StatSet(
        median=median(values),
        p95=nearest_rank(values, 0.95),
        mean=mean(values),
        std=sample_std(values),
    )


def aggregate_latency(batch: Sequence[RequestTiming], window: StageSpan) -> LatencyStats:
    """Reduce a request batch to latency statistics plus sustained throughput."""
    if not batch:
        raise ValueError("empty batch")
    ttfts = [ttft(r) for r in batch]
    itls = [itl(r) for r in batch]
    return LatencyStats(
        ttft_ms=_stat_set(ttfts),
        itl_ms=_stat_set(itls),
        throughput_tok_s=throughput(batch, window),
        n_requests=len(batch),
    )


# ---------------------------------------------------------------------------
# Request-timing file: one line per request,
#   R <submit> <first_token> <n> <t1> ... <tn>
# ---------------------------------------------------------------------------


def encode_timings(batch: Iterable[RequestTiming]) -> str:
    lines = []
    for r in batch:
        parts = ["R", str(r.submit), str(r.first_token), str(r.tokens_out)]
        parts.extend(str(t) for t in r.token_times)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def decode_timings(text: str) -> list[RequestTiming]:
    out: list[RequestTiming] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "R" or len(parts) < 4:
            raise ValueError(f"malformed request-timing line: {line!r}")
        submit, first_token, n = int(parts[1]), int(parts[2]), int(parts[3])
        token_times = tuple(int(p) for p in parts[4:])
        if len(token_times) != n:
            raise ValueError(
                f"token count mismatch: declared {n}, got {len(token_times)} in {line!r}"
            )
        out.append(RequestTiming(submit=submit, first_token=first_token, token_times=token_times))
    return out


def write_timings(batch: Iterable[RequestTiming], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(encode_timings(batch))


def read_timings(path) -> list[RequestTiming]:
    with open(path, "r", encoding="utf-8") as fh:
        return decode_timings(fh.read())
