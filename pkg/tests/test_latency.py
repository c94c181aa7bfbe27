from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from deploybench.latency import (
    aggregate_latency,
    decode_timings,
    encode_timings,
    itl,
    read_timings,
    throughput,
    ttft,
    write_timings,
)
from deploybench.model import RequestTiming, Stage, StageSpan


def request(submit=0, ttft_ms=48, gaps=(10, 10, 10)):
    first = submit + ttft_ms
    times = [first]
    for g in gaps:
        times.append(times[-1] + g)
    return RequestTiming(submit=submit, first_token=first, token_times=tuple(times))


class TestTtft:
    def test_simple_subtraction(self):
        assert ttft(RequestTiming(submit=0, first_token=48, token_times=(48,))) == 48

    def test_zero_boundary(self):
        assert ttft(RequestTiming(submit=5, first_token=5, token_times=(5,))) == 0

    def test_elementwise_oracle_on_synthetic_batch(self):
        rng = random.Random(3)
        offsets = [rng.randrange(1, 500) for _ in range(100)]
        batch = [request(submit=1000 * i, ttft_ms=off) for i, off in enumerate(offsets)]
        assert [ttft(r) for r in batch] == [float(off) for off in offsets]


class TestItl:
    def test_uniform_gaps(self):
        r = RequestTiming(submit=0, first_token=0, token_times=(0, 10, 20, 30))
        assert itl(r) == 10

    def test_even_count_median_is_midpoint(self):
        r = RequestTiming(submit=0, first_token=0, token_times=(0, 10, 100))
        assert itl(r) == 50  # median of the gaps {10, 90}, midpoint of middle two

    def test_single_token_undefined(self):
        r = RequestTiming(submit=0, first_token=0, token_times=(0,))
        with pytest.raises(ValueError, match="undefined ITL"):
            itl(r)


class TestThroughput:
    def test_paper_scale_rate(self):
        # 2235 tokens over exactly one second.
        times = tuple(range(2235))
        r = RequestTiming(submit=0, first_token=0, token_times=times)
        window = StageSpan(Stage.INFERENCE, 0, 1000)
        assert throughput([r], window) == 2235.0

    def test_empty_batch_is_zero(self):
        window = StageSpan(Stage.INFERENCE, 0, 1000)
        assert throughput([], window) == 0.0

    def test_counting_oracle_on_random_batch(self):
        rng = random.Random(5)
        batch = []
        cursor = 0
        for _ in range(50):
            n = rng.randrange(1, 40)
            times = tuple(cursor + j for j in range(n))
            batch.append(RequestTiming(submit=cursor, first_token=cursor, token_times=times))
            cursor += n + rng.randrange(1, 20)
        window = StageSpan(Stage.INFERENCE, 0, cursor)
        expected = sum(len(r.token_times) for r in batch) / (cursor / 1000.0)
        assert throughput(batch, window) == pytest.approx(expected, rel=1e-12)

    def test_zero_duration_window_impossible_by_type(self):
        with pytest.raises(ValueError):
            StageSpan(Stage.INFERENCE, 0, 0)

    @given(st.integers(min_value=1, max_value=8))
    def test_scaling_token_counts_scales_rate(self, k):
        window = StageSpan(Stage.INFERENCE, 0, 10_000)

        def batch(tokens_per_request):
            out = []
            for i in range(5):
                start = 2000 * i
                times = tuple(start + j for j in range(tokens_per_request))
                out.append(RequestTiming(submit=start, first_token=start, token_times=times))
            return out

        base = throughput(batch(20), window)
        scaled = throughput(batch(20 * k), window)
        assert scaled == pytest.approx(base * k, rel=1e-12)


class TestAggregateLatency:
    def test_single_request_stats_collapse(self):
        window = StageSpan(Stage.INFERENCE, 0, 1000)
        stats = aggregate_latency([request()], window)
        assert stats.ttft_ms.median == 48
        assert stats.ttft_ms.p95 == 48
        assert stats.ttft_ms.mean == 48
        assert stats.ttft_ms.std == 0
        assert stats.itl_ms.median == 10
        assert stats.n_requests == 1

    def test_hundred_requests_sort_oracle(self):
        batch = [request(submit=1000 * i, ttft_ms=i + 1) for i in range(100)]
        window = StageSpan(Stage.INFERENCE, 0, 200_000)
        stats = aggregate_latency(batch, window)
        assert stats.ttft_ms.median == 50.5
        assert stats.ttft_ms.p95 == 95  # nearest-rank
        assert stats.ttft_ms.mean == pytest.approx(50.5)

    def test_identical_requests_zero_std(self):
        batch = [request(submit=1000 * i) for i in range(10)]
        window = StageSpan(Stage.INFERENCE, 0, 20_000)
        stats = aggregate_latency(batch, window)
        assert stats.ttft_ms.std == 0
        assert stats.itl_ms.std == 0

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty batch"):
            aggregate_latency([], StageSpan(Stage.INFERENCE, 0, 1000))

    @given(st.permutations(list(range(20))))
    def test_permutation_invariance(self, order):
        base = [request(submit=1000 * i, ttft_ms=7 * i + 3, gaps=(i + 1, i + 2)) for i in range(20)]
        window = StageSpan(Stage.INFERENCE, 0, 100_000)
        shuffled = [base[i] for i in order]
        assert aggregate_latency(shuffled, window) == aggregate_latency(base, window)

    @given(st.integers(min_value=1, max_value=200))
    def test_uniform_gap_itl_is_exact(self, gap):
        r = request(gaps=(gap,) * 5)
        assert itl(r) == gap


class TestTimingFile:
    def test_roundtrip(self, tmp_path):
        batch = [request(submit=500 * i, ttft_ms=20 + i, gaps=(9, 11, 10)) for i in range(7)]
        path = tmp_path / "timings.requests"
        write_timings(batch, path)
        assert read_timings(path) == batch

    def test_line_format(self):
        r = RequestTiming(submit=0, first_token=48, token_times=(48, 58))
        assert encode_timings([r]) == "R 0 48 2 48 58\n"

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="token count mismatch"):
            decode_timings("R 0 48 3 48 58\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="malformed"):
            decode_timings("X 0 48 1 48\n")
