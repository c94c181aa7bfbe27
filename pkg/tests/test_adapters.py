from __future__ import annotations

import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from hypothesis import given, strategies as st

from deploybench.adapters import (
    MarkerError,
    MarkerMessage,
    MockEndpoint,
    StreamingError,
    format_marker,
    is_marker_line,
    measure_requests,
    parse_marker,
    probe_vram,
    run_stage_process,
    stream_inference,
)
from deploybench.latency import aggregate_latency, itl, ttft
from deploybench.model import Stage, StageSpan
from deploybench.telemetry import ReplayProvider, TraceRecorder
from conftest import golden_trace


class TestMarkerProtocol:
    def test_parse_simple_line(self):
        msg = parse_marker("MARK Adaptation begin 0")
        assert msg == MarkerMessage(stage=Stage.ADAPTATION, edge="begin", t=0)

    def test_parse_aux_pairs(self):
        msg = parse_marker("MARK Inference end 5000 vram_gb=0.625 tokens=200")
        assert msg.aux_dict == {"vram_gb": "0.625", "tokens": "200"}

    @pytest.mark.parametrize(
        "line",
        [
            "MARK Adaptation bogus 0",
            "MARK NotAStage begin 0",
            "MARK Adaptation begin zero",
            "MARK Adaptation begin",
            "MARK Inference end 10 noequals",
        ],
    )
    def test_garbage_marker_line_quoted(self, line):
        with pytest.raises(MarkerError) as err:
            parse_marker(line)
        assert repr(line) in str(err.value)

    def test_non_marker_line_detection(self):
        assert is_marker_line("MARK Load begin 0")
        assert not is_marker_line("loading checkpoint shard 3/3")

    stages = st.sampled_from(list(Stage))
    edges = st.sampled_from(["begin", "end"])
    aux_keys = st.text(
        alphabet=st.characters(codec="ascii", exclude_characters=" =\n"), min_size=1, max_size=8
    )
    aux_values = st.text(
        alphabet=st.characters(codec="ascii", exclude_characters=" \n"), max_size=8
    )

    @given(
        stages,
        edges,
        st.integers(min_value=0, max_value=10**9),
        st.lists(st.tuples(aux_keys, aux_values), max_size=3),
    )
    def test_format_parse_roundtrip(self, stage, edge, t, aux):
        msg = MarkerMessage(stage=stage, edge=edge, t=t, aux=tuple(aux))
        line = format_marker(msg)
        assert parse_marker(line) == msg
        assert format_marker(parse_marker(line)) == line


class TestMockStreaming:
    def test_four_chunks_at_ten_ms(self):
        endpoint = MockEndpoint(n_chunks=4, first_chunk_delay_ms=5, inter_chunk_ms=10)
        timing = stream_inference(endpoint, "hi", 16)
        assert timing.token_times == (5, 15, 25, 35)
        assert itl(timing) == 10.0
        assert ttft(timing) == 5.0

    def test_zero_chunks_is_empty_generation(self):
        endpoint = MockEndpoint(n_chunks=0)
        with pytest.raises(StreamingError, match="empty generation"):
            stream_inference(endpoint, "hi", 16)

    def test_max_tokens_truncates(self):
        endpoint = MockEndpoint(n_chunks=10, inter_chunk_ms=10)
        timing = stream_inference(endpoint, "hi", 3)
        assert timing.tokens_out == 3

    def test_hundred_requests_match_schedule_oracle(self):
        endpoint = MockEndpoint(n_chunks=20, first_chunk_delay_ms=48, inter_chunk_ms=10)
        timings = measure_requests(endpoint, 100, gap_ms=100)
        window = StageSpan(
            Stage.INFERENCE, 0, timings[-1].token_times[-1] + 1
        )
        stats = aggregate_latency(timings, window)
        assert stats.ttft_ms.median == 48.0
        assert stats.ttft_ms.std == 0.0
        assert stats.itl_ms.median == 10.0
        assert stats.n_requests == 100
        assert endpoint.calls == 100

    def test_explicit_schedule(self):
        endpoint = MockEndpoint(schedule_ms=[7, 11, 40])
        timing = stream_inference(endpoint, "hi", 16)
        assert timing.token_times == (7, 11, 40)
        assert itl(timing) == 16.5  # midpoint of the gaps {4, 29}


class _SSEHandler(BaseHTTPRequestHandler):
    chunks = 5

    def do_POST(self):
        length = int(self.headers.get("content-length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        n = min(int(body.get("max_tokens", 4)), self.chunks)
        self.send_response(200)
        self.send_header("content-type", "text/event-stream")
        self.end_headers()
        for i in range(n):
            payload = {"choices": [{"text": f"tok{i}"}]}
            self.wfile.write(f"data: {json.dumps(payload)}\n\n".encode())
            self.wfile.flush()
        self.wfile.write(b"data: [DONE]\n\n")

    def log_message(self, *args):  # keep test output quiet
        pass


class _PlainJSONHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.dumps({"choices": [{"text": "all at once"}]}).encode()
        self.send_response(200)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def sse_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _SSEHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/completions"
    server.shutdown()


@pytest.fixture
def plain_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _PlainJSONHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/completions"
    server.shutdown()


class TestHttpStreaming:
    def test_counts_streamed_chunks(self, sse_server):
        timing = stream_inference(sse_server, "hello", 4, timeout_s=10)
        assert timing.tokens_out == 4
        assert timing.submit == 0
        assert timing.first_token >= 0

    def test_non_streaming_endpoint_rejected(self, plain_server):
        with pytest.raises(StreamingError, match="streaming required"):
            stream_inference(plain_server, "hello", 4, timeout_s=10)


def _recorder_with_clock() -> TraceRecorder:
    rec = TraceRecorder()
    import time

    rec._epoch = time.monotonic()
    return rec


class TestRunStageProcess:
    def test_marker_emitting_process(self):
        rec = _recorder_with_clock()
        script = (
            "import sys; "
            "print('MARK Adaptation begin 0'); "
            "print('loading weights...'); "
            "print('MARK Adaptation end 1200')"
        )
        result = run_stage_process(
            [sys.executable, "-c", script], Stage.ADAPTATION, rec, t_launch_ms=0
        )
        assert result.span == StageSpan(Stage.ADAPTATION, 0, 1200)
        assert result.output_lines == ["loading weights..."]
        rec.add_sample(0, 1.0)
        rec.add_sample(2000, 1.0)
        assert rec.finish().spans == (StageSpan(Stage.ADAPTATION, 0, 1200),)

    def test_marker_silent_process_wrapped(self):
        rec = _recorder_with_clock()
        result = run_stage_process(
            [sys.executable, "-c", "import time; time.sleep(0.05)"],
            Stage.LOAD,
            rec,
            t_launch_ms=100,
        )
        assert result.span is not None
        assert result.span.stage == Stage.LOAD
        assert result.span.start == 100
        assert result.span.duration_ms >= 50

    def test_malformed_marker_fails_run(self):
        rec = _recorder_with_clock()
        with pytest.raises(MarkerError, match="malformed"):
            run_stage_process(
                [sys.executable, "-c", "print('MARK Adaptation wiggle 0')"],
                Stage.ADAPTATION,
                rec,
                t_launch_ms=0,
            )

    def test_nonzero_exit_fails_stage(self):
        rec = _recorder_with_clock()
        with pytest.raises(RuntimeError, match="exited 3"):
            run_stage_process(
                [sys.executable, "-c", "import sys; sys.exit(3)"],
                Stage.LOAD,
                rec,
                t_launch_ms=0,
            )

    def test_markers_on_stderr_accepted(self):
        rec = _recorder_with_clock()
        script = (
            "import sys; "
            "sys.stderr.write('MARK Load begin 0\\n'); "
            "sys.stderr.write('MARK Load end 80\\n')"
        )
        result = run_stage_process([sys.executable, "-c", script], Stage.LOAD, rec, t_launch_ms=0)
        assert result.span == StageSpan(Stage.LOAD, 0, 80)


class TestProbeVram:
    def test_scripted_peak(self):
        provider = ReplayProvider(golden_trace(), ((14000, 0.5), (16000, 0.625), (18000, 0.6)))
        span = StageSpan(Stage.INFERENCE, 14000, 19000)
        assert probe_vram(provider, span) == 0.625

    def test_constant_memory(self):
        provider = ReplayProvider(golden_trace(), ((0, 4.0), (1000, 4.0)))
        assert probe_vram(provider) == 4.0

    def test_monotone_ramp_takes_peak(self):
        provider = ReplayProvider(golden_trace(), ((0, 1.0), (500, 2.0), (1000, 3.0)))
        assert probe_vram(provider) == 3.0

    def test_span_filters_samples(self):
        provider = ReplayProvider(golden_trace(), ((0, 9.0), (15000, 0.5)))
        span = StageSpan(Stage.INFERENCE, 14000, 19000)
        assert probe_vram(provider, span) == 0.5

    def test_unsupported_source_rejected(self):
        with pytest.raises(ValueError, match="does not support memory query"):
            probe_vram(object())

    def test_recorder_memory_log(self):
        rec = TraceRecorder()
        rec.add_memory_sample(0, 1.5)
        rec.add_memory_sample(100, 2.5)
        assert probe_vram(rec) == 2.5
