#!/usr/bin/env python3
"""Serving stage driver: load a model behind a streaming endpoint.

Emits `MARK Load begin/end` around engine/model startup and
`MARK Inference begin/end` around the request window, so the harness
can segment the power trace.

`--mock-serve` starts a stdlib server that speaks the OpenAI-style
streaming completion wire shape (`data: {...}` event-stream chunks)
without any model, which is enough for protocol and client testing. The
real path launches an external serving engine command (by default a
vLLM-style `... serve <model>`), waits for its readiness endpoint, and
terminates it when the window closes.
"""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import threading
import time
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import WorkloadConfig
from .markers import emit, log


class _MockCompletionHandler(BaseHTTPRequestHandler):
    chunk_count = 8
    chunk_gap_s = 0.002

    def do_POST(self):
        length = int(self.headers.get("content-length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            body = {}
        n = min(int(body.get("max_tokens", self.chunk_count)), self.chunk_count)
        self.send_response(200)
        self.send_header("content-type", "text/event-stream")
        self.end_headers()
        for i in range(n):
            chunk = {"choices": [{"text": f"tok{i} "}]}
            self.wfile.write(f"data: {json.dumps(chunk)}\n\n".encode())
            self.wfile.flush()
            time.sleep(self.chunk_gap_s)
        self.wfile.write(b"data: [DONE]\n\n")

    def log_message(self, *args):
        pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="workload-serve", description=__doc__)
    parser.add_argument("--model-id", required=True)
    parser.add_argument("--strategy", required=True)
    parser.add_argument("--artifacts", default=None)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0, help="0 picks a free port")
    parser.add_argument("--mock-serve", action="store_true")
    parser.add_argument("--window-ms", type=int, default=1000,
                        help="length of the inference window")
    parser.add_argument("--server-cmd", default=None,
                        help="engine launch command; {model} and {port} are substituted")
    parser.add_argument("--ready-timeout-s", type=float, default=120.0)
    return parser


def _mock_serve(args) -> int:
    emit("Load", "begin")
    server = ThreadingHTTPServer((args.host, args.port), _MockCompletionHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://{args.host}:{server.server_address[1]}/v1/completions"
    emit("Load", "end")
    log(f"ENDPOINT {url}")

    emit("Inference", "begin")
    time.sleep(args.window_ms / 1000.0)
    emit("Inference", "end")
    server.shutdown()
    return 0


def _wait_ready(base_url: str, timeout_s: float) -> bool:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        try:
            with urllib.request.urlopen(f"{base_url}/v1/models", timeout=2):
                return True
        except Exception:  # noqa: BLE001 - not up yet
            time.sleep(0.5)
    return False


def _real_serve(config: WorkloadConfig, args) -> int:
    artifacts = Path(args.artifacts) if args.artifacts else config.artifacts_dir()
    if not artifacts.exists():
        log(f"adapter artifacts missing: {artifacts}")
        return 2
    port = args.port or 8000
    cmd_template = args.server_cmd or "vllm serve {model} --port {port}"
    cmd = shlex.split(cmd_template.format(model=config.model_id, port=port))

    emit("Load", "begin")
    try:
        proc = subprocess.Popen(cmd)
    except OSError as exc:
        log(f"failed to launch serving engine: {exc}")
        return 1
    base_url = f"http://{args.host}:{port}"
    if not _wait_ready(base_url, args.ready_timeout_s):
        proc.terminate()
        log(f"serving engine never became ready at {base_url}")
        return 1
    emit("Load", "end")
    log(f"ENDPOINT {base_url}/v1/completions")

    emit("Inference", "begin")
    time.sleep(args.window_ms / 1000.0)
    emit("Inference", "end")
    proc.terminate()
    try:
        proc.wait(timeout=30)
    except subprocess.TimeoutExpired:
        proc.kill()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = WorkloadConfig(model_id=args.model_id, strategy=args.strategy)
    except ValueError as exc:
        log(str(exc))
        return 2
    if args.mock_serve:
        return _mock_serve(args)
    return _real_serve(config, args)


if __name__ == "__main__":
    raise SystemExit(main())
