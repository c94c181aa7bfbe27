from __future__ import annotations

import sys
import time

_EPOCH = time.monotonic()


def now_ms() -> int:
    """Milliseconds since this process's marker epoch."""
    return int((time.monotonic() - _EPOCH) * 1000)


def emit(stage: str, edge: str, t_ms: int | None = None, **aux: object) -> int:
    """Write one marker line to stdout and return its timestamp.

    Marker lines go to stdout so the harness can ingest them; ordinary
    logging belongs on stderr.
    """
    if t_ms is None:
        t_ms = now_ms()
    parts = ["MARK", stage, edge, str(t_ms)]
    parts.extend(f"{key}={value}" for key, value in aux.items())
    sys.stdout.write(" ".join(parts) + "\n")
    sys.stdout.flush()
    return t_ms


def log(message: str) -> None:
    sys.stderr.write(message + "\n")
    sys.stderr.flush()
