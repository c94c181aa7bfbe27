"""Example external-process stage drivers for the deployment benchmark.

Each driver is a standalone CLI that wraps one lifecycle stage of a real
model (parameter-efficient adaptation, or loading + serving) and emits
the line-oriented marker protocol the benchmark harness ingests:

    MARK <stage> <begin|end> <t_ms> [key=value ...]

Timestamps are milliseconds since the process started. The harness
never depends on these scripts; they exist so real workloads have a
reference for speaking the protocol.
"""

__version__ = "0.1.0"
