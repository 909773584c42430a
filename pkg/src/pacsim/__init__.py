"""Trace-driven DRAM subsystem simulator for reduced-latency preventive
refresh layered on RowHammer mitigation mechanisms, with a chip-profile cost
model and an independent timing/disturbance verifier."""

__version__ = "0.1.0"
