"""Shared domain types: the simulation clock, packets, link and buffer specs.

Times are integer nanoseconds so that event ordering is exact and identical
on every platform. Conversions to and from decimal seconds happen only at the
edges (scenario files, CSV output).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NewType

SimTime = NewType("SimTime", int)

NS_PER_S = 1_000_000_000

PACKETS = "packets"
BYTES = "bytes"
BUFFER_MODES = (PACKETS, BYTES)


def from_seconds(seconds: float) -> SimTime:
    if seconds < 0:
        raise ValueError(f"negative time: {seconds!r}")
    return SimTime(int(round(seconds * NS_PER_S)))


def to_seconds(t: int) -> float:
    return t / NS_PER_S


def service_time(size_bytes: int, capacity_bps: float) -> SimTime:
    """Serialization time of one packet, rounded to the nearest nanosecond."""
    return SimTime(int(round(size_bytes * 8 * NS_PER_S / capacity_bps)))


@dataclass(frozen=True, order=True)
class Packet:
    flow_id: int
    seq: int
    size_bytes: int
    created_at: SimTime

    def __post_init__(self):
        if self.size_bytes < 1:
            raise ValueError("size_bytes must be >= 1")


@dataclass(frozen=True)
class LinkSpec:
    capacity_bps: float
    network_delay_ms: float = 0.0


@dataclass(frozen=True)
class BufferCapacity:
    mode: str
    limit: int

    def admits(self, queued_packets: int, queued_bytes: int, size_bytes: int) -> bool:
        """Whether a packet fits behind the current queue (in-service excluded)."""
        if self.mode == PACKETS:
            return queued_packets + 1 <= self.limit
        return queued_bytes + size_bytes <= self.limit
