"""The bottleneck: a drop-tail FIFO feeding a serializing link.

Also home to the buffer-sizing rules of thumb and the fill-rate model that
predicts how long a buffer survives a rate mismatch.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import PACKETS, BufferCapacity, LinkSpec, Packet, service_time
from .errors import InvalidCompletion, InvariantViolation, NonPositiveFlows, OutOfTinyRange

ACCEPTED = "accepted"
DROPPED = "dropped"

TINY_DEFAULT_PACKETS = 30
TINY_RANGE = (10, 99)


class DropTailBuffer:
    """Single-server FIFO with a drop-tail admission rule.

    Capacity counts exclude the packet in service, so a 30-packet buffer
    holds up to 31 packets in the system.
    """

    def __init__(self, capacity: BufferCapacity, link: LinkSpec, check: bool = False):
        self.capacity = capacity
        self.link = link
        self.check = check
        self.queued: deque = deque()
        self.queued_bytes = 0
        self.in_service: Optional[Packet] = None
        self.departure_time: Optional[int] = None
        self.accepted = 0
        self.departed = 0
        self._last_event = 0

    def __len__(self):
        return len(self.queued) + (self.in_service is not None)

    def _start_service(self, pkt: Packet, now: int) -> int:
        self.in_service = pkt
        self.departure_time = now + service_time(pkt.size_bytes, self.link.capacity_bps)
        return self.departure_time

    def offer(self, pkt: Packet, now: int) -> str:
        """Admit or drop an arriving packet. Returns ``ACCEPTED`` or ``DROPPED``."""
        if now < self._last_event:
            raise InvariantViolation(f"time went backwards: {now} < {self._last_event}")
        self._last_event = now
        if self.in_service is None and not self.queued:
            self._start_service(pkt, now)
            self.accepted += 1
            return ACCEPTED
        if not self.capacity.admits(len(self.queued), self.queued_bytes, pkt.size_bytes):
            return DROPPED
        self.queued.append(pkt)
        self.queued_bytes += pkt.size_bytes
        self.accepted += 1
        if self.check:
            self.assert_invariants()
        return ACCEPTED

    def service_completion(self, now: int):
        """Depart the in-service packet and promote the FIFO head.

        Returns ``(departed, next_departure_time)``; the second item is None
        when the link goes idle.
        """
        if self.in_service is None:
            raise InvalidCompletion("no packet in service")
        if now != self.departure_time:
            raise InvalidCompletion(f"completion at {now}, expected {self.departure_time}")
        self._last_event = now
        done = self.in_service
        self.departed += 1
        self.in_service = None
        self.departure_time = None
        nxt = None
        if self.queued:
            head = self.queued.popleft()
            self.queued_bytes -= head.size_bytes
            nxt = self._start_service(head, now)
        if self.check:
            self.assert_invariants()
        return done, nxt

    def assert_invariants(self):
        c = self.capacity
        if c.mode == PACKETS and len(self.queued) > c.limit:
            raise InvariantViolation(f"{len(self.queued)} queued > limit {c.limit}")
        if c.mode != PACKETS and self.queued_bytes > c.limit:
            raise InvariantViolation(f"{self.queued_bytes} B queued > limit {c.limit}")
        if self.accepted != self.departed + len(self):
            raise InvariantViolation("accepted != departed + in system")


def bdp_size_bytes(capacity_bps: float, rtt_s: float) -> int:
    """Bandwidth-delay product in whole bytes."""
    if not capacity_bps > 0 or rtt_s < 0:
        raise ValueError("need capacity_bps > 0 and rtt_s >= 0")
    return int(math.floor(capacity_bps * rtt_s / 8))


def small_buffer_size_bytes(capacity_bps: float, rtt_s: float, n_flows: int) -> int:
    """BDP scaled down by the square root of the number of long-lived flows."""
    if n_flows < 1:
        raise NonPositiveFlows(f"n_flows must be >= 1, got {n_flows}")
    bdp = bdp_size_bytes(capacity_bps, rtt_s)
    return int(math.floor(bdp / math.sqrt(n_flows)))


def tiny_buffer_size_packets(preferred: Optional[int] = None) -> int:
    if preferred is None:
        return TINY_DEFAULT_PACKETS
    lo, hi = TINY_RANGE
    if not lo <= preferred <= hi:
        raise OutOfTinyRange(f"{preferred} outside [{lo}, {hi}]")
    return preferred


@dataclass(frozen=True)
class FillModel:
    r_in: float
    r_out: float
    free_bits: float

    @property
    def fill_rate(self) -> float:
        return fill_rate_bps(self.r_in, self.r_out)

    @property
    def time_to_overflow(self) -> float:
        return time_to_overflow_s(self.free_bits, self.fill_rate)


def fill_rate_bps(r_in_bps: float, r_out_bps: float) -> float:
    if r_in_bps < 0 or r_out_bps < 0:
        raise ValueError("rates must be >= 0")
    return max(0.0, r_in_bps - r_out_bps)


def time_to_overflow_s(free_bits: float, fill_rate: float) -> float:
    """Seconds until the buffer overflows; ``math.inf`` means never."""
    if free_bits < 0:
        raise ValueError("free_bits must be >= 0")
    if fill_rate <= 0:
        return math.inf
    return free_bits / fill_rate


def burst_completions(n_packets: int, gap_ns: int, service_ns: int) -> int:
    """Service completions during a back-to-back burst into an empty system.

    Completions tie-broken before a simultaneous arrival are counted.
    Requires ``gap_ns < service_ns`` so the link never idles mid-burst.
    """
    if not gap_ns < service_ns:
        raise ValueError("closed form needs the arrival gap shorter than one service time")
    return (n_packets - 1) * gap_ns // service_ns


def burst_overflow_drops(n_packets: int, limit: int, gap_ns: int, service_ns: int) -> int:
    """Packets lost by a packets-mode buffer of ``limit`` to one isolated burst."""
    d = burst_completions(n_packets, gap_ns, service_ns)
    return max(0, n_packets - limit - 1 - d)
