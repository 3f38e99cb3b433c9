"""Packet stream generators for each traffic source type.

Every generator returns a :class:`Stream`: two aligned int64 arrays holding
arrival times (ns) and wire sizes (bytes), in emission order. The sequence
number of a packet is its index in the stream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np

from .core import NS_PER_S, Packet, from_seconds
from .errors import (
    EmptyTrace,
    NonMonotonicTimestamp,
    ParseError,
    UnknownTableEntry,
    UnresolvableRate,
)

VOIP = "voip"
CAMERA = "camera"
TRACE = "trace"
SYNTH_VC = "synth_vc"
KINDS = (VOIP, CAMERA, TRACE, SYNTH_VC)


class BurstTableEntry(NamedTuple):
    resolution: str
    compression_kbytes: int
    packets_per_burst: int


# Packets per burst of the AXIS 2120 camera at 1 Mbps, by frame compression.
BURST_TABLE = (
    BurstTableEntry("704x576", 50, 41),
    BurstTableEntry("704x576", 32, 26),
    BurstTableEntry("704x576", 16, 10),
    BurstTableEntry("352x288", 13, 9),
    BurstTableEntry("352x288", 4, 3),
)


def _norm_resolution(resolution: str) -> str:
    return resolution.replace("×", "x").replace(" ", "").lower()


def packets_per_burst(resolution: str, compression_kbytes: int) -> int:
    key = (_norm_resolution(resolution), compression_kbytes)
    for entry in BURST_TABLE:
        if (entry.resolution, entry.compression_kbytes) == key:
            return entry.packets_per_burst
    raise UnknownTableEntry(f"no burst table entry for {resolution} @ {compression_kbytes} kB")


@dataclass(frozen=True)
class VoipParams:
    inter_packet_s: float = 0.020
    packet_bytes: int = 60


@dataclass(frozen=True)
class CameraParams:
    packets_per_burst: int = 26
    packet_bytes: int = 1500
    burst_interval_mean_s: float = 0.278
    burst_interval_halfwidth_s: float = 0.06
    intra_burst_gap_s: float = 0.00012


class TraceRecord(NamedTuple):
    t_s: float
    size_bytes: int


@dataclass(frozen=True)
class TraceParams:
    path: Optional[str] = None
    loop: bool = False
    records: Optional[tuple] = None


@dataclass(frozen=True)
class SynthVcParams:
    mean_bps: float = 2_000_000.0
    fps: float = 30.0
    mtu_bytes: int = 1500
    intra_frame_gap_s: float = 0.00012
    cap_factor: float = 12.0


FlowParams = Union[VoipParams, CameraParams, TraceParams, SynthVcParams]

_PARAM_TYPES = {
    VOIP: VoipParams,
    CAMERA: CameraParams,
    TRACE: TraceParams,
    SYNTH_VC: SynthVcParams,
}


@dataclass(frozen=True)
class FlowSpec:
    """One traffic source. ``start_offset_s`` is sampled per iteration, not stored."""

    kind: str
    params: FlowParams
    flow_id: Optional[str] = None
    rate_override_bps: Optional[float] = None

    def problems(self) -> list[str]:
        """Human-readable reasons this flow is unusable (empty when valid)."""
        out = []
        if self.kind not in KINDS:
            return [f"unknown kind {self.kind!r}"]
        if not isinstance(self.params, _PARAM_TYPES[self.kind]):
            return [f"{self.kind} flow needs {_PARAM_TYPES[self.kind].__name__}"]
        if self.rate_override_bps is not None and not self.rate_override_bps > 0:
            out.append("rate_override_bps must be > 0")
        p = self.params
        if self.kind == VOIP:
            if not p.inter_packet_s > 0:
                out.append("inter_packet_s must be > 0")
            if p.packet_bytes < 1:
                out.append("packet_bytes must be >= 1")
        elif self.kind == CAMERA:
            if p.packets_per_burst < 1:
                out.append("packets_per_burst must be >= 1")
            if p.packet_bytes < 1:
                out.append("packet_bytes must be >= 1")
            if p.intra_burst_gap_s < 0:
                out.append("intra_burst_gap_s must be >= 0")
            if p.burst_interval_halfwidth_s < 0:
                out.append("burst_interval_halfwidth_s must be >= 0")
            mean = effective_params(self).burst_interval_mean_s if not out else p.burst_interval_mean_s
            if not p.burst_interval_halfwidth_s < mean:
                out.append("burst_interval_halfwidth_s must be < burst_interval_mean_s")
        elif self.kind == TRACE:
            if p.path is None and p.records is None:
                out.append("trace flow needs a path")
        elif self.kind == SYNTH_VC:
            if not p.mean_bps > 0:
                out.append("mean_bps must be > 0")
            if not p.fps > 0:
                out.append("fps must be > 0")
            if p.mtu_bytes < 200:
                out.append("mtu_bytes must be >= 200")
            if p.intra_frame_gap_s < 0:
                out.append("intra_frame_gap_s must be >= 0")
            if not p.cap_factor > 1:
                out.append("cap_factor must be > 1")
        return out


class Stream(NamedTuple):
    t_ns: np.ndarray
    size: np.ndarray

    def __len__(self):
        return len(self.t_ns)

    def packets(self, flow_id: int = 0) -> list[Packet]:
        return [
            Packet(flow_id, i, int(s), int(t))
            for i, (t, s) in enumerate(zip(self.t_ns.tolist(), self.size.tolist()))
        ]

    @property
    def total_bytes(self) -> int:
        return int(self.size.sum())


def _empty() -> Stream:
    return Stream(np.empty(0, np.int64), np.empty(0, np.int64))


def _check_window(start: int, until: int):
    if not start < until:
        raise ValueError(f"empty generation window: start={start} until={until}")


def voip_stream(p: VoipParams, start: int, until: int) -> Stream:
    """Constant-bit-rate packets at start, start+dt, ... strictly before ``until``."""
    _check_window(start, until)
    step = from_seconds(p.inter_packet_s)
    t = np.arange(start, until, step, dtype=np.int64)
    return Stream(t, np.full(len(t), p.packet_bytes, np.int64))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def camera_stream(p: CameraParams, start: int, until: int, seed: int) -> Stream:
    """Bursty camera traffic.

    Burst starts are separated by intervals drawn uniformly from
    ``mean ± halfwidth``; each burst is ``packets_per_burst`` packets spaced
    ``intra_burst_gap_s`` apart.
    """
    _check_window(start, until)
    lo = p.burst_interval_mean_s - p.burst_interval_halfwidth_s
    hi = p.burst_interval_mean_s + p.burst_interval_halfwidth_s
    # Prefix-stable: a longer window draws the same leading intervals.
    n = int(math.ceil((until - start) / (lo * NS_PER_S))) + 1
    gaps = np.rint(_rng(seed).uniform(lo, hi, size=n) * NS_PER_S).astype(np.int64)
    starts = start + np.concatenate(([0], np.cumsum(gaps[:-1])))
    starts = starts[starts < until]
    offsets = np.arange(p.packets_per_burst, dtype=np.int64) * from_seconds(p.intra_burst_gap_s)
    t = (starts[:, None] + offsets[None, :]).ravel()
    t = t[t < until]
    if len(t) > 1 and np.any(np.diff(t) < 0):
        t = np.sort(t, kind="stable")
    return Stream(t, np.full(len(t), p.packet_bytes, np.int64))


def burst_starts(stream: Stream, packets_per_burst: int) -> np.ndarray:
    """Start time of each complete burst in a camera stream."""
    return stream.t_ns[::packets_per_burst]


def load_trace(path) -> tuple[TraceRecord, ...]:
    """Read a ``t_s,size_bytes`` CSV trace, normalized to start at t=0."""
    rows = []
    prev = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip() for c in row] == ["t_s", "size_bytes"]:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", lineno)
            try:
                t = float(row[0])
                size = int(row[1])
            except ValueError:
                raise ParseError(f"malformed row {row!r}", lineno) from None
            if not math.isfinite(t) or size < 1:
                raise ParseError(f"out-of-range row {row!r}", lineno)
            if prev is not None and t < prev:
                raise NonMonotonicTimestamp(f"{t} < {prev}", lineno)
            prev = t
            rows.append((t, size))
    if not rows:
        raise EmptyTrace(f"{path}: no records")
    t0 = rows[0][0]
    return tuple(TraceRecord(t - t0, s) for t, s in rows)


def write_trace(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "size_bytes"])
        for r in records:
            w.writerow([repr(float(r.t_s)), int(r.size_bytes)])


def trace_span_s(records) -> float:
    return records[-1].t_s - records[0].t_s


def trace_stream(records, start: int, until: int, loop: bool = False, time_scale: float = 1.0) -> Stream:
    """Replay ``records`` from ``start``; truncated at ``until``.

    With ``loop`` the trace restarts at its end, shifted by its span.
    ``time_scale`` stretches inter-packet times (used for rate overrides).
    """
    if not records:
        raise EmptyTrace("no records")
    if until <= start:
        return _empty()
    rel = np.rint(np.array([r.t_s for r in records], dtype=np.float64) * time_scale * NS_PER_S).astype(np.int64)
    rel -= rel[0]
    sizes = np.array([r.size_bytes for r in records], dtype=np.int64)
    span = int(rel[-1])
    if loop:
        if span <= 0:
            raise ValueError("cannot loop a trace with zero span")
        reps = (until - start) // span + 1
        rel = (rel[None, :] + span * np.arange(reps, dtype=np.int64)[:, None]).ravel()
        sizes = np.tile(sizes, reps)
    t = start + rel
    keep = t < until
    return Stream(t[keep], sizes[keep])


def frame_packet_sizes(frame_bytes: int, mtu_bytes: int) -> list[int]:
    """Fragment one frame into MTU-sized packets plus a remainder packet."""
    full, rem = divmod(frame_bytes, mtu_bytes)
    return [mtu_bytes] * full + ([rem] if rem else [])


def synth_vc_stream(
    mean_bps: float,
    fps: float,
    mtu_bytes: int,
    start: int,
    until: int,
    seed: int,
    intra_frame_gap_s: float = 0.00012,
    cap_factor: float = 12.0,
) -> Stream:
    """Synthetic videoconference stand-in.

    One frame every ``1/fps`` seconds, frame size drawn from an exponential
    distribution with mean ``mean_bps/(8*fps)`` truncated at ``cap_factor``
    times that mean, fragmented at ``mtu_bytes``.
    """
    _check_window(start, until)
    period = from_seconds(1.0 / fps)
    frame_t = np.arange(start, until, period, dtype=np.int64)
    scale = mean_bps / (8.0 * fps)
    u = _rng(seed).random(len(frame_t))
    # Inverse CDF of the exponential truncated at cap_factor * scale.
    x = -scale * np.log1p(-u * -np.expm1(-cap_factor))
    frame_bytes = np.maximum(1, np.rint(x)).astype(np.int64)
    counts = -(-frame_bytes // mtu_bytes)
    total = int(counts.sum())
    first = np.repeat(np.cumsum(counts) - counts, counts)
    j = np.arange(total, dtype=np.int64) - first
    last_size = frame_bytes - (counts - 1) * mtu_bytes
    is_last = j == np.repeat(counts - 1, counts)
    size = np.where(is_last, np.repeat(last_size, counts), mtu_bytes).astype(np.int64)
    t = np.repeat(frame_t, counts) + j * from_seconds(intra_frame_gap_s)
    keep = t < until
    t, size = t[keep], size[keep]
    if len(t) > 1 and np.any(np.diff(t) < 0):
        order = np.argsort(t, kind="stable")
        t, size = t[order], size[order]
    return Stream(t, size)


def base_rate_bps(flow: FlowSpec) -> float:
    """Mean rate implied by the flow's own parameters (ignores overrides)."""
    p = flow.params
    if flow.kind == VOIP:
        return p.packet_bytes * 8 / p.inter_packet_s
    if flow.kind == CAMERA:
        return p.packets_per_burst * p.packet_bytes * 8 / p.burst_interval_mean_s
    if flow.kind == SYNTH_VC:
        return float(p.mean_bps)
    if flow.kind == TRACE:
        if p.records is None:
            raise UnresolvableRate(f"trace {p.path!r} has not been loaded")
        span = trace_span_s(p.records)
        if span <= 0:
            raise UnresolvableRate(f"trace {p.path!r} has zero span")
        return sum(r.size_bytes for r in p.records) * 8 / span
    raise ValueError(f"unknown kind {flow.kind!r}")


def nominal_rate_bps(flow: FlowSpec) -> float:
    if flow.rate_override_bps is not None:
        return float(flow.rate_override_bps)
    return base_rate_bps(flow)


def effective_params(flow: FlowSpec) -> FlowParams:
    """Generator parameters after applying a rate override.

    Overrides keep packet sizes and burst shape and rescale the time axis:
    the VoIP packet interval, the mean camera burst interval (jitter
    half-width unchanged), or the trace clock. Synthetic video takes the
    override as its mean rate.
    """
    p = flow.params
    target = flow.rate_override_bps
    if target is None:
        return p
    if flow.kind == VOIP:
        return replace(p, inter_packet_s=p.packet_bytes * 8 / target)
    if flow.kind == CAMERA:
        return replace(p, burst_interval_mean_s=p.packets_per_burst * p.packet_bytes * 8 / target)
    if flow.kind == SYNTH_VC:
        return replace(p, mean_bps=float(target))
    return p


def flow_stream(flow: FlowSpec, start: int, until: int, seed: int) -> Stream:
    """Generate the arrivals of one flow inside ``[start, until)``."""
    if start >= until:
        return _empty()
    p = effective_params(flow)
    if flow.kind == VOIP:
        return voip_stream(p, start, until)
    if flow.kind == CAMERA:
        return camera_stream(p, start, until, seed)
    if flow.kind == SYNTH_VC:
        return synth_vc_stream(
            p.mean_bps, p.fps, p.mtu_bytes, start, until, seed,
            intra_frame_gap_s=p.intra_frame_gap_s, cap_factor=p.cap_factor,
        )
    if flow.kind == TRACE:
        if p.records is None:
            raise UnresolvableRate(f"trace {p.path!r} has not been loaded")
        scale = 1.0
        if flow.rate_override_bps is not None:
            scale = base_rate_bps(flow) / flow.rate_override_bps
        return trace_stream(p.records, start, until, loop=p.loop, time_scale=scale)
    raise ValueError(f"unknown kind {flow.kind!r}")
