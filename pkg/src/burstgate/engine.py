"""Discrete-event runs of one scenario and the Monte-Carlo runner around them.

Seed derivation
---------------
All randomness descends from one 64-bit master seed through ``mix_seed``::

    mix_seed(a, b) = splitmix64(a XOR splitmix64(b + 0x9E3779B97F4A7C15))

    iteration seed   = mix_seed(master_seed, iteration_index)
    flow seed        = mix_seed(iteration_seed, flow_index)
    start offset     ~ U[0, start_window_s] from PCG64(flow seed)
    stream generator   PCG64(splitmix64(flow seed))

Because each value depends only on its own indices, adding iterations or
flows never perturbs the streams of existing ones.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import kernel
from .core import BYTES, NS_PER_S, Packet, from_seconds
from .errors import InvariantViolation, IterationError
from .queue import ACCEPTED, DropTailBuffer
from .scenario import RunConfig, Scenario, load_traces, validate_scenario
from .traffic import flow_stream

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
THREADS_ENV = "BURSTGATE_THREADS"


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(a: int, b: int) -> int:
    return splitmix64((a & MASK64) ^ splitmix64((b + GOLDEN) & MASK64))


def iteration_seed(master_seed: int, index: int) -> int:
    return mix_seed(master_seed, index)


@dataclass(frozen=True)
class FlowStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    residual: int = 0
    bytes_sent: int = 0
    bytes_delivered: int = 0
    bytes_dropped: int = 0
    delay_sum_ns: int = 0

    @property
    def loss_rate(self) -> float:
        return self.dropped / self.sent if self.sent else 0.0

    @property
    def mean_queue_delay_s(self) -> float:
        """Mean sojourn (departure minus arrival) of delivered packets."""
        return self.delay_sum_ns / self.delivered / NS_PER_S if self.delivered else 0.0

    @property
    def conserved(self) -> bool:
        return self.sent == self.delivered + self.dropped + self.residual

    def __add__(self, other: "FlowStats") -> "FlowStats":
        return FlowStats(*(a + b for a, b in zip(_astuple(self), _astuple(other))))


def _astuple(s: FlowStats):
    return (s.sent, s.delivered, s.dropped, s.residual, s.bytes_sent,
            s.bytes_delivered, s.bytes_dropped, s.delay_sum_ns)


@dataclass(frozen=True)
class IterationResult:
    seed: int
    per_flow: dict
    aggregate: FlowStats
    kinds: dict = field(default_factory=dict)
    start_offsets_s: dict = field(default_factory=dict)
    measured_utilization: float = 0.0


class Arrivals(NamedTuple):
    t_ns: np.ndarray
    size: np.ndarray
    flow: np.ndarray
    seq: np.ndarray
    offsets_ns: list


def build_arrivals(s: Scenario, seed: int) -> Arrivals:
    """Generate every flow's stream and merge them by (time, flow index, seq)."""
    horizon = from_seconds(s.duration_s)
    parts_t, parts_s, parts_f, parts_q, offsets = [], [], [], [], []
    for j, flow in enumerate(s.flows):
        fseed = mix_seed(seed, j)
        rng = np.random.Generator(np.random.PCG64(fseed))
        offset = from_seconds(rng.uniform(0.0, s.start_window_s)) if s.start_window_s > 0 else 0
        st = flow_stream(flow, offset, horizon, splitmix64(fseed))
        offsets.append(offset)
        parts_t.append(st.t_ns)
        parts_s.append(st.size)
        parts_f.append(np.full(len(st), j, np.int64))
        parts_q.append(np.arange(len(st), dtype=np.int64))
    t = np.concatenate(parts_t)
    size = np.concatenate(parts_s)
    flow = np.concatenate(parts_f)
    seq = np.concatenate(parts_q)
    order = np.lexsort((seq, flow, t))
    return Arrivals(t[order], size[order], flow[order], seq[order], offsets)


def service_times(size: np.ndarray, capacity_bps: float) -> np.ndarray:
    return np.rint(size.astype(np.float64) * (8 * NS_PER_S) / capacity_bps).astype(np.int64)


# Event ranks: at equal times a completion frees space before an arrival.
COMPLETION = 0
ARRIVAL = 1


class Event(NamedTuple):
    time: int
    rank: int
    flow_id: int
    seq: int
    index: int


def simulate_reference(arr: Arrivals, s: Scenario) -> np.ndarray:
    """Event-by-event simulation through :class:`DropTailBuffer`.

    Slow but independent of the array kernel; checks capacity after every
    event and the strict total order of the event heap. Returns departure
    times in the kernel's format.
    """
    buf = DropTailBuffer(s.buffer, s.link, check=True)
    heap = [Event(int(t), ARRIVAL, int(f), int(q), i)
            for i, (t, f, q) in enumerate(zip(arr.t_ns, arr.flow, arr.seq))]
    heapq.heapify(heap)
    index_of = {}
    dep = np.full(len(arr.t_ns), -1, np.int64)
    last = None
    while heap:
        ev = heapq.heappop(heap)
        key = ev[:4]
        if last is not None and key <= last:
            raise InvariantViolation(f"event order not strict: {last} then {key}")
        last = key
        if ev.rank == COMPLETION:
            _, nxt = buf.service_completion(ev.time)
            if nxt is not None:
                head = buf.in_service
                heapq.heappush(heap, Event(nxt, COMPLETION, head.flow_id, head.seq, -1))
                dep[index_of[head.flow_id, head.seq]] = nxt
            continue
        pkt = Packet(ev.flow_id, ev.seq, int(arr.size[ev.index]), ev.time)
        index_of[pkt.flow_id, pkt.seq] = ev.index
        idle = buf.in_service is None
        if buf.offer(pkt, ev.time) == ACCEPTED and idle:
            heapq.heappush(heap, Event(buf.departure_time, COMPLETION, pkt.flow_id, pkt.seq, -1))
            dep[ev.index] = buf.departure_time
    return dep


def _stats(arr: Arrivals, dep: np.ndarray, n_flows: int, horizon: int, warmup: int) -> list:
    counted = arr.t_ns >= warmup
    accepted = dep >= 0
    delivered = accepted & (dep <= horizon)
    residual = accepted & ~delivered
    dropped = ~accepted
    f = arr.flow

    def count(mask):
        return np.bincount(f[mask & counted], minlength=n_flows)

    def total(mask, w):
        return np.bincount(f[mask & counted], weights=w[mask & counted], minlength=n_flows)

    sz = arr.size.astype(np.float64)
    delays = np.where(delivered, dep - arr.t_ns, 0)
    delay_sum = np.zeros(n_flows, np.int64)
    np.add.at(delay_sum, f[delivered & counted], delays[delivered & counted])
    cols = [
        count(np.ones_like(counted)), count(delivered), count(dropped), count(residual),
        total(np.ones_like(counted), sz), total(delivered, sz), total(dropped, sz),
    ]
    return [
        FlowStats(*(int(round(c[j])) for c in cols), int(delay_sum[j]))
        for j in range(n_flows)
    ]


def run_iteration(
    s: Scenario,
    seed: int,
    *,
    warmup_s: float = 0.0,
    instrumented: bool = False,
    droptail=None,
) -> IterationResult:
    """One seeded run of ``s``. Pure function of ``(s, seed)``."""
    s = load_traces(s)
    arr = build_arrivals(s, seed)
    horizon = from_seconds(s.duration_s)
    fn = droptail or kernel.droptail
    dep = fn(arr.t_ns, arr.size, service_times(arr.size, s.link.capacity_bps),
             s.buffer.mode == BYTES, s.buffer.limit, instrumented)
    if instrumented:
        ref = simulate_reference(arr, s)
        if not np.array_equal(ref, dep):
            bad = int(np.flatnonzero(ref != dep)[0])
            raise InvariantViolation(f"kernel and reference disagree at packet {bad}")
    stats = _stats(arr, dep, len(s.flows), horizon, from_seconds(warmup_s))
    agg = FlowStats()
    for st in stats:
        agg = agg + st
    if instrumented:
        for name, st in zip(s.flow_ids + ["aggregate"], stats + [agg]):
            if not st.conserved:
                raise InvariantViolation(f"conservation broken for {name}")
    util = 0.0
    for st, off in zip(stats, arr.offsets_ns):
        active = (horizon - off) / NS_PER_S
        util += st.bytes_sent * 8 / active
    util /= s.link.capacity_bps
    ids = s.flow_ids
    return IterationResult(
        seed=seed,
        per_flow=dict(zip(ids, stats)),
        aggregate=agg,
        kinds={f.flow_id: f.kind for f in s.flows},
        start_offsets_s={i: o / NS_PER_S for i, o in zip(ids, arr.offsets_ns)},
        measured_utilization=util,
    )


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def run_many(s: Scenario, cfg: RunConfig, threads: Optional[int] = None, **kw) -> list:
    """Run ``cfg.iterations`` independent iterations, ordered by index.

    Output does not depend on ``threads``.
    """
    s = load_traces(validate_scenario(s))

    def one(i):
        try:
            return run_iteration(s, iteration_seed(cfg.master_seed, i), **kw)
        except Exception as exc:
            raise IterationError(i, exc) from exc

    n = resolve_threads(threads)
    idx = range(cfg.iterations)
    if n == 1 or cfg.iterations == 1:
        return [one(i) for i in idx]
    with ThreadPoolExecutor(max_workers=min(n, cfg.iterations)) as pool:
        return list(pool.map(one, idx))


def loss_summary(results: Sequence[IterationResult]):
    """Per-flow and aggregate (mean, sample std) of loss rate across iterations."""
    def ms(values):
        a = np.asarray(values, dtype=np.float64)
        std = float(a.std(ddof=1)) if len(a) > 1 else 0.0
        return float(a.mean()), std

    flows = list(results[0].per_flow)
    per_flow = {f: ms([r.per_flow[f].loss_rate for r in results]) for f in flows}
    return per_flow, ms([r.aggregate.loss_rate for r in results])


@dataclass(frozen=True)
class SweepPoint:
    value: float
    mean_loss: dict
    std_loss: dict
    aggregate_mean: float
    aggregate_std: float
    mean_utilization: float


BUFFER_LIMIT = "buffer_limit"
CAPACITY = "capacity_bps"


def apply_parameter(base: Scenario, parameter: str, value) -> Scenario:
    if parameter in (BUFFER_LIMIT, "buffer"):
        if float(value) != int(value):
            raise ValueError(f"buffer limit must be an integer, got {value}")
        return validate_scenario(base.with_buffer_limit(int(value)))
    if parameter in (CAPACITY, "capacity"):
        return validate_scenario(base.with_capacity(float(value)))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def sweep(base: Scenario, parameter: str, values, cfg: RunConfig, threads=None) -> dict:
    """Re-run ``base`` for each value of ``parameter`` with the same seeds."""
    if not len(values):
        raise ValueError("sweep needs at least one value")
    base = load_traces(base)
    scenarios = [(v, apply_parameter(base, parameter, v)) for v in values]
    out = {}
    for v, sc in scenarios:
        res = run_many(sc, cfg, threads)
        per_flow, (am, asd) = loss_summary(res)
        out[v] = SweepPoint(
            value=v,
            mean_loss={f: m for f, (m, _) in per_flow.items()},
            std_loss={f: sd for f, (_, sd) in per_flow.items()},
            aggregate_mean=am,
            aggregate_std=asd,
            mean_utilization=float(np.mean([r.measured_utilization for r in res])),
        )
    return out
