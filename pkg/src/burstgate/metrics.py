"""Loss tables, histograms and the E-model voice-quality chain.

The E-model defaults are the G.107 planning values for a G.729A call:
R0 = 93.2, Ie = 11, Bpl = 19 (random loss), with the simplified delay
impairment and the usual R to MOS cubic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BadEdges, NoVoipFlows
from .traffic import VOIP

ID_KNEE_MS = 177.3

MOS_GRID = np.round(np.arange(100, 451) / 100.0, 2)


@dataclass(frozen=True)
class EModelParams:
    r0: float = 93.2
    is_impairment: float = 0.0
    advantage: float = 0.0
    ie: float = 11.0
    bpl: float = 19.0
    codec_delay_ms: float = 25.0

    def __post_init__(self):
        if not 0 < self.r0 <= 100:
            raise ValueError("r0 must be in (0, 100]")
        if not 0 <= self.ie < 95:
            raise ValueError("ie must be in [0, 95)")
        if not self.bpl > 0:
            raise ValueError("bpl must be > 0")
        if self.codec_delay_ms < 0:
            raise ValueError("codec_delay_ms must be >= 0")


DEFAULT_EMODEL = EModelParams()


class QualityBand(NamedTuple):
    name: str
    low: float
    high: float


# Ordered best first; each band is [low, high) except the top one.
QUALITY_BANDS = (
    QualityBand("best", 4.34, 4.5),
    QualityBand("high", 4.03, 4.34),
    QualityBand("medium", 3.60, 4.03),
    QualityBand("low", 3.10, 3.60),
    QualityBand("poor", 1.0, 3.10),
)


def ie_eff(ppl_percent: float, p: EModelParams = DEFAULT_EMODEL) -> float:
    """Effective equipment impairment under random packet loss."""
    if not 0 <= ppl_percent <= 100:
        raise ValueError(f"ppl_percent {ppl_percent} outside [0, 100]")
    return p.ie + (95 - p.ie) * ppl_percent / (ppl_percent + p.bpl)


def id_delay(one_way_delay_ms: float) -> float:
    d = one_way_delay_ms
    if d < 0:
        raise ValueError("delay must be >= 0")
    return 0.024 * d + (0.11 * (d - ID_KNEE_MS) if d > ID_KNEE_MS else 0.0)


def r_factor(ppl_percent: float, one_way_delay_ms: float, p: EModelParams = DEFAULT_EMODEL) -> float:
    r = p.r0 - p.is_impairment - id_delay(one_way_delay_ms) - ie_eff(ppl_percent, p) + p.advantage
    return min(100.0, max(0.0, r))


# Below this rating the cubic dips under 1; MOS is held at 1 there.
R_MOS_FLOOR = (160 - (160**2 - 4000) ** 0.5) / 2


def mos_from_r(r: float) -> float:
    if r <= 0:
        return 1.0
    if r >= 100:
        return 4.5
    return max(1.0, 1 + 0.035 * r + 7e-6 * r * (r - 60) * (100 - r))


def quality_band(mos: float) -> str:
    if mos >= QUALITY_BANDS[0].low:
        return QUALITY_BANDS[0].name
    for band in QUALITY_BANDS[1:]:
        if band.low <= mos < band.high:
            return band.name
    return QUALITY_BANDS[-1].name


def mos(ppl_percent: float, one_way_delay_ms: float, p: EModelParams = DEFAULT_EMODEL) -> float:
    return mos_from_r(r_factor(ppl_percent, one_way_delay_ms, p))


class CallScore(NamedTuple):
    iteration: int
    flow_id: str
    loss_percent: float
    delay_ms: float
    r: float
    mos: float


def voip_flow_ids(results) -> list:
    ids = [f for f, k in results[0].kinds.items() if k == VOIP] if results else []
    if not ids:
        raise NoVoipFlows("results contain no VoIP flows")
    return ids


def voip_mos_per_iteration(results, delay_ms: float, p: EModelParams = DEFAULT_EMODEL) -> list:
    """Score every VoIP call of every iteration independently.

    One-way delay is the network delay plus the call's mean queueing delay
    plus the codec allowance.
    """
    ids = voip_flow_ids(results)
    out = []
    for i, res in enumerate(results):
        for f in ids:
            st = res.per_flow[f]
            ppl = 100.0 * st.loss_rate
            d = delay_ms + 1000.0 * st.mean_queue_delay_s + p.codec_delay_ms
            r = r_factor(ppl, d, p)
            out.append(CallScore(i, f, ppl, d, r, mos_from_r(r)))
    return out


@dataclass(frozen=True)
class Histogram:
    edges: tuple
    counts: tuple
    underflow: int = 0
    overflow: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow

    def rows(self):
        return [(lo, hi, c) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def histogram(samples: Sequence[float], edges: Sequence[float]) -> Histogram:
    """Half-open binning ``[e_i, e_{i+1})``; out-of-range samples tallied apart."""
    e = np.asarray(edges, dtype=np.float64)
    if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
        raise BadEdges("edges must be strictly increasing with at least 2 entries")
    x = np.asarray(samples, dtype=np.float64)
    idx = np.searchsorted(e, x, side="right") - 1
    under = int(np.sum(idx < 0))
    over = int(np.sum(idx >= len(e) - 1))
    inside = idx[(idx >= 0) & (idx < len(e) - 1)]
    counts = np.bincount(inside, minlength=len(e) - 1)
    return Histogram(tuple(float(v) for v in e), tuple(int(c) for c in counts), under, over)


def _grid(start, stop, step):
    n = int(round((stop - start) / step))
    return [round(start + k * step, 6) for k in range(n + 1)]


LOSS_EDGES_PERCENT = _grid(0.0, 5.0, 0.25)
MOS_EDGES = _grid(1.0, 4.5, 0.05)


def ccdf(values: Sequence[float], grid=MOS_GRID) -> np.ndarray:
    """Empirical ``P(X >= x)`` at each grid point."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    return (len(v) - np.searchsorted(v, grid, side="left")) / len(v)


def mos_cdf(results, delay_sweep_ms, p: EModelParams = DEFAULT_EMODEL) -> dict:
    """Complementary cumulative MOS curve ``P(MOS >= x)`` for each delay."""
    if not len(delay_sweep_ms):
        raise ValueError("need at least one delay")
    if not results:
        raise ValueError("no results")
    return {
        d: ccdf([c.mos for c in voip_mos_per_iteration(results, d, p)])
        for d in delay_sweep_ms
    }


# --------------------------------------------------------------------- CSV

PER_ITERATION_HEADER = ["iteration", "flow_id", "kind", "sent", "delivered", "dropped",
                        "residual", "loss_rate", "mean_queue_delay_s"]
HISTOGRAM_HEADER = ["bin_low", "bin_high", "count"]
CDF_HEADER = ["delay_ms", "mos", "probability"]
SWEEP_HEADER = ["value", "flow_id", "mean_loss_rate", "std_loss_rate"]


def fmt(x) -> str:
    """Shortest round-tripping text for a number."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def per_iteration_csv(results) -> str:
    rows = []
    for i, res in enumerate(results):
        for f, st in res.per_flow.items():
            rows.append((i, f, res.kinds.get(f, ""), st.sent, st.delivered, st.dropped,
                         st.residual, st.loss_rate, st.mean_queue_delay_s))
    return _csv(PER_ITERATION_HEADER, rows)


def histogram_csv(h: Histogram) -> str:
    return _csv(HISTOGRAM_HEADER, h.rows())


def cdf_csv(curves: dict, grid=MOS_GRID) -> str:
    rows = []
    for d, curve in curves.items():
        rows.extend((float(d), float(x), float(pr)) for x, pr in zip(grid, curve))
    return _csv(CDF_HEADER, rows)


def sweep_csv(points: dict) -> str:
    rows = []
    for v, pt in points.items():
        for f in pt.mean_loss:
            rows.append((v, f, pt.mean_loss[f], pt.std_loss[f]))
    return _csv(SWEEP_HEADER, rows)
