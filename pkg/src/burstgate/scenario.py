"""Scenario definition, validation, offered-load arithmetic and JSON I/O."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

from .core import BUFFER_MODES, BufferCapacity, LinkSpec
from .errors import ScenarioError
from .traffic import (
    CAMERA,
    KINDS,
    SYNTH_VC,
    TRACE,
    VOIP,
    CameraParams,
    FlowSpec,
    SynthVcParams,
    TraceParams,
    VoipParams,
    load_trace,
    nominal_rate_bps,
)

DEFAULT_START_WINDOW_S = 5.0
DEFAULT_MOS_DELAYS_MS = (0.0, 50.0, 100.0, 150.0, 200.0)


class Violation(NamedTuple):
    code: str
    field: str
    message: str


@dataclass(frozen=True)
class Scenario:
    link: LinkSpec
    buffer: BufferCapacity
    flows: tuple
    duration_s: float = 60.0
    start_window_s: float = DEFAULT_START_WINDOW_S

    def with_buffer_limit(self, limit: int) -> "Scenario":
        return dataclasses.replace(self, buffer=BufferCapacity(self.buffer.mode, int(limit)))

    def with_capacity(self, capacity_bps: float) -> "Scenario":
        return dataclasses.replace(self, link=dataclasses.replace(self.link, capacity_bps=float(capacity_bps)))

    @property
    def flow_ids(self) -> list[str]:
        return [f.flow_id for f in self.flows]


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 40
    master_seed: int = 1
    mos_delay_sweep_ms: tuple = DEFAULT_MOS_DELAYS_MS

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        d = list(self.mos_delay_sweep_ms)
        if any(x < 0 for x in d) or any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("mos_delay_sweep_ms must be non-negative and strictly increasing")


def _violations(s: Scenario) -> list[Violation]:
    out = []
    if not s.flows:
        out.append(Violation("EmptyFlows", "flows", "scenario has no flows"))
    if not s.duration_s > 0:
        out.append(Violation("NonPositiveDuration", "duration_s", f"{s.duration_s} <= 0"))
    if s.start_window_s < 0:
        out.append(Violation("NegativeStartWindow", "start_window_s", f"{s.start_window_s} < 0"))
    elif s.duration_s > 0 and not s.start_window_s < s.duration_s:
        out.append(Violation("StartWindowExceedsDuration", "start_window_s",
                             f"{s.start_window_s} >= duration {s.duration_s}"))
    if not (s.link.capacity_bps > 0 and math.isfinite(s.link.capacity_bps)):
        out.append(Violation("ZeroCapacity", "link.capacity_bps", f"{s.link.capacity_bps} is not > 0"))
    if s.link.network_delay_ms < 0:
        out.append(Violation("NegativeDelay", "link.network_delay_ms", f"{s.link.network_delay_ms} < 0"))
    if s.buffer.mode not in BUFFER_MODES:
        out.append(Violation("BadBufferMode", "buffer.mode", f"{s.buffer.mode!r} not in {BUFFER_MODES}"))
    if s.buffer.limit < 1:
        out.append(Violation("BadBufferLimit", "buffer.limit", f"{s.buffer.limit} < 1"))
    seen = set()
    for i, f in enumerate(s.flows):
        for msg in f.problems():
            out.append(Violation("BadFlow", f"flows[{i}]", msg))
        if f.flow_id in seen:
            out.append(Violation("DuplicateFlowId", f"flows[{i}].id", f"{f.flow_id!r} repeated"))
        seen.add(f.flow_id)
    return out


def validate_scenario(s: Scenario) -> Scenario:
    """Return ``s`` unchanged if it is usable, else raise :class:`ScenarioError`."""
    v = _violations(s)
    if v:
        raise ScenarioError(v)
    return s


def offered_load_bps(s: Scenario) -> float:
    return sum(nominal_rate_bps(f) for f in s.flows)


def utilization(s: Scenario) -> float:
    """Offered load over link capacity; values above 1 mean overload."""
    return offered_load_bps(s) / s.link.capacity_bps


def name_flows(flows: Sequence[FlowSpec]) -> tuple:
    """Give every unnamed flow an id of the form ``<kind><n>``."""
    counts: dict = {}
    out = []
    for f in flows:
        counts[f.kind] = counts.get(f.kind, 0) + 1
        if f.flow_id is None:
            f = dataclasses.replace(f, flow_id=f"{f.kind}{counts[f.kind]}")
        out.append(f)
    return tuple(out)


def make_scenario(link, buffer, flows, duration_s=60.0, start_window_s=DEFAULT_START_WINDOW_S) -> Scenario:
    return Scenario(link, buffer, name_flows(flows), float(duration_s), float(start_window_s))


def load_traces(s: Scenario, base_dir=None) -> Scenario:
    """Read every trace flow's file; relative paths resolve against ``base_dir``."""
    flows = []
    for f in s.flows:
        if f.kind == TRACE and f.params.records is None and f.params.path is not None:
            path = Path(f.params.path)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            f = dataclasses.replace(f, params=dataclasses.replace(f.params, records=load_trace(path)))
        flows.append(f)
    return dataclasses.replace(s, flows=tuple(flows))


# ---------------------------------------------------------------- JSON format

_TOP_KEYS = {"link", "buffer", "flows", "duration_s", "start_window_s"}
_LINK_KEYS = {"capacity_bps", "network_delay_ms"}
_BUFFER_KEYS = {"mode", "limit"}
_COMMON_FLOW_KEYS = {"kind", "id", "rate_override_bps"}
_PARAM_CLASSES = {VOIP: VoipParams, CAMERA: CameraParams, TRACE: TraceParams, SYNTH_VC: SynthVcParams}


def _param_keys(kind):
    keys = {f.name for f in dataclasses.fields(_PARAM_CLASSES[kind])}
    keys.discard("records")
    return keys


def _unknown(where, got, allowed):
    extra = sorted(set(got) - allowed)
    return [Violation("UnknownKey", f"{where}.{k}" if where else k, "unknown key") for k in extra]


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a scenario from its JSON document form."""
    errs = []
    if not isinstance(doc, dict):
        raise ScenarioError([Violation("BadDocument", "", "top level must be an object")])
    errs += _unknown("", doc, _TOP_KEYS)
    missing = [Violation("MissingKey", k, "required") for k in ("link", "buffer", "flows") if k not in doc]
    if missing:
        raise ScenarioError(errs + missing)
    link_doc, buf_doc = doc["link"], doc["buffer"]
    errs += _unknown("link", link_doc, _LINK_KEYS)
    errs += _unknown("buffer", buf_doc, _BUFFER_KEYS)
    if "capacity_bps" not in link_doc:
        errs.append(Violation("MissingKey", "link.capacity_bps", "required"))
    for k in ("mode", "limit"):
        if k not in buf_doc:
            errs.append(Violation("MissingKey", f"buffer.{k}", "required"))
    flows = []
    for i, fd in enumerate(doc["flows"]):
        kind = fd.get("kind")
        if kind not in KINDS:
            errs.append(Violation("BadFlow", f"flows[{i}].kind", f"unknown kind {kind!r}"))
            continue
        allowed = _COMMON_FLOW_KEYS | _param_keys(kind)
        errs += _unknown(f"flows[{i}]", fd, allowed)
        params = {k: v for k, v in fd.items() if k not in _COMMON_FLOW_KEYS and k in allowed}
        flows.append(FlowSpec(kind, _PARAM_CLASSES[kind](**params), fd.get("id"), fd.get("rate_override_bps")))
    if errs:
        raise ScenarioError(errs)
    s = make_scenario(
        LinkSpec(float(link_doc["capacity_bps"]), float(link_doc.get("network_delay_ms", 0.0))),
        BufferCapacity(buf_doc["mode"], int(buf_doc["limit"])),
        flows,
        doc.get("duration_s", 60.0),
        doc.get("start_window_s", DEFAULT_START_WINDOW_S),
    )
    return validate_scenario(s)


def scenario_to_dict(s: Scenario) -> dict:
    flows = []
    for f in s.flows:
        d = {"kind": f.kind, "id": f.flow_id}
        if f.rate_override_bps is not None:
            d["rate_override_bps"] = f.rate_override_bps
        for fld in dataclasses.fields(f.params):
            if fld.name != "records":
                d[fld.name] = getattr(f.params, fld.name)
        flows.append(d)
    return {
        "link": {"capacity_bps": s.link.capacity_bps, "network_delay_ms": s.link.network_delay_ms},
        "buffer": {"mode": s.buffer.mode, "limit": s.buffer.limit},
        "flows": flows,
        "duration_s": s.duration_s,
        "start_window_s": s.start_window_s,
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    return load_traces(scenario_from_dict(doc), base_dir=path.parent)
