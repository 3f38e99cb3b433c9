"""Drop-tail bottleneck simulator for bursty multimedia traffic and VoIP quality."""

from .core import BufferCapacity, LinkSpec, Packet
from .engine import FlowStats, IterationResult, run_iteration, run_many, sweep
from .kernel import BACKEND
from .scenario import RunConfig, Scenario, load_scenario, make_scenario, validate_scenario

__version__ = "0.1.0"
