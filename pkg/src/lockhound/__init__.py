"""Sound lock-set based deadlock prediction over execution traces."""

from .orders import ClockAnnotation, OrderVariant, annotate, ordered
from .patterns import compute_dependencies, enumerate_patterns, lockset
from .spd import check_spd, compute_sp_deadlocks, sp_closure
from .trace import Event, Op, Trace, check_well_formed, normalize
from .traceio import parse_trace, write_trace
from .vclock import VectorClock

__all__ = [
    "ClockAnnotation",
    "Event",
    "Op",
    "OrderVariant",
    "Trace",
    "VectorClock",
    "annotate",
    "check_spd",
    "check_well_formed",
    "compute_dependencies",
    "compute_sp_deadlocks",
    "enumerate_patterns",
    "lockset",
    "normalize",
    "ordered",
    "parse_trace",
    "sp_closure",
    "write_trace",
]
