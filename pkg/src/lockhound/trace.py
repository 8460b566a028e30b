"""Event and trace model: well-formedness checking and normalization.

A normalized trace has dense event ids (id == 1-based trace position), an
explicit request immediately before every acquire, a release for every
acquire of a thread that is not blocked on a final request, and fork/join
desugared into write/read pairs on reserved variables ``_fork_<t>`` and
``_join_<t>``. Events introduced by normalization are flagged ``synthetic``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

FORK_PREFIX = "_fork_"
JOIN_PREFIX = "_join_"


class Op(enum.Enum):
    READ = "r"
    WRITE = "w"
    REQ = "req"
    ACQ = "acq"
    REL = "rel"

    @property
    def is_lock_op(self) -> bool:
        return self in (Op.REQ, Op.ACQ, Op.REL)


@dataclass(frozen=True, slots=True)
class Event:
    id: int
    thread: int
    op: Op
    target: str
    # bookkeeping only; two traces that differ just in provenance are equal
    synthetic: bool = field(default=False, compare=False)
    row: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"e{self.id}:{self.thread}:{self.op.value}({self.target})"


@dataclass(frozen=True, slots=True)
class RawEvent:
    """One parsed input line before normalization."""

    thread: str
    op: str
    operand: str
    line: int = 0
    synthetic: bool = False
    row: int | None = None


@dataclass
class RawTrace:
    lines: list[RawEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self) -> Iterator[RawEvent]:
        return iter(self.lines)


class ViolationKind(str, enum.Enum):
    ACQ_WHILE_HELD = "AcqWhileHeld"
    REL_WITHOUT_ACQ = "RelWithoutAcq"
    REQ_NOT_BEFORE_ACQ = "ReqNotBeforeAcq"
    EVENT_AFTER_UNFULFILLED_REQ = "EventAfterUnfulfilledReq"


@dataclass(frozen=True)
class WfViolation:
    kind: ViolationKind
    event_id: int
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value} at event {self.event_id}: {self.detail}"


class TraceError(ValueError):
    """Base class for trace construction failures."""


class ForkOfExistingThread(TraceError):
    pass


class ForkAfterThreadStarted(TraceError):
    pass


class JoinOfUnknownThread(TraceError):
    pass


class EventAfterJoin(TraceError):
    pass


class UnmatchedAcquire(TraceError):
    pass


class IllFormedTrace(TraceError):
    def __init__(self, violations: Sequence[WfViolation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"trace is not well formed: {lines}{more}")


class Trace:
    """Immutable normalized (or hand-built) trace with derived indexes."""

    def __init__(self, events: Sequence[Event], thread_names: Sequence[str]):
        self.events: tuple[Event, ...] = tuple(events)
        self.thread_names: tuple[str, ...] = tuple(thread_names)
        for pos, e in enumerate(self.events, start=1):
            if e.id != pos:
                raise TraceError(f"event ids must be dense trace positions, got {e.id} at {pos}")
            if not 0 <= e.thread < len(self.thread_names):
                raise TraceError(f"event {e.id} names unknown thread {e.thread}")
        n = len(self.events)
        self.thread_events: list[list[int]] = [[] for _ in self.thread_names]
        self.local: list[int] = [0] * (n + 1)
        for e in self.events:
            seq = self.thread_events[e.thread]
            seq.append(e.id)
            self.local[e.id] = len(seq)
        self.rel_of, self.acq_of = _match(self.events)
        self.last_write = _last_writes(self.events)
        self.rows = {e.row: e.id for e in self.events if e.row is not None}
        self._thread_ids = {name: i for i, name in enumerate(self.thread_names)}

    @classmethod
    def from_ops(cls, ops: Iterable[tuple[str, str, str]]) -> "Trace":
        """Build a trace verbatim from (thread, op, target) triples; no normalization."""
        names: dict[str, int] = {}
        events = []
        for pos, (thread, op, target) in enumerate(ops, start=1):
            tid = names.setdefault(thread, len(names))
            events.append(Event(pos, tid, Op(op), target, row=pos))
        return cls(events, list(names))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, event_id: int) -> Event:
        if event_id < 1:
            raise IndexError(event_id)
        return self.events[event_id - 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.events == other.events and self.thread_names == other.thread_names

    def __repr__(self) -> str:
        return f"Trace({len(self.events)} events, {len(self.thread_names)} threads)"

    @property
    def num_threads(self) -> int:
        return len(self.thread_names)

    @property
    def thread_index(self) -> list[list[int]]:
        return self.thread_events

    def thread_id(self, name: str) -> int:
        return self._thread_ids[name]

    def thread_name(self, tid: int) -> str:
        return self.thread_names[tid]

    def at_row(self, row: int) -> int:
        """Event id of the input row ``row`` (1-based, counting event lines only)."""
        return self.rows[row]

    def request_of(self, acquire_id: int) -> int:
        """The request that immediately precedes an acquire in its thread."""
        e = self[acquire_id]
        if e.op is not Op.ACQ:
            raise ValueError(f"event {acquire_id} is not an acquire")
        pos = self.local[acquire_id]
        if pos < 2:
            raise ValueError(f"acquire {acquire_id} has no request")
        q = self.thread_events[e.thread][pos - 2]
        if self[q].op is not Op.REQ or self[q].target != e.target:
            raise ValueError(f"acquire {acquire_id} is not preceded by its request")
        return q

    def acquire_of(self, request_id: int) -> int | None:
        """The acquire fulfilling a request, or None if the request is final."""
        e = self[request_id]
        if e.op is not Op.REQ:
            raise ValueError(f"event {request_id} is not a request")
        seq = self.thread_events[e.thread]
        pos = self.local[request_id]
        if pos < len(seq):
            nxt = self[seq[pos]]
            if nxt.op is Op.ACQ and nxt.target == e.target:
                return nxt.id
        return None

    def locks(self) -> set[str]:
        return {e.target for e in self.events if e.op.is_lock_op}

    def variables(self, include_synthetic: bool = False) -> set[str]:
        return {
            e.target
            for e in self.events
            if e.op in (Op.READ, Op.WRITE) and (include_synthetic or not is_reserved_variable(e.target))
        }

    def named(self, lockset: Iterable[tuple[str, int]]) -> frozenset[tuple[str, str]]:
        """Render an indexed lock set with thread names instead of ids."""
        return frozenset((lock, self.thread_names[t]) for lock, t in lockset)

    def to_raw(self) -> RawTrace:
        return RawTrace(
            [
                RawEvent(self.thread_names[e.thread], e.op.value, e.target, e.id, e.synthetic, e.row)
                for e in self.events
            ]
        )


def is_reserved_variable(name: str) -> bool:
    return name.startswith(FORK_PREFIX) or name.startswith(JOIN_PREFIX)


def _match(events: Sequence[Event]) -> tuple[dict[int, int], dict[int, int]]:
    rel_of: dict[int, int] = {}
    acq_of: dict[int, int] = {}
    open_acq: dict[str, Event] = {}
    for e in events:
        if e.op is Op.ACQ:
            open_acq.setdefault(e.target, e)
        elif e.op is Op.REL:
            a = open_acq.get(e.target)
            if a is not None and a.thread == e.thread:
                del open_acq[e.target]
                rel_of[a.id] = e.id
                acq_of[e.id] = a.id
    return rel_of, acq_of


def _last_writes(events: Sequence[Event]) -> dict[int, int | None]:
    latest: dict[str, int] = {}
    out: dict[int, int | None] = {}
    for e in events:
        if e.op is Op.WRITE:
            latest[e.target] = e.id
        elif e.op is Op.READ:
            out[e.id] = latest.get(e.target)
    return out


def check_well_formed(trace: Trace, implicit_requests: bool = False) -> list[WfViolation]:
    """Return every well-formedness violation (empty list means well formed).

    With ``implicit_requests`` an acquire lacking its request is tolerated, as
    in traces written before normalization.
    """
    out: list[WfViolation] = []
    pending: dict[int, str | None] = {}
    holder: dict[str, int] = {}
    for e in trace.events:
        req = pending.get(e.thread)
        if req is not None:
            if e.op is Op.ACQ and e.target != req:
                out.append(WfViolation(ViolationKind.REQ_NOT_BEFORE_ACQ, e.id, f"acquire of {e.target} follows request of {req}"))
            elif e.op is Op.REQ:
                out.append(WfViolation(ViolationKind.REQ_NOT_BEFORE_ACQ, e.id, f"request follows unfulfilled request of {req}"))
            elif e.op is not Op.ACQ:
                out.append(WfViolation(ViolationKind.EVENT_AFTER_UNFULFILLED_REQ, e.id, f"event follows unfulfilled request of {req}"))
        elif e.op is Op.ACQ and not implicit_requests:
            out.append(WfViolation(ViolationKind.REQ_NOT_BEFORE_ACQ, e.id, f"acquire of {e.target} without request"))

        if e.op is Op.ACQ:
            if e.target in holder:
                out.append(
                    WfViolation(
                        ViolationKind.ACQ_WHILE_HELD,
                        e.id,
                        f"{e.target} held by thread {trace.thread_names[holder[e.target]]}",
                    )
                )
            else:
                holder[e.target] = e.thread
        elif e.op is Op.REL:
            if holder.get(e.target) != e.thread:
                out.append(WfViolation(ViolationKind.REL_WITHOUT_ACQ, e.id, f"{e.target} not held by this thread"))
            else:
                del holder[e.target]
        pending[e.thread] = e.target if e.op is Op.REQ else None
    return out


def match_acq_rel(trace: Trace) -> dict[int, int]:
    """Acquire id -> release id.

    Acquires of a thread blocked on a final request legitimately stay open;
    any other unmatched acquire raises UnmatchedAcquire.
    """
    for e in trace.events:
        if e.op is Op.ACQ and e.id not in trace.rel_of:
            last = trace[trace.thread_events[e.thread][-1]]
            if last.op is not Op.REQ:
                raise UnmatchedAcquire(f"acquire {e.id} of {e.target} has no release")
    return dict(trace.rel_of)


def last_write_map(trace: Trace) -> dict[int, int | None]:
    return dict(trace.last_write)


def normalize(source: RawTrace | Trace) -> Trace:
    """Desugar fork/join, insert implicit requests, close open critical sections.

    Raises IllFormedTrace if the result still violates well-formedness.
    """
    raw = source.to_raw() if isinstance(source, Trace) else source
    lines = list(raw.lines)

    first_line: dict[str, int] = {}
    last_line: dict[str, int] = {}
    for i, ln in enumerate(lines):
        first_line.setdefault(ln.thread, i)
        last_line[ln.thread] = i

    tids: dict[str, int] = {}

    def touch(name: str) -> int:
        return tids.setdefault(name, len(tids))

    # (thread, op, target, synthetic, row)
    out: list[tuple[int, Op, str, bool, int | None]] = []
    last_op: dict[int, tuple[Op, str]] = {}
    open_locks: dict[int, list[str]] = {}
    forked: set[str] = set()
    pending_fork_read: dict[str, int] = {}

    def emit(tid: int, op: Op, target: str, synthetic: bool, row: int | None) -> None:
        out.append((tid, op, target, synthetic, row))
        last_op[tid] = (op, target)
        if op is Op.ACQ:
            open_locks.setdefault(tid, []).append(target)
        elif op is Op.REL:
            held = open_locks.get(tid, [])
            if target in held:
                held.reverse()
                held.remove(target)
                held.reverse()

    for i, ln in enumerate(lines):
        row = ln.row if ln.row is not None else i + 1
        tid = touch(ln.thread)
        if ln.thread in pending_fork_read:
            emit(tid, Op.READ, FORK_PREFIX + ln.thread, True, None)
            del pending_fork_read[ln.thread]
        op = ln.op
        if op == "fork":
            child = ln.operand
            if child in forked or child == ln.thread:
                raise ForkOfExistingThread(f"line {ln.line}: thread {child} already exists")
            start = first_line.get(child)
            if start is not None and start < i:
                raise ForkAfterThreadStarted(f"line {ln.line}: thread {child} has events before its fork")
            forked.add(child)
            touch(child)
            emit(tid, Op.WRITE, FORK_PREFIX + child, True, row)
            if start is None:
                emit(tids[child], Op.READ, FORK_PREFIX + child, True, None)
            else:
                pending_fork_read[child] = i
        elif op == "join":
            child = ln.operand
            if child not in forked and child not in first_line:
                raise JoinOfUnknownThread(f"line {ln.line}: join of unknown thread {child}")
            if last_line.get(child, -1) > i:
                raise EventAfterJoin(f"line {ln.line}: thread {child} has events after being joined")
            emit(tids[child], Op.WRITE, JOIN_PREFIX + child, True, None)
            emit(tid, Op.READ, JOIN_PREFIX + child, True, row)
        else:
            try:
                kind = Op(op)
            except ValueError:
                raise TraceError(f"line {ln.line}: unknown operation {op!r}") from None
            synthetic = ln.synthetic
            if kind in (Op.READ, Op.WRITE) and is_reserved_variable(ln.operand):
                synthetic = True
                if kind is Op.WRITE and ln.operand.startswith(FORK_PREFIX):
                    touch(ln.operand[len(FORK_PREFIX):])
                    forked.add(ln.operand[len(FORK_PREFIX):])
            if kind is Op.ACQ and last_op.get(tid) != (Op.REQ, ln.operand):
                emit(tid, Op.REQ, ln.operand, True, None)
            emit(tid, kind, ln.operand, synthetic, ln.row if ln.synthetic else row)

    for child in list(pending_fork_read):
        # forked thread whose events were all consumed before its read could be placed
        emit(tids[child], Op.READ, FORK_PREFIX + child, True, None)

    for tid in range(len(tids)):
        if last_op.get(tid, (None, None))[0] is Op.REQ:
            continue
        for lock in reversed(open_locks.get(tid, [])):
            emit(tid, Op.REL, lock, True, None)

    names = [None] * len(tids)
    for name, t in tids.items():
        names[t] = name
    events = [Event(pos, t, op, target, synthetic, row) for pos, (t, op, target, synthetic, row) in enumerate(out, start=1)]
    trace = Trace(events, names)
    violations = check_well_formed(trace)
    if violations:
        raise IllFormedTrace(violations)
    return trace
