"""Vector-clock annotation of a trace under TO, LW, RO or HB.

The clock stored for an event ``e`` of thread ``t`` is the thread clock after
all joins required by ``e`` and before ``e``'s own increment. Thread ``t``'s own
component starts at 1, so ``clock(e)[t]`` is ``e``'s 1-based position in its
thread and ``e < f`` iff ``e != f`` and ``clock(f)[thd(e)] >= clock(e)[thd(e)]``.

RO orders a release ``r`` before ``f`` when ``f`` lies strictly inside a
thread-order critical section on lock ``l`` and some event strictly inside an
earlier ``l`` section ending in ``r`` is LW-before ``f``. That premise only
needs LW clocks, which the engine tracks next to the RO clocks; a single pass
therefore suffices. The check for ``f`` runs whenever its LW clock can grow
while a lock is held: at reads, and at the first event after an acquire.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field

import numpy as np

from .trace import Op, Trace
from .vclock import VectorClock, from_array

CLOCK_DTYPE = np.int32


class OrderVariant(str, enum.Enum):
    TO = "TO"
    LW = "LW"
    RO = "RO"
    HB = "HB"

    @classmethod
    def parse(cls, text: str) -> "OrderVariant":
        try:
            return cls(text.upper())
        except ValueError:
            raise ValueError(f"unknown order variant {text!r}") from None

    @property
    def is_mhb(self) -> bool:
        return self is not OrderVariant.HB


CHAIN = (OrderVariant.TO, OrderVariant.LW, OrderVariant.RO)


@dataclass
class ClockAnnotation:
    trace: Trace
    variant: OrderVariant
    clocks: np.ndarray  # (len(trace) + 1, num_threads); row 0 unused
    lock_acq_clock: dict[str, VectorClock] = field(default_factory=dict)
    last_write_clock: dict[str, VectorClock] = field(default_factory=dict)

    def clock(self, event_id: int) -> VectorClock:
        return from_array(self.clocks[event_id])

    def ordered(self, e: int, f: int) -> bool:
        return ordered(self, e, f)

    def position(self, event_id: int) -> int:
        return self.trace.local[event_id]


def ordered(ann: ClockAnnotation, e: int, f: int) -> bool:
    """Whether ``e`` precedes ``f`` in the annotated order."""
    if e == f:
        return False
    t = ann.trace[e].thread
    return int(ann.clocks[f, t]) >= ann.trace.local[e]


def annotate(trace: Trace, variant: OrderVariant | str) -> ClockAnnotation:
    variant = OrderVariant.parse(variant) if isinstance(variant, str) else variant
    if variant is OrderVariant.TO:
        return _annotate_to(trace)
    return _Engine(trace, variant).run()


def _annotate_to(trace: Trace) -> ClockAnnotation:
    n, k = len(trace), trace.num_threads
    clocks = np.zeros((n + 1, k), dtype=CLOCK_DTYPE)
    if n:
        ids = np.arange(1, n + 1)
        threads = np.fromiter((e.thread for e in trace.events), dtype=np.int64, count=n)
        clocks[ids, threads] = np.asarray(trace.local[1:], dtype=CLOCK_DTYPE)
    last_acq: dict[str, int] = {}
    last_w: dict[str, int] = {}
    for e in trace.events:
        if e.op is Op.ACQ:
            last_acq[e.target] = e.id
        elif e.op is Op.WRITE:
            last_w[e.target] = e.id
    ann = ClockAnnotation(trace, OrderVariant.TO, clocks)
    ann.lock_acq_clock = {l: from_array(clocks[i]) for l, i in last_acq.items()}
    ann.last_write_clock = {v: from_array(clocks[i]) for v, i in last_w.items()}
    return ann


class _LockSections:
    """Completed non-empty sections of one lock, per thread.

    The latest section of every thread is mirrored into arrays so the common
    query (bound past the latest acquire) is vectorized over threads; older
    sections are found by bisection.
    """

    __slots__ = ("latest_acq", "first_acq", "latest_rel", "latest_rel_pos", "acq_pos", "rel_ids")

    def __init__(self, k: int) -> None:
        self.latest_acq = np.zeros(k, dtype=np.int64)  # 0: no section yet
        self.first_acq = np.zeros(k, dtype=np.int64)
        self.latest_rel = np.zeros(k, dtype=np.int64)
        self.latest_rel_pos = np.zeros(k, dtype=np.int64)
        self.acq_pos: dict[int, list[int]] = {}
        self.rel_ids: dict[int, list[int]] = {}

    def add(self, u: int, acq_pos: int, rel_id: int, rel_pos: int) -> None:
        if not self.first_acq[u]:
            self.first_acq[u] = acq_pos
        self.latest_acq[u] = acq_pos
        self.latest_rel[u] = rel_id
        self.latest_rel_pos[u] = rel_pos
        self.acq_pos.setdefault(u, []).append(acq_pos)
        self.rel_ids.setdefault(u, []).append(rel_id)

    def releases_before(self, bound: np.ndarray, among: np.ndarray, known: np.ndarray) -> list[int]:
        """Per thread in ``among``: release of its latest section with acquire < bound.

        Releases already covered by ``known`` (a clock) are left out.
        """
        have = among & (self.first_acq > 0) & (self.first_acq < bound)
        latest = have & (self.latest_acq < bound)
        out = self.latest_rel[latest & (known < self.latest_rel_pos)].tolist()
        for u in np.flatnonzero(have & ~latest).tolist():
            j = bisect.bisect_left(self.acq_pos[u], int(bound[u])) - 1
            out.append(self.rel_ids[u][j])
        return out


class _Engine:
    def __init__(self, trace: Trace, variant: OrderVariant):
        self.trace = trace
        self.variant = variant
        self.k = trace.num_threads

    def run(self) -> ClockAnnotation:
        trace, k, variant = self.trace, self.k, self.variant
        n = len(trace)
        clocks = np.zeros((n + 1, k), dtype=CLOCK_DTYPE)
        th = np.zeros((k, k), dtype=CLOCK_DTYPE)
        th[np.arange(k), np.arange(k)] = 1
        ro = variant is OrderVariant.RO
        hb = variant is OrderVariant.HB
        lw_th = th.copy() if ro else th  # LW clocks drive the RO premise

        last_write: dict[str, np.ndarray] = {}
        last_write_lw: dict[str, np.ndarray] = {}
        last_rel: dict[str, np.ndarray] = {}
        acq_clock: dict[str, np.ndarray] = {}

        # RO state
        held: list[dict[str, int]] = [{} for _ in range(k)]  # lock -> acquire position
        fresh: list[list[str]] = [[] for _ in range(k)]  # acquired, no interior event yet
        history: dict[str, _LockSections] = {}
        checked: dict[tuple[int, str], np.ndarray] = {}

        for e in trace.events:
            t, op, x = e.thread, e.op, e.target
            row = th[t]
            if op is Op.READ and not hb:
                w = last_write.get(x)
                if w is not None:
                    np.maximum(row, w, out=row)
                    if ro:
                        np.maximum(lw_th[t], last_write_lw[x], out=lw_th[t])
            elif op is Op.ACQ and hb:
                r = last_rel.get(x)
                if r is not None:
                    np.maximum(row, r, out=row)

            if ro and held[t]:
                if op is Op.READ:
                    targets = list(held[t])
                else:
                    # a release is not inside the section it closes
                    targets = [l for l in fresh[t] if not (op is Op.REL and l == x)]
                for lock in targets:
                    self._release_join(t, lock, lw_th[t], row, clocks, history, checked)
                fresh[t] = []

            clocks[e.id] = row
            pos = int(row[t])
            if op is Op.WRITE:
                last_write[x] = clocks[e.id]
                if ro:
                    last_write_lw[x] = lw_th[t].copy()
            elif op is Op.ACQ:
                acq_clock[x] = clocks[e.id]
                if ro and e.id in trace.rel_of:
                    held[t][x] = pos
                    fresh[t].append(x)
            elif op is Op.REL:
                if hb:
                    last_rel[x] = clocks[e.id]
                if ro:
                    a = held[t].pop(x, None)
                    if a is not None and pos - a >= 2:
                        h = history.get(x)
                        if h is None:
                            h = history[x] = _LockSections(k)
                        h.add(t, a, e.id, pos)
            row[t] += 1
            if ro:
                lw_th[t, t] += 1

        ann = ClockAnnotation(trace, variant, clocks)
        ann.lock_acq_clock = {l: from_array(c) for l, c in acq_clock.items()}
        ann.last_write_clock = {v: from_array(c) for v, c in last_write.items()}
        return ann

    def _release_join(
        self,
        t: int,
        lock: str,
        lw_clock: np.ndarray,
        row: np.ndarray,
        clocks: np.ndarray,
        history: dict[str, _LockSections],
        checked: dict[tuple[int, str], np.ndarray],
    ) -> None:
        sections = history.get(lock)
        if sections is None:
            return
        key = (t, lock)
        seen = checked.get(key)
        if seen is None:
            seen = checked[key] = np.zeros(self.k, dtype=CLOCK_DTYPE)
        grown = lw_clock > seen
        grown[t] = False
        if not grown.any():
            return
        rels = sections.releases_before(lw_clock, grown, row)
        if rels:
            np.maximum(row, clocks[rels].max(axis=0), out=row)
        np.copyto(seen, lw_clock, where=grown)


def ordered_pairs(ann: ClockAnnotation) -> set[tuple[int, int]]:
    """All ordered pairs (e, f); quadratic, meant for small traces."""
    out = set()
    n = len(ann.trace)
    for e in range(1, n + 1):
        for f in range(1, n + 1):
            if ordered(ann, e, f):
                out.add((e, f))
    return out
