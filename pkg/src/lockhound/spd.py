"""Sync-preserving closure and witness checking for deadlock patterns.

A closure is kept as a per-thread prefix length vector ``P``: LW-closed event
sets are downward closed in every thread, so ``P`` both represents the set and
equals the pointwise max of its members' LW clocks. Including an event joins
its LW clock into ``P``.

The lock rule: among the acquires of a lock that are in the set, every one but
the latest in trace order must have its release in the set. Inside one thread
an earlier acquire's release precedes the next acquire, so only each thread's
latest in-set acquire needs checking. A required release that does not exist
marks the closure as blocked.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .orders import CLOCK_DTYPE, ClockAnnotation, OrderVariant, annotate
from .patterns import (
    DEFAULT_MAX_CYCLE,
    AbstractDeadlockPattern,
    DepKey,
    DependencyMap,
    compute_dependencies,
    enumerate_patterns,
)
from .trace import Op, Trace
from .vclock import VectorClock, from_array


@dataclass(frozen=True)
class ClosureResult:
    events: frozenset[int]
    clock: VectorClock
    blocked: bool = False


class _AcquireIndex:
    """Acquire positions and ids per (lock, thread), plus each thread's locks."""

    def __init__(self, trace: Trace):
        k = trace.num_threads
        self.by_lock: dict[str, dict[int, tuple[list[int], list[int]]]] = {}
        self.thread_locks: list[dict[str, list[int]]] = [{} for _ in range(k)]
        for e in trace.events:
            if e.op is Op.ACQ:
                pos = trace.local[e.id]
                per = self.by_lock.setdefault(e.target, {})
                ps, ids = per.setdefault(e.thread, ([], []))
                ps.append(pos)
                ids.append(e.id)
                self.thread_locks[e.thread][e.target] = ps


class Closure:
    """Incrementally grown sync-preserving closure (monotone in its seeds)."""

    def __init__(self, trace: Trace, lw: ClockAnnotation, index: _AcquireIndex | None = None):
        if lw.variant is not OrderVariant.LW:
            raise ValueError("closure needs an LW annotation")
        self.trace = trace
        self.lw = lw
        self.index = index if index is not None else _AcquireIndex(trace)
        self.prefix = np.zeros(trace.num_threads, dtype=CLOCK_DTYPE)
        self.blocked = False

    def add(self, seeds: Iterable[int]) -> "Closure":
        grow = self.prefix.copy()
        for e in seeds:
            np.maximum(grow, self.lw.clocks[e], out=grow)
        self._settle(grow)
        return self

    def _settle(self, target: np.ndarray) -> None:
        trace, index = self.trace, self.index
        clocks = self.lw.clocks
        while True:
            changed = np.flatnonzero(target > self.prefix)
            if changed.size == 0:
                return
            dirty: set[str] = set()
            for u in changed:
                u = int(u)
                lo, hi = int(self.prefix[u]), int(target[u])
                # locks acquired by u in (lo, hi], without walking the range
                for lock, ps in index.thread_locks[u].items():
                    if lock not in dirty and bisect.bisect_right(ps, hi) > bisect.bisect_right(ps, lo):
                        dirty.add(lock)
                self.prefix[u] = hi
            target = self.prefix.copy()
            for lock in dirty:
                latest: list[int] = []
                for u, (ps, ids) in index.by_lock[lock].items():
                    j = bisect.bisect_right(ps, int(self.prefix[u]))
                    if j:
                        latest.append(ids[j - 1])
                if len(latest) < 2:
                    continue
                last = max(latest)
                for a in latest:
                    if a == last:
                        continue
                    r = trace.rel_of.get(a)
                    if r is None:
                        self.blocked = True
                        continue
                    np.maximum(target, clocks[r], out=target)

    def contains(self, e: int) -> bool:
        ev = self.trace[e]
        return self.trace.local[e] <= int(self.prefix[ev.thread])

    def events(self) -> frozenset[int]:
        out = []
        for u, ids in enumerate(self.trace.thread_events):
            out.extend(ids[: int(self.prefix[u])])
        return frozenset(out)

    def result(self) -> ClosureResult:
        return ClosureResult(self.events(), from_array(self.prefix), self.blocked)

    def linearize(self) -> list[int]:
        """The closure in original trace order; a sync-preserving reordering."""
        return sorted(self.events())


def sp_closure(trace: Trace, seeds: Iterable[int], lw: ClockAnnotation | None = None) -> ClosureResult:
    lw = lw if lw is not None else annotate(trace, OrderVariant.LW)
    return Closure(trace, lw).add(seeds).result()


@dataclass(frozen=True)
class RequestRef:
    event: int
    thread: int
    lock: str


@dataclass
class DeadlockReport:
    requests: tuple[RequestRef, ...]
    witness_clocks: list[VectorClock]
    variant: OrderVariant
    pattern: tuple[DepKey, ...]
    witness: list[int] | None = field(default=None)

    @property
    def request_ids(self) -> frozenset[int]:
        return frozenset(r.event for r in self.requests)


@dataclass
class CheckResult:
    ok: bool
    requests: tuple[int, ...] = ()
    witness: list[int] | None = None
    iterations: int = 0


def _lt(a: np.ndarray, b: np.ndarray) -> bool:
    return bool((a <= b).all()) and not bool((a == b).all())


def _skip_below(clocks: np.ndarray, requests: list[int], start: int, bound: np.ndarray) -> int:
    """First index from ``start`` whose clock is not strictly below ``bound``.

    Requests of one dependency share a thread, so their clocks increase along
    the list and "strictly below" holds on a prefix; binary search it.
    """
    lo, hi = start, len(requests)
    while lo < hi:
        mid = (lo + hi) // 2
        if _lt(clocks[requests[mid]], bound):
            lo = mid + 1
        else:
            hi = mid
    return lo


def check_spd(
    deps: DependencyMap,
    pattern: AbstractDeadlockPattern,
    lw: ClockAnnotation | None = None,
    index: _AcquireIndex | None = None,
) -> CheckResult:
    """Walk the pattern's request instances looking for a sync-preserving witness."""
    trace = deps.trace
    if lw is None:
        lw = deps.annotation if deps.annotation.variant is OrderVariant.LW else annotate(trace, OrderVariant.LW)
    index = index if index is not None else _AcquireIndex(trace)
    lists = [deps[k].requests for k in pattern.keys]
    clocks = deps.annotation.clocks
    n = len(lists)
    ks = [0] * n
    closure = Closure(trace, lw, index)
    iterations = 0
    while all(ks[i] < len(lists[i]) for i in range(n)):
        iterations += 1
        qs = [lists[i][ks[i]] for i in range(n)]
        closure.add(qs)
        # clock form of the test next to the event-set form; they must agree
        clock_ok = all(int(closure.prefix[trace[q].thread]) < trace.local[q] + 1 for q in qs)
        set_ok = not any(_acquire_included(closure, q) for q in qs)
        assert clock_ok == set_ok
        if clock_ok and not closure.blocked:
            return CheckResult(True, tuple(qs), closure.linearize(), iterations)
        if closure.blocked:
            # a later instance cannot unblock a monotone closure
            break
        v = clocks[qs].max(axis=0)
        for i in range(n):
            ks[i] = _skip_below(clocks, lists[i], ks[i], v)
    return CheckResult(False, iterations=iterations)


def check_instance(trace: Trace, requests: Sequence[int], lw: ClockAnnotation | None = None) -> bool:
    """Whether a request set has a sync-preserving witness leaving them final."""
    lw = lw if lw is not None else annotate(trace, OrderVariant.LW)
    c = Closure(trace, lw).add(requests)
    return not c.blocked and not any(_acquire_included(c, q) for q in requests)


def _acquire_included(closure: Closure, request: int) -> bool:
    a = closure.trace.acquire_of(request)
    return a is not None and closure.contains(a)


def compute_sp_deadlocks(
    trace: Trace,
    variant: OrderVariant | str = OrderVariant.LW,
    max_cycle_len: int = DEFAULT_MAX_CYCLE,
    deps: DependencyMap | None = None,
    with_witness: bool = False,
    patterns: list[AbstractDeadlockPattern] | None = None,
) -> list[DeadlockReport]:
    variant = OrderVariant.parse(variant) if isinstance(variant, str) else variant
    deps = deps if deps is not None else compute_dependencies(trace, variant)
    lw = deps.annotation if variant is OrderVariant.LW else annotate(trace, OrderVariant.LW)
    index = _AcquireIndex(trace)
    reports = []
    if patterns is None:
        patterns = enumerate_patterns(deps, max_cycle_len)
    for pattern in patterns:
        res = check_spd(deps, pattern, lw, index)
        if not res.ok:
            continue
        refs = tuple(RequestRef(q, trace[q].thread, trace[q].target) for q in res.requests)
        reports.append(
            DeadlockReport(
                refs,
                [from_array(deps.annotation.clocks[q]) for q in res.requests],
                variant,
                pattern.keys,
                res.witness if with_witness else None,
            )
        )
    return reports
