"""Lock dependencies and abstract deadlock patterns.

Dependencies are computed in one pass at request events. The requesting
thread's own held locks form the standard part of the lock set. A lock held by
another thread whose acquire is ordered before the request becomes a candidate
guard; it joins the lock set once its release is reached and the request turns
out to be ordered before that release, and is dropped otherwise. A dependency
is emitted once all its candidates are settled, or at the end of the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .orders import ClockAnnotation, OrderVariant, annotate, ordered
from .trace import Op, Trace
from .vclock import VectorClock, from_array

IndexedLockSet = frozenset  # of (lock, thread) pairs
DepKey = tuple  # (thread, lock, IndexedLockSet)

DEFAULT_MAX_CYCLE = 8
DEFAULT_PATTERN_CAP = 100_000


class CycleLimitExceeded(RuntimeError):
    pass


def lock_names(ls: Iterable[tuple[str, int]]) -> frozenset[str]:
    return frozenset(lock for lock, _ in ls)


def indexed_intersection(m: Iterable[tuple[str, int]], n: Iterable[tuple[str, int]]) -> set[str]:
    """Locks present in both sets with different owning threads."""
    owners: dict[str, set[int]] = {}
    for lock, t in m:
        owners.setdefault(lock, set()).add(t)
    out = set()
    for lock, t in n:
        if any(s != t for s in owners.get(lock, ())):
            out.add(lock)
    return out


def key_order(key: DepKey) -> tuple:
    thread, lock, ls = key
    return (thread, lock, tuple(sorted(ls)))


@dataclass
class LockDependency:
    thread: int
    lock: str
    lockset: IndexedLockSet
    requests: list[int] = field(default_factory=list)
    _clocks: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def key(self) -> DepKey:
        return (self.thread, self.lock, self.lockset)

    @property
    def request_clocks(self) -> list[VectorClock]:
        if self._clocks is None:
            raise ValueError("dependency is not attached to a clock annotation")
        return [from_array(self._clocks[q]) for q in self.requests]


@dataclass
class DependencyStats:
    deps: int = 0
    d_plus: int = 0
    g_plus: int = 0
    pending_peak: int = 0


@dataclass
class DependencyMap:
    annotation: ClockAnnotation
    deps: dict[DepKey, LockDependency]
    stats: DependencyStats

    @property
    def trace(self) -> Trace:
        return self.annotation.trace

    def __len__(self) -> int:
        return len(self.deps)

    def __iter__(self) -> Iterator[DepKey]:
        return iter(self.deps)

    def __getitem__(self, key: DepKey) -> LockDependency:
        return self.deps[key]

    def of_request(self) -> dict[int, DepKey]:
        return {q: key for key, d in self.deps.items() for q in d.requests}

    def named(self) -> set[tuple[str, str, frozenset[tuple[str, str]]]]:
        """Keys with thread names instead of ids, for readable assertions."""
        names = self.trace.thread_names
        return {(names[t], lock, self.trace.named(ls)) for t, lock, ls in self.deps}


class _Pending:
    __slots__ = ("thread", "lock", "request", "standard", "verified", "candidates")

    def __init__(self, thread: int, lock: str, request: int, standard: frozenset, candidates: set[str]):
        self.thread = thread
        self.lock = lock
        self.request = request
        self.standard = standard
        self.verified: set[tuple[str, int]] = set()
        self.candidates = candidates


def compute_dependencies(
    trace: Trace,
    variant: OrderVariant | str = OrderVariant.LW,
    annotation: ClockAnnotation | None = None,
) -> DependencyMap:
    ann = annotation if annotation is not None else annotate(trace, variant)
    clocks = ann.clocks
    local = trace.local
    deps: dict[DepKey, LockDependency] = {}
    stats = DependencyStats()

    holder: dict[str, tuple[int, int]] = {}  # lock -> (thread, acquire position)
    own: list[dict[str, None]] = [{} for _ in range(trace.num_threads)]  # ordered held locks
    waiting: dict[str, list[_Pending]] = {}
    live = 0

    def emit(thread: int, lock: str, request: int, standard: frozenset, verified: set) -> None:
        ls = standard | verified if verified else standard
        if not ls:
            return
        key = (thread, lock, ls)
        d = deps.get(key)
        if d is None:
            d = deps[key] = LockDependency(thread, lock, ls, _clocks=clocks)
        d.requests.append(request)
        stats.deps += 1
        if verified:
            stats.g_plus += len(verified)
            if not standard:
                stats.d_plus += 1

    for e in trace.events:
        op = e.op
        if op is Op.REQ:
            t = e.thread
            row = clocks[e.id]
            standard = frozenset((l, t) for l in own[t])
            candidates = {
                l for l, (u, apos) in holder.items() if u != t and row[u] >= apos
            }
            if not candidates:
                emit(t, e.target, e.id, standard, set())
            else:
                p = _Pending(t, e.target, e.id, standard, candidates)
                for l in candidates:
                    waiting.setdefault(l, []).append(p)
                live += 1
                stats.pending_peak = max(stats.pending_peak, live)
        elif op is Op.ACQ:
            holder[e.target] = (e.thread, local[e.id])
            own[e.thread][e.target] = None
        elif op is Op.REL:
            t, lock = e.thread, e.target
            holder.pop(lock, None)
            own[t].pop(lock, None)
            row = clocks[e.id]
            for p in waiting.pop(lock, ()):
                p.candidates.discard(lock)
                if row[p.thread] >= local[p.request]:
                    p.verified.add((lock, t))
                if not p.candidates:
                    emit(p.thread, p.lock, p.request, p.standard, p.verified)
                    live -= 1

    # candidates whose release never happens (threads blocked at the end)
    flushed: dict[int, _Pending] = {}
    for plist in waiting.values():
        for p in plist:
            flushed[p.request] = p
    for q in sorted(flushed):
        p = flushed[q]
        emit(p.thread, p.lock, p.request, p.standard, p.verified)

    for d in deps.values():
        d.requests.sort()
    return DependencyMap(ann, deps, stats)


def lockset(trace: Trace, variant: OrderVariant | str, e: int, annotation: ClockAnnotation | None = None) -> IndexedLockSet:
    """Locks held at ``e`` under the order: (l, t) with acquire < e < release.

    An acquire left open by a thread blocked at the end of the trace encloses
    the rest of its own thread.
    """
    ann = annotation if annotation is not None else annotate(trace, variant)
    out = set()
    ev = trace[e]
    for a in trace.events:
        if a.op is not Op.ACQ or not ordered(ann, a.id, e):
            continue
        r = trace.rel_of.get(a.id)
        if r is None:
            if a.thread == ev.thread:
                out.add((a.target, a.thread))
        elif ordered(ann, e, r):
            out.add((a.target, a.thread))
    return frozenset(out)


@dataclass(frozen=True)
class AbstractDeadlockPattern:
    keys: tuple[DepKey, ...]

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def threads(self) -> tuple[int, ...]:
        return tuple(k[0] for k in self.keys)

    @property
    def locks(self) -> tuple[str, ...]:
        return tuple(k[1] for k in self.keys)


def satisfies_pattern(keys: tuple[DepKey, ...]) -> bool:
    """Literal DP-Thread, DP-Cycle and DP-Guard check on a dependency cycle."""
    n = len(keys)
    if n < 2 or len({k[0] for k in keys}) != n:
        return False
    for i in range(n):
        if keys[i][1] not in lock_names(keys[(i + 1) % n][2]):
            return False
    for i in range(n):
        for j in range(i + 1, n):
            if indexed_intersection(keys[i][2], keys[j][2]):
                return False
    return True


def enumerate_patterns(
    deps: DependencyMap | Mapping[DepKey, object],
    max_cycle_len: int = DEFAULT_MAX_CYCLE,
    cap: int | None = DEFAULT_PATTERN_CAP,
) -> list[AbstractDeadlockPattern]:
    """All dependency cycles satisfying the pattern conditions.

    Each cycle starts at its smallest key, so every cycle appears once.
    """
    keys = sorted(deps.deps if isinstance(deps, DependencyMap) else deps, key=key_order)
    index = {k: i for i, k in enumerate(keys)}
    by_lock: dict[str, list[DepKey]] = {}
    for k in keys:
        for lock in lock_names(k[2]):
            by_lock.setdefault(lock, []).append(k)

    out: list[AbstractDeadlockPattern] = []

    def extend(path: list[DepKey], threads: set[int]) -> None:
        start = index[path[0]]
        last = path[-1]
        for nxt in by_lock.get(last[1], ()):
            i = index[nxt]
            if i < start:
                continue
            if i == start:
                if len(path) >= 2:
                    out.append(AbstractDeadlockPattern(tuple(path)))
                    if cap is not None and len(out) > cap:
                        raise CycleLimitExceeded(f"more than {cap} deadlock patterns")
                continue
            if nxt[0] in threads or len(path) >= max_cycle_len:
                continue
            if any(indexed_intersection(p[2], nxt[2]) for p in path):
                continue
            path.append(nxt)
            threads.add(nxt[0])
            extend(path, threads)
            path.pop()
            threads.discard(nxt[0])

    for k in keys:
        extend([k], {k[0]})
    for p in out:
        assert satisfies_pattern(p.keys), p
    return out


def pattern_instances(deps: DependencyMap, pattern: AbstractDeadlockPattern) -> Iterator[frozenset[int]]:
    """Every choice of one request per dependency of the cycle."""
    lists = [deps[k].requests for k in pattern.keys]

    def rec(i: int, acc: list[int]) -> Iterator[frozenset[int]]:
        if i == len(lists):
            yield frozenset(acc)
            return
        for q in lists[i]:
            acc.append(q)
            yield from rec(i + 1, acc)
            acc.pop()

    yield from rec(0, [])


def deadlock_patterns(trace: Trace, variant: OrderVariant | str, max_cycle_len: int = DEFAULT_MAX_CYCLE) -> set[frozenset[int]]:
    """Event-level deadlock patterns (sets of requests) under an order."""
    deps = compute_dependencies(trace, variant)
    out: set[frozenset[int]] = set()
    for p in enumerate_patterns(deps, max_cycle_len):
        out.update(pattern_instances(deps, p))
    return out
