"""Brute-force ground truth over correctly reordered prefixes (CRPs).

Everything here explores the full reordering state space and is exponential;
it exists to check the streaming engines on small traces. A state is the
per-thread progress vector plus the current writer of every variable and the
current holder of every lock. An event can be appended when it is the next
event of its thread, its lock is free (acquires), and the variable's current
writer is the event's original last write (reads). In sync-preserving mode an
acquire is also blocked once a later acquire of the same lock is included.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .orders import OrderVariant
from .trace import Op, Trace

DEFAULT_MAX_EVENTS = 14
ENV_MAX_EVENTS = "LOCKHOUND_MAX_ORACLE_EVENTS"

State = tuple  # (progress, writers, holders)


class TraceTooLarge(ValueError):
    pass


def max_events_cap(override: int | None = None) -> int:
    if override is not None:
        return override
    env = os.environ.get(ENV_MAX_EVENTS)
    return int(env) if env else DEFAULT_MAX_EVENTS


def _check_size(trace: Trace, max_events: int | None) -> None:
    cap = max_events_cap(max_events)
    real = sum(1 for e in trace.events if not e.synthetic)
    if real > cap:
        raise TraceTooLarge(f"trace has {real} events, oracle cap is {cap}")


class Explorer:
    """Reachable-state exploration of one trace, memoized per mode."""

    def __init__(self, trace: Trace, sync_only: bool = False, max_events: int | None = None):
        _check_size(trace, max_events)
        self.trace = trace
        self.sync_only = sync_only
        self.k = trace.num_threads
        self.vars = sorted({e.target for e in trace.events if e.op in (Op.READ, Op.WRITE)})
        self.locks = sorted(trace.locks())
        self._var_ix = {v: i for i, v in enumerate(self.vars)}
        self._lock_ix = {l: i for i, l in enumerate(self.locks)}
        # bitmask of the first i events of each thread
        self.prefix_masks = []
        for ids in trace.thread_events:
            masks = [0]
            for e in ids:
                masks.append(masks[-1] | (1 << e))
            self.prefix_masks.append(masks)
        self._later_acquires: dict[int, list[tuple[int, int]]] = {}
        acqs = [e for e in trace.events if e.op is Op.ACQ]
        for a in acqs:
            self._later_acquires[a.id] = [
                (b.thread, trace.local[b.id]) for b in acqs if b.target == a.target and b.id > a.id
            ]
        self._states: list[State] | None = None

    def initial(self) -> State:
        return ((0,) * self.k, (0,) * len(self.vars), (0,) * len(self.locks))

    def mask(self, state: State) -> int:
        m = 0
        for t, p in enumerate(state[0]):
            m |= self.prefix_masks[t][p]
        return m

    def enabled(self, state: State) -> Iterator[int]:
        progress, writers, holders = state
        trace = self.trace
        for t in range(self.k):
            ids = trace.thread_events[t]
            p = progress[t]
            if p >= len(ids):
                continue
            e = trace[ids[p]]
            if e.op is Op.ACQ:
                if holders[self._lock_ix[e.target]]:
                    continue
                if self.sync_only and any(progress[u] >= pos for u, pos in self._later_acquires[e.id]):
                    continue
            elif e.op is Op.READ:
                lw = trace.last_write.get(e.id)
                if writers[self._var_ix[e.target]] != (lw or 0):
                    continue
            yield e.id

    def step(self, state: State, e: int) -> State:
        progress, writers, holders = state
        ev = self.trace[e]
        progress = progress[: ev.thread] + (progress[ev.thread] + 1,) + progress[ev.thread + 1 :]
        if ev.op is Op.WRITE:
            i = self._var_ix[ev.target]
            writers = writers[:i] + (e,) + writers[i + 1 :]
        elif ev.op is Op.ACQ:
            i = self._lock_ix[ev.target]
            holders = holders[:i] + (ev.thread + 1,) + holders[i + 1 :]
        elif ev.op is Op.REL:
            i = self._lock_ix[ev.target]
            holders = holders[:i] + (0,) + holders[i + 1 :]
        return (progress, writers, holders)

    def replay(self, sequence: Sequence[int]) -> State:
        """State after a sequence; raises ValueError if it is not a CRP."""
        s = self.initial()
        for e in sequence:
            if e not in set(self.enabled(s)):
                raise ValueError(f"event {e} cannot extend the prefix")
            s = self.step(s, e)
        return s

    def states(self) -> list[State]:
        if self._states is None:
            seen = {self.initial()}
            stack = [self.initial()]
            while stack:
                s = stack.pop()
                for e in self.enabled(s):
                    n = self.step(s, e)
                    if n not in seen:
                        seen.add(n)
                        stack.append(n)
            self._states = list(seen)
        return self._states

    def search(self, start: State, goal: Callable[[State], bool], avoid: Callable[[int], bool] | None = None) -> list[int] | None:
        """Event sequence from ``start`` to a state satisfying ``goal``, or None."""
        parent: dict[State, tuple[State, int] | None] = {start: None}
        stack = [start]
        while stack:
            s = stack.pop()
            if goal(s):
                path = []
                while parent[s] is not None:
                    s, e = parent[s]
                    path.append(e)
                return path[::-1]
            for e in self.enabled(s):
                if avoid is not None and avoid(e):
                    continue
                n = self.step(s, e)
                if n not in parent:
                    parent[n] = (s, e)
                    stack.append(n)
        return None


def enumerate_crp(trace: Trace, sync_only: bool = False, max_events: int | None = None) -> set[tuple[int, ...]]:
    """Every CRP as an explicit sequence (exponential; tiny traces only)."""
    ex = Explorer(trace, sync_only, max_events)
    out: set[tuple[int, ...]] = set()

    def dfs(s: State, path: list[int]) -> None:
        out.add(tuple(path))
        for e in ex.enabled(s):
            path.append(e)
            dfs(ex.step(s, e), path)
            path.pop()

    dfs(ex.initial(), [])
    return out


@dataclass
class Precedence:
    """For every event ``f``: events present in all / some prefixes that enable ``f``."""

    always: dict[int, int] = field(default_factory=dict)
    sometimes: dict[int, int] = field(default_factory=dict)

    def must_precede(self, e: int, f: int) -> bool:
        return e != f and f in self.always and bool(self.always[f] >> e & 1)


def precedence(trace: Trace, max_events: int | None = None, explorer: Explorer | None = None) -> Precedence:
    ex = explorer if explorer is not None else Explorer(trace, False, max_events)
    out = Precedence()
    for s in ex.states():
        m = ex.mask(s)
        for f in ex.enabled(s):
            out.always[f] = out.always.get(f, m) & m
            out.sometimes[f] = out.sometimes.get(f, 0) | m
    # an event that never becomes enabled is in no CRP; vacuously preceded by all
    full = (1 << (len(trace) + 1)) - 2
    for e in trace.events:
        out.always.setdefault(e.id, full)
    return out


def must_precede(trace: Trace, e: int, f: int, max_events: int | None = None) -> bool:
    return precedence(trace, max_events).must_precede(e, f)


def general_critical_section(trace: Trace, a: int, r: int, prec: Precedence | None = None, max_events: int | None = None) -> set[int]:
    prec = prec if prec is not None else precedence(trace, max_events)
    acq = trace[a]
    # releases of the same lock later in a's thread; thread order puts them after a
    later_rels = [
        x for x in trace.thread_events[acq.thread]
        if x > a and trace[x].op is Op.REL and trace[x].target == acq.target
    ]
    out = set()
    for e in trace.events:
        if not (prec.must_precede(a, e.id) and prec.must_precede(e.id, r)):
            continue
        seen = prec.sometimes.get(e.id, 0)
        if any(seen >> x & 1 for x in later_rels):
            continue
        out.add(e.id)
    return out


def general_lockset(trace: Trace, e: int, prec: Precedence | None = None, max_events: int | None = None) -> frozenset[tuple[str, int]]:
    prec = prec if prec is not None else precedence(trace, max_events)
    out = set()
    for a, r in trace.rel_of.items():
        if e in general_critical_section(trace, a, r, prec):
            out.add((trace[a].target, trace[a].thread))
    return frozenset(out)


def general_locksets(trace: Trace, max_events: int | None = None) -> dict[int, frozenset[tuple[str, int]]]:
    prec = precedence(trace, max_events)
    sections = {a: general_critical_section(trace, a, r, prec) for a, r in trace.rel_of.items()}
    out: dict[int, set] = {e.id: set() for e in trace.events}
    for a, members in sections.items():
        for e in members:
            out[e].add((trace[a].target, trace[a].thread))
    return {e: frozenset(v) for e, v in out.items()}


def declarative_order(trace: Trace, variant: OrderVariant | str) -> set[tuple[int, int]]:
    """Transitive closure of the variant's generating edges."""
    variant = OrderVariant.parse(variant) if isinstance(variant, str) else variant
    n = len(trace)
    direct: list[set[int]] = [set() for _ in range(n + 1)]
    last_in_thread: dict[int, int] = {}
    for e in trace.events:
        if e.thread in last_in_thread:
            direct[e.id].add(last_in_thread[e.thread])
        last_in_thread[e.thread] = e.id
    if variant in (OrderVariant.LW, OrderVariant.RO):
        for f, w in trace.last_write.items():
            if w is not None:
                direct[f].add(w)
    if variant is OrderVariant.HB:
        for a in trace.events:
            if a.op is Op.ACQ:
                for r in trace.events[: a.id - 1]:
                    if r.op is Op.REL and r.target == a.target:
                        direct[a.id].add(r.id)

    def close(direct_edges: list[set[int]]) -> list[int]:
        # every generating edge points forward in the trace
        pred = [0] * (n + 1)
        for f in range(1, n + 1):
            m = 0
            for p in direct_edges[f]:
                m |= pred[p] | (1 << p)
            pred[f] = m
        return pred

    pred = close(direct)
    if variant is OrderVariant.RO:
        lw_pred = pred
        sections = [
            (a, r, set(range(a + 1, r)) & set(trace.thread_events[trace[a].thread]))
            for a, r in trace.rel_of.items()
        ]
        for a, r, inner in sections:
            for a2, r2, inner2 in sections:
                if a2 == a or trace[a2].target != trace[a].target:
                    continue
                for f in inner2:
                    if any(lw_pred[f] >> e & 1 for e in inner):
                        direct[f].add(r)
        pred = close(direct)
    return {(e, f) for f in range(1, n + 1) for e in range(1, n + 1) if pred[f] >> e & 1}


def naive_sp_closure(trace: Trace, seeds: Iterable[int]) -> tuple[frozenset[int], bool]:
    """Literal fixpoint of the sync-preserving closure rules. Returns (events, blocked)."""
    lw = declarative_order(trace, OrderVariant.LW)
    preds: dict[int, set[int]] = {}
    for e, f in lw:
        preds.setdefault(f, set()).add(e)
    s = set(seeds)
    blocked = False
    while True:
        new = set(s)
        for f in s:
            new |= preds.get(f, set())
        acqs = sorted(e for e in new if trace[e].op is Op.ACQ)
        for a, b in itertools.combinations(acqs, 2):
            if trace[a].target == trace[b].target:
                r = trace.rel_of.get(a)
                if r is None:
                    blocked = True
                else:
                    new.add(r)
        if new == s:
            return frozenset(s), blocked
        s = new


def _final_goal(trace: Trace, requests: Iterable[int]) -> Callable[[State], bool]:
    need = [(trace[q].thread, trace.local[q]) for q in requests]
    return lambda s: all(s[0][t] == pos for t, pos in need)


def is_predictable_deadlock(
    trace: Trace,
    requests: Iterable[int],
    sync_only: bool = False,
    max_events: int | None = None,
    explorer: Explorer | None = None,
) -> list[int] | None:
    """A CRP in which every request is its thread's final event, or None."""
    ex = explorer if explorer is not None else Explorer(trace, sync_only, max_events)
    return ex.search(ex.initial(), _final_goal(trace, requests))


def is_stuck(trace: Trace, witness: Sequence[int], requests: Iterable[int], max_events: int | None = None) -> bool:
    """No CRP extending the witness can take any fulfilling acquire."""
    requests = list(requests)
    ex = Explorer(trace, False, max_events)
    start = ex.replay(witness)
    acquires = {a for a in (trace.acquire_of(q) for q in requests) if a is not None}
    if not acquires:
        return True
    reach = ex.search(start, lambda s: any(a in set(ex.enabled(s)) for a in acquires))
    return reach is None


LockSets = Mapping[int, frozenset]


def _indexed_disjoint(m: frozenset, n: frozenset) -> bool:
    return not any(l1 == l2 and s != t for l1, s in m for l2, t in n)


def all_deadlock_patterns(trace: Trace, locksets: LockSets, max_len: int = 8) -> set[frozenset[int]]:
    """Brute-force pattern enumeration from a per-event lock set function."""
    reqs = [e for e in trace.events if e.op is Op.REQ]
    by_thread: dict[int, list[int]] = {}
    for q in reqs:
        by_thread.setdefault(q.thread, []).append(q.id)
    out: set[frozenset[int]] = set()
    threads = sorted(by_thread)
    for n in range(2, min(len(threads), max_len) + 1):
        for ts in itertools.combinations(threads, n):
            for combo in itertools.product(*(by_thread[t] for t in ts)):
                if not all(
                    _indexed_disjoint(locksets[x], locksets[y]) for x, y in itertools.combinations(combo, 2)
                ):
                    continue
                first, rest = combo[0], combo[1:]
                for perm in itertools.permutations(rest):
                    cyc = (first,) + perm
                    if all(
                        trace[cyc[i]].target in {l for l, _ in locksets[cyc[(i + 1) % n]]}
                        for i in range(n)
                    ):
                        out.add(frozenset(combo))
                        break
    return out


def all_predictable_deadlocks(
    trace: Trace,
    locksets: LockSets,
    sync_only: bool = False,
    max_events: int | None = None,
) -> set[frozenset[int]]:
    ex = Explorer(trace, sync_only, max_events)
    return {
        p for p in all_deadlock_patterns(trace, locksets)
        if is_predictable_deadlock(trace, p, explorer=ex) is not None
    }
