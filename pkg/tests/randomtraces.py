"""Small random well-formed traces for differential checks against the oracle."""

from __future__ import annotations

import random

from lockhound.trace import Trace, normalize
from lockhound.traceio import parse_text

MAX_EVENTS = 12


def _block(rng: random.Random, locks: list[str], variables: list[str], depth: int, held: set[str]) -> list[tuple[str, str]]:
    free = [l for l in locks if l not in held]
    if free and depth < 2 and rng.random() < 0.6:
        lock = rng.choice(free)
        body: list[tuple[str, str]] = []
        for _ in range(rng.randint(0, 2)):
            body += _block(rng, locks, variables, depth + 1, held | {lock})
        head = [("req", lock)] if rng.random() < 0.3 else []
        return head + [("acq", lock)] + body + [("rel", lock)]
    return [(rng.choice("rw"), rng.choice(variables))]


def _unbalanced(prog: list[tuple[str, str]]) -> bool:
    held: list[str] = []
    for op, x in prog:
        if op == "acq":
            if x in held:
                return True
            held.append(x)
        elif op == "rel":
            if x not in held:
                return True
            held.remove(x)
    return bool(held)


def random_lines(seed: int) -> list[str]:
    rng = random.Random(seed)
    while True:
        k = rng.randint(2, 3)
        locks = [f"l{i}" for i in range(rng.randint(1, 3))]
        variables = [f"x{i}" for i in range(rng.randint(1, 2))]
        if k == 3 and len(locks) >= 2 and rng.random() < 0.4:
            programs = _sandwich(rng, locks, variables)
            if sum(map(len, programs)) > MAX_EVENTS or any(_unbalanced(p) for p in programs):
                continue
            lines = _replay(programs, _sandwich_schedule(rng, programs))
            if lines is not None:
                return lines
            continue
        if len(locks) >= 2 and rng.random() < 0.15:
            programs = _release_chain(rng, locks, variables)
            plan = [0] * 4 + [1] * len(programs[1]) + [0] * (len(programs[0]) - 4)
            for _ in range(rng.randint(0, 3)):
                i = rng.randrange(len(plan) - 1)
                plan[i], plan[i + 1] = plan[i + 1], plan[i]
            lines = _replay(programs, plan)
            if lines is not None:
                return lines
            continue
        plant = len(locks) >= 2 and rng.random() < 0.5
        programs = []
        for _ in range(k):
            prog: list[tuple[str, str]] = []
            for _ in range(rng.randint(0, 1) if plant else rng.randint(1, 3)):
                prog += _block(rng, locks, variables, 0, set())
            programs.append(prog)
        if plant:
            # plant a lock-order inversion between two threads
            a, b = rng.sample(locks, 2)
            for t, (x, y) in zip(rng.sample(range(k), 2), ((a, b), (b, a))):
                inner = [(rng.choice("rw"), rng.choice(variables))] if rng.random() < 0.5 else []
                nested = [("acq", x), ("acq", y)] + inner + [("rel", y), ("rel", x)]
                at = rng.randint(0, len(programs[t]))
                while at and programs[t][at - 1][0] in ("acq", "req"):
                    at -= 1  # keep blocks whole
                programs[t][at:at] = nested
        forked = k == 3 and rng.random() < 0.3
        if forked:
            programs[0].insert(0, ("fork", "t2"))
        if sum(map(len, programs)) > MAX_EVENTS:
            continue
        if any(_unbalanced(p) for p in programs):
            continue
        lines = _interleave(rng, programs, forked)
        if lines is not None:
            return lines


def _sandwich(rng: random.Random, locks: list[str], variables: list[str]) -> list[list[tuple[str, str]]]:
    """Writer, reader and inverted-order threads (in that order).

    The writer's section writes a value the reader reads before requesting a
    lock, so under the last-write or release orders the reader's request can be
    guarded by the writer's lock while thread order sees no guard.
    """
    a, b = rng.sample(locks, 2)
    x, y = rng.choice(variables), rng.choice(variables)
    writer = [("acq", a), ("w", x)] + ([("r", y)] if rng.random() < 0.8 else []) + [("rel", a)]
    inner = [("acq", a), ("rel", a)] if rng.random() < 0.2 else []
    head = [("req", b)] if rng.random() < 0.3 else []
    reader = [("r", x)] + head + [("acq", b)] + inner + [("rel", b)] + ([("w", y)] if rng.random() < 0.8 else [])
    other = [("acq", b), ("acq", a), ("rel", a), ("rel", b)] if rng.random() < 0.8 else [("acq", a), ("rel", a)]
    return [writer, reader, other]


def _release_chain(rng: random.Random, locks: list[str], variables: list[str]) -> list[list[tuple[str, str]]]:
    """Two sections on one lock linked by a write/read, then a guarded request.

    Only the release order places the second thread's request after the first
    thread's inner acquire.
    """
    p, q = rng.sample(locks, 2)
    s = rng.choice([l for l in locks if l != q])
    x, y = rng.choice(variables), rng.choice(variables)
    first = [("acq", p), ("w", x), ("acq", q), ("rel", p), ("r", y), ("rel", q)]
    second = [("acq", p), ("r", x), ("rel", p), ("acq", s), ("rel", s), ("w", y)]
    return [first, second]


def _sandwich_schedule(rng: random.Random, programs: list[list[tuple[str, str]]]) -> list[int]:
    writer, reader, other = (len(p) for p in programs)
    # cutting after the write lets the reader run inside the writer's section
    cut = 2 if rng.random() < 0.6 else rng.randint(0, writer)
    plan = [0] * cut + [1] * reader + [0] * (writer - cut) + [2] * other
    for _ in range(rng.randint(0, 4)):
        i = rng.randrange(len(plan) - 1)
        plan[i], plan[i + 1] = plan[i + 1], plan[i]
    return plan


def _replay(programs: list[list[tuple[str, str]]], plan: list[int]) -> list[str] | None:
    pos = [0] * len(programs)
    holder: dict[str, int] = {}
    out = []
    for t in plan:
        op, x = programs[t][pos[t]]
        if op == "acq":
            if x in holder:
                return None
            holder[x] = t
        elif op == "rel":
            del holder[x]
        pos[t] += 1
        out.append(f"t{t}|{op}({x})")
    return out


def _interleave(rng: random.Random, programs: list[list[tuple[str, str]]], forked: bool) -> list[str] | None:
    pos = [0] * len(programs)
    holder: dict[str, int] = {}
    out = []
    while True:
        ready = []
        for t, prog in enumerate(programs):
            if pos[t] == len(prog):
                continue
            if forked and t == 2 and pos[0] == 0:
                continue  # not yet forked
            op, x = prog[pos[t]]
            if op == "acq" and x in holder:
                continue
            ready.append(t)
        if not ready:
            # either done, or the schedule itself deadlocked; keep only complete runs
            return out if all(p == len(prog) for p, prog in zip(pos, programs)) else None
        t = rng.choice(ready)
        op, x = programs[t][pos[t]]
        if op == "acq":
            holder[x] = t
        elif op == "rel":
            del holder[x]
        pos[t] += 1
        out.append(f"t{t}|{op}({x})")


def random_trace(seed: int) -> Trace:
    return normalize(parse_text("\n".join(random_lines(seed)) + "\n"))
