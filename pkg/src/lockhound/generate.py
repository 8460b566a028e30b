"""Seeded synthetic trace generator for performance and smoke tests.

Threads interleave randomly. Each thread runs blocks: plain variable accesses,
single critical sections on a random lock, and (with probability ``bias``)
nested sections on the hot lock pair ``l0``/``l1`` whose order depends on the
thread's parity, which produces lock-order inversions. A nested block only
starts when both hot locks are free, so generation itself never deadlocks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator


@dataclass
class GeneratorConfig:
    events: int = 1000
    threads: int = 4
    locks: int = 4
    variables: int = 4
    seed: int = 0
    deadlock_bias: float = 0.1

    def validate(self) -> None:
        if self.events < 0:
            raise ValueError("events must be >= 0")
        if self.threads < 1 or self.locks < 1 or self.variables < 1:
            raise ValueError("threads, locks and vars must be positive")
        if not 0.0 <= self.deadlock_bias <= 1.0:
            raise ValueError("deadlock bias must lie in [0, 1]")


_MAX_BLOCK = 6


def generate_lines(cfg: GeneratorConfig) -> Iterator[str]:
    cfg.validate()
    rng = random.Random(cfg.seed)
    threads = [f"t{i}" for i in range(cfg.threads)]
    locks = [f"l{i}" for i in range(cfg.locks)]
    variables = [f"x{i}" for i in range(cfg.variables)]
    hot = locks[:2] if len(locks) >= 2 else None

    plans: list[list[tuple[str, str]]] = [[] for _ in threads]
    holder: dict[str, int] = {}
    pending_total = 0
    emitted = 0

    def access() -> tuple[str, str]:
        return (rng.choice(("r", "w")), rng.choice(variables))

    while emitted < cfg.events:
        t = rng.randrange(cfg.threads)
        plan = plans[t]
        if not plan:
            room = cfg.events - emitted - pending_total
            roll = rng.random()
            if room <= _MAX_BLOCK:
                plan.append(access())
            elif hot and roll < cfg.deadlock_bias:
                if any(l in holder for l in hot):
                    continue  # wait for the hot pair to be free
                a, b = hot if t % 2 == 0 else hot[::-1]
                plan.extend([("acq", a), access(), ("acq", b), access(), ("rel", b), ("rel", a)])
            elif roll < cfg.deadlock_bias + (1 - cfg.deadlock_bias) / 2:
                lock = rng.choice(locks)
                plan.extend([("acq", lock), access(), access(), ("rel", lock)])
            else:
                plan.append(access())
            pending_total += len(plan)
        op, target = plan[0]
        if op == "acq":
            if target in holder:
                continue
            holder[target] = t
        elif op == "rel":
            del holder[target]
        plan.pop(0)
        pending_total -= 1
        emitted += 1
        yield f"{threads[t]}|{op}({target})\n"


def generate_text(cfg: GeneratorConfig) -> str:
    return "".join(generate_lines(cfg))
