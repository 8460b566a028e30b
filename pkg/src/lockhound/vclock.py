"""Vector clocks with value semantics.

Clocks are immutable tuples of timestamps indexed by dense thread id. Missing
trailing components read as zero, so clocks of different lengths compare and
join as if padded.
"""

from __future__ import annotations

from itertools import zip_longest
from typing import Iterable, Sequence


class VectorClock:
    __slots__ = ("_stamps",)

    def __init__(self, stamps: Iterable[int] = ()) -> None:
        stamps = tuple(int(s) for s in stamps)
        if any(s < 0 for s in stamps):
            raise ValueError("timestamps must be non-negative")
        # trailing zeros are insignificant; strip them so equality is by value
        end = len(stamps)
        while end and stamps[end - 1] == 0:
            end -= 1
        self._stamps = stamps[:end]

    @classmethod
    def zero(cls) -> "VectorClock":
        return cls()

    @property
    def stamps(self) -> tuple[int, ...]:
        return self._stamps

    def __getitem__(self, thread: int) -> int:
        if thread < 0:
            raise IndexError(thread)
        return self._stamps[thread] if thread < len(self._stamps) else 0

    def __len__(self) -> int:
        return len(self._stamps)

    def padded(self, size: int) -> tuple[int, ...]:
        return self._stamps + (0,) * max(0, size - len(self._stamps))

    def join(self, other: "VectorClock") -> "VectorClock":
        return VectorClock(max(a, b) for a, b in zip_longest(self._stamps, other._stamps, fillvalue=0))

    __or__ = join

    def inc(self, thread: int) -> "VectorClock":
        stamps = list(self.padded(thread + 1))
        stamps[thread] += 1
        return VectorClock(stamps)

    def leq(self, other: "VectorClock") -> bool:
        return all(a <= b for a, b in zip_longest(self._stamps, other._stamps, fillvalue=0))

    def less_than(self, other: "VectorClock") -> bool:
        """Strict order: every component <= and the clocks differ."""
        return self._stamps != other._stamps and self.leq(other)

    __lt__ = less_than

    def __le__(self, other: "VectorClock") -> bool:
        return self.leq(other)

    def concurrent(self, other: "VectorClock") -> bool:
        return not self.less_than(other) and not other.less_than(self) and self != other

    def __eq__(self, other: object) -> bool:
        if isinstance(other, VectorClock):
            return self._stamps == other._stamps
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._stamps)

    def __repr__(self) -> str:
        return f"VectorClock({list(self._stamps)})"


def join(a: VectorClock, b: VectorClock) -> VectorClock:
    return a.join(b)


def less_than(a: VectorClock, b: VectorClock) -> bool:
    return a.less_than(b)


def inc(v: VectorClock, thread: int) -> VectorClock:
    return v.inc(thread)


def join_all(clocks: Iterable[VectorClock]) -> VectorClock:
    out = VectorClock()
    for c in clocks:
        out = out.join(c)
    return out


def from_array(stamps: Sequence[int]) -> VectorClock:
    return VectorClock(stamps)
