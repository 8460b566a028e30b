"""Text trace format: ``<thread>|<op>(<operand>)`` per line, ``#`` comments.

Gzip-compressed input is detected by its magic bytes.
"""

from __future__ import annotations

import gzip
import io
import os
import re
import sys
from typing import BinaryIO, Iterator, Union

from .trace import FORK_PREFIX, JOIN_PREFIX, Op, RawEvent, RawTrace, Trace

OPS = frozenset({"req", "acq", "rel", "r", "w", "fork", "join"})
_EVENT = re.compile(r"^\s*([\w.$:\-]+)\s*\|\s*([A-Za-z_]\w*)\s*\(\s*([\w.$:\-]+)\s*\)\s*$")
_GZIP_MAGIC = b"\x1f\x8b"

Source = Union[str, bytes, os.PathLike, BinaryIO]


class TraceSyntaxError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownOp(TraceSyntaxError):
    def __init__(self, line: int, token: str):
        self.token = token
        super().__init__(line, f"unknown operation {token!r}")


def _decompressing(stream: BinaryIO) -> BinaryIO:
    if hasattr(stream, "peek"):
        head = stream.peek(2)[:2]
    elif stream.seekable():
        pos = stream.tell()
        head = stream.read(2)
        stream.seek(pos)
    else:
        stream = io.BytesIO(stream.read())
        head = stream.getvalue()[:2]
    if head == _GZIP_MAGIC:
        return gzip.GzipFile(fileobj=stream)  # type: ignore[return-value]
    return stream


def iter_trace(source: Source) -> Iterator[RawEvent]:
    """Stream raw events from a path, bytes, or binary stream."""
    owned: BinaryIO | None = None
    if isinstance(source, bytes):
        base: BinaryIO = io.BytesIO(source)
    elif isinstance(source, (str, os.PathLike)):
        if str(source) == "-":
            base = sys.stdin.buffer
        else:
            base = owned = open(source, "rb")
    else:
        base = source
    text = io.TextIOWrapper(_decompressing(base), encoding="utf-8")
    try:
        for lineno, line in enumerate(text, start=1):
            body = line.split("#", 1)[0]
            if not body.strip():
                continue
            m = _EVENT.match(body)
            if m is None:
                raise TraceSyntaxError(lineno, f"expected '<thread>|<op>(<operand>)', got {body.strip()!r}")
            thread, op, operand = m.groups()
            if op not in OPS:
                raise UnknownOp(lineno, op)
            yield RawEvent(thread, op, operand, lineno)
    except UnicodeDecodeError as exc:
        raise TraceSyntaxError(0, f"input is not UTF-8: {exc}") from None
    finally:
        text.detach()
        if owned is not None:
            owned.close()


def parse_trace(source: Source) -> RawTrace:
    return RawTrace(list(iter_trace(source)))


def parse_text(text: str) -> RawTrace:
    return parse_trace(text.encode("utf-8"))


def format_events(trace: Trace, include_synthetic: bool = True) -> Iterator[str]:
    for e in trace.events:
        name = trace.thread_names[e.thread]
        if include_synthetic or not e.synthetic:
            yield f"{name}|{e.op.value}({e.target})\n"
            continue
        # only the fork write and join read stand for an input line
        if e.op is Op.WRITE and e.target.startswith(FORK_PREFIX):
            yield f"{name}|fork({e.target[len(FORK_PREFIX):]})\n"
        elif e.op is Op.READ and e.target.startswith(JOIN_PREFIX):
            yield f"{name}|join({e.target[len(JOIN_PREFIX):]})\n"


def write_trace(trace: Trace, include_synthetic: bool = True) -> bytes:
    return "".join(format_events(trace, include_synthetic)).encode("utf-8")
