import gzip
import io

import pytest

from conftest import FIXTURES, load
from lockhound.trace import normalize
from lockhound.traceio import TraceSyntaxError, UnknownOp, parse_text, parse_trace, write_trace


def test_parse_single_line():
    raw = parse_text("t1|acq(l1)\n")
    e = raw.lines[0]
    assert (e.thread, e.op, e.operand, e.line) == ("t1", "acq", "l1", 1)


def test_fig5a_rows_in_order():
    raw = parse_trace(FIXTURES / "fig5a.trace")
    assert len(raw) == 14
    assert [(e.thread, e.op, e.operand) for e in raw.lines[:4]] == [
        ("t1", "acq", "l1"),
        ("t1", "w", "x"),
        ("t2", "r", "x"),
        ("t2", "req", "l2"),
    ]


def test_unknown_operation():
    with pytest.raises(UnknownOp) as info:
        parse_text("t1|w(x)\nt1|spawn(x)\n")
    assert info.value.line == 2


@pytest.mark.parametrize("line", ["t1 acq(l1)", "t1|acq l1", "|acq(l1)", "t1|acq()"])
def test_syntax_errors(line):
    with pytest.raises(TraceSyntaxError):
        parse_text(line + "\n")


def test_comments_and_blank_lines():
    raw = parse_text("# header\n\n  t1 | w( x )  # trailing\n")
    assert [(e.thread, e.op, e.operand, e.line) for e in raw.lines] == [("t1", "w", "x", 3)]


def test_gzip_and_stream_sources(tmp_path):
    text = (FIXTURES / "fig4.trace").read_bytes()
    gz = tmp_path / "fig4.trace.gz"
    gz.write_bytes(gzip.compress(text))
    plain = parse_trace(FIXTURES / "fig4.trace")
    assert parse_trace(gz) == plain
    assert parse_trace(io.BytesIO(gzip.compress(text))) == plain
    assert parse_trace(text) == plain


def test_round_trip_is_byte_identical():
    t = load("fig4")
    once = write_trace(t)
    twice = write_trace(normalize(parse_trace(once)))
    assert once == twice


def test_fork_join_rendered_back():
    text = "t1|fork(t2)\nt2|acq(l1)\nt2|rel(l1)\nt1|join(t2)\n"
    t = normalize(parse_text(text))
    assert write_trace(t, include_synthetic=False).decode() == text


def test_fixture_without_synthetic_matches_source():
    for path in sorted(FIXTURES.glob("*.trace")):
        lines = [
            ln.split("#")[0].replace(" ", "")
            for ln in path.read_text().splitlines()
            if ln.split("#")[0].strip()
        ]
        out = write_trace(normalize(parse_trace(path)), include_synthetic=False).decode().splitlines()
        assert out == lines, path.name


def test_empty_trace_writes_nothing():
    assert write_trace(normalize(parse_text(""))) == b""
