import numpy as np
import pytest

from conftest import ev, load
from lockhound import oracle
from lockhound.orders import OrderVariant, annotate, ordered, ordered_pairs
from lockhound.trace import normalize
from lockhound.traceio import parse_text
from lockhound.vclock import VectorClock


def lt(trace, variant, a, b):
    return ordered(annotate(trace, variant), ev(trace, a), ev(trace, b))


def test_lw_orders_write_before_read():
    assert lt(load("fig6a"), "lw", 2, 4)
    assert not lt(load("fig6a"), "to", 2, 4)


def test_ro_orders_across_critical_sections():
    t = load("fig6b")
    assert lt(t, "ro", 3, 6)
    assert not lt(t, "lw", 3, 6)
    assert lt(t, "lw", 2, 6)


def test_ro_leaves_fig6c_unordered():
    t = load("fig6c")
    assert not lt(t, "ro", 3, 8)
    assert not lt(t, "ro", 8, 3)


def test_hb_fig9():
    t = load("fig9")
    assert lt(t, "hb", 1, 6)
    assert lt(t, "hb", 6, 13)
    assert not lt(t, "ro", 1, 6)


def test_to_is_thread_order():
    t = load("fig11a")
    ann = annotate(t, "to")
    for e in t.events:
        for f in t.events:
            assert ordered(ann, e.id, f.id) == (e.thread == f.thread and e.id < f.id)


@pytest.mark.parametrize("variant", list(OrderVariant))
def test_irreflexive(variant):
    t = load("fig13a")
    ann = annotate(t, variant)
    assert not any(ordered(ann, e.id, e.id) for e in t.events)


@pytest.mark.parametrize("name", ["fig3a", "fig4", "fig6a", "fig6b", "fig6c", "fig8b", "fig9", "fig13a", "fig13b"])
@pytest.mark.parametrize("variant", list(OrderVariant))
def test_clocks_match_declarative_order(name, variant):
    t = load(name)
    assert ordered_pairs(annotate(t, variant)) == oracle.declarative_order(t, variant)


def test_variants_nest():
    t = load("fig13b")
    to, lw, ro = (ordered_pairs(annotate(t, v)) for v in ("to", "lw", "ro"))
    assert to <= lw <= ro


def test_clock_helpers():
    t = normalize(parse_text("t1|w(x)\nt2|r(x)\n"))
    ann = annotate(t, "lw")
    assert ann.clock(2) == VectorClock([1, 1])
    assert ann.position(2) == 1
    assert ann.last_write_clock["x"] == VectorClock([1])
    assert ann.clocks.dtype == np.int32


def test_unknown_variant():
    with pytest.raises(ValueError):
        OrderVariant.parse("shb")
