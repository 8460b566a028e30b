from hypothesis import given, settings
from hypothesis import strategies as st

from lockhound import oracle
from lockhound.generate import GeneratorConfig, generate_text
from lockhound.orders import annotate, ordered_pairs
from lockhound.spd import sp_closure
from lockhound.trace import check_well_formed, normalize
from lockhound.traceio import parse_text, write_trace
from randomtraces import random_trace

seeds = st.integers(0, 10**6)


@given(seeds)
def test_normalize_idempotent(seed):
    t = random_trace(seed)
    assert normalize(t) == t
    assert normalize(parse_text(write_trace(t).decode())) == t
    assert check_well_formed(t) == []


@given(seeds)
def test_orders_nest(seed):
    t = random_trace(seed)
    to, lw, ro = (ordered_pairs(annotate(t, v)) for v in ("to", "lw", "ro"))
    assert to <= lw <= ro


@given(seeds, st.data())
def test_closure_matches_fixpoint_and_is_monotone(seed, data):
    t = random_trace(seed)
    ids = st.integers(1, len(t))
    small = data.draw(st.sets(ids, max_size=2))
    extra = data.draw(st.sets(ids, max_size=2))
    a = sp_closure(t, small)
    b = sp_closure(t, small | extra)
    assert (a.events, a.blocked) == oracle.naive_sp_closure(t, small)
    assert a.events <= b.events
    for e in a.events:
        assert all(f in a.events for f in t.thread_events[t[e].thread][: t.local[e]])


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 400),
    st.integers(1, 6),
    st.integers(1, 4),
    st.integers(1, 3),
    seeds,
    st.floats(0, 1),
)
def test_generator_output_is_well_formed(events, threads, locks, variables, seed, bias):
    cfg = GeneratorConfig(events, threads, locks, variables, seed, bias)
    text = generate_text(cfg)
    assert len(text.splitlines()) == events
    assert text == generate_text(cfg)
    normalize(parse_text(text))
