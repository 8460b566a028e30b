from conftest import ev, load, named
from lockhound.orders import OrderVariant
from lockhound.patterns import (
    CycleLimitExceeded,
    compute_dependencies,
    deadlock_patterns,
    enumerate_patterns,
    indexed_intersection,
    lockset,
    satisfies_pattern,
)

import pytest


def deps_of(name, variant):
    return compute_dependencies(load(name), variant).named()


def test_fig4_dependencies():
    assert deps_of("fig4", "to") == {
        ("t1", "l2", frozenset({("l1", "t1")})),
        ("t2", "l1", frozenset({("l2", "t2")})),
    }


def test_fig3a_gains_cross_thread_guard():
    t = load("fig3a")
    deps = compute_dependencies(t, "lw")
    key = deps.of_request()[ev(t, 11) - 1]
    assert named(t, key[2]) == {("l3", "t2"), ("l1", "t1")}


def test_fig3b_extra_dependency():
    assert deps_of("fig3b", "to") == {("t3", "l2", frozenset({("l1", "t3")}))}
    assert ("t2", "l1", frozenset({("l2", "t1")})) in deps_of("fig3b", "lw")


def test_lockset_points():
    t = load("fig4")
    assert named(t, lockset(t, "to", ev(t, 3))) == {("l1", "t1")}
    t = load("fig6a")
    assert named(t, lockset(t, "lw", ev(t, 5))) == {("l1", "t1")}
    t = load("fig6c")
    assert "l1" not in {l for l, _ in lockset(t, "ro", ev(t, 8))}


def test_stats_count_extra_dependencies():
    t = load("fig3b")
    to = compute_dependencies(t, "to").stats
    lw = compute_dependencies(t, "lw").stats
    assert lw.d_plus == lw.deps - to.deps == 1
    assert lw.g_plus == 1
    assert to.d_plus == to.g_plus == 0


def test_fig4_single_pattern():
    t = load("fig4")
    assert deadlock_patterns(t, "to") == {frozenset({ev(t, 3) - 1, ev(t, 7) - 1})}


def test_fig3a_guard_removes_pattern():
    t = load("fig3a")
    assert deadlock_patterns(t, "lw") == set()
    assert len(deadlock_patterns(t, "to")) == 1


def test_fig8b_same_thread_lock_is_not_a_guard():
    t = load("fig8b")
    assert deadlock_patterns(t, "lw") == {frozenset({ev(t, 5), ev(t, 12)})}


def test_indexed_intersection():
    assert indexed_intersection({("l3", 0)}, {("l3", 0)}) == set()
    assert indexed_intersection({("l3", 0)}, {("l3", 1)}) == {"l3"}


def test_enumerated_cycles_satisfy_conditions():
    deps = compute_dependencies(load("fig8b"), "lw")
    pats = enumerate_patterns(deps)
    assert pats and all(satisfies_pattern(p.keys) for p in pats)


def test_cycle_cap():
    # three threads acquire l0/l1 in opposite orders: more than one cycle
    lines = []
    for t, (a, b) in enumerate([("l0", "l1"), ("l1", "l0"), ("l0", "l1"), ("l1", "l0")]):
        lines += [(f"t{t}", "acq", a), (f"t{t}", "acq", b), (f"t{t}", "rel", b), (f"t{t}", "rel", a)]
    from lockhound.trace import Trace, normalize

    t = normalize(Trace.from_ops(lines))
    deps = compute_dependencies(t, OrderVariant.TO)
    assert len(enumerate_patterns(deps)) == 4
    with pytest.raises(CycleLimitExceeded):
        enumerate_patterns(deps, cap=2)
    assert enumerate_patterns(deps, max_cycle_len=1) == []
