"""Register interpreters, entailment rules, visibility, and discard-completeness."""

import itertools

import pytest

from entailsync import (
    Action,
    ActionDescriptor,
    NoVisibleValue,
    OpId,
    RegisterDef,
    StaleWrite,
    UnknownAction,
    UnknownRegister,
    build_memory,
    check_discard_complete,
    issue,
    make_replica,
    spec_by_kind,
)
from entailsync.registers import (
    arith_interpret,
    arith_val,
    broken_demo_spec,
    lww_interpret,
    lww_val,
    lww_visible,
    plain_interpret,
)
from helpers import add, lww_world, mov, mul, plain_world, touch


def acts(*specs):
    out = []
    for i, (kind, value, t) in enumerate(specs):
        out.append(Action(OpId("w", i + 1), 0, 0, kind, value, t))
    return out


# -- plain ----------------------------------------------------------------------


def test_plain_last_writer_wins():
    seq = acts(("mov", 0, None), ("mov", 7, None))
    state = plain_interpret(seq)
    assert state.value == 7
    assert state.setter.uid == seq[1].uid
    spec = spec_by_kind("plain")
    assert not spec.visible(seq[0], seq)
    assert spec.visible(seq[1], seq)


def test_plain_rejects_foreign_kinds():
    with pytest.raises(UnknownAction):
        plain_interpret(acts(("add", 1, None)))


def test_plain_entailment_targets_last_setter():
    table, graph = plain_world("x")
    replica = make_replica("r", table, graph)
    op1 = issue(replica, [mov(0, "a")])
    assert op1.premises == {graph.constructors[0]}
    op2 = issue(replica, [mov(0, "b")])
    assert op2.premises == {op1.id}


# -- arithmetic -------------------------------------------------------------------


def test_arith_walkthrough_states_and_vals():
    # the worked sequence: add 0; add 2; mul 5; mov 3
    seq = acts(("add", 0, None), ("add", 2, None), ("mul", 5, None), ("mov", 3, None))
    expected = [
        ("+", 0, (seq[0].uid,), 0),
        ("+", 0, (seq[0].uid, seq[1].uid), 2),
        ("*", 2, (seq[2].uid,), 10),
        ("=", 10, (seq[3].uid,), 3),
    ]
    for cut, (mode, base, accum, val) in enumerate(expected, start=1):
        state = arith_interpret(seq[:cut])
        assert state.mode == mode
        assert state.base == base
        assert tuple(a.uid for a in state.accum) == accum
        assert arith_val(state) == val


def test_arith_consecutive_assignments_replace():
    seq = acts(("add", 0, None), ("mov", 3, None), ("mov", 9, None))
    state = arith_interpret(seq)
    assert state.mode == "="
    assert state.base == 0
    assert [a.uid for a in state.accum] == [seq[2].uid]
    assert arith_val(state) == 9


def left_to_right_eval(seq):
    # independent oracle: the projection read as a plain expression
    v = 0
    for a in seq:
        if a.kind == "mov":
            v = a.value
        elif a.kind == "add":
            v = v + a.value
        elif a.kind == "mul":
            v = v * a.value
    return v


def test_arith_matches_expression_oracle_exhaustively():
    # every projection of <= 6 actions over a small menu
    menu = [("add", 0), ("add", 2), ("mul", 5), ("mov", 3)]
    for n in range(1, 6):
        for combo in itertools.product(menu, repeat=n):
            seq = acts(*[(k, v, None) for k, v in combo])
            assert arith_val(arith_interpret(seq)) == left_to_right_eval(seq)


def test_arith_mode_switch_carries_whole_context_as_premises():
    table, graph = build_memory([RegisterDef("arith", 0)])
    replica = make_replica("r", table, graph)
    c = graph.constructors[0]
    a2 = issue(replica, [add(0, 2)])
    # same mode: only the last accumulated action
    a4 = issue(replica, [add(0, 4)])
    assert a4.premises == {a2.id}
    # mode switch: the whole accumulation
    m5 = issue(replica, [mul(0, 5)])
    assert m5.premises == {c, a2.id, a4.id}


# -- lww -----------------------------------------------------------------------


def test_lww_thomas_write_rule_and_tie():
    seq = acts(("mov", "A", 0), ("mov", "B", 2), ("mov", "C", 2), ("mov", "D", 1))
    state = lww_interpret(seq)
    assert lww_val(state) == {"B", "C"}
    assert not any(lww_visible(a, seq) for a in seq)


def test_lww_unique_max_is_visible():
    seq = acts(("mov", "A", 0), ("mov", "B", 2), ("mov", "D", 1))
    assert lww_val(lww_interpret(seq)) == {"B"}
    assert lww_visible(seq[1], seq)
    assert not lww_visible(seq[0], seq)
    assert not lww_visible(seq[2], seq)


def test_lww_rejects_untimestamped_and_foreign_kinds():
    with pytest.raises(UnknownAction):
        lww_interpret(acts(("mov", "A", None)))
    with pytest.raises(UnknownAction):
        lww_interpret(acts(("add", 1, 1)))


def test_lww_stale_write_rejected_at_issue():
    table, graph = lww_world("A", 0)
    replica = make_replica("r", table, graph)
    issue(replica, [mov(0, "B", 2)])
    with pytest.raises(StaleWrite):
        issue(replica, [mov(0, "C", 2)])
    with pytest.raises(StaleWrite):
        issue(replica, [mov(0, "C", 1)])
    issue(replica, [mov(0, "C", 3)])


def test_lww_entail_targets_max_set():
    table, graph = lww_world("A", 0)
    replica = make_replica("r", table, graph)
    b = issue(replica, [mov(0, "B", 2)])
    assert b.premises == {graph.constructors[0]}
    c = issue(replica, [mov(0, "C", 3)])
    assert c.premises == {b.id}


# -- touch ------------------------------------------------------------------------


def test_touch_premises_point_at_visible_setter():
    table, graph = plain_world("x", "y")
    replica = make_replica("r", table, graph)
    op = issue(replica, [touch(1)])
    assert op.premises == {graph.constructors[1]}
    setter = issue(replica, [mov(1, "z")])
    op2 = issue(replica, [touch(1)])
    assert op2.premises == {setter.id}


def test_touch_never_changes_val():
    table, graph = plain_world("x")
    replica = make_replica("r", table, graph)
    before = replica.val(0)
    issue(replica, [touch(0)])
    assert replica.val(0) == before


def test_touch_on_tied_lww_raises():
    table, graph = lww_world("A", 0)
    # two tied writes arranged directly in the graph
    from helpers import single_op

    c = graph.constructors[0]
    single_op(graph, "p", 1, [mov(0, "B", 2)], {c})
    single_op(graph, "q", 1, [mov(0, "C", 2)], {c})
    hist = graph.induce_history()
    state = table.interpret(0, hist.projection(0))
    with pytest.raises(NoVisibleValue):
        table.premises_for(touch(0), state)


def test_unknown_register_index():
    table, graph = plain_world("x")
    replica = make_replica("r", table, graph)
    with pytest.raises(UnknownRegister):
        issue(replica, [mov(5, "y")])


# -- discard-completeness harness ---------------------------------------------------


def test_shipped_specs_discard_complete_at_six():
    for kind in ("plain", "arith", "lww"):
        result = check_discard_complete(spec_by_kind(kind), max_ops=6)
        assert result.ok, f"{kind}: {result.counterexample.describe()}"
        assert result.histories_checked > 1


def test_broken_demo_fails_with_minimal_counterexample():
    result = check_discard_complete(broken_demo_spec(), max_ops=6)
    assert not result.ok
    ce = result.counterexample
    assert len(ce.history) == 2  # constructor plus one overwrite: minimal
    assert "does not entail" in ce.describe()
