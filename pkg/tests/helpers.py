"""Shared builders for the test suite."""

from entailsync import (
    Action,
    ActionDescriptor,
    EntailmentGraph,
    OpId,
    Operation,
    RegisterDef,
    build_memory,
    issue,
    make_replica,
)


def arith_world(n: int = 1):
    table, graph = build_memory([RegisterDef("arith", 0) for _ in range(n)])
    return table, graph


def plain_world(*initials):
    table, graph = build_memory([RegisterDef("plain", v) for v in initials])
    return table, graph


def lww_world(initial="A", t=0):
    return build_memory([RegisterDef("lww", initial, timestamp=t)])


def single_op(graph, replica, counter, descriptors, premises):
    opid = OpId(replica, counter)
    actions = tuple(
        Action(opid, i, d.register, d.kind, d.value, d.timestamp)
        for i, d in enumerate(descriptors)
    )
    op = Operation(opid, actions, frozenset(premises))
    graph.add(op.premises, op)
    return op


def mov(reg, value, t=None):
    return ActionDescriptor("mov", reg, value, t)


def add(reg, value):
    return ActionDescriptor("add", reg, value)


def mul(reg, value):
    return ActionDescriptor("mul", reg, value)


def touch(reg):
    return ActionDescriptor("touch", reg)
