"""Graphviz DOT export mirroring the figures' visual grammar.

Solid edges for entails, dashed edges from a merge operation to each
operation rebased under it, and a double-struck ⟦label⟧ with dashed outline
for cancelled (tombstoned) operations.
"""

from __future__ import annotations

from .journal import EntailmentGraph, TOMBSTONE_ID


def _node_label(graph: EntailmentGraph, opid) -> str:
    node = graph.nodes[opid]
    lines = [str(opid)]
    lines.extend(a.summary() for a in node.actions)
    return "\\n".join(lines)


def to_dot(graph: EntailmentGraph, title: str = "") -> str:
    out = ["digraph entailment {"]
    if title:
        out.append(f'  label="{title}";')
        out.append("  labelloc=t;")
    out.append("  rankdir=TB;")
    out.append('  node [shape=ellipse, fontsize=10];')
    cancelled = {
        opid
        for opid in graph.nodes
        if opid != TOMBSTONE_ID and graph.is_cancelled(opid)
    }
    if cancelled:
        out.append(f'  "{TOMBSTONE_ID}" [label="∅", shape=circle];')
    for opid in sorted(graph.nodes, key=lambda o: o.sort_key):
        if opid == TOMBSTONE_ID:
            continue
        label = _node_label(graph, opid)
        if opid in cancelled:
            out.append(f'  "{opid}" [label="⟦{label}⟧", style=dashed];')
        else:
            out.append(f'  "{opid}" [label="{label}"];')
    for src, dst in sorted(
        graph.entails_edges(), key=lambda e: (e[0].sort_key, e[1].sort_key)
    ):
        out.append(f'  "{src}" -> "{dst}";')
    for opid, targets in sorted(graph.rebases.items(), key=lambda kv: kv[0].sort_key):
        for target in sorted(targets, key=lambda o: o.sort_key):
            out.append(f'  "{target}" -> "{opid}" [style=dashed];')
    out.append("}")
    return "\n".join(out) + "\n"
