"""Canonical JSON serialization of entailment graphs.

This is the wire format for publish/fetch and the format golden tests pin:
``{"constructors": {...}, "nodes": [{id, actions, premises}], "rebases": {id: [targets]}}``
with keys sorted, nodes in OpId order, and premise/target lists sorted.  The
tombstone is implicit (present in every graph) and never serialized as a
node, though rebase target lists may name it.
"""

from __future__ import annotations

import json
from typing import Any

from .journal import Action, EntailmentGraph, OpId, Operation, TOMBSTONE_ID


def action_to_json(action: Action) -> dict:
    out: dict[str, Any] = {"op": action.kind, "reg": action.register}
    if action.value is not None:
        out["value"] = action.value
    if action.timestamp is not None:
        out["t"] = action.timestamp
    return out


def graph_to_json(graph: EntailmentGraph) -> dict:
    nodes = []
    for opid in sorted(graph.nodes, key=lambda o: o.sort_key):
        if opid == TOMBSTONE_ID:
            continue
        node = graph.nodes[opid]
        nodes.append(
            {
                "id": str(opid),
                "actions": [action_to_json(a) for a in node.actions],
                "premises": sorted(str(p) for p in node.premises),
            }
        )
    rebases = {
        str(opid): sorted(str(t) for t in targets)
        for opid, targets in sorted(
            graph.rebases.items(), key=lambda kv: kv[0].sort_key
        )
        if targets
    }
    constructors = {
        str(reg): str(ctor) for reg, ctor in sorted(graph.constructors.items())
    }
    return {"constructors": constructors, "nodes": nodes, "rebases": rebases}


def graph_to_text(graph: EntailmentGraph) -> str:
    return json.dumps(graph_to_json(graph), sort_keys=True, indent=2) + "\n"


def graph_from_json(obj: dict) -> EntailmentGraph:
    constructors = {
        int(reg): OpId.parse(ctor) for reg, ctor in obj.get("constructors", {}).items()
    }
    graph = EntailmentGraph(constructors)
    nodes = []
    for entry in obj["nodes"]:
        opid = OpId.parse(entry["id"])
        actions = tuple(
            Action(
                op=opid,
                index=i,
                register=int(a["reg"]),
                kind=a["op"],
                value=a.get("value"),
                timestamp=a.get("t"),
            )
            for i, a in enumerate(entry["actions"])
        )
        premises = frozenset(OpId.parse(p) for p in entry["premises"])
        nodes.append(Operation(id=opid, actions=actions, premises=premises))
    # Insert in dependency order; premises always reference earlier nodes.
    remaining = {n.id: n for n in nodes}
    while remaining:
        progressed = False
        for opid in sorted(remaining, key=lambda o: o.sort_key):
            node = remaining[opid]
            if all(p in graph.nodes for p in node.premises):
                graph.add(node.premises, node)
                del remaining[opid]
                progressed = True
        if not progressed:
            missing = sorted(str(o) for o in remaining)
            raise ValueError(f"nodes with unresolvable premises: {missing}")
    for opid_text, targets in obj.get("rebases", {}).items():
        opid = OpId.parse(opid_text)
        for target in targets:
            graph.record_rebase(opid, OpId.parse(target))
    return graph


def graph_from_text(text: str) -> EntailmentGraph:
    return graph_from_json(json.loads(text))
