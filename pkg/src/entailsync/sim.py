"""Multi-replica scenario execution and brute-force convergence oracles.

Scenarios are JSON files: register declarations, replica names, a reconciler
choice, optional scripted merge plans, an unreliable-network model, and an
ordered event script (issue / publish / sync / freeze / mark / assert).
Execution is deterministic for a given (scenario, seed) pair; reports
serialize byte-identically.

The oracles back the two correctness claims at desk scale: exhaustive
enumeration of every topological order of a small graph (each order must
interpret to the same per-register state once conflict-free), and randomized
delivery permutations of graph updates across virtual replicas (joined graphs
must be structurally identical, and the join must satisfy the semilattice
laws).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from .errors import CycleDetected, ScriptError, TooLarge
from .journal import (
    Action,
    EntailmentGraph,
    History,
    OpId,
    Operation,
    TOMBSTONE_ID,
    validate_history,
)
from .registers import (
    ActionDescriptor,
    RegisterDef,
    RegisterTable,
    build_memory,
)
from .sync import (
    MergePlan,
    Replica,
    Reconciler,
    SyncReport,
    issue,
    make_replica,
    publish,
    reconciler_by_name,
    submit_plan,
    sync,
)


# -- scenario model ---------------------------------------------------------------


@dataclass
class NetworkModel:
    """Deterministic unreliable network: per-link drop probability, publish
    visibility delay in script steps, severed pairs."""

    drop: dict[str, float] = field(default_factory=dict)
    delay: int = 0
    partitions: list[tuple[str, str]] = field(default_factory=list)
    seed: int = 0

    @classmethod
    def from_json(cls, obj: dict | None) -> "NetworkModel":
        obj = obj or {}
        return cls(
            drop={str(k): float(v) for k, v in obj.get("drop", {}).items()},
            delay=int(obj.get("delay", 0)),
            partitions=[tuple(p) for p in obj.get("partitions", [])],
            seed=int(obj.get("seed", 0)),
        )

    def severed(self, src: str, dst: str) -> bool:
        return any(
            {src, dst} == {a, b} for a, b in self.partitions
        )

    def drop_probability(self, src: str, dst: str) -> float:
        return self.drop.get(f"{src}->{dst}", self.drop.get("*", 0.0))


@dataclass
class Scenario:
    name: str
    registers: list[RegisterDef]
    replicas: list[str]
    script: list[dict]
    reconciler: str = "replay-all"
    lww_tie: str = "strict"
    plans: dict[str, MergePlan] = field(default_factory=dict)
    network: NetworkModel = field(default_factory=NetworkModel)

    @classmethod
    def from_json(cls, obj: dict) -> "Scenario":
        registers = [
            RegisterDef(
                kind=r["kind"],
                initial=r.get("initial", 0),
                timestamp=r.get("t"),
            )
            for r in obj.get("registers", [])
        ]
        plans = {
            p["trigger"]: MergePlan.from_json(p) for p in obj.get("plans", [])
        }
        return cls(
            name=obj.get("name", "scenario"),
            registers=registers,
            replicas=list(obj.get("replicas", [])),
            script=list(obj.get("script", [])),
            reconciler=obj.get("reconciler", "replay-all"),
            lww_tie=obj.get("lww_tie", "strict"),
            plans=plans,
            network=NetworkModel.from_json(obj.get("network")),
        )

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class ConvergenceReport:
    name: str
    converged: bool
    states: dict[str, dict[str, Any]]
    residual_conflicts: list[dict]
    rounds: int
    resolves: int
    dropped: list[dict]
    assert_failures: list[str]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "converged": self.converged,
            "states": self.states,
            "residual_conflicts": self.residual_conflicts,
            "rounds": self.rounds,
            "resolves": self.resolves,
            "dropped": self.dropped,
            "assert_failures": self.assert_failures,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def _json_val(val: Any) -> Any:
    if isinstance(val, frozenset):
        return sorted(val, key=repr)
    return val


class ScenarioRunner:
    """Executes one scenario's script; also drivable step-by-step (serve mode)."""

    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        on_event: Callable[[int, dict, "ScenarioRunner"], None] | None = None,
    ):
        self.scenario = scenario
        self.registry, self.base_graph = build_memory(scenario.registers)
        self.replicas: dict[str, Replica] = {
            name: make_replica(name, self.registry, self.base_graph)
            for name in scenario.replicas
        }
        self.reconciler: Reconciler = reconciler_by_name(
            scenario.reconciler,
            plans={k: v for k, v in scenario.plans.items()},
            lww_tie=scenario.lww_tie,
        )
        net_seed = scenario.network.seed if seed is None else seed
        self.rng = random.Random(net_seed)
        self.on_event = on_event
        self.cursor = 0
        self.frozen = False
        self.marks: dict[str, int] = {}
        self.resolve_log: list[tuple[int, str]] = []
        self.sync_count = 0
        self.dropped: list[dict] = []
        self.assert_failures: list[str] = []
        # Everything published before the script starts: the constructors.
        self.published: dict[str, list[tuple[int, EntailmentGraph]]] = {
            name: [(-1, self.base_graph.copy())] for name in scenario.replicas
        }

    # -- script execution ----------------------------------------------------

    def remaining(self) -> int:
        return len(self.scenario.script) - self.cursor

    def run(self) -> ConvergenceReport:
        while self.remaining():
            self.step()
        return self.report()

    def step(self) -> dict:
        if not self.remaining():
            raise ScriptError("script exhausted")
        event = self.scenario.script[self.cursor]
        index = self.cursor
        self.cursor += 1
        result = self._execute(index, event)
        if self.on_event is not None:
            self.on_event(index, event, self)
        return result

    def _replica(self, name: str) -> Replica:
        try:
            return self.replicas[name]
        except KeyError:
            raise ScriptError(f"undeclared replica {name!r}") from None

    def _execute(self, index: int, event: dict) -> dict:
        kind = event.get("event")
        if kind == "issue":
            if self.frozen:
                raise ScriptError(f"issue after freeze at step {index}")
            replica = self._replica(event["replica"])
            descriptors = [ActionDescriptor.from_json(a) for a in event["actions"]]
            op = issue(replica, descriptors)
            return {"event": "issue", "op": str(op.id)}
        if kind == "publish":
            replica = self._replica(event["replica"])
            snapshot = publish(replica)
            self.published[replica.id].append((index, snapshot))
            return {"event": "publish", "replica": replica.id}
        if kind == "sync":
            return self._sync_event(index, event)
        if kind == "freeze":
            self.frozen = True
            return {"event": "freeze"}
        if kind == "mark":
            self.marks[event["name"]] = index
            return {"event": "mark", "name": event["name"]}
        if kind == "assert":
            failure = self._check_assert(index, event)
            if failure:
                self.assert_failures.append(failure)
            return {"event": "assert", "ok": failure is None}
        raise ScriptError(f"unknown event kind {kind!r} at step {index}")

    def _sync_event(self, index: int, event: dict) -> dict:
        src = self._replica(event["from"]).id
        dst = self._replica(event["to"]).id
        if self.scenario.network.severed(src, dst):
            self.dropped.append({"step": index, "from": src, "to": dst, "why": "partition"})
            return {"event": "sync", "dropped": True}
        p = self.scenario.network.drop_probability(src, dst)
        if p > 0 and self.rng.random() < p:
            self.dropped.append({"step": index, "from": src, "to": dst, "why": "drop"})
            return {"event": "sync", "dropped": True}
        snapshot = self._visible_snapshot(src, index)
        report = sync(self.replicas[dst], snapshot, self.reconciler)
        self.sync_count += 1
        for conflict, merge in report.resolved:
            self.resolve_log.append((index, str(merge)))
        return {"event": "sync", "dropped": False, "report": report.to_json()}

    def _visible_snapshot(self, src: str, index: int) -> EntailmentGraph:
        cutoff = index - self.scenario.network.delay
        visible = [g for step, g in self.published[src] if step <= cutoff]
        return visible[-1] if visible else self.base_graph.copy()

    # -- asserts ----------------------------------------------------------------

    def _check_assert(self, index: int, event: dict) -> str | None:
        check = event.get("check")
        where = f"assert@{index}"
        if check == "val":
            replica = self._replica(event["replica"])
            got = _json_val(replica.val(int(event["reg"])))
            want = event["equals"]
            if got != want:
                return f"{where}: val({replica.id}, r{event['reg']}) = {got!r}, want {want!r}"
            return None
        if check == "vals_equal":
            reg = int(event["reg"])
            vals = {n: _json_val(r.val(reg)) for n, r in self.replicas.items()}
            if len({json.dumps(v, sort_keys=True) for v in vals.values()}) != 1:
                return f"{where}: register {reg} values differ: {vals}"
            return None
        if check == "converged":
            if not self._converged():
                return f"{where}: not converged"
            return None
        if check == "conflicts":
            replica = self._replica(event["replica"])
            got = len(replica.pending)
            want = int(event["count"])
            if got != want:
                return f"{where}: {replica.id} has {got} pending conflicts, want {want}"
            return None
        if check == "resolves":
            want = int(event["count"])
            if len(self.resolve_log) != want:
                return f"{where}: {len(self.resolve_log)} resolves, want {want}"
            return None
        if check == "no_resolves_since":
            mark = event["mark"]
            if mark not in self.marks:
                raise ScriptError(f"{where}: unknown mark {mark!r}")
            after = [m for step, m in self.resolve_log if step > self.marks[mark]]
            if after:
                return f"{where}: resolves after mark {mark!r}: {after}"
            return None
        if check == "graphs_equal":
            graphs = list(self.replicas.values())
            if not all(r.graph == graphs[0].graph for r in graphs):
                return f"{where}: graphs differ"
            return None
        if check == "valid_history":
            replica = self._replica(event["replica"])
            hist = replica.history()
            ok = validate_history(hist, self.registry)
            if ok != bool(event.get("equals", True)):
                return f"{where}: validate_history({replica.id}) = {ok}"
            return None
        raise ScriptError(f"unknown assert check {check!r} at step {index}")

    # -- reporting ----------------------------------------------------------------

    def states(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        for name in sorted(self.replicas):
            replica = self.replicas[name]
            out[name] = {
                str(i): _json_val(replica.val(i))
                for i in range(len(self.registry))
            }
        return out

    def _converged(self) -> bool:
        states = self.states()
        blobs = {json.dumps(s, sort_keys=True) for s in states.values()}
        residual = sum(len(r.pending) for r in self.replicas.values())
        return len(blobs) <= 1 and residual == 0

    def residual_conflicts(self) -> list[dict]:
        from .wire import action_to_json

        out = []
        for name in sorted(self.replicas):
            for pc in self.replicas[name].pending:
                entry = {
                    "replica": name,
                    "kind": pc.kind,
                    "trigger": str(pc.conflict.trigger),
                    "trigger_actions": [
                        action_to_json(a) for a in pc.trigger_op.actions
                    ],
                    "trigger_premises": sorted(
                        str(p) for p in pc.trigger_op.premises
                    ),
                    "conflicting_premises": sorted(
                        str(p) for p in pc.conflict.conflicting_premises
                    ),
                    "scope": sorted(str(o) for o in pc.conflict.scope),
                    "participants": sorted(str(o) for o in pc.conflict.participants),
                }
                out.append(entry)
        return out

    def report(self) -> ConvergenceReport:
        return ConvergenceReport(
            name=self.scenario.name,
            converged=self._converged(),
            states=self.states(),
            residual_conflicts=self.residual_conflicts(),
            rounds=self.sync_count,
            resolves=len(self.resolve_log),
            dropped=self.dropped,
            assert_failures=self.assert_failures,
        )

    # -- serve-mode entry points ---------------------------------------------------

    def submit_plan(self, trigger: str, plan: MergePlan) -> SyncReport:
        opid = OpId.parse(trigger)
        owner = None
        for replica in self.replicas.values():
            if any(pc.conflict.trigger == opid for pc in replica.pending):
                owner = replica
                break
        if owner is None:
            raise ScriptError(f"no pending conflict with trigger {trigger}")
        if isinstance(self.reconciler, Reconciler) and hasattr(self.reconciler, "plans"):
            self.reconciler.plans[trigger] = plan
        return submit_plan(owner, opid, plan)

    def manual_sync(self, src: str, dst: str) -> SyncReport:
        snapshot = publish(self._replica(src))
        report = sync(self._replica(dst), snapshot, self.reconciler)
        self.sync_count += 1
        for conflict, merge in report.resolved:
            self.resolve_log.append((self.cursor, str(merge)))
        return report


def run_scenario(
    scenario: Scenario,
    seed: int | None = None,
    on_event=None,
) -> ConvergenceReport:
    return ScenarioRunner(scenario, seed=seed, on_event=on_event).run()


# -- oracle: exhaustive topological interpretation --------------------------------


def all_topological_orders(graph: EntailmentGraph) -> Iterator[tuple[OpId, ...]]:
    ops = [o for o in graph.nodes if o != TOMBSTONE_ID]
    preds = {o: graph._order_preds(o) - {TOMBSTONE_ID} for o in ops}

    def recurse(placed: list[OpId], remaining: set[OpId]):
        if not remaining:
            yield tuple(placed)
            return
        placed_set = set(placed)
        for o in sorted(remaining, key=lambda x: x.sort_key):
            if preds[o] <= placed_set:
                placed.append(o)
                remaining.discard(o)
                yield from recurse(placed, remaining)
                remaining.add(o)
                placed.pop()

    yield from recurse([], set(ops))


def oracle_state_set(
    graph: EntailmentGraph, registry: RegisterTable, limit: int = 8
) -> set[tuple]:
    """Interpret EVERY topological order; return the set of distinct states."""
    n = sum(1 for o in graph.nodes if o != TOMBSTONE_ID)
    if n > limit:
        raise TooLarge(f"{n} operations exceeds the enumeration bound {limit}")
    states = set()
    for order in all_topological_orders(graph):
        hist = History(
            ops=tuple(o for o in order if not graph.is_cancelled(o)), graph=graph
        )
        states.add(registry.state_fingerprint(hist))
    return states


# -- oracle: join-semilattice laws under permuted delivery --------------------------


@dataclass
class JoinLawFailure:
    trial: int
    reason: str

    def __str__(self) -> str:
        return f"trial {self.trial}: {self.reason}"


def _delta_for_add(op: Operation) -> EntailmentGraph:
    delta = EntailmentGraph()
    delta.nodes[op.id] = op
    return delta


def _delta_for_rebase(opid: OpId, target: OpId) -> EntailmentGraph:
    delta = EntailmentGraph()
    delta.rebases[opid] = {target}
    return delta


def oracle_join_laws(
    seed: int,
    trials: int,
    max_ops: int = 10,
    max_rebases: int = 3,
    fanout: int = 3,
) -> JoinLawFailure | None:
    """Random graph-update traces, deliveries permuted per virtual replica.

    Checks strong eventual consistency of the graph data type: equal delivered
    updates imply structurally equal graphs, regardless of delivery order, and
    the join operator is commutative, associative, and idempotent.
    """
    rng = random.Random(seed)
    for trial in range(trials):
        registry, base = build_memory([RegisterDef("arith", 0)])
        truth = base.copy()
        deltas: list[EntailmentGraph] = []
        n_ops = rng.randint(1, max_ops)
        for i in range(n_ops):
            existing = [o for o in truth.nodes if o != TOMBSTONE_ID]
            k = rng.randint(0, min(2, len(existing)))
            premises = frozenset(rng.sample(existing, k))
            opid = OpId("t", i + 1)
            op = Operation(
                id=opid,
                actions=(Action(op=opid, index=0, register=0, kind="add", value=i),),
                premises=premises,
            )
            truth.add(premises, op)
            deltas.append(_delta_for_add(op))
        nodes = [o for o in truth.nodes if o != TOMBSTONE_ID]
        for _ in range(rng.randint(0, max_rebases)):
            opid = rng.choice(nodes)
            target = rng.choice(nodes + [TOMBSTONE_ID])
            try:
                truth.record_rebase(opid, target)
            except CycleDetected:
                continue
            deltas.append(_delta_for_rebase(opid, target))
        # Duplicate a random delta: delivery may repeat updates (idempotence).
        if deltas:
            deltas.append(rng.choice(deltas))

        finals = []
        for _ in range(fanout):
            order = list(deltas)
            rng.shuffle(order)
            g = base.copy()
            for delta in order:
                g = g.join(delta)
            finals.append(g)
        for i, g in enumerate(finals):
            if g != truth:
                return JoinLawFailure(trial, f"replica {i} diverged from the source")
        if finals[0] != finals[1] or finals[1] != finals[2 % fanout]:
            return JoinLawFailure(trial, "replicas diverged from each other")

        # Semilattice laws on random intermediate states.
        cut = rng.randint(0, len(deltas))
        a = base.copy()
        for delta in deltas[:cut]:
            a = a.join(delta)
        b = base.copy()
        for delta in deltas[cut:]:
            b = b.join(delta)
        c = finals[0]
        if a.join(a) != a:
            return JoinLawFailure(trial, "join not idempotent")
        if a.join(b) != b.join(a):
            return JoinLawFailure(trial, "join not commutative")
        if a.join(b).join(c) != a.join(b.join(c)):
            return JoinLawFailure(trial, "join not associative")
    return None
