"""Operation journal core: operations, the entailment graph, and its relations.

An operation is an identified, transactional sequence of actions carrying an
immutable premise set.  Premises are the operations whose effects the new
operation logically relies on; they form the *entails* edges of a grow-only
DAG, the entailment graph.  The graph is the replicated source of truth: a
deterministic topological sort of it induces the local history, and all
visibility / discard / conflict queries are answered against that history.

Two edge families exist:

* entails edges, derived from each node's premise set;
* rebase edges, a grow-only map from a rebased operation to its merge
  target(s).  A rebased operation contributes no actions; an operation
  rebased to the reserved tombstone is cancelled outright and omitted from
  induced histories.

Joining two graphs is componentwise set union, which makes the graph a
join-semilattice (commutative, associative, idempotent) and therefore
strongly eventually consistent under arbitrary delivery orders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Iterator

from .errors import (
    CycleDetected,
    DuplicateOperation,
    RegisterMismatch,
    UnknownOperation,
    UnknownPremise,
)

if TYPE_CHECKING:
    from .registers import RegisterTable

# Reserved replica names.  User replicas must not start with "@".
INIT_REPLICA = "@init"
VOID_REPLICA = "@void"


@dataclass(frozen=True)
class OpId:
    """Globally unique operation identity: per-replica issue counter + replica name.

    The total order (counter first, then replica name) is used only for
    deterministic tie-breaking, never as a causality signal.
    """

    replica: str
    counter: int

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.counter, self.replica)

    def __lt__(self, other: "OpId") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self) -> str:
        return f"{self.replica}:{self.counter}"

    @classmethod
    def parse(cls, text: str) -> "OpId":
        replica, _, counter = text.rpartition(":")
        if not replica or not counter.isdigit():
            raise ValueError(f"malformed operation id {text!r}")
        return cls(replica, int(counter))


TOMBSTONE_ID = OpId(VOID_REPLICA, 0)


@dataclass(frozen=True)
class Action:
    """One atomic register effect inside an operation.

    ``(op, index)`` identifies the action; ``kind`` must belong to the action
    basis of ``register``.  ``timestamp`` is a caller-supplied logical integer,
    only meaningful for timestamped writes.
    """

    op: OpId
    index: int
    register: int
    kind: str
    value: Any = None
    timestamp: int | None = None

    @property
    def uid(self) -> tuple[OpId, int]:
        return (self.op, self.index)

    def summary(self) -> str:
        parts = [self.kind, f"r{self.register}"]
        if self.value is not None:
            parts.append(str(self.value))
        if self.timestamp is not None:
            parts.append(f"t{self.timestamp}")
        return " ".join(parts)


@dataclass(frozen=True)
class Operation:
    """Transactional action sequence with an immutable premise set.

    The premise set is computed once at issue time from the issuing replica's
    interpreted state and never mutated afterwards; interpreters observe
    either all of an operation's actions or none.
    """

    id: OpId
    actions: tuple[Action, ...]
    premises: frozenset[OpId]


TOMBSTONE = Operation(id=TOMBSTONE_ID, actions=(), premises=frozenset())


class EntailmentGraph:
    """Grow-only DAG of operations with entails and rebase edges.

    The reserved tombstone node is present in every graph from birth so that
    cancellation is always expressible; it carries no actions or premises and
    never appears in premise sets or induced histories.
    """

    def __init__(self, constructors: dict[int, OpId] | None = None):
        self.nodes: dict[OpId, Operation] = {TOMBSTONE_ID: TOMBSTONE}
        self.rebases: dict[OpId, set[OpId]] = {}
        self.constructors: dict[int, OpId] = dict(constructors or {})

    # -- construction -----------------------------------------------------

    def add(self, premises: Iterable[OpId], op: Operation) -> None:
        """Add a node with entails edges from each premise."""
        premises = frozenset(premises)
        if op.id in self.nodes:
            raise DuplicateOperation(str(op.id))
        if premises != op.premises:
            raise UnknownPremise(
                f"{op.id}: stated premises {sorted(map(str, premises))} "
                f"differ from the operation's own {sorted(map(str, op.premises))}"
            )
        for p in premises:
            if p not in self.nodes:
                raise UnknownPremise(f"{op.id}: premise {p} not in graph")
            if p == TOMBSTONE_ID:
                raise UnknownPremise(f"{op.id}: the tombstone can never be a premise")
        self.nodes[op.id] = op

    def record_rebase(self, op: OpId, target: OpId) -> None:
        """Insert ``target`` into ``op``'s grow-only rebase set.

        Rejected when the target would succeed the rebased operation, which
        is exactly the cycle condition over entails plus rebase edges.
        """
        if op not in self.nodes or target not in self.nodes:
            missing = op if op not in self.nodes else target
            raise UnknownOperation(str(missing))
        if target in self.rebases.get(op, ()):
            return
        if op == target or self._order_reaches(op, target):
            raise CycleDetected(f"rebase target {target} succeeds {op}")
        self.rebases.setdefault(op, set()).add(target)

    def join(self, other: "EntailmentGraph") -> "EntailmentGraph":
        """Componentwise union of nodes, entails edges and rebase sets."""
        from .errors import ConstructorMismatch

        for reg, ctor in other.constructors.items():
            if reg in self.constructors and self.constructors[reg] != ctor:
                raise ConstructorMismatch(
                    f"register {reg}: {self.constructors[reg]} vs {ctor}"
                )
        merged = EntailmentGraph({**self.constructors, **other.constructors})
        merged.nodes = {**self.nodes, **other.nodes}
        for src in (self.rebases, other.rebases):
            for op, targets in src.items():
                merged.rebases.setdefault(op, set()).update(targets)
        return merged

    def copy(self) -> "EntailmentGraph":
        dup = EntailmentGraph(self.constructors)
        dup.nodes = dict(self.nodes)
        dup.rebases = {op: set(ts) for op, ts in self.rebases.items()}
        return dup

    # -- structure queries -------------------------------------------------

    def __contains__(self, opid: OpId) -> bool:
        return opid in self.nodes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EntailmentGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and {k: v for k, v in self.rebases.items() if v}
            == {k: v for k, v in other.rebases.items() if v}
            and self.constructors == other.constructors
        )

    def __hash__(self):  # graphs are mutable; identity hashing only
        return id(self)

    def operation(self, opid: OpId) -> Operation:
        try:
            return self.nodes[opid]
        except KeyError:
            raise UnknownOperation(str(opid)) from None

    def operations(self) -> Iterator[Operation]:
        for opid, node in self.nodes.items():
            if opid != TOMBSTONE_ID:
                yield node

    def rebase_targets(self, opid: OpId) -> frozenset[OpId]:
        return frozenset(self.rebases.get(opid, ()))

    def is_rebased(self, opid: OpId) -> bool:
        return bool(self.rebases.get(opid))

    def is_cancelled(self, opid: OpId) -> bool:
        return TOMBSTONE_ID in self.rebases.get(opid, ())

    def effective_premises(self, opid: OpId) -> frozenset[OpId]:
        """Premises as seen by conflict detection.

        A rebased operation's incoming edges are dropped: its premises
        flow through its merge target instead, so it can no longer be a
        conflict participant.
        """
        if self.is_rebased(opid):
            return frozenset()
        return self.operation(opid).premises

    def entails_edges(self) -> Iterator[tuple[OpId, OpId]]:
        for opid, node in self.nodes.items():
            for p in node.premises:
                yield (p, opid)

    def direct_dependents(self, opid: OpId) -> set[OpId]:
        return {o.id for o in self.operations() if opid in o.premises}

    # -- reachability -------------------------------------------------------

    def entails_star(self, a: OpId, b: OpId) -> bool:
        """Reflexive transitive closure of entails, closed under rebasing.

        The rebase closure rule: whatever entails a rebased operation also
        entails its (non-tombstone) merge targets.
        """
        for opid in (a, b):
            if opid not in self.nodes:
                raise UnknownOperation(str(opid))
        if a == b:
            return True
        seen = {a}
        frontier = [a]
        while frontier:
            cur = frontier.pop()
            for nxt in self._entail_successors(cur):
                if nxt == b:
                    return True
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    def _entail_successors(self, opid: OpId) -> set[OpId]:
        succ: set[OpId] = set()
        for node in self.operations():
            if opid in node.premises:
                succ.add(node.id)
                succ.update(t for t in self.rebases.get(node.id, ()) if t != TOMBSTONE_ID)
        return succ

    def concurrent(self, a: OpId, b: OpId) -> bool:
        return not self.entails_star(a, b) and not self.entails_star(b, a)

    def _order_preds(self, opid: OpId) -> set[OpId]:
        # Ordering constraints: premises precede, and merge targets precede
        # the operations rebased to them.
        node = self.nodes[opid]
        preds = set(node.premises)
        preds.update(t for t in self.rebases.get(opid, ()) if t != TOMBSTONE_ID)
        return preds

    def _order_reaches(self, a: OpId, b: OpId) -> bool:
        # True when b is reachable from a over entails plus rebase order edges.
        seen = {a}
        frontier = [a]
        while frontier:
            cur = frontier.pop()
            for node in self.nodes.values():
                if node.id in seen:
                    continue
                if cur in self._order_preds(node.id):
                    if node.id == b:
                        return True
                    seen.add(node.id)
                    frontier.append(node.id)
        return False

    # -- history induction ---------------------------------------------------

    def topo_order(self) -> list[OpId]:
        """Deterministic topological order of every node except the tombstone.

        Among ready nodes the smallest OpId (counter, then replica name) goes
        first, so structurally equal graphs induce identical orders.
        """
        pending = {opid for opid in self.nodes if opid != TOMBSTONE_ID}
        emitted: set[OpId] = {TOMBSTONE_ID}
        order: list[OpId] = []
        while pending:
            ready = [
                opid for opid in pending if self._order_preds(opid) <= emitted
            ]
            if not ready:
                raise CycleDetected(
                    f"no ready node among {sorted(str(o) for o in pending)}"
                )
            nxt = min(ready, key=lambda o: o.sort_key)
            pending.discard(nxt)
            emitted.add(nxt)
            order.append(nxt)
        return order

    def induce_history(self) -> "History":
        """Induce the local history: topological order minus cancelled operations.

        Rebased (but not cancelled) operations remain as empty entries so
        premise bookkeeping and reachability queries stay answerable.
        """
        ops = tuple(o for o in self.topo_order() if not self.is_cancelled(o))
        return History(ops=ops, graph=self)

    def fingerprint(self) -> tuple:
        """Hashable structural identity, used for change detection."""
        nodes = tuple(
            (
                str(opid),
                tuple(
                    (a.register, a.kind, _freeze(a.value), a.timestamp)
                    for a in node.actions
                ),
                tuple(sorted(str(p) for p in node.premises)),
            )
            for opid, node in sorted(self.nodes.items(), key=lambda kv: kv[0].sort_key)
        )
        rebases = tuple(
            (str(op), tuple(sorted(str(t) for t in ts)))
            for op, ts in sorted(self.rebases.items(), key=lambda kv: kv[0].sort_key)
            if ts
        )
        return (nodes, rebases)


def _freeze(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    return value


@dataclass(frozen=True)
class History:
    """Ordered sequence of operations induced from an entailment graph."""

    ops: tuple[OpId, ...]
    graph: EntailmentGraph
    hidden: frozenset[OpId] = field(default_factory=frozenset)

    def __contains__(self, opid: OpId) -> bool:
        return opid in self.ops

    def __len__(self) -> int:
        return len(self.ops)

    def _contributes(self, opid: OpId) -> bool:
        return not self.graph.is_rebased(opid) and opid not in self.hidden

    def projection(self, register: int) -> tuple[Action, ...]:
        """Per-register action sequence; rebased operations contribute nothing."""
        out: list[Action] = []
        for opid in self.ops:
            if not self._contributes(opid):
                continue
            for action in self.graph.operation(opid).actions:
                if action.register == register:
                    out.append(action)
        return tuple(out)

    def rollback(self, target: OpId) -> "History":
        """Remove ``target`` and every operation that transitively depends on it."""
        if target not in self.graph.nodes:
            raise UnknownOperation(str(target))
        survivors = tuple(
            o for o in self.ops if not self.graph.entails_star(target, o)
        )
        return History(ops=survivors, graph=self.graph, hidden=self.hidden)

    def hide(self, ops: Iterable[OpId]) -> "History":
        """View with the given operations treated as empty (pending rollback)."""
        return History(
            ops=self.ops, graph=self.graph, hidden=self.hidden | frozenset(ops)
        )

    def restricted_to_cone(self, tip: OpId) -> "History":
        """Subhistory of the causal ancestors of ``tip`` (inclusive)."""
        kept = tuple(o for o in self.ops if self.graph.entails_star(o, tip))
        return History(ops=kept, graph=self.graph, hidden=self.hidden)


def rollback(history: History, target: OpId) -> History:
    return history.rollback(target)


def premises_of(graph: EntailmentGraph, op: OpId) -> frozenset[OpId]:
    """The stored immutable premise set (the union over the operation's actions)."""
    return graph.operation(op).premises


def entails_star(graph: EntailmentGraph, a: OpId, b: OpId) -> bool:
    return graph.entails_star(a, b)


def concurrent(graph: EntailmentGraph, a: OpId, b: OpId) -> bool:
    return graph.concurrent(a, b)


# -- visibility, discards, conflicts ---------------------------------------


def is_visible(action: Action, history: History, registry: "RegisterTable") -> bool:
    """Dispatch to the register's visibility predicate over its projection."""
    return registry.visible(action, history.projection(action.register))


def discarded_by(
    a1: Action, a2: Action, history: History, registry: "RegisterTable"
) -> bool:
    """Paper three-conjunct discard: a1 entails a2, and a1 is visible without
    a2 (and its dependents) but not with it."""
    if a1.register != a2.register:
        raise RegisterMismatch(f"{a1.summary()} vs {a2.summary()}")
    if a1.op == a2.op:
        return False
    if a1.op not in history.graph.operation(a2.op).premises:
        return False
    full = history.projection(a1.register)
    if registry.visible(a1, full):
        return False
    removed = history.rollback(a2.op).projection(a1.register)
    return registry.visible(a1, removed)


def op_discards(
    discarder: OpId, discarded: OpId, history: History, registry: "RegisterTable"
) -> bool:
    """Operation-level lift: some action pair on a shared register discards."""
    g = history.graph
    if g.is_rebased(discarder):
        return False
    victim = g.operation(discarded)
    culprit = g.operation(discarder)
    for a1 in victim.actions:
        for a2 in culprit.actions:
            if a1.register != a2.register:
                continue
            if discarded_by(a1, a2, history, registry):
                return True
    return False


def common_premises(graph: EntailmentGraph, ops: Iterable[OpId]) -> frozenset[OpId]:
    """Intersection of the stored premise sets."""
    ops = list(ops)
    if not ops:
        return frozenset()
    shared = set(graph.operation(ops[0]).premises)
    for opid in ops[1:]:
        shared &= graph.operation(opid).premises
    return frozenset(shared)


def conflicting_premises(
    ops: Iterable[OpId], history: History, registry: "RegisterTable"
) -> frozenset[OpId]:
    """Common premises that entail one participant while being discarded by another.

    The discard half of the condition is evaluated inside the discarder's own
    causal cone, so that the verdict depends only on the graph and not on
    whichever concurrent operations happen to share the evaluation history.
    """
    ops = list(dict.fromkeys(ops))
    g = history.graph
    candidates = [o for o in ops if not g.is_rebased(o)]
    if len(candidates) < 2:
        return frozenset()
    shared = set(g.effective_premises(candidates[0]))
    for opid in candidates[1:]:
        shared &= g.effective_premises(opid)
    result = set()
    for p in shared:
        if g.is_rebased(p):
            continue  # an emptied premise has no effect left to discard
        entailed = [o for o in candidates if p in g.operation(o).premises]
        for oj in entailed:
            cone = history.restricted_to_cone(oj)
            if op_discards(oj, p, cone, registry):
                # The discard must hit a *concurrent* reliance on p; an
                # operation never conflicts with its own causal ancestry.
                if any(oi != oj and g.concurrent(oi, oj) for oi in entailed):
                    result.add(p)
                    break
    return frozenset(result)


def compatible(
    o1: OpId, o2: OpId, history: History, registry: "RegisterTable"
) -> bool:
    return not conflicting_premises((o1, o2), history, registry)


def history_compatible(
    history: History, trigger: OpId, registry: "RegisterTable"
) -> bool:
    """History-level lift: every contributing operation is compatible with the trigger."""
    for opid in history.ops:
        if opid == trigger or not history._contributes(opid):
            continue
        if not compatible(opid, trigger, history, registry):
            return False
    return True


def validate_history(history: History, registry: "RegisterTable") -> bool:
    """True when the order respects entailment and all pairs are compatible."""
    seen: set[OpId] = set()
    g = history.graph
    for opid in history.ops:
        node = g.operation(opid)
        if any(p not in seen and p in history.ops for p in node.premises):
            return False
        seen.add(opid)
    ops = list(history.ops)
    for i, o1 in enumerate(ops):
        for o2 in ops[i + 1 :]:
            if not compatible(o1, o2, history, registry):
                return False
    return True


@dataclass(frozen=True)
class Conflict:
    """A trigger operation, its conflicting premises, and the affected scope."""

    trigger: OpId
    conflicting_premises: frozenset[OpId]
    scope: frozenset[OpId]
    participants: frozenset[OpId]

    def describe(self) -> str:
        prem = ", ".join(sorted(str(p) for p in self.conflicting_premises))
        return f"conflict at {self.trigger} over [{prem}]"
