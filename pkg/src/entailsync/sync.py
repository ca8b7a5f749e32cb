"""Replica lifecycle and synchronization.

A replica owns an entailment graph and integrates foreign graphs through
:func:`sync`: remote operations are processed in causal order; operations
rebased remotely are rolled back locally (their effects vanish, the nodes
stay); cancelled operations are skipped; unseen compatible operations are
applied; unseen incompatible operations trigger :func:`resolve`.

Resolution follows five steps: collect the premises shared by the trigger and
each incompatible local operation, widen to every operation those premises
transitively entail (the scope), let a reconciler partition the scope into
keep/cancel sets and produce a merged action sequence, build the merge
operation carrying the kept operations' premises, then rebase kept operations
under the merge and cancelled ones under the tombstone.

Reconcilers may also defer (interactive use, or a scripted plan that has not
arrived yet): the conflict is then surfaced as pending, integration of
anything causally after the trigger is suspended, and a later sync with a
plan picks up where this one left off.  Deferred triggers whose conflicting
premises overlap are absorbed into a single resolve, so one merge operation
can cover several mutually conflicting concurrent operations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    ConstructorMismatch,
    EmptyOperation,
    ForeignPremise,
    IllegalPlan,
    LocalConflict,
    NonTermination,
    UnknownOperation,
)
from .journal import (
    Action,
    Conflict,
    EntailmentGraph,
    History,
    OpId,
    Operation,
    TOMBSTONE_ID,
    common_premises,
    conflicting_premises,
    history_compatible,
)
from .registers import ActionDescriptor, RegisterTable, descriptor_of


@dataclass
class Replica:
    """Single-writer owner of one entailment graph."""

    id: str
    registry: RegisterTable
    graph: EntailmentGraph
    counter: int = 0
    pending: list["PendingConflict"] = field(default_factory=list)
    published: EntailmentGraph | None = None

    def history(self) -> History:
        return self.graph.induce_history()

    def next_opid(self) -> OpId:
        self.counter += 1
        return OpId(self.id, self.counter)

    def val(self, register: int):
        h = self.history()
        return self.registry.val(register, h.projection(register))

    def pending_conflicts(self) -> list[Conflict]:
        return [pc.conflict for pc in self.pending]


def make_replica(name: str, registry: RegisterTable, base_graph: EntailmentGraph) -> Replica:
    if not name or name.startswith("@"):
        raise ValueError(f"invalid replica name {name!r}")
    return Replica(id=name, registry=registry, graph=base_graph.copy())


@dataclass(frozen=True)
class MergePlan:
    """Partition of a conflict scope plus the merge's action sequence."""

    keep: frozenset[OpId]
    cancel: frozenset[OpId]
    merged_actions: tuple[ActionDescriptor, ...]

    @classmethod
    def from_json(cls, obj: dict) -> "MergePlan":
        return cls(
            keep=frozenset(OpId.parse(o) for o in obj.get("keep", [])),
            cancel=frozenset(OpId.parse(o) for o in obj.get("cancel", [])),
            merged_actions=tuple(
                ActionDescriptor.from_json(a) for a in obj.get("merged", [])
            ),
        )

    def to_json(self) -> dict:
        return {
            "keep": sorted(str(o) for o in self.keep),
            "cancel": sorted(str(o) for o in self.cancel),
            "merged": [a.to_json() for a in self.merged_actions],
        }


@dataclass
class PendingConflict:
    """A surfaced conflict waiting for a plan; `remote` is the snapshot whose
    integration suspended on it."""

    conflict: Conflict
    trigger_op: Operation
    remote: EntailmentGraph | None
    kind: str = "remote-trigger"  # or "premise-revoked"


@dataclass
class SyncReport:
    applied: list[OpId] = field(default_factory=list)
    skipped_cancelled: list[OpId] = field(default_factory=list)
    rolled_back: list[OpId] = field(default_factory=list)
    conflicts: list[Conflict] = field(default_factory=list)
    resolved: list[tuple[Conflict, OpId | None]] = field(default_factory=list)

    def is_noop(self) -> bool:
        return not (
            self.applied
            or self.skipped_cancelled
            or self.rolled_back
            or self.conflicts
            or self.resolved
        )

    def to_json(self) -> dict:
        return {
            "applied": [str(o) for o in self.applied],
            "skipped_cancelled": [str(o) for o in self.skipped_cancelled],
            "rolled_back": [str(o) for o in self.rolled_back],
            "conflicts": [_conflict_json(c) for c in self.conflicts],
            "resolved": [
                {"conflict": _conflict_json(c), "merge": str(m) if m else None}
                for c, m in self.resolved
            ],
        }


def _conflict_json(c: Conflict) -> dict:
    return {
        "trigger": str(c.trigger),
        "conflicting_premises": sorted(str(p) for p in c.conflicting_premises),
        "scope": sorted(str(o) for o in c.scope),
        "participants": sorted(str(o) for o in c.participants),
    }


# -- issue / apply / publish ---------------------------------------------------


def issue(replica: Replica, descriptors: Sequence[ActionDescriptor]) -> Operation:
    """Create and locally apply a new operation.

    Premises are computed per action by the register's entailment rule
    against the replica's current interpreted state, then frozen for good.
    """
    if not descriptors:
        raise EmptyOperation(f"{replica.id}: operation with zero actions")
    for desc in descriptors:
        replica.registry.check_descriptor(desc)
    h = replica.history()
    premises: set[OpId] = set()
    for desc in descriptors:
        projection = h.projection(desc.register)
        state = replica.registry.interpret(desc.register, projection)
        premises |= replica.registry.premises_for(desc, state, projection)
    opid = replica.next_opid()
    actions = tuple(
        Action(
            op=opid,
            index=i,
            register=d.register,
            kind=d.kind,
            value=d.value,
            timestamp=d.timestamp,
        )
        for i, d in enumerate(descriptors)
    )
    op = Operation(id=opid, actions=actions, premises=frozenset(premises))
    apply_op(replica, op)
    return op


def apply_op(replica: Replica, op: Operation) -> None:
    """Append an operation to the local graph, guarding local compatibility."""
    candidate = replica.graph.copy()
    candidate.add(op.premises, op)
    hist = candidate.induce_history()
    if not history_compatible(hist, op.id, replica.registry):
        raise LocalConflict(
            f"{op.id} conflicts with the local history; entailment rule bug?"
        )
    replica.graph.add(op.premises, op)


def publish(replica: Replica) -> EntailmentGraph:
    """Immutable snapshot of the current graph, available for other replicas."""
    replica.published = replica.graph.copy()
    return replica.published


# -- reconcilers ------------------------------------------------------------------


@dataclass(frozen=True)
class ResolveContext:
    """What a reconciler sees: the candidate history with the conflict
    cluster integrated, plus the scope in history order."""

    history: History
    registry: RegisterTable
    scope_order: tuple[OpId, ...]

    def replay_actions(self, keep: Iterable[OpId]) -> tuple[ActionDescriptor, ...]:
        """Kept, still-contributing operations' actions in history order."""
        keep = set(keep)
        out: list[ActionDescriptor] = []
        for opid in self.history.ops:
            if opid not in keep or not self.history._contributes(opid):
                continue
            for action in self.history.graph.operation(opid).actions:
                out.append(descriptor_of(action))
        return tuple(out)


class Reconciler:
    name = "abstract"

    def propose(self, conflict: Conflict, ctx: ResolveContext) -> MergePlan | None:
        raise NotImplementedError


class ReplayAllReconciler(Reconciler):
    """Default strategy: keep everything, replay every kept action in order."""

    name = "replay-all"

    def propose(self, conflict: Conflict, ctx: ResolveContext) -> MergePlan | None:
        keep = frozenset(conflict.scope)
        return MergePlan(
            keep=keep,
            cancel=frozenset(),
            merged_actions=ctx.replay_actions(keep),
        )


class LwwAutoReconciler(Reconciler):
    """Replays only the latest seen write on lww registers.

    ``tie`` controls equal greatest timestamps: ``strict`` defers to a human
    or scripted plan, ``opid-tiebreak`` picks the deterministic winner by
    operation id.
    """

    name = "lww-auto"

    def __init__(self, tie: str = "strict"):
        if tie not in ("strict", "opid-tiebreak"):
            raise ValueError(f"unknown tie policy {tie!r}")
        self.tie = tie

    def propose(self, conflict: Conflict, ctx: ResolveContext) -> MergePlan | None:
        keep = frozenset(conflict.scope)
        actions: list[Action] = []
        for opid in ctx.history.ops:
            if opid not in keep or not ctx.history._contributes(opid):
                continue
            actions.extend(ctx.history.graph.operation(opid).actions)
        merged: list[ActionDescriptor] = []
        for reg in sorted({a.register for a in actions}):
            reg_actions = [a for a in actions if a.register == reg and a.kind != "touch"]
            if ctx.registry.spec_for(reg).kind != "lww":
                merged.extend(descriptor_of(a) for a in reg_actions)
                continue
            if not reg_actions:
                continue
            max_t = max(a.timestamp for a in reg_actions)
            latest = [a for a in reg_actions if a.timestamp == max_t]
            if len({a.op for a in latest}) > 1 and self.tie == "strict":
                return None  # equal greatest timestamps: needs a human decision
            winner = max(latest, key=lambda a: (a.op.sort_key, a.index))
            merged.append(descriptor_of(winner))
        return MergePlan(keep=keep, cancel=frozenset(), merged_actions=tuple(merged))


class ScriptedReconciler(Reconciler):
    """Plans keyed by trigger operation id; anything else defers."""

    name = "scripted"

    def __init__(self, plans: dict[str, MergePlan] | None = None):
        self.plans = dict(plans or {})

    def propose(self, conflict: Conflict, ctx: ResolveContext) -> MergePlan | None:
        return self.plans.get(str(conflict.trigger))


class InteractiveReconciler(ScriptedReconciler):
    """Defers until a plan is submitted through the service API."""

    name = "interactive"

    def submit(self, trigger: str, plan: MergePlan) -> None:
        self.plans[trigger] = plan

    def withdraw(self, trigger: str) -> None:
        self.plans.pop(trigger, None)


def reconciler_by_name(name: str, *, plans=None, lww_tie: str = "strict") -> Reconciler:
    if name == "replay-all":
        return ReplayAllReconciler()
    if name == "lww-auto":
        return LwwAutoReconciler(tie=lww_tie)
    if name == "scripted":
        return ScriptedReconciler(plans)
    if name == "interactive":
        return InteractiveReconciler(plans)
    raise ValueError(f"unknown reconciler {name!r}")


# -- synchronization ---------------------------------------------------------------


def sync(
    replica: Replica, remote: EntailmentGraph, reconciler: Reconciler
) -> SyncReport:
    """Integrate a published foreign graph into the replica."""
    _check_constructors(replica.graph, remote)
    report = SyncReport()
    local = replica.graph

    # Remote rebase knowledge about locally known operations applies eagerly:
    # those operations are rolled back (excluded from compatibility checks)
    # for the whole pass, before their merge operations are even integrated.
    rolled: set[OpId] = set()
    for opid, targets in remote.rebases.items():
        if opid in local.nodes and not local.is_rebased(opid):
            if targets - local.rebase_targets(opid):
                rolled.add(opid)
    hide: set[OpId] = set(rolled)

    suspended: set[OpId] = set()
    for opid in remote.topo_order():
        if opid in replica.graph.nodes:
            continue
        node = remote.operation(opid)
        if _causally_after(remote, opid, suspended):
            suspended.add(opid)
            continue
        if any(p not in replica.graph.nodes for p in node.premises):
            suspended.add(opid)
            continue
        if remote.is_cancelled(opid):
            replica.graph.add(node.premises, node)
            hide.add(opid)
            report.skipped_cancelled.append(opid)
            continue
        if remote.is_rebased(opid):
            # Emptied remotely: integrate the node, never conflict-check it.
            replica.graph.add(node.premises, node)
            hide.add(opid)
            report.applied.append(opid)
            continue
        candidate = replica.graph.copy()
        candidate.add(node.premises, node)
        hist = candidate.induce_history().hide(hide)
        if history_compatible(hist, opid, replica.registry):
            replica.graph.add(node.premises, node)
            report.applied.append(opid)
            continue
        if not _try_resolve(replica, node, remote, reconciler, hide, report):
            suspended.add(opid)

    # Record rebases once their targets exist locally (grow-only sets).
    for opid, targets in sorted(remote.rebases.items(), key=lambda kv: kv[0].sort_key):
        if opid not in replica.graph.nodes:
            continue
        for target in sorted(targets, key=lambda o: o.sort_key):
            if target in replica.graph.nodes:
                if target not in replica.graph.rebase_targets(opid):
                    replica.graph.record_rebase(opid, target)

    report.rolled_back.extend(
        sorted((o for o in rolled if replica.graph.is_rebased(o)), key=lambda o: o.sort_key)
    )
    _surface_revoked_premises(replica, remote, rolled, report)
    _prune_pending(replica)
    return report


def _check_constructors(local: EntailmentGraph, remote: EntailmentGraph) -> None:
    for reg, ctor in remote.constructors.items():
        if reg in local.constructors and local.constructors[reg] != ctor:
            raise ConstructorMismatch(
                f"register {reg}: {local.constructors[reg]} vs {ctor}"
            )


def _causally_after(remote: EntailmentGraph, opid: OpId, blocked: set[OpId]) -> bool:
    if not blocked:
        return False
    seen: set[OpId] = set()
    stack = [opid]
    while stack:
        for p in remote._order_preds(stack.pop()):
            if p in blocked:
                return True
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return False


def _conflict_for(
    hist: History,
    trigger_ids: Sequence[OpId],
    registry: RegisterTable,
) -> Conflict:
    """Identify participants, conflicting premises and scope for the triggers."""
    graph = hist.graph
    participants: set[OpId] = set(trigger_ids)
    for opid in hist.ops:
        if opid in participants or not hist._contributes(opid):
            continue
        if any(
            conflicting_premises((opid, t), hist, registry) for t in trigger_ids
        ):
            participants.add(opid)
    gamma_hat: set[OpId] = set()
    shared: set[OpId] = set()
    for a, b in itertools.combinations(
        sorted(participants, key=lambda o: o.sort_key), 2
    ):
        pair_hat = conflicting_premises((a, b), hist, registry)
        if pair_hat:
            gamma_hat |= pair_hat
            shared |= common_premises(graph, (a, b))
    scope = {
        x
        for x in graph.nodes
        if x != TOMBSTONE_ID
        and not graph.is_cancelled(x)
        and any(p != x and graph.entails_star(p, x) for p in shared)
        # Causal ancestors of a participant are the conflict's kept context,
        # not its scope; rebasing one under the merge would cycle (the merge
        # inherits it as a premise).
        and not any(x != q and graph.entails_star(x, q) for q in participants)
    }
    return Conflict(
        trigger=trigger_ids[0],
        conflicting_premises=frozenset(gamma_hat),
        scope=frozenset(scope),
        participants=frozenset(participants),
    )


def _try_resolve(
    replica: Replica,
    trigger_op: Operation,
    remote: EntailmentGraph | None,
    reconciler: Reconciler,
    hide: set[OpId],
    report: SyncReport,
) -> bool:
    """Run resolve for a trigger; returns False when the reconciler defers."""
    registry = replica.registry
    candidate = replica.graph.copy()
    cluster: list[Operation] = []
    if trigger_op.id not in candidate.nodes:
        candidate.add(trigger_op.premises, trigger_op)
        cluster.append(trigger_op)
    hist = candidate.induce_history().hide(hide)
    conflict = _conflict_for(hist, [trigger_op.id], registry)

    # Absorb pending triggers whose conflicting premises overlap: they are
    # facets of the same conflict and resolve under one merge operation.
    pool = set(conflict.conflicting_premises)
    absorbed: list[PendingConflict] = []
    grew = True
    while grew:
        grew = False
        for pc in replica.pending:
            if pc in absorbed or pc.trigger_op.id in candidate.nodes:
                continue
            if not (pc.conflict.conflicting_premises & pool):
                continue
            if any(p not in candidate.nodes for p in pc.trigger_op.premises):
                continue
            candidate.add(pc.trigger_op.premises, pc.trigger_op)
            cluster.append(pc.trigger_op)
            absorbed.append(pc)
            pool |= pc.conflict.conflicting_premises
            grew = True
    if absorbed:
        hist = candidate.induce_history().hide(hide)
        conflict = _conflict_for(
            hist, [trigger_op.id] + [pc.trigger_op.id for pc in absorbed], registry
        )

    ctx = ResolveContext(
        history=hist,
        registry=registry,
        scope_order=tuple(o for o in hist.ops if o in conflict.scope),
    )
    plan = reconciler.propose(conflict, ctx)
    if plan is None:
        if not any(
            pc.conflict.trigger == conflict.trigger for pc in replica.pending
        ):
            replica.pending.append(
                PendingConflict(conflict=conflict, trigger_op=trigger_op, remote=remote)
            )
            report.conflicts.append(conflict)
        return False

    merge = apply_plan(replica, conflict, cluster, plan, hide)
    for pc in absorbed:
        replica.pending.remove(pc)
    report.resolved.append((conflict, merge.id if merge else None))
    return True


def apply_plan(
    replica: Replica,
    conflict: Conflict,
    cluster: Sequence[Operation],
    plan: MergePlan,
    hide: set[OpId] | None = None,
) -> Operation | None:
    """Steps 3-5 of resolve: validate the partition, build the merge
    operation, rebase kept operations under it and cancelled ones under the
    tombstone.  Returns the merge operation (None for cancel-everything
    plans with no merged actions).

    Runs entirely against a scratch graph first, so a rejected plan
    (IllegalPlan / ForeignPremise / cycle) leaves the replica untouched.
    """
    registry = replica.registry
    keep, cancel = plan.keep, plan.cancel
    if keep & cancel:
        raise IllegalPlan(
            f"keep and cancel overlap: {sorted(str(o) for o in keep & cancel)}"
        )
    if keep | cancel != conflict.scope:
        missing = conflict.scope - (keep | cancel)
        extra = (keep | cancel) - conflict.scope
        raise IllegalPlan(
            f"plan must partition the scope exactly; missing {sorted(map(str, missing))}, "
            f"extra {sorted(map(str, extra))}"
        )

    scratch = replica.graph.copy()
    for op in cluster:
        if op.id not in scratch.nodes:
            scratch.add(op.premises, op)

    merge: Operation | None = None
    if keep or plan.merged_actions:
        gamma: set[OpId] = set()
        for k in keep:
            gamma |= scratch.operation(k).premises
        # Anchors for the no-foreign-premise rule: the participants' premises,
        # plus the participants themselves (a premise-revoked dependent
        # legitimately replays atop the merge that revoked it).
        anchors: set[OpId] = set()
        for p in conflict.participants:
            if p in scratch.nodes:
                anchors.add(p)
                anchors |= scratch.operation(p).premises
        # Natural premises of the merged actions, computed over the state
        # with the whole scope already emptied.
        post = scratch.induce_history().hide(set(conflict.scope) | set(hide or ()))
        for desc in plan.merged_actions:
            registry.check_descriptor(desc)
            projection = post.projection(desc.register)
            state = registry.interpret(desc.register, projection)
            for p in registry.premises_for(desc, state, projection):
                if p in gamma:
                    continue
                if not any(scratch.entails_star(p, q) for q in anchors):
                    raise ForeignPremise(
                        f"merged action {desc.kind} r{desc.register} pulls in {p}, "
                        "outside the participants' ancestry"
                    )
                gamma.add(p)
        merge_id = OpId(replica.id, replica.counter + 1)
        actions = tuple(
            Action(
                op=merge_id,
                index=i,
                register=d.register,
                kind=d.kind,
                value=d.value,
                timestamp=d.timestamp,
            )
            for i, d in enumerate(plan.merged_actions)
        )
        merge = Operation(id=merge_id, actions=actions, premises=frozenset(gamma))
        scratch.add(merge.premises, merge)
        for k in sorted(keep, key=lambda o: o.sort_key):
            assert scratch.operation(k).premises <= merge.premises
            scratch.record_rebase(k, merge_id)
    for c in sorted(cancel, key=lambda o: o.sort_key):
        scratch.record_rebase(c, TOMBSTONE_ID)

    # Everything validated: commit to the real graph.
    graph = replica.graph
    for op in cluster:
        if op.id not in graph.nodes:
            graph.add(op.premises, op)
    if merge is not None:
        replica.counter += 1
        graph.add(merge.premises, merge)
        for k in sorted(keep, key=lambda o: o.sort_key):
            graph.record_rebase(k, merge.id)
    for c in sorted(cancel, key=lambda o: o.sort_key):
        graph.record_rebase(c, TOMBSTONE_ID)
    return merge


def _surface_revoked_premises(
    replica: Replica,
    remote: EntailmentGraph,
    rolled: set[OpId],
    report: SyncReport,
) -> None:
    """Local-only dependents of a remotely rebased operation lost a premise's
    effect; surface that instead of silently keeping them on air."""
    if not rolled:
        return
    graph = replica.graph
    for node in graph.operations():
        opid = node.id
        if graph.is_rebased(opid) or opid in remote.nodes:
            continue
        dead = frozenset(p for p in node.premises if p in rolled)
        if not dead:
            continue
        conflict = Conflict(
            trigger=opid,
            conflicting_premises=dead,
            scope=frozenset({opid}),
            participants=frozenset({opid}) | frozenset(
                t for p in dead for t in graph.rebase_targets(p) if t != TOMBSTONE_ID
            ),
        )
        if not any(pc.conflict.trigger == opid for pc in replica.pending):
            replica.pending.append(
                PendingConflict(
                    conflict=conflict,
                    trigger_op=node,
                    remote=None,
                    kind="premise-revoked",
                )
            )
            report.conflicts.append(conflict)


def _prune_pending(replica: Replica) -> None:
    graph = replica.graph
    keep: list[PendingConflict] = []
    for pc in replica.pending:
        tid = pc.trigger_op.id
        if pc.kind == "remote-trigger":
            if tid in graph.nodes:
                continue  # integrated by some other path
        else:  # premise-revoked: moot once the dependent itself is rebased
            if graph.is_rebased(tid):
                continue
        keep.append(pc)
    replica.pending = keep


def submit_plan(replica: Replica, trigger: OpId, plan: MergePlan, reconciler=None) -> SyncReport:
    """Resolve a pending conflict with a user-supplied plan and resume sync."""
    pc = next(
        (p for p in replica.pending if p.conflict.trigger == trigger), None
    )
    if pc is None:
        raise UnknownOperation(f"no pending conflict with trigger {trigger}")
    oneshot = ScriptedReconciler({str(trigger): plan})
    if pc.kind == "remote-trigger" and pc.remote is not None:
        # A rejected plan raises before any mutation; the pending conflict
        # survives for the next attempt.  On success the end-of-pass pruning
        # drops it (its trigger is in the graph by then).
        report = sync(replica, pc.remote, oneshot)
        if not report.resolved:
            raise IllegalPlan(
                f"plan for {trigger} did not resolve the conflict"
            )
        return report
    # Local trigger (premise-revoked): apply the plan directly.
    report = SyncReport()
    merge = apply_plan(replica, pc.conflict, [], plan)
    replica.pending.remove(pc)
    report.resolved.append((pc.conflict, merge.id if merge else None))
    _prune_pending(replica)
    return report


def sync_all(
    replicas: Sequence[Replica],
    reconciler: Reconciler,
    max_rounds: int | None = None,
    rng=None,
) -> list[SyncReport]:
    """Repeated pairwise sync until a full round changes nothing.

    Bounded rounds turn livelock into a diagnosable failure; outstanding
    interactive conflicts simply leave the fixpoint early with pendings set.
    """
    n = len(replicas)
    cap = max_rounds if max_rounds is not None else 4 * n * n
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    reports: list[SyncReport] = []
    for _ in range(cap):
        changed = False
        schedule = list(pairs)
        if rng is not None:
            rng.shuffle(schedule)
        for dst, src in schedule:
            snapshot = publish(replicas[src])
            before = replicas[dst].graph.fingerprint()
            reports.append(sync(replicas[dst], snapshot, reconciler))
            if replicas[dst].graph.fingerprint() != before:
                changed = True
        if not changed:
            return reports
    raise NonTermination(f"no fixpoint after {cap} rounds")
