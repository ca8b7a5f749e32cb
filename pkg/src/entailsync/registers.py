"""Pluggable register definitions.

A register is fully described by four parts: its action basis, an interpreter
from action sequences to a state, an entailment rule assigning premises to a
new action from the current state, and a visibility predicate.  The predicate
must make the register discard-complete: whenever an action's effect is
lost, the loss is attributable to an entailing discarder.  That property is
what lets every replica agree on which effects survive, and it is checked
exhaustively by :func:`check_discard_complete`.

Shipped kinds:

* ``plain``  -- single value, last assignment wins, concurrent assignments conflict.
* ``arith``  -- integer register with mov/add/mul accumulation modes.
* ``lww``    -- timestamped writes under the Thomas write rule; lost updates
  and timestamp ties surface as conflicts instead of vanishing.

Every register also accepts ``touch``: a no-effect action that forces the
operation(s) providing the currently observed value into the premises of the
issuing operation (an optimistic lock on the observed value).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .errors import NoVisibleValue, StaleWrite, UnknownAction, UnknownRegister
from .journal import (
    Action,
    EntailmentGraph,
    History,
    INIT_REPLICA,
    OpId,
    Operation,
    conflicting_premises,
)

TOUCH = "touch"


@dataclass(frozen=True)
class ActionDescriptor:
    """User-facing action request, before it is bound to an operation."""

    kind: str
    register: int
    value: Any = None
    timestamp: int | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "ActionDescriptor":
        return cls(
            kind=obj["op"],
            register=int(obj["reg"]),
            value=obj.get("value"),
            timestamp=obj.get("t"),
        )

    def to_json(self) -> dict:
        out: dict[str, Any] = {"op": self.kind, "reg": self.register}
        if self.value is not None:
            out["value"] = self.value
        if self.timestamp is not None:
            out["t"] = self.timestamp
        return out


def descriptor_of(action: Action) -> ActionDescriptor:
    return ActionDescriptor(
        kind=action.kind,
        register=action.register,
        value=action.value,
        timestamp=action.timestamp,
    )


# -- plain register ---------------------------------------------------------


@dataclass(frozen=True)
class PlainState:
    """Pair of current value and the action that set it."""

    value: Any = None
    setter: Action | None = None


def plain_interpret(projection: Sequence[Action]) -> PlainState:
    state = PlainState()
    for a in projection:
        if a.kind == TOUCH:
            continue
        if a.kind != "mov":
            raise UnknownAction(f"plain register: {a.kind}")
        state = PlainState(value=a.value, setter=a)
    return state


def plain_visible(action: Action, projection: Sequence[Action]) -> bool:
    state = plain_interpret(projection)
    return state.setter is not None and state.setter.uid == action.uid


def plain_entail(desc: ActionDescriptor, state: PlainState) -> frozenset[OpId]:
    # A new assignment relies on (and will overwrite) the last setter.
    if state.setter is None:
        return frozenset()
    return frozenset({state.setter.op})


def plain_providers(state: PlainState) -> frozenset[OpId]:
    if state.setter is None:
        raise NoVisibleValue("plain register has no setter yet")
    return frozenset({state.setter.op})


# -- arithmetic register ------------------------------------------------------

ARITH_MODES = {"mov": "=", "add": "+", "mul": "*"}


@dataclass(frozen=True)
class ArithState:
    """Computation mode, initial value, and actions accumulated in that mode."""

    mode: str = "="
    base: Any = 0
    accum: tuple[Action, ...] = ()


def arith_val(state: ArithState) -> Any:
    v = state.base
    for a in state.accum:
        if state.mode == "=":
            v = a.value
        elif state.mode == "+":
            v = v + a.value
        else:
            v = v * a.value
    return v


def arith_interpret(projection: Sequence[Action]) -> ArithState:
    state = ArithState()
    for a in projection:
        if a.kind == TOUCH:
            continue
        mode = ARITH_MODES.get(a.kind)
        if mode is None:
            raise UnknownAction(f"arithmetic register: {a.kind}")
        if mode == state.mode:
            # Same mode accumulates, except '=' where later assignments
            # replace rather than pile up.
            accum = (a,) if mode == "=" else state.accum + (a,)
            state = ArithState(state.mode, state.base, accum)
        else:
            state = ArithState(mode, arith_val(state), (a,))
    return state


def arith_visible(action: Action, projection: Sequence[Action]) -> bool:
    state = arith_interpret(projection)
    return any(a.uid == action.uid for a in state.accum)


def arith_entail(desc: ActionDescriptor, state: ArithState) -> frozenset[OpId]:
    # Same-mode actions extend the accumulation and rely on its last member.
    # A mode switch folds the whole accumulated context into a new base, so
    # it relies on (and will hide) every accumulated action; recording only
    # the last one would lose the entailment witness for the others and
    # break discard-completeness.
    if not state.accum:
        return frozenset()
    if ARITH_MODES.get(desc.kind) == state.mode:
        return frozenset({state.accum[-1].op})
    return frozenset(a.op for a in state.accum)


def arith_providers(state: ArithState) -> frozenset[OpId]:
    if not state.accum:
        raise NoVisibleValue("arithmetic register has no accumulated action")
    return frozenset({state.accum[-1].op})


# -- last-writer-wins register -------------------------------------------------


@dataclass(frozen=True)
class LwwState:
    """All timestamped writes plus the greatest timestamp present."""

    writes: tuple[Action, ...] = ()
    max_t: int | None = None

    def latest(self) -> tuple[Action, ...]:
        return tuple(a for a in self.writes if a.timestamp == self.max_t)


def lww_interpret(projection: Sequence[Action]) -> LwwState:
    writes = []
    for a in projection:
        if a.kind == TOUCH:
            continue
        if a.kind != "mov":
            raise UnknownAction(f"lww register: {a.kind}")
        if a.timestamp is None:
            raise UnknownAction(f"lww write without timestamp: {a.summary()}")
        writes.append(a)
    max_t = max((a.timestamp for a in writes), default=None)
    return LwwState(writes=tuple(writes), max_t=max_t)


def lww_val(state: LwwState) -> frozenset:
    return frozenset(a.value for a in state.latest())


def lww_visible(action: Action, projection: Sequence[Action]) -> bool:
    # Visible only when the action is the single greatest-timestamp write;
    # a tie leaves every write invisible, surfacing the ambiguity.
    latest = lww_interpret(projection).latest()
    return len(latest) == 1 and latest[0].uid == action.uid


def lww_entail(desc: ActionDescriptor, state: LwwState) -> frozenset[OpId]:
    # A new write's timestamp must exceed everything its issuer has observed
    # (Lamport-clock discipline); reusing an observed timestamp sequentially
    # would plant an undetectable standing tie.
    if (
        state.max_t is not None
        and desc.timestamp is not None
        and desc.timestamp <= state.max_t
    ):
        raise StaleWrite(
            f"write at t={desc.timestamp} but t={state.max_t} already observed"
        )
    return frozenset(a.op for a in state.latest())


def lww_providers(state: LwwState) -> frozenset[OpId]:
    latest = state.latest()
    if len(latest) != 1:
        raise NoVisibleValue(
            "lww register has no single visible write (conflict pending)"
        )
    return frozenset({latest[0].op})


# -- broken demo register (deliberately not discard-complete) -----------------


def amnesiac_entail(desc: ActionDescriptor, state: PlainState) -> frozenset[OpId]:
    # Forgets its dependencies: overwrites without recording a premise.
    return frozenset()


# -- the pluggable spec --------------------------------------------------------


@dataclass(frozen=True)
class RegisterSpec:
    """Four-part register definition plus probe inputs for the property harness."""

    kind: str
    basis: frozenset[str]
    interpret: Callable[[Sequence[Action]], Any]
    entail: Callable[[ActionDescriptor, Any], frozenset[OpId]]
    visible: Callable[[Action, Sequence[Action]], bool]
    val: Callable[[Any], Any]
    providers: Callable[[Any], frozenset[OpId]]
    constructor: ActionDescriptor = ActionDescriptor("mov", 0, 0)
    probes: tuple[ActionDescriptor, ...] = ()


def plain_spec() -> RegisterSpec:
    return RegisterSpec(
        kind="plain",
        basis=frozenset({"mov", TOUCH}),
        interpret=plain_interpret,
        entail=plain_entail,
        visible=plain_visible,
        val=lambda s: s.value,
        providers=plain_providers,
        constructor=ActionDescriptor("mov", 0, 0),
        probes=(
            ActionDescriptor("mov", 0, 1),
            ActionDescriptor("mov", 0, 2),
        ),
    )


def arith_spec() -> RegisterSpec:
    return RegisterSpec(
        kind="arith",
        basis=frozenset({"mov", "add", "mul", TOUCH}),
        interpret=arith_interpret,
        entail=arith_entail,
        visible=arith_visible,
        val=arith_val,
        providers=arith_providers,
        constructor=ActionDescriptor("add", 0, 0),
        probes=(
            ActionDescriptor("add", 0, 1),
            ActionDescriptor("mul", 0, 2),
            ActionDescriptor("mov", 0, 3),
        ),
    )


def lww_spec() -> RegisterSpec:
    return RegisterSpec(
        kind="lww",
        basis=frozenset({"mov", TOUCH}),
        interpret=lww_interpret,
        entail=lww_entail,
        visible=lww_visible,
        val=lww_val,
        providers=lww_providers,
        constructor=ActionDescriptor("mov", 0, "init", 0),
        probes=(
            ActionDescriptor("mov", 0, "a", 1),
            ActionDescriptor("mov", 0, "b", 2),
            ActionDescriptor("mov", 0, "c", 2),
            ActionDescriptor("mov", 0, "d", 3),
            ActionDescriptor("mov", 0, "e", 4),
            ActionDescriptor("mov", 0, "f", 5),
        ),
    )


def broken_demo_spec() -> RegisterSpec:
    return RegisterSpec(
        kind="broken-demo",
        basis=frozenset({"mov", TOUCH}),
        interpret=plain_interpret,
        entail=amnesiac_entail,
        visible=plain_visible,
        val=lambda s: s.value,
        providers=plain_providers,
        constructor=ActionDescriptor("mov", 0, 0),
        probes=(ActionDescriptor("mov", 0, 1),),
    )


SPEC_FACTORIES: dict[str, Callable[[], RegisterSpec]] = {
    "plain": plain_spec,
    "arith": arith_spec,
    "lww": lww_spec,
    "broken-demo": broken_demo_spec,
}


def spec_by_kind(kind: str) -> RegisterSpec:
    try:
        return SPEC_FACTORIES[kind]()
    except KeyError:
        raise UnknownRegister(f"no register kind {kind!r}") from None


# -- the register table ---------------------------------------------------------


@dataclass(frozen=True)
class RegisterEntry:
    index: int
    spec: RegisterSpec
    constructor: OpId


class RegisterTable:
    """Maps register indices to their specs and constructor operations."""

    def __init__(self, entries: Sequence[RegisterEntry]):
        self.entries = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, index: int) -> RegisterEntry:
        if not 0 <= index < len(self.entries):
            raise UnknownRegister(f"register index {index} out of range")
        return self.entries[index]

    def spec_for(self, index: int) -> RegisterSpec:
        return self.entry(index).spec

    def check_descriptor(self, desc: ActionDescriptor) -> None:
        spec = self.spec_for(desc.register)
        if desc.kind not in spec.basis:
            raise UnknownAction(
                f"{desc.kind!r} not in basis of {spec.kind} register {desc.register}"
            )

    def interpret(self, index: int, projection: Sequence[Action]):
        return self.spec_for(index).interpret(projection)

    def visible(self, action: Action, projection: Sequence[Action]) -> bool:
        if action.kind == TOUCH:
            return True
        return self.spec_for(action.register).visible(action, projection)

    def premises_for(
        self,
        desc: ActionDescriptor,
        state: Any,
        projection: Sequence[Action] = (),
    ) -> frozenset[OpId]:
        spec = self.spec_for(desc.register)
        if desc.kind == TOUCH:
            return spec.providers(state)
        premises = set(spec.entail(desc, state))
        premises |= self._standing_touches(spec, state, projection)
        return frozenset(premises)

    def _standing_touches(
        self, spec: RegisterSpec, state: Any, projection: Sequence[Action]
    ) -> set[OpId]:
        """Touches still pinning the currently visible value.

        A new effectful action acknowledges them as premises: an issuer who
        has seen the lock supersedes it causally, while a writer who never
        saw it stays concurrent and conflicts.
        """
        try:
            providers = spec.providers(state)
        except NoVisibleValue:
            return set()
        out: set[OpId] = set()
        last_effectful: Action | None = None
        for a in projection:
            if a.kind == TOUCH:
                if last_effectful is not None and last_effectful.op in providers:
                    out.add(a.op)
            else:
                last_effectful = a
        return out

    def val(self, index: int, projection: Sequence[Action]) -> Any:
        spec = self.spec_for(index)
        return spec.val(spec.interpret(projection))

    def state_fingerprint(self, history: History) -> tuple:
        """Per-register (val, visible action set) pairs; the state identity
        used by the order-independence oracle."""
        out = []
        for entry in self.entries:
            proj = history.projection(entry.index)
            val = self.val(entry.index, proj)
            visible = frozenset(
                a.uid for a in proj if self.visible(a, proj)
            )
            out.append((entry.spec.kind, _hashable(val), visible))
        return tuple(out)


def _hashable(val: Any) -> Any:
    if isinstance(val, frozenset):
        return tuple(sorted(val, key=repr))
    if isinstance(val, (list, tuple)):
        return tuple(_hashable(v) for v in val)
    return val


@dataclass(frozen=True)
class RegisterDef:
    """Scenario-level register declaration: kind plus constructor payload."""

    kind: str
    initial: Any = 0
    timestamp: int | None = None


def calendar_entity(
    title: str = "Lunch: Alice x Bob",
    time: str = "1pm-1.30pm",
    location: str = "Bambi's",
) -> list[RegisterDef]:
    """A multi-register entity: three plain registers for a calendar event.

    Operations may span its registers and use touch to pin the fields they
    assume unchanged.
    """
    return [
        RegisterDef("plain", title),
        RegisterDef("plain", time),
        RegisterDef("plain", location),
    ]


def build_memory(defs: Sequence[RegisterDef]) -> tuple[RegisterTable, EntailmentGraph]:
    """Create the shared memory: one constructor operation per register.

    Constructors are identical on every replica: they live under the reserved
    init replica with the register index as counter.
    """
    entries = []
    constructors: dict[int, OpId] = {}
    ctor_ops: list[Operation] = []
    for index, rdef in enumerate(defs):
        spec = spec_by_kind(rdef.kind)
        ctor_id = OpId(INIT_REPLICA, index)
        tmpl = spec.constructor
        timestamp = rdef.timestamp if rdef.timestamp is not None else tmpl.timestamp
        action = Action(
            op=ctor_id,
            index=0,
            register=index,
            kind=tmpl.kind,
            value=rdef.initial,
            timestamp=timestamp,
        )
        ctor_ops.append(Operation(id=ctor_id, actions=(action,), premises=frozenset()))
        entries.append(RegisterEntry(index=index, spec=spec, constructor=ctor_id))
        constructors[index] = ctor_id
    graph = EntailmentGraph(constructors)
    for op in ctor_ops:
        graph.add(frozenset(), op)
    return RegisterTable(entries), graph


# -- discard-completeness harness -----------------------------------------------


@dataclass(frozen=True)
class DiscardCheckResult:
    ok: bool
    histories_checked: int
    counterexample: "DiscardCounterexample | None" = None


@dataclass(frozen=True)
class DiscardCounterexample:
    history: tuple[str, ...]
    lost: str
    remover: str

    def describe(self) -> str:
        steps = "; ".join(self.history)
        return (
            f"history [{steps}]: removing {self.remover} restores visibility of "
            f"{self.lost}, but {self.lost} does not entail {self.remover}"
        )


def check_discard_complete(spec: RegisterSpec, max_ops: int = 6) -> DiscardCheckResult:
    """Exhaustively verify Definition-level discard-completeness.

    Enumerates every conflict-free history of up to ``max_ops`` actions built
    from the spec's probe actions, where each action may be issued against any
    earlier prefix of the history (modelling concurrent issues).  For every
    action pair, a visibility loss that disappears when the later action is
    rolled back must be matched by a recorded entailment edge.  Histories that
    contain a conflict are pruned: conflicted histories never survive
    synchronisation, and visibility loss without entailment is precisely what
    a conflict reports.
    """
    ctor_id = OpId(INIT_REPLICA, 0)
    ctor_action = Action(
        op=ctor_id,
        index=0,
        register=0,
        kind=spec.constructor.kind,
        value=spec.constructor.value,
        timestamp=spec.constructor.timestamp,
    )
    base_graph = EntailmentGraph({0: ctor_id})
    base_graph.add(
        frozenset(), Operation(id=ctor_id, actions=(ctor_action,), premises=frozenset())
    )
    table = RegisterTable([RegisterEntry(index=0, spec=spec, constructor=ctor_id)])
    checked = 0

    def dfs(graph: EntailmentGraph, ops: tuple[OpId, ...], counter: int):
        nonlocal checked
        history = History(ops=ops, graph=graph)
        checked += 1
        bad = _definition_violation(history, table)
        if bad is not None:
            return bad
        if len(ops) >= max_ops:
            return None
        for desc in spec.probes:
            for view in range(1, len(ops) + 1):
                prefix = History(ops=ops[:view], graph=graph)
                state = table.interpret(0, prefix.projection(0))
                try:
                    premises = spec.entail(desc, state)
                except StaleWrite:
                    continue  # not issuable from this view

                opid = OpId("@probe", counter)
                action = Action(
                    op=opid,
                    index=0,
                    register=0,
                    kind=desc.kind,
                    value=desc.value,
                    timestamp=desc.timestamp,
                )
                op = Operation(id=opid, actions=(action,), premises=frozenset(premises))
                g2 = graph.copy()
                g2.add(op.premises, op)
                ops2 = ops + (opid,)
                h2 = History(ops=ops2, graph=g2)
                if any(
                    conflicting_premises((prev, opid), h2, table)
                    for prev in ops
                ):
                    continue  # conflicted branch: pruned, surfaced elsewhere
                bad = dfs(g2, ops2, counter + 1)
                if bad is not None:
                    return bad
        return None

    counterexample = dfs(base_graph, (ctor_id,), 1)
    return DiscardCheckResult(
        ok=counterexample is None,
        histories_checked=checked,
        counterexample=counterexample,
    )


def _definition_violation(
    history: History, table: RegisterTable
) -> DiscardCounterexample | None:
    """Attributability form of discard-completeness.

    Every invisible action whose visibility any single rollback restores must
    have a discarder witness: an entailed successor whose rollback restores it
    (that pair is exactly the discard relation).  Note a rollback removes the
    target together with its dependents, so an unrelated removal can restore
    visibility collaterally; the witness requirement is existential.
    """
    graph = history.graph
    proj = history.projection(0)
    invisible = [a for a in proj if not table.visible(a, proj)]
    if not invisible:
        return None
    rolled = {
        opid: history.rollback(opid).projection(0) for opid in history.ops
    }
    for a1 in invisible:
        restorers = [
            opid
            for opid, rp in rolled.items()
            if opid != a1.op and table.visible(a1, rp)
        ]
        if not restorers:
            continue
        if not any(a1.op in graph.operation(r).premises for r in restorers):
            return DiscardCounterexample(
                history=tuple(
                    f"{opid}={graph.operation(opid).actions[0].summary()}"
                    for opid in history.ops
                ),
                lost=str(a1.op),
                remover=str(min(restorers, key=lambda o: o.sort_key)),
            )
    return None
