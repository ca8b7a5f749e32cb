"""entailsync: local-first reconciliation over a replicated entailment graph.

Operations carry immutable premise sets; visibility-aware discard relations
identify semantic conflicts between concurrent operations, and resolution
rebases the conflicting scope under a reconciling merge operation.
"""

from .errors import (
    AssertFailed,
    ConstructorMismatch,
    CycleDetected,
    DuplicateOperation,
    EmptyOperation,
    EntailSyncError,
    ForeignPremise,
    IllegalPlan,
    LocalConflict,
    NonTermination,
    NoVisibleValue,
    RegisterMismatch,
    ScriptError,
    StaleWrite,
    TooLarge,
    UnknownAction,
    UnknownOperation,
    UnknownPremise,
    UnknownRegister,
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
    compatible,
    concurrent,
    conflicting_premises,
    discarded_by,
    entails_star,
    is_visible,
    op_discards,
    premises_of,
    rollback,
    validate_history,
)
from .registers import (
    ActionDescriptor,
    RegisterDef,
    RegisterSpec,
    RegisterTable,
    build_memory,
    check_discard_complete,
    spec_by_kind,
)
from .sim import (
    ConvergenceReport,
    NetworkModel,
    Scenario,
    ScenarioRunner,
    all_topological_orders,
    oracle_join_laws,
    oracle_state_set,
    run_scenario,
)
from .sync import (
    InteractiveReconciler,
    LwwAutoReconciler,
    MergePlan,
    Reconciler,
    Replica,
    ReplayAllReconciler,
    ScriptedReconciler,
    SyncReport,
    apply_op,
    issue,
    make_replica,
    publish,
    reconciler_by_name,
    submit_plan,
    sync,
    sync_all,
)

__version__ = "0.1.0"
