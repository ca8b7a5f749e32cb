"""Exception types shared across the package."""


class EntailSyncError(Exception):
    """Base class for all package errors."""


class UnknownRegister(EntailSyncError):
    pass


class UnknownOperation(EntailSyncError):
    pass


class UnknownPremise(EntailSyncError):
    pass


class UnknownAction(EntailSyncError):
    """Action kind outside the register's basis."""


class EmptyOperation(EntailSyncError):
    pass


class DuplicateOperation(EntailSyncError):
    pass


class CycleDetected(EntailSyncError):
    pass


class RegisterMismatch(EntailSyncError):
    pass


class ConstructorMismatch(EntailSyncError):
    pass


class NoVisibleValue(EntailSyncError):
    """A touch was issued against a register with no single visible setter."""


class StaleWrite(EntailSyncError):
    """A timestamped write at or below the greatest timestamp already observed."""


class LocalConflict(EntailSyncError):
    """A locally issued operation conflicts with its own history.

    Signals a bug in an entailment rule; local issues never conflict by
    construction.
    """


class IllegalPlan(EntailSyncError):
    """A merge plan violates the keep/cancel partition invariants."""


class ForeignPremise(EntailSyncError):
    """Merged actions would pull in a premise outside the participants' ancestry."""


class NonTermination(EntailSyncError):
    """sync_all exceeded its bounded number of rounds."""


class ScriptError(EntailSyncError):
    """A scenario references undeclared replicas/registers or breaks ordering rules."""


class AssertFailed(EntailSyncError):
    pass


class TooLarge(EntailSyncError):
    """Exhaustive oracle invoked on a graph beyond its enumeration bound."""
