"""Error taxonomy shared across the package.

Every failure a caller is expected to branch on gets its own class; generic
ValueError/KeyError never cross a module boundary.
"""
from __future__ import annotations


class McpError(Exception):
    """Base class for all package errors."""


# -- document parsing / validation ------------------------------------------

class MalformedDocument(McpError):
    """Input bytes are not UTF-8 JSON or the top level is not an object."""


class UnsupportedSchemaVersion(McpError):
    """header.schema_version is present but not a version this code reads."""


class SchemaViolation(McpError):
    """A structural or semantic invariant failed at a known path."""

    def __init__(self, path: str, rule: str, message: str = ""):
        super().__init__(f"{path}: {rule}" + (f" ({message})" if message else ""))
        self.path = path
        self.rule = rule


# -- mutation ----------------------------------------------------------------

class ConflictingMutation(McpError):
    """A change entry's `before` value does not match the document."""

    def __init__(self, path: str, message: str = ""):
        super().__init__(f"{path}" + (f": {message}" if message else ""))
        self.path = path


class InvariantBrokenByMutation(McpError):
    """Applying a changeset would produce an invalid document."""


class UnaddressableField(McpError):
    """A path or selector does not resolve inside the document."""


# -- ledger ------------------------------------------------------------------

class LedgerClosed(McpError):
    """Append attempted after a handoff_out event sealed the chain."""


class StorageFailure(McpError):
    """The underlying file store failed mid-operation."""


class NonReplayableEvent(McpError):
    """An event kind or detail string the replayer cannot interpret."""


class ChainBreak(McpError):
    """Hash-chain verification failed at a specific sequence number."""

    def __init__(self, seq: int):
        super().__init__(f"chain break at seq {seq}")
        self.seq = seq


# -- reasoning modules -------------------------------------------------------

class DuplicateModuleId(McpError):
    """Two modules registered under the same id."""


class InsufficientData(McpError):
    """Not enough observations to fit the requested projection."""


# -- engine ------------------------------------------------------------------

class CyclicDependency(McpError):
    """Task depends_on edges form a cycle."""


class TaskNotPending(McpError):
    """A decision targeted a task that is not pending verification."""


class InvalidModification(McpError):
    """A modify decision's payload does not satisfy the task-kind schema."""


# -- agents ------------------------------------------------------------------

class AgentUnavailable(McpError):
    """No agent is registered for the requested task kind."""


class EndpointUnreachable(McpError):
    """The external endpoint did not answer."""


class SchemaRejected(McpError):
    """The external endpoint rejected the resource shape."""


class InvalidPayload(McpError):
    """Task payload cannot be rendered into the outbound resource."""


class PendingVerificationBlock(McpError):
    """Handoff refused while tasks await physician verification."""


class ProofMismatch(McpError):
    """Handoff package failed local re-verification."""


class DuplicateDocument(McpError):
    """A document with this id already exists at the receiver."""


# -- gateway -----------------------------------------------------------------

class VersionConflict(McpError):
    """Expected document version does not match the stored head."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected version {expected}, head is {actual}")
        self.expected = expected
        self.actual = actual


class UnknownDocument(McpError):
    """No document stored under the requested id."""


class FixtureInvalid(McpError):
    """A fixture file (template, rule set, scenario, users) failed checks."""
