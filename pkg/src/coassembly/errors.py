"""Exception types shared across the package."""


class CoassemblyError(Exception):
    """Base class for all package-specific errors."""


class ScriptError(CoassemblyError):
    """A conversation script failed validation or loading."""


class PlanError(CoassemblyError):
    """An assembly plan failed validation or loading."""


class ScenarioError(CoassemblyError):
    """A scenario configuration failed validation or loading."""


class OutOfTurn(CoassemblyError):
    """A user turn arrived while the session cannot accept one."""


class UnknownDialogue(CoassemblyError):
    """A dialogue id does not exist in the active script."""


class DialogueError(CoassemblyError):
    """A dialogue operation violated its preconditions."""


class ProtocolViolation(CoassemblyError):
    """A wire envelope is malformed or inconsistent with session state."""


class BadEnvelope(ProtocolViolation):
    """A request envelope failed schema validation."""


class UnknownMode(CoassemblyError):
    """A request referenced a communication mode the service does not run."""


class SessionBusy(CoassemblyError):
    """A session is mid-delivery of a robot-initiated turn."""


class MalformedTrace(CoassemblyError):
    """A trace record stream is not usable for metrics computation."""


class ZeroBaseline(CoassemblyError):
    """A comparison was requested against a zero-valued baseline."""


class EmptySample(CoassemblyError):
    """An aggregate was requested over an empty record list."""
