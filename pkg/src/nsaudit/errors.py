"""Exception hierarchy shared by the engine, samplers and file readers."""


class NSAuditError(Exception):
    """Base class for all errors raised by nsaudit."""


class ContractError(NSAuditError, ValueError):
    """An argument violates a documented precondition."""


class UnsupportedProblemError(NSAuditError):
    """The requested quantity is not defined for this problem kind."""


class SamplerStall(NSAuditError):
    """A constrained sampler used up its proposal budget.

    The engine fills in ``iteration`` and ``trace`` before re-raising so the
    caller can still inspect or write the partial run.
    """

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class UndefinedEvidenceError(NSAuditError):
    """Every recorded likelihood is zero, so log Z is undefined."""


class MalformedRunError(NSAuditError, ValueError):
    """A dead/birth record set does not describe a constant-n_live run."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
