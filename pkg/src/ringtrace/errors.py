"""Exception hierarchy shared by all ringtrace modules."""

from __future__ import annotations


class RingTraceError(Exception):
    """Base class for every error raised by ringtrace."""


# -- ledger / ingestion -----------------------------------------------------

class UnknownOutputRef(RingTraceError, KeyError):
    """An (amount, index) pair does not exist on the requested branch."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class IngestionError(RingTraceError):
    """Raised while reading branch ledger files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LedgerSyntaxError(IngestionError, ValueError):
    """A line of a branch file is not a well-formed block object."""


class HeightGap(IngestionError):
    """Block heights in a branch file are not consecutive."""


class DuplicateField(IngestionError):
    """A JSON object in a branch file repeats a key."""


class LedgerValidationError(RingTraceError):
    """The ledger has at least one fatal violation; ``report`` lists them."""

    def __init__(self, report):
        self.report = report
        fatal = report.fatal
        head = "; ".join(f"{v.rule}: {v.message}" for v in fatal[:3])
        more = f" (+{len(fatal) - 3} more)" if len(fatal) > 3 else ""
        super().__init__(f"{len(fatal)} fatal violation(s): {head}{more}")

    @property
    def rules(self) -> set[str]:
        return {v.rule for v in self.report.fatal}


# -- deduction / oracle -------------------------------------------------------

class InconsistentLedger(RingTraceError):
    """The deduction rules derived a contradiction from the ledger data."""


class UnknownKeyImage(RingTraceError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class TooLarge(RingTraceError):
    """An oracle component exceeds the configured key-image guard."""


class Unsatisfiable(RingTraceError):
    """No consistent spend assignment exists."""


# -- heuristics / reporting ---------------------------------------------------

class EmptyEvaluation(RingTraceError):
    """None of the guesses could be decided against the given truth."""


class EmptyWindow(RingTraceError):
    """A reporting window contains no blocks."""


# -- simulator ---------------------------------------------------------------

class ConfigError(RingTraceError, ValueError):
    pass


class ExhaustedDecoyPool(RingTraceError):
    """Fewer eligible outputs than requested decoys."""
