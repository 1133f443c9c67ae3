"""Exception hierarchy shared by every indyforge module.

Every error carries a short ``code`` (the class name by default) so the CLI
can emit machine-readable diagnostics without string matching.
"""

from __future__ import annotations

from typing import Any


class IndyForgeError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"code": self.code, "message": self.message}
        for key, value in self.context.items():
            if value is not None:
                out[key] = value
        return out


# keymat

class SeedLength(IndyForgeError, ValueError):
    pass


class EncodingError(IndyForgeError, ValueError):
    pass


# roster

class RosterError(IndyForgeError, ValueError):
    """A CSV sheet or roster failed validation.

    ``source`` is the file name and ``row`` the 1-based spreadsheet row
    (the header is row 1) when the finding is tied to a single row.
    """

    def __init__(self, message: str, *, source: str | None = None, row: int | None = None) -> None:
        where = ""
        if source is not None:
            where = source if row is None else f"{source}:{row}"
        elif row is not None:
            where = f"row {row}"
        super().__init__(f"{where}: {message}" if where else message, source=source, row=row)
        self.source = source
        self.row = row


class CsvShape(RosterError):
    pass


class BadEncoding(RosterError):
    pass


class CouplingViolation(RosterError):
    pass


class BadEndpoint(RosterError):
    pass


class TooFewTrustees(RosterError):
    pass


class WrongStewardCount(RosterError):
    pass


class DuplicateAlias(RosterError):
    pass


class DuplicateEndpoint(RosterError):
    pass


class DuplicateDid(RosterError):
    pass


class MultipleValidatorsPerSteward(RosterError):
    pass


# genesis

class GenesisFormatError(IndyForgeError, ValueError):
    """A serialized genesis file could not be reconstructed."""


class BadJson(GenesisFormatError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}", line=line)
        self.line = line


class SeqNoGap(GenesisFormatError):
    def __init__(self, expected: int, found: Any) -> None:
        super().__init__(f"expected seqNo {expected}, found {found}", expected=expected, found=found)
        self.expected = expected
        self.found = found


class ChainMismatch(GenesisFormatError):
    def __init__(self, seq_no: int, expected: str, found: str) -> None:
        super().__init__(
            f"txnId chain broken at seqNo {seq_no}",
            seqNo=seq_no,
            expected=expected,
            found=found,
        )
        self.seq_no = seq_no


class KindMismatch(GenesisFormatError):
    def __init__(self, line: int, expected: str, found: str) -> None:
        super().__init__(
            f"line {line}: {found} transaction in a {expected} genesis file",
            line=line,
            expected=expected,
            found=found,
        )
        self.line = line


class GenesisInvalid(IndyForgeError, ValueError):
    """A genesis pair (or fetched file) is not fit to launch a network.

    ``report`` is a :class:`indyforge.genesis.VerificationReport` when the
    failure came from pair verification, ``cause`` a format error otherwise.
    """

    def __init__(self, message: str, report: Any = None, cause: Exception | None = None) -> None:
        super().__init__(message)
        self.report = report
        self.cause = cause

    def to_dict(self) -> dict[str, Any]:
        out = super().to_dict()
        if self.report is not None:
            out["violations"] = [v.to_dict() for v in self.report.violations]
        if isinstance(self.cause, IndyForgeError):
            out["cause"] = self.cause.to_dict()
        return out


# poolstate: AuthError lives in poolstate because it carries the AuthCode enum.

class ReplayAborted(IndyForgeError):
    def __init__(self, position: int, error: IndyForgeError) -> None:
        super().__init__(f"submission {position} rejected: {error}", position=position)
        self.position = position
        self.error = error

    def to_dict(self) -> dict[str, Any]:
        out = super().to_dict()
        out["cause"] = self.error.to_dict()
        return out


# netsim

class UnknownNode(IndyForgeError, LookupError):
    pass


class EndpointInUse(IndyForgeError):
    pass


# deploykit

class BadNetworkName(IndyForgeError, ValueError):
    pass


class NetworkError(IndyForgeError, OSError):
    pass
