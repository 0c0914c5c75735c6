"""Error types raised across the package.

Grouped by the component that raises them first; several are shared.
"""

from __future__ import annotations


class LuceError(Exception):
    """Base class for all protocol-level errors."""


# --- ledger ---------------------------------------------------------------


class InvalidSignature(LuceError):
    pass


class UnknownSender(LuceError):
    pass


class DuplicateTxId(LuceError):
    pass


class NotCurrentValidator(LuceError):
    pass


class EmptyPending(LuceError):
    pass


class NotFound(LuceError):
    pass


# --- license --------------------------------------------------------------


class InvalidTerms(LuceError):
    pass


class OutOfRange(LuceError):
    pass


class InvalidCombination(LuceError):
    pass


class InvalidAction(LuceError):
    pass


# --- contract -------------------------------------------------------------


class UnknownContract(LuceError):
    pass


class InvalidLicenseCode(LuceError):
    pass


class LicenseMismatch(LuceError):
    pass


class AlreadyRegistered(LuceError):
    pass


class NotRegistered(LuceError):
    pass


class Revoked(LuceError):
    pass


class TokenAlreadyIssued(LuceError):
    pass


class WrongEpoch(LuceError):
    pass


class DuplicateReport(LuceError):
    pass


class NoReportForEpoch(LuceError):
    pass


class Unauthorized(LuceError):
    pass


# --- monitor --------------------------------------------------------------


class TokenExpired(LuceError):
    pass


class TokenMismatch(LuceError):
    pass


class DownloadTokenSpent(LuceError):
    pass


class Sealed(LuceError):
    pass


class UnknownAnonId(LuceError):
    pass


class UnauthorizedOrigin(LuceError):
    pass


# --- replication ----------------------------------------------------------


class ReplicationUnavailable(LuceError):
    pass


class InsufficientNodes(LuceError):
    pass


class UnknownRef(LuceError):
    pass


class AllReplicasCorrupt(LuceError):
    pass


class DuplicateReplica(LuceError):
    pass


# --- registry -------------------------------------------------------------


class InvalidProfile(LuceError):
    pass


class DuplicateProfileId(LuceError):
    pass


# --- gdpr -----------------------------------------------------------------


class UnknownSubject(LuceError):
    pass


class SchemaMismatch(LuceError):
    pass


class PartialFailure(LuceError):
    """Raised when a rectify/erase fan-out could not reach every requester.

    The workflow stays queued and is redelivered on subsequent ticks; the
    proof is withheld until every copy has confirmed.
    """

    def __init__(self, subject_id: str, unreached: tuple[str, ...]):
        super().__init__(f"modification for {subject_id!r} pending: unreached {', '.join(unreached)}")
        self.subject_id = subject_id
        self.unreached = unreached


# --- simnet ---------------------------------------------------------------


class NotGranted(LuceError):
    pass


class UnknownTarget(LuceError):
    pass


class ParseError(LuceError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class StepFailure(LuceError):
    def __init__(self, step_index: int, step_text: str, cause: Exception):
        super().__init__(f"step {step_index} ({step_text}): {cause}")
        self.step_index = step_index
        self.step_text = step_text
        self.cause = cause
