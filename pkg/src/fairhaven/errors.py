"""Error hierarchy shared by every layer.

Each error carries a stable ``code`` (its class name) and the HTTP status
the REST layer maps it to, so handlers never need per-exception plumbing.
Extra keyword arguments land in ``details`` and are echoed in wire payloads
(e.g. OffsetMismatch carries the expected resume offset).
"""

from __future__ import annotations

from typing import Any


class FairhavenError(Exception):
    """Base error; subclasses set ``http_status``."""

    http_status = 400

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    @property
    def code(self) -> str:
        return self.__class__.__name__

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"error": self.code, "message": self.message}
        payload.update(self.details)
        return payload


# -- lookup / existence -------------------------------------------------------

class NotFound(FairhavenError):
    http_status = 404

class EntryNotFound(FairhavenError):
    http_status = 404

class UnknownModel(FairhavenError):
    http_status = 404

class UnknownDOI(FairhavenError):
    http_status = 404

class UnknownVersion(FairhavenError):
    http_status = 404


# -- validation (400) ---------------------------------------------------------

class EmptyName(FairhavenError):
    pass

class NotAMember(FairhavenError):
    pass

class InvalidSchema(FairhavenError):
    pass

class SchemaViolation(FairhavenError):
    pass

class UnknownProperty(FairhavenError):
    pass

class TypeMismatch(FairhavenError):
    pass

class CrossDataset(FairhavenError):
    pass

class FileTooLarge(FairhavenError):
    pass

class DuplicatePath(FairhavenError):
    pass

class InvalidPath(FairhavenError):
    pass

class MissingFields(FairhavenError):
    pass

class EmptyDataset(FairhavenError):
    pass

class JustificationRequired(FairhavenError):
    pass

class EmbargoTooLong(FairhavenError):
    pass

class OwnerViaGrant(FairhavenError):
    pass


# -- authentication / authorization (401 / 403) --------------------------------

class Unauthorized(FairhavenError):
    http_status = 401

class Forbidden(FairhavenError):
    http_status = 403

class NotOnPublishingTeam(FairhavenError):
    http_status = 403

class SelfReview(FairhavenError):
    http_status = 403

class PayerRequired(FairhavenError):
    http_status = 403


# -- conflicts / state (409) --------------------------------------------------

class NameConflict(FairhavenError):
    http_status = 409

class SiblingConflict(FairhavenError):
    http_status = 409

class Cycle(FairhavenError):
    http_status = 409

class WindowExpired(FairhavenError):
    http_status = 409

class IllegalTransition(FairhavenError):
    http_status = 409

class OffsetMismatch(FairhavenError):
    http_status = 409

class Overflow(FairhavenError):
    http_status = 409

class ManifestFinalized(FairhavenError):
    http_status = 409

class Incomplete(FairhavenError):
    http_status = 409

class DatasetLocked(FairhavenError):
    http_status = 409

class PendingRestore(FairhavenError):
    http_status = 409

class TierNotReadable(FairhavenError):
    http_status = 409

class NotDeleted(FairhavenError):
    http_status = 409

class NotArchived(FairhavenError):
    http_status = 409

class ImmutableKey(FairhavenError):
    http_status = 409
