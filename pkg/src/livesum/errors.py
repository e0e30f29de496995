"""Error taxonomy.

Every rejection an operation can produce maps to one exception class with a
stable machine-readable ``code`` (used verbatim in API error bodies) and an
HTTP status for the network boundary. Handlers catch ``LivesumError`` and
translate; nothing else leaks across the API.
"""

from __future__ import annotations


class LivesumError(Exception):
    code = "internal"
    http_status = 500


class ValidationError(LivesumError):
    code = "validation"
    http_status = 400


class NotFoundError(LivesumError):
    code = "not_found"
    http_status = 404


class ConflictError(LivesumError):
    code = "conflict"
    http_status = 409


class ForbiddenError(LivesumError):
    code = "forbidden"
    http_status = 403


# -- permissions / authorship -------------------------------------------------

class PermissionDenied(ForbiddenError):
    code = "permission_denied"


class NotAuthor(ForbiddenError):
    code = "not_author"


# -- tree structure ------------------------------------------------------------

class UnknownPage(NotFoundError):
    code = "unknown_page"


class UnknownNode(NotFoundError):
    code = "unknown_node"


class UnknownParent(NotFoundError):
    code = "unknown_parent"


class UnknownLock(NotFoundError):
    code = "unknown_lock"


class UnknownCitation(NotFoundError):
    code = "unknown_citation"


class EmptyBody(ValidationError):
    code = "empty_body"


class EmptyTag(ValidationError):
    code = "empty_tag"


class NotAComment(ValidationError):
    code = "not_a_comment"


class NotASummary(ValidationError):
    code = "not_a_summary"


class MixedParents(ValidationError):
    code = "mixed_parents"


class CycleWouldForm(ValidationError):
    code = "cycle_would_form"


class IndexOutOfRange(ValidationError):
    code = "index_out_of_range"


class InvalidDimension(ValidationError):
    code = "invalid_dimension"


class ValueOutOfRange(ValidationError):
    code = "value_out_of_range"


class DanglingCitation(ValidationError):
    code = "dangling_citation"


class EmptySelection(ValidationError):
    code = "empty_selection"


# -- locking / concurrency -----------------------------------------------------

class Locked(ConflictError):
    code = "locked"


class LockNotHeld(ConflictError):
    code = "lock_not_held"


class MoveLockNotHeld(ConflictError):
    code = "move_lock_not_held"


class Conflict(ConflictError):
    code = "lock_conflict"

    def __init__(self, message: str = "", holder: str | None = None):
        super().__init__(message or (f"held by {holder}" if holder else "conflict"))
        self.holder = holder


class StaleExpectation(ConflictError):
    code = "stale_expectation"


# -- persistence / interchange ---------------------------------------------------

class StorageFull(LivesumError):
    code = "storage_full"
    http_status = 507


class CorruptLog(LivesumError):
    code = "corrupt_log"

    def __init__(self, message: str, bad_seq: int | None = None):
        super().__init__(message)
        self.bad_seq = bad_seq


class DanglingParent(ValidationError):
    code = "dangling_parent"


class CycleInInput(ValidationError):
    code = "cycle_in_input"


class UnsupportedFormat(ValidationError):
    code = "unsupported_format"


class ParseError(ValidationError):
    code = "parse_error"


class InvariantViolation(LivesumError):
    """Raised by the post-hoc checker; carries a minimized reproduction prefix."""

    code = "invariant_violation"

    def __init__(self, invariant: str, detail: str, prefix_len: int | None = None):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant
        self.detail = detail
        self.prefix_len = prefix_len
