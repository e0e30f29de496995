"""Sequenced mutation events and the fold that turns them into page state.

Events are the sole source of truth: a page is exactly the left fold of its
event log, so every apply function here must be deterministic given (state,
event); ids, timestamps, and anything else non-derivable ride in the event.

Wire/storage form (EventRecord, version "v1") is canonical JSON: sorted keys,
compact separators, UTF-8. Round-tripping a record is the identity and folding
the same byte stream twice yields identical states. Unknown top-level fields
are rejected at v1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from . import tree
from .errors import ParseError
from .model import Page

PAGE_CREATED = "PageCreated"
MEMBER_ADDED = "MemberAdded"
PERMISSION_CHANGED = "PermissionChanged"
COMMENT_ADDED = "CommentAdded"
COMMENT_EDITED = "CommentEdited"
COMMENT_HIDDEN = "CommentHidden"
COMMENT_UNHIDDEN = "CommentUnhidden"
COMMENT_TAGGED = "CommentTagged"
COMMENT_UNTAGGED = "CommentUntagged"
SUMMARY_CREATED = "SummaryCreated"
SUMMARY_EDITED = "SummaryEdited"
SUMMARY_INCORPORATED = "SummaryIncorporated"
SUMMARY_DELETED = "SummaryDeleted"
SUMMARY_FLAGGED = "SummaryFlagged"
NODE_MOVED = "NodeMoved"
LOCK_ACQUIRED = "LockAcquired"
LOCK_RELEASED = "LockReleased"
LOCK_EXPIRED = "LockExpired"
READ_MARKED = "ReadMarked"
TREE_IMPORTED = "TreeImported"

EVENT_KINDS = frozenset({
    PAGE_CREATED, MEMBER_ADDED, PERMISSION_CHANGED,
    COMMENT_ADDED, COMMENT_EDITED, COMMENT_HIDDEN, COMMENT_UNHIDDEN,
    COMMENT_TAGGED, COMMENT_UNTAGGED,
    SUMMARY_CREATED, SUMMARY_EDITED, SUMMARY_INCORPORATED, SUMMARY_DELETED,
    SUMMARY_FLAGGED, NODE_MOVED,
    LOCK_ACQUIRED, LOCK_RELEASED, LOCK_EXPIRED,
    READ_MARKED, TREE_IMPORTED,
})

RECORD_VERSION = "v1"
_RECORD_FIELDS = frozenset({"v", "seq", "page", "actor", "at", "kind", "payload"})


@dataclass(frozen=True)
class Event:
    seq: int
    page: str
    actor: str
    at: int  # epoch millis
    kind: str
    payload: dict

    def to_record(self) -> dict:
        return {
            "v": RECORD_VERSION,
            "seq": self.seq,
            "page": self.page,
            "actor": self.actor,
            "at": self.at,
            "kind": self.kind,
            "payload": self.payload,
        }


def encode_event(event: Event) -> str:
    return json.dumps(event.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def decode_event(raw: str | bytes) -> Event:
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed event record: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("event record must be an object")
    unknown = set(data) - _RECORD_FIELDS
    if unknown:
        raise ParseError(f"unknown fields in v1 record: {sorted(unknown)}")
    missing = _RECORD_FIELDS - set(data)
    if missing:
        raise ParseError(f"missing fields in record: {sorted(missing)}")
    if data["v"] != RECORD_VERSION:
        raise ParseError(f"unsupported record version: {data['v']!r}")
    if data["kind"] not in EVENT_KINDS:
        raise ParseError(f"unknown event kind: {data['kind']!r}")
    if not isinstance(data["seq"], int) or not isinstance(data["at"], int):
        raise ParseError("seq and at must be integers")
    if not isinstance(data["payload"], dict):
        raise ParseError("payload must be an object")
    return Event(
        seq=data["seq"], page=data["page"], actor=data["actor"],
        at=data["at"], kind=data["kind"], payload=data["payload"],
    )


_APPLY = {
    PAGE_CREATED: tree.apply_page_created,
    MEMBER_ADDED: tree.apply_member_added,
    PERMISSION_CHANGED: tree.apply_permission_changed,
    COMMENT_ADDED: tree.apply_comment_added,
    COMMENT_EDITED: tree.apply_comment_edited,
    COMMENT_HIDDEN: tree.apply_comment_hidden,
    COMMENT_UNHIDDEN: tree.apply_comment_unhidden,
    COMMENT_TAGGED: tree.apply_comment_tagged,
    COMMENT_UNTAGGED: tree.apply_comment_untagged,
    SUMMARY_CREATED: tree.apply_summary_created,
    SUMMARY_EDITED: tree.apply_summary_edited,
    SUMMARY_INCORPORATED: tree.apply_summary_incorporated,
    SUMMARY_DELETED: tree.apply_summary_deleted,
    SUMMARY_FLAGGED: tree.apply_summary_flagged,
    NODE_MOVED: tree.apply_node_moved,
    LOCK_ACQUIRED: tree.apply_lock_acquired,
    LOCK_RELEASED: tree.apply_lock_released,
    LOCK_EXPIRED: tree.apply_lock_expired,
    READ_MARKED: tree.apply_read_marked,
    TREE_IMPORTED: tree.apply_tree_imported,
}


def apply_event(page: Page, event: Event) -> None:
    """Fold one event into the page. Seqs must arrive gapless."""
    if event.seq != page.seq + 1:
        raise ParseError(f"seq gap: expected {page.seq + 1}, got {event.seq}")
    page.seq = event.seq
    _APPLY[event.kind](page, event)


def fold(events: Iterable[Event], page_id: str | None = None) -> Page:
    """Replay a log from scratch into a fresh Page."""
    page: Page | None = None
    for event in events:
        if page is None:
            page = Page(id=page_id or event.page)
        apply_event(page, event)
    if page is None:
        page = Page(id=page_id or "")
    return page
