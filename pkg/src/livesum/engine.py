"""The serializing write path and live fan-out for one page, plus the
multi-page service with its flat user registry.

Every mutation funnels through PageEngine under one lock: sweep expired
locks (emitting LockExpired events), check the caller's optimistic seq
expectation, check permission, run the operation's precondition checks, then
append-apply-persist-broadcast. Rejected mutations consume no seq. Readers
(views, metrics, subscriptions) take the lock only long enough to snapshot
what they need; stream frames are handed to per-subscriber queues in seq
order while the append lock is held.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from queue import Empty, SimpleQueue
from typing import Callable

from . import locks as locks_mod
from . import tree
from .errors import (
    PermissionDenied,
    StaleExpectation,
    UnknownNode,
    UnknownPage,
    ValidationError,
)
from .events import (
    COMMENT_ADDED,
    COMMENT_EDITED,
    COMMENT_HIDDEN,
    COMMENT_TAGGED,
    COMMENT_UNHIDDEN,
    COMMENT_UNTAGGED,
    LOCK_ACQUIRED,
    LOCK_EXPIRED,
    LOCK_RELEASED,
    MEMBER_ADDED,
    NODE_MOVED,
    PAGE_CREATED,
    PERMISSION_CHANGED,
    READ_MARKED,
    SUMMARY_CREATED,
    SUMMARY_DELETED,
    SUMMARY_EDITED,
    SUMMARY_FLAGGED,
    SUMMARY_INCORPORATED,
    TREE_IMPORTED,
    Event,
    apply_event,
)
from .metrics import compute_metrics
from .model import (
    LOCK_MOVE,
    LOCK_SUMMARY,
    MODES,
    ROLES,
    Citation,
    NodeId,
    Page,
    UserId,
)
from .notify import NullSender, dispatch_notifications
from .permissions import ADMIN, COMMENT, EDIT, FLAG, READ, check_permission
from .richtext import as_richtext
from .store import PageStore, state_hash
from .view import DisplayItem, compute_default_view, icon_map

SYSTEM_ACTOR = "system"


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class EngineConfig:
    summary_lock_ttl_ms: int = 10 * 60 * 1000
    move_lock_ttl_ms: int = 120 * 1000
    snippet_length: int = 80
    snapshot_interval: int = 500
    fsync: bool = False
    # Frame building costs one icon-map pass per event; bulk offline replays
    # (no live subscribers) can switch it off.
    build_frames: bool = True


@dataclass
class Frame:
    """One broadcast unit: the event plus derived deltas so clients can
    re-render without recomputing summary status themselves."""

    seq: int
    event: Event
    icons: dict[NodeId, str] = field(default_factory=dict)
    pending: dict[NodeId, list[str]] = field(default_factory=dict)
    removed: list[NodeId] = field(default_factory=list)
    _line: str | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "event": self.event.to_record(),
            "icons": self.icons,
            "pending": self.pending,
            "removed": self.removed,
        }

    def to_line(self) -> str:
        # frames are immutable once built; serialize once for all subscribers
        if self._line is None:
            self._line = json.dumps(self.to_dict(), separators=(",", ":"))
        return self._line


class Subscription:
    """Replay-then-live frame feed; gapless and duplicate-free because the
    backlog copy and registration happen under the engine lock."""

    def __init__(self) -> None:
        self._queue: SimpleQueue = SimpleQueue()
        self.closed = False

    def put(self, frame: Frame) -> None:
        self._queue.put(frame)

    def get(self, timeout: float | None = None) -> Frame | None:
        try:
            return self._queue.get(timeout=timeout)
        except Empty:
            return None

    def drain(self) -> list[Frame]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except Empty:
                return out


class PageEngine:
    def __init__(
        self,
        page: Page,
        store: PageStore | None = None,
        config: EngineConfig | None = None,
        clock: Callable[[], int] = wall_clock_ms,
        sender=None,
    ):
        self.page = page
        self.store = store
        self.config = config or EngineConfig()
        self.clock = clock
        self.sender = sender or NullSender()
        self.events: list[Event] = []
        self.frames: list[Frame] = []
        self._lock = threading.RLock()
        self._subscribers: list[Subscription] = []
        self._icons, self._pending = icon_map(page)

    # ------------------------------------------------------------------
    # append path

    @classmethod
    def from_events(cls, page_id: str, events: list[Event],
                    store: PageStore | None = None,
                    config: EngineConfig | None = None,
                    clock: Callable[[], int] = wall_clock_ms,
                    sender=None) -> PageEngine:
        """Rebuild a live engine (state + frame history) by refolding a log.
        Nothing is re-persisted."""
        engine = cls(Page(id=page_id), store=None, config=config,
                     clock=clock, sender=sender)
        for event in events:
            apply_event(engine.page, event)
            engine.events.append(event)
            if engine.config.build_frames:
                engine.frames.append(engine._build_frame(event))
        engine.store = store
        return engine

    def _append(self, actor: UserId, kind: str, payload: dict, at: int) -> Event:
        page = self.page
        event = Event(seq=page.seq + 1, page=page.id, actor=actor, at=at,
                      kind=kind, payload=payload)
        apply_event(page, event)
        self.events.append(event)
        if self.store is not None:
            self.store.append(event)
            self.store.maybe_snapshot(page)
        if self.config.build_frames:
            frame = self._build_frame(event)
            self.frames.append(frame)
            for sub in self._subscribers:
                sub.put(frame)
        notes = dispatch_notifications(page, event)
        if notes:
            self.sender.send(notes)
        return event

    def _build_frame(self, event: Event) -> Frame:
        new_icons, new_pending = icon_map(self.page)
        icon_delta = {
            nid: icon for nid, icon in new_icons.items()
            if self._icons.get(nid) != icon
        }
        pending_delta = {
            nid: list(p) for nid, p in new_pending.items()
            if self._pending.get(nid) != p
        }
        removed = [nid for nid in self._icons if nid not in new_icons]
        self._icons, self._pending = new_icons, new_pending
        return Frame(seq=event.seq, event=event, icons=icon_delta,
                     pending=pending_delta, removed=removed)

    def _sweep_locks(self, now: int) -> list[Event]:
        out = []
        for lock_id in locks_mod.expired_lock_ids(self.page, now):
            out.append(self._append(SYSTEM_ACTOR, LOCK_EXPIRED, {"lock_id": lock_id}, now))
        return out

    def _begin(self, actor: UserId, action: str | None, expected_seq: int | None) -> int:
        """Common mutation prologue. Returns `now`. Caller holds the lock."""
        if expected_seq is not None and expected_seq != self.page.seq:
            raise StaleExpectation(f"expected seq {expected_seq}, page at {self.page.seq}")
        now = self.clock()
        self._sweep_locks(now)
        if action is not None and not check_permission(self.page, actor, action):
            raise PermissionDenied(f"{actor} may not {action}")
        return now

    # ------------------------------------------------------------------
    # discussion maintenance

    def add_comment(self, actor: UserId, parent: NodeId | None, body,
                    expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, COMMENT, expected_seq)
            rich = as_richtext(body)
            tree.check_add_comment(self.page, parent, rich)
            payload = {
                "node": self.page.next_node_id(),
                "parent": parent,
                "body": rich.to_dict(),
            }
            return self._append(actor, COMMENT_ADDED, payload, now)

    def edit_comment(self, actor: UserId, node: NodeId, body,
                     expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, COMMENT, expected_seq)
            rich = as_richtext(body)
            tree.check_edit_comment(self.page, node, actor, rich, now)
            return self._append(actor, COMMENT_EDITED,
                                {"node": node, "body": rich.to_dict()}, now)

    def hide_comment(self, actor: UserId, node: NodeId) -> Event | None:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            tree.check_hide_comment(self.page, node)
            if self.page.nodes[node].hidden:
                return None
            return self._append(actor, COMMENT_HIDDEN, {"node": node}, now)

    def unhide_comment(self, actor: UserId, node: NodeId) -> Event | None:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            tree.check_hide_comment(self.page, node)
            if not self.page.nodes[node].hidden:
                return None
            return self._append(actor, COMMENT_UNHIDDEN, {"node": node}, now)

    def tag_comment(self, actor: UserId, node: NodeId, tag: str, add: bool) -> Event | None:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            tree.check_tag_comment(self.page, node, tag)
            has = tag in self.page.nodes[node].tags
            if add == has:
                return None
            kind = COMMENT_TAGGED if add else COMMENT_UNTAGGED
            return self._append(actor, kind, {"node": node, "tag": tag}, now)

    # ------------------------------------------------------------------
    # synthesis

    def summarize(self, actor: UserId, selection: list[NodeId], body,
                  citations: list[Citation] | None = None,
                  expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, expected_seq)
            rich = as_richtext(body)
            cits = citations or []
            tree.check_summarize(self.page, selection, rich, cits, actor, now)
            payload = {
                "node": self.page.next_node_id(),
                "selection": list(selection),
                "body": rich.to_dict(),
                "citations": [c.to_dict() for c in cits],
            }
            return self._append(actor, SUMMARY_CREATED, payload, now)

    def edit_summary(self, actor: UserId, summary: NodeId, body,
                     citations: list[Citation] | None = None,
                     incorporate: bool = False,
                     expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, expected_seq)
            rich = as_richtext(body)
            cits = citations or []
            tree.check_edit_summary(self.page, summary, rich, cits, actor, now)
            payload = {
                "node": summary,
                "body": rich.to_dict(),
                "citations": [c.to_dict() for c in cits],
                "incorporate": bool(incorporate),
            }
            return self._append(actor, SUMMARY_EDITED, payload, now)

    def incorporate(self, actor: UserId, summary: NodeId,
                    expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, expected_seq)
            tree.check_incorporate(self.page, summary, actor, now)
            return self._append(actor, SUMMARY_INCORPORATED, {"node": summary}, now)

    def delete_summary(self, actor: UserId, summary: NodeId,
                       expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, expected_seq)
            tree.check_delete_summary(self.page, summary, actor, now)
            return self._append(actor, SUMMARY_DELETED, {"node": summary}, now)

    def flag_summary(self, actor: UserId, summary: NodeId, dimension: str,
                     value: int) -> Event:
        with self._lock:
            now = self._begin(actor, FLAG, None)
            tree.check_flag_summary(self.page, summary, dimension, value)
            payload = {"node": summary, "dimension": dimension, "value": value}
            return self._append(actor, SUMMARY_FLAGGED, payload, now)

    def move_node(self, actor: UserId, node: NodeId, new_parent: NodeId | None,
                  index: int, expected_seq: int | None = None) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, expected_seq)
            tree.check_move_node(self.page, node, new_parent, index, actor, now)
            payload = {"node": node, "new_parent": new_parent, "index": index}
            return self._append(actor, NODE_MOVED, payload, now)

    # ------------------------------------------------------------------
    # locks

    def acquire_summary_lock(self, actor: UserId, covered: list[NodeId]) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            closure: set[NodeId] = set()
            for nid in covered:
                if nid not in self.page.nodes:
                    raise UnknownNode(nid)
                closure.update(self.page.subtree(nid))
            renewal = locks_mod.check_acquire_summary(self.page, actor, closure, now)
            lock_id = renewal.id if renewal else self.page.next_lock_id()
            payload = {"lock": {
                "id": lock_id, "holder": actor, "kind": LOCK_SUMMARY,
                "covered": sorted(closure),
                "acquired_at": renewal.acquired_at if renewal else now,
                "expires_at": now + self.config.summary_lock_ttl_ms,
            }}
            return self._append(actor, LOCK_ACQUIRED, payload, now)

    def acquire_move_lock(self, actor: UserId) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            renewal = locks_mod.check_acquire_move(self.page, actor, now)
            lock_id = renewal.id if renewal else self.page.next_lock_id()
            payload = {"lock": {
                "id": lock_id, "holder": actor, "kind": LOCK_MOVE, "covered": [],
                "acquired_at": renewal.acquired_at if renewal else now,
                "expires_at": now + self.config.move_lock_ttl_ms,
            }}
            return self._append(actor, LOCK_ACQUIRED, payload, now)

    def release_lock(self, actor: UserId, lock_id: str) -> Event:
        with self._lock:
            now = self.clock()
            self._sweep_locks(now)
            locks_mod.check_release(self.page, lock_id, actor)
            return self._append(actor, LOCK_RELEASED, {"lock_id": lock_id}, now)

    def expire_locks(self, now: int | None = None) -> list[Event]:
        with self._lock:
            return self._sweep_locks(now if now is not None else self.clock())

    # ------------------------------------------------------------------
    # membership, reads

    def add_member(self, actor: UserId, user: UserId, role: str) -> Event | None:
        with self._lock:
            now = self._begin(actor, ADMIN, None)
            if role not in ROLES:
                raise ValidationError(f"unknown role {role!r}")
            if self.page.members.get(user) == role:
                return None
            return self._append(actor, MEMBER_ADDED, {"user": user, "role": role}, now)

    def set_permissions(self, actor: UserId, mode: str | None = None,
                        publicly_commentable: bool | None = None,
                        publicly_editable: bool | None = None,
                        roles: dict[UserId, str] | None = None) -> Event | None:
        with self._lock:
            now = self._begin(actor, ADMIN, None)
            payload: dict = {}
            if mode is not None:
                if mode not in MODES:
                    raise ValidationError(f"unknown mode {mode!r}")
                payload["mode"] = mode
            if publicly_commentable is not None:
                payload["publicly_commentable"] = bool(publicly_commentable)
            if publicly_editable is not None:
                payload["publicly_editable"] = bool(publicly_editable)
            if roles:
                for role in roles.values():
                    if role not in ROLES:
                        raise ValidationError(f"unknown role {role!r}")
                payload["roles"] = dict(roles)
            if not payload:
                return None
            return self._append(actor, PERMISSION_CHANGED, payload, now)

    def mark_read(self, user: UserId, nodes: list[NodeId]) -> Event | None:
        with self._lock:
            now = self.clock()
            if user not in self.page.members:
                raise PermissionDenied(f"{user} is not a member")
            for nid in nodes:
                if nid not in self.page.nodes:
                    raise UnknownNode(nid)
            already = self.page.read.get(user, set())
            fresh = sorted(set(nodes) - already)
            if not fresh:
                return None
            return self._append(user, READ_MARKED, {"user": user, "nodes": fresh}, now)

    # ------------------------------------------------------------------
    # bulk ingestion

    def import_discussion(self, actor: UserId, doc: dict) -> dict[str, NodeId]:
        """Replay an external threaded discussion as CommentAdded events,
        parent-first then by timestamp. All-or-nothing: the document is fully
        validated before the first event is appended."""
        from .interchange import prepare_discussion_import

        with self._lock:
            now = self._begin(actor, EDIT, None)
            items, mapping = prepare_discussion_import(self.page, doc)
            for author, payload in items:
                self._append(author, COMMENT_ADDED, payload, now)
            return mapping

    def install_tree(self, actor: UserId, tree_dict: dict) -> Event:
        with self._lock:
            now = self._begin(actor, EDIT, None)
            if self.page.nodes:
                raise ValidationError("tree import requires an empty page")
            return self._append(actor, TREE_IMPORTED, {"tree": tree_dict}, now)

    # ------------------------------------------------------------------
    # reads

    def require_read(self, actor: UserId) -> None:
        if not check_permission(self.page, actor, READ):
            raise PermissionDenied(f"{actor} may not read")

    def page_doc(self, viewer: UserId) -> dict:
        """Full client-init payload, built under the serial lock so a racing
        writer can never tear the snapshot."""
        from .model import ANON_USER
        from .store import node_to_dict

        with self._lock:
            page = self.page
            return {
                "id": page.id,
                "title": page.title,
                "creator": page.creator,
                "seq": page.seq,
                "mode": page.mode,
                "publicly_commentable": page.publicly_commentable,
                "publicly_editable": page.publicly_editable,
                "members": dict(page.members),
                "roots": list(page.roots),
                "nodes": {nid: node_to_dict(node) for nid, node in page.nodes.items()},
                "locks": {lid: lock.to_dict() for lid, lock in page.locks.items()},
                "unread": sorted(page.unread_set(viewer)) if viewer != ANON_USER else [],
            }

    def export(self, format: str) -> bytes:
        from .interchange import export_document

        with self._lock:
            return export_document(self.page, format)

    def view(self, viewer: UserId | None = None,
             expansions: set[NodeId] | None = None) -> list[DisplayItem]:
        with self._lock:
            return compute_default_view(
                self.page, viewer, expansions or frozenset(),
                snippet_limit=self.config.snippet_length,
            )

    def metrics(self) -> dict:
        with self._lock:
            return compute_metrics(self.page)

    def unread_set(self, user: UserId) -> set[NodeId]:
        with self._lock:
            return self.page.unread_set(user)

    def events_since(self, seq: int) -> list[Event]:
        with self._lock:
            return list(self.events[seq:])

    def subscribe_since(self, seq: int) -> Subscription:
        sub = Subscription()
        with self._lock:
            for frame in self.frames[seq:]:
                sub.put(frame)
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
            sub.closed = True

    def state_hash(self) -> str:
        with self._lock:
            return state_hash(self.page)


class Service:
    """All pages plus the flat user registry (opaque bearer tokens)."""

    def __init__(self, storage_dir: str | Path | None = None,
                 config: EngineConfig | None = None,
                 clock: Callable[[], int] = wall_clock_ms,
                 sender=None):
        self.storage_dir = Path(storage_dir) if storage_dir else None
        self.config = config or EngineConfig()
        self.clock = clock
        self.sender = sender
        self.engines: dict[str, PageEngine] = {}
        self.tokens: dict[str, UserId] = {}
        self._lock = threading.Lock()
        if self.storage_dir is not None:
            (self.storage_dir / "pages").mkdir(parents=True, exist_ok=True)

    # -- users ---------------------------------------------------------

    def add_user(self, name: UserId, token: str | None = None) -> str:
        token = token or secrets.token_hex(16)
        self.tokens[token] = name
        return token

    def user_for_token(self, token: str) -> UserId | None:
        return self.tokens.get(token)

    # -- pages ----------------------------------------------------------

    def _page_store(self, page_id: str) -> PageStore | None:
        if self.storage_dir is None:
            return None
        return PageStore(
            self.storage_dir / "pages" / page_id,
            fsync=self.config.fsync,
            snapshot_interval=self.config.snapshot_interval,
        )

    def _next_page_id(self) -> str:
        taken = set(self.engines)
        if self.storage_dir is not None:
            taken.update(p.name for p in (self.storage_dir / "pages").iterdir() if p.is_dir())
        n = 1
        while f"p{n}" in taken:
            n += 1
        return f"p{n}"

    def create_page(self, actor: UserId, title: str = "", mode: str = "both",
                    publicly_commentable: bool = False,
                    publicly_editable: bool = False) -> PageEngine:
        if mode not in MODES:
            raise ValidationError(f"unknown mode {mode!r}")
        with self._lock:
            page_id = self._next_page_id()
            engine = PageEngine(
                Page(id=page_id), store=self._page_store(page_id),
                config=self.config, clock=self.clock, sender=self.sender,
            )
            self.engines[page_id] = engine
        with engine._lock:
            engine._append(actor, PAGE_CREATED, {
                "title": title, "mode": mode,
                "publicly_commentable": publicly_commentable,
                "publicly_editable": publicly_editable,
            }, self.clock())
        return engine

    def get_page(self, page_id: str) -> PageEngine:
        with self._lock:
            engine = self.engines.get(page_id)
            if engine is not None:
                return engine
            if self.storage_dir is not None:
                page_dir = self.storage_dir / "pages" / page_id
                if page_dir.is_dir():
                    store = self._page_store(page_id)
                    engine = PageEngine.from_events(
                        page_id, store.read_events(), store=store,
                        config=self.config, clock=self.clock, sender=self.sender,
                    )
                    self.engines[page_id] = engine
                    return engine
        raise UnknownPage(page_id)
