"""Durable event-sourced storage: append-only log, periodic snapshots, and the
canonical byte-stable state serialization that drives equality and hashing.

The log is the authority; snapshots are disposable caches (a page loads from
the newest usable snapshot plus a replay of the suffix, and any snapshot
problem falls back to full replay). Appends are crash-safe in the WAL sense:
a torn final record is truncated away on load, while a bad record followed by
more valid data means real corruption and the page refuses to serve, naming
the first bad seq.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from .errors import CorruptLog, ParseError, StorageFull
from .events import Event, apply_event, decode_event, encode_event
from .model import Citation, Lock, Node, Page
from .richtext import as_richtext


# ---------------------------------------------------------------------------
# canonical state form


def node_to_dict(node: Node) -> dict:
    return {
        "id": node.id,
        "kind": node.kind,
        "author": node.author,
        "created_at": node.created_at,
        "created_seq": node.created_seq,
        "body": node.body.to_dict(),
        "parent": node.parent,
        "children": list(node.children),
        "hidden": node.hidden,
        "tags": sorted(node.tags),
        "pending": sorted(node.pending),
        "flags": {k: node.flags[k] for k in sorted(node.flags)},
        "citations": [c.to_dict() for c in node.citations],
    }


def node_from_dict(raw: dict) -> Node:
    return Node(
        id=raw["id"],
        kind=raw["kind"],
        author=raw["author"],
        created_at=raw["created_at"],
        created_seq=raw["created_seq"],
        body=as_richtext(raw["body"]),
        parent=raw.get("parent"),
        children=list(raw.get("children", [])),
        hidden=bool(raw.get("hidden", False)),
        tags=set(raw.get("tags", [])),
        pending=set(raw.get("pending", [])),
        flags=dict(raw.get("flags", {})),
        citations=[
            Citation(start=c["start"], end=c["end"], target=c["target"], mode=c["mode"])
            for c in raw.get("citations", [])
        ],
    )


def page_to_dict(page: Page) -> dict:
    return {
        "id": page.id,
        "title": page.title,
        "creator": page.creator,
        "seq": page.seq,
        "node_counter": page.node_counter,
        "lock_counter": page.lock_counter,
        "mode": page.mode,
        "publicly_commentable": page.publicly_commentable,
        "publicly_editable": page.publicly_editable,
        "members": {u: page.members[u] for u in sorted(page.members)},
        "enrolled_at": {u: page.enrolled_at[u] for u in sorted(page.enrolled_at)},
        "roots": list(page.roots),
        "nodes": {nid: node_to_dict(page.nodes[nid]) for nid in sorted(page.nodes)},
        "locks": {lid: page.locks[lid].to_dict() for lid in sorted(page.locks)},
        "read": {u: sorted(page.read[u]) for u in sorted(page.read)},
        "words_added": {
            u: {k: page.words_added[u][k] for k in sorted(page.words_added[u])}
            for u in sorted(page.words_added)
        },
    }


def page_from_dict(raw: dict) -> Page:
    page = Page(
        id=raw["id"],
        title=raw.get("title", ""),
        creator=raw.get("creator", ""),
        seq=raw["seq"],
        node_counter=raw.get("node_counter", 0),
        lock_counter=raw.get("lock_counter", 0),
        mode=raw.get("mode", "both"),
        publicly_commentable=bool(raw.get("publicly_commentable", False)),
        publicly_editable=bool(raw.get("publicly_editable", False)),
        members=dict(raw.get("members", {})),
        enrolled_at={u: int(s) for u, s in raw.get("enrolled_at", {}).items()},
        roots=list(raw.get("roots", [])),
    )
    for nid, node_raw in raw.get("nodes", {}).items():
        page.nodes[nid] = node_from_dict(node_raw)
    for lid, lock_raw in raw.get("locks", {}).items():
        page.locks[lid] = Lock(
            id=lock_raw["id"], holder=lock_raw["holder"], kind=lock_raw["kind"],
            covered=frozenset(lock_raw.get("covered", [])),
            acquired_at=lock_raw["acquired_at"], expires_at=lock_raw["expires_at"],
        )
    for user, nodes in raw.get("read", {}).items():
        page.read[user] = set(nodes)
    for user, buckets in raw.get("words_added", {}).items():
        page.words_added[user] = dict(buckets)
    return page


def canonical_state_bytes(page: Page) -> bytes:
    return json.dumps(
        page_to_dict(page), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def state_hash(page: Page) -> str:
    return hashlib.sha256(canonical_state_bytes(page)).hexdigest()


# ---------------------------------------------------------------------------
# on-disk layout: <dir>/events.log, <dir>/snapshots/<seq>.json


class PageStore:
    def __init__(self, directory: str | Path, fsync: bool = False,
                 snapshot_interval: int = 500):
        self.dir = Path(directory)
        self.fsync = fsync
        self.snapshot_interval = snapshot_interval
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "snapshots").mkdir(exist_ok=True)
        self._log_path = self.dir / "events.log"
        self._lock = threading.Lock()

    # -- log ------------------------------------------------------------

    def append(self, event: Event) -> None:
        line = encode_event(event) + "\n"
        with self._lock:
            try:
                with self._log_path.open("a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    if self.fsync:
                        os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageFull(str(exc)) from exc

    def read_events(self) -> list[Event]:
        """Decode the log, tolerating a torn final record but refusing
        mid-log corruption."""
        if not self._log_path.exists():
            return []
        raw = self._log_path.read_bytes()
        events: list[Event] = []
        lines = raw.split(b"\n")
        bad_at: int | None = None  # index of first undecodable line
        for idx, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                event = decode_event(line)
            except ParseError:
                bad_at = idx
                break
            if event.seq != len(events) + 1:
                raise CorruptLog(
                    f"seq gap in log: expected {len(events) + 1}, found {event.seq}",
                    bad_seq=len(events) + 1,
                )
            events.append(event)
        if bad_at is not None:
            trailing = b"".join(lines[bad_at + 1:]).strip()
            if trailing:
                raise CorruptLog(
                    f"undecodable record at seq {len(events) + 1} followed by more data",
                    bad_seq=len(events) + 1,
                )
            # torn tail from a crash mid-append: drop it
        return events

    # -- snapshots -----------------------------------------------------------

    def save_snapshot(self, page: Page) -> Path:
        path = self.dir / "snapshots" / f"{page.seq:08d}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(canonical_state_bytes(page))
        tmp.replace(path)
        return path

    def maybe_snapshot(self, page: Page) -> None:
        if self.snapshot_interval > 0 and page.seq % self.snapshot_interval == 0:
            self.save_snapshot(page)

    def snapshot_seqs(self) -> list[int]:
        out = []
        for path in (self.dir / "snapshots").glob("*.json"):
            try:
                out.append(int(path.stem))
            except ValueError:
                continue
        return sorted(out)

    # -- load ------------------------------------------------------------

    def load(self, page_id: str) -> Page:
        """Newest usable snapshot + suffix replay; falls back to full replay
        when snapshots are missing, stale-proof either way (log is authority)."""
        events = self.read_events()
        last_seq = len(events)
        page: Page | None = None
        for snap_seq in reversed(self.snapshot_seqs()):
            if snap_seq > last_seq:
                continue  # log truncated past this snapshot; it is disposable
            try:
                raw = json.loads((self.dir / "snapshots" / f"{snap_seq:08d}.json").read_text())
                candidate = page_from_dict(raw)
            except (OSError, ValueError, KeyError):
                continue
            if candidate.seq == snap_seq:
                page = candidate
                break
        if page is None:
            page = Page(id=page_id)
        for event in events[page.seq:]:
            apply_event(page, event)
        if not page.id:
            page.id = page_id
        return page
