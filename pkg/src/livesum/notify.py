"""Mentions and notification dispatch.

A new comment can notify three audiences: members @-mentioned in the body,
authors of comments along the reply chain above it (authors are subscribed to
their own comments' reply threads), and, for a new summary, authors whose
comments it covers. Each (event, recipient) pair produces at most one
notification; when several reasons apply the most specific wins
(Mention > ThreadReply > SummaryOfYourComment). Actors are never notified
about their own actions.

Delivery is a pluggable sender; the default appends newline-delimited JSON
records {recipient, reason, page, node, seq, at} to an outbox file.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from . import events as ev
from .model import ANON_USER, Page, UserId
from .richtext import RichText

REASON_MENTION = "Mention"
REASON_THREAD_REPLY = "ThreadReply"
REASON_SUMMARY_OF_YOUR_COMMENT = "SummaryOfYourComment"

_PRIORITY = {REASON_MENTION: 0, REASON_THREAD_REPLY: 1, REASON_SUMMARY_OF_YOUR_COMMENT: 2}


@dataclass(frozen=True)
class Notification:
    recipient: UserId
    reason: str
    page: str
    node: str
    seq: int
    at: int

    def to_dict(self) -> dict:
        return {
            "recipient": self.recipient,
            "reason": self.reason,
            "page": self.page,
            "node": self.node,
            "seq": self.seq,
            "at": self.at,
        }


def parse_mentions(body: RichText | str, members: list[UserId] | set[UserId]) -> set[UserId]:
    """Usernames @-mentioned in a body, longest member name winning at each
    "@". Unknown names are ignored."""
    text = body.text if isinstance(body, RichText) else body
    by_length = sorted(members, key=len, reverse=True)
    found: set[UserId] = set()
    pos = text.find("@")
    while pos != -1:
        rest = text[pos + 1:]
        for name in by_length:
            if name and rest.startswith(name):
                found.add(name)
                break
        pos = text.find("@", pos + 1)
    return found


def dispatch_notifications(page: Page, event: ev.Event) -> list[Notification]:
    """Notifications triggered by one applied event (page state is post-apply)."""
    candidates: list[tuple[UserId, str]] = []
    node_id = event.payload.get("node", "")

    if event.payload.get("imported"):
        return []
    if event.kind == ev.COMMENT_ADDED:
        body = page.nodes[node_id].body
        for user in parse_mentions(body, list(page.members)):
            candidates.append((user, REASON_MENTION))
        for anc in page.ancestors(node_id):
            anc_node = page.nodes[anc]
            if anc_node.is_comment:
                candidates.append((anc_node.author, REASON_THREAD_REPLY))
    elif event.kind == ev.SUMMARY_CREATED:
        for nid in page.subtree(node_id):
            covered = page.nodes[nid]
            if covered.is_comment:
                candidates.append((covered.author, REASON_SUMMARY_OF_YOUR_COMMENT))

    best: dict[UserId, str] = {}
    for user, reason in candidates:
        if user == event.actor or user == ANON_USER or user not in page.members:
            continue
        if user not in best or _PRIORITY[reason] < _PRIORITY[best[user]]:
            best[user] = reason
    return [
        Notification(recipient=user, reason=reason, page=event.page,
                     node=node_id, seq=event.seq, at=event.at)
        for user, reason in sorted(best.items())
    ]


class OutboxSender:
    """Desk-scale delivery: append one JSON line per notification."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def send(self, notifications: list[Notification]) -> None:
        if not notifications:
            return
        lines = [
            json.dumps(n.to_dict(), sort_keys=True, separators=(",", ":"))
            for n in notifications
        ]
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")


class NullSender:
    def send(self, notifications: list[Notification]) -> None:
        pass


class CollectingSender:
    """Test helper: keeps everything in memory."""

    def __init__(self) -> None:
        self.sent: list[Notification] = []

    def send(self, notifications: list[Notification]) -> None:
        self.sent.extend(notifications)
