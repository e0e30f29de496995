"""Page state: an ordered forest of comments and summaries plus collaboration
bookkeeping (members, permissions, locks, read marks, word accounting).

A Page is only ever mutated by folding events (see events.apply_event); all
functions here are pure reads or low-level structural helpers used by that
fold. Derived summary status is never stored: a summary is complete iff its
pending set is empty, outdated otherwise.

Pending-set semantics worth keeping in mind:
  - created/edited/moved-in descendants land in the pending set of every
    summary ancestor at the time of the event;
  - ids that moved OUT of a summary's subtree stay in its pending set as
    "ghosts" (the summary's coverage shrank, so it is outdated) but contribute
    nothing to view expansion;
  - incorporation clears one summary's whole pending set and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .richtext import RichText

NodeId = str
PageId = str
UserId = str
Seq = int

COMMENT = "comment"
SUMMARY = "summary"

# Outline icons, fully derived from node kind and pending state.
BLUE_CIRCLE = "blue_circle"        # unsummarized comment
YELLOW_CIRCLE = "yellow_circle"    # summarized comment
ORANGE_SQUARE = "orange_square"    # complete summary
HALF_SQUARE = "half_square"        # outdated summary

ROLE_CREATOR = "creator"
ROLE_EDITOR = "editor"
ROLE_COMMENTER = "commenter"
ROLES = (ROLE_CREATOR, ROLE_EDITOR, ROLE_COMMENTER)

MODE_COMMENT_ONLY = "comment-only"
MODE_EDIT_ONLY = "edit-only"
MODE_BOTH = "both"
MODES = (MODE_COMMENT_ONLY, MODE_EDIT_ONLY, MODE_BOTH)

FLAG_DIMENSIONS = ("neutrality", "comprehensiveness", "writing_quality")

CITE_QUOTE = "quote"
CITE_REFERENCE = "cite"

ANON_USER: UserId = "anon"

LOCK_SUMMARY = "summary"
LOCK_MOVE = "move"


@dataclass(frozen=True)
class Citation:
    start: int
    end: int
    target: NodeId
    mode: str  # CITE_QUOTE | CITE_REFERENCE

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "target": self.target, "mode": self.mode}


@dataclass
class Node:
    id: NodeId
    kind: str  # COMMENT | SUMMARY
    author: UserId
    created_at: int  # epoch millis, from the creating event
    created_seq: Seq  # seq of the creating event; drives unread computation
    body: RichText
    parent: NodeId | None = None
    children: list[NodeId] = field(default_factory=list)
    # comment-only fields
    hidden: bool = False
    tags: set[str] = field(default_factory=set)
    # summary-only fields
    pending: set[NodeId] = field(default_factory=set)
    flags: dict[str, int] = field(default_factory=dict)
    citations: list[Citation] = field(default_factory=list)

    @property
    def is_summary(self) -> bool:
        return self.kind == SUMMARY

    @property
    def is_comment(self) -> bool:
        return self.kind == COMMENT


@dataclass
class Lock:
    id: str
    holder: UserId
    kind: str  # LOCK_SUMMARY | LOCK_MOVE
    covered: frozenset[NodeId]  # empty for move locks
    acquired_at: int
    expires_at: int

    def live(self, now: int) -> bool:
        return now < self.expires_at

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "holder": self.holder,
            "kind": self.kind,
            "covered": sorted(self.covered),
            "acquired_at": self.acquired_at,
            "expires_at": self.expires_at,
        }


@dataclass
class Page:
    id: PageId
    title: str = ""
    creator: UserId = ""
    nodes: dict[NodeId, Node] = field(default_factory=dict)
    roots: list[NodeId] = field(default_factory=list)
    seq: Seq = 0
    node_counter: int = 0
    lock_counter: int = 0
    # membership and permissions
    members: dict[UserId, str] = field(default_factory=dict)  # user -> role
    enrolled_at: dict[UserId, Seq] = field(default_factory=dict)
    mode: str = MODE_BOTH
    publicly_commentable: bool = False
    publicly_editable: bool = False
    # collaboration state
    locks: dict[str, Lock] = field(default_factory=dict)
    read: dict[UserId, set[NodeId]] = field(default_factory=dict)
    # Table-2 style accounting: user -> {"comment": words, "summary": words}
    words_added: dict[UserId, dict[str, int]] = field(default_factory=dict)

    # -- identity ---------------------------------------------------------

    def node(self, nid: NodeId) -> Node:
        return self.nodes[nid]

    def next_node_id(self) -> NodeId:
        return f"n{self.node_counter + 1}"

    def next_lock_id(self) -> str:
        return f"L{self.lock_counter + 1}"

    # -- structure queries -------------------------------------------------

    def sibling_list(self, parent: NodeId | None) -> list[NodeId]:
        return self.roots if parent is None else self.nodes[parent].children

    def ancestors(self, nid: NodeId) -> list[NodeId]:
        """Strict ancestors, nearest first."""
        out = []
        cur = self.nodes[nid].parent
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out

    def summary_ancestors(self, nid: NodeId) -> list[NodeId]:
        """Strict summary ancestors, nearest first."""
        return [a for a in self.ancestors(nid) if self.nodes[a].is_summary]

    def nearest_summary_ancestor(self, nid: NodeId) -> NodeId | None:
        for a in self.ancestors(nid):
            if self.nodes[a].is_summary:
                return a
        return None

    def is_ancestor(self, maybe_ancestor: NodeId, nid: NodeId) -> bool:
        return maybe_ancestor in self.ancestors(nid)

    def subtree(self, nid: NodeId) -> list[NodeId]:
        """nid plus all descendants, pre-order."""
        out = []
        stack = [nid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(reversed(self.nodes[cur].children))
        return out

    def preorder(self) -> Iterator[NodeId]:
        for root in self.roots:
            yield from self.subtree(root)

    # -- derived status ------------------------------------------------------

    def is_unsummarized(self, nid: NodeId) -> bool:
        """True for a 'blue' comment: no summary ancestor, or still pending in
        the nearest one."""
        node = self.nodes[nid]
        if not node.is_comment:
            return False
        nearest = self.nearest_summary_ancestor(nid)
        if nearest is None:
            return True
        return nid in self.nodes[nearest].pending

    def icon(self, nid: NodeId) -> str:
        node = self.nodes[nid]
        if node.is_summary:
            return HALF_SQUARE if node.pending else ORANGE_SQUARE
        return BLUE_CIRCLE if self.is_unsummarized(nid) else YELLOW_CIRCLE

    # -- read state --------------------------------------------------------

    def unread_set(self, user: UserId) -> set[NodeId]:
        """Nodes created after the user's enrollment, not authored by them,
        and not marked read."""
        enrolled = self.enrolled_at.get(user)
        if enrolled is None:
            return set()
        read = self.read.get(user, set())
        out = set()
        for nid, node in self.nodes.items():
            if node.author == user or nid in read:
                continue
            if node.created_seq > enrolled:
                out.add(nid)
        return out

    # -- validation ----------------------------------------------------------

    def check_forest(self) -> None:
        """Full-scan structural audit: parent/child mutual consistency,
        acyclicity, no orphans, no duplicate child references."""
        seen: set[NodeId] = set()
        for root in self.roots:
            assert root in self.nodes, f"root {root} missing"
            assert self.nodes[root].parent is None, f"root {root} has a parent"
        for nid, node in self.nodes.items():
            if node.parent is None:
                assert nid in self.roots, f"{nid} parentless but not a root"
            else:
                assert nid in self.nodes[node.parent].children, (
                    f"{nid} missing from parent {node.parent} children"
                )
            for child in node.children:
                assert child in self.nodes, f"{nid} references missing child {child}"
                assert self.nodes[child].parent == nid, f"child {child} parent mismatch"
            assert len(set(node.children)) == len(node.children), f"{nid} duplicate children"
        stack = list(self.roots)
        while stack:
            cur = stack.pop()
            assert cur not in seen, f"cycle or shared node at {cur}"
            seen.add(cur)
            stack.extend(self.nodes[cur].children)
        assert seen == set(self.nodes), f"orphaned nodes: {set(self.nodes) - seen}"
