"""The default outline view and ephemeral per-user sorting.

The default view is a pre-order walk where complete summaries stand in for
their subtrees (unless the viewer expanded them) and outdated summaries
auto-expand just far enough to surface what made them outdated:

  - hidden comments are skipped (their children surface in their place);
  - a complete summary renders collapsed unless it is in the viewer's
    expansion set;
  - an outdated summary always renders, and traversal beneath it follows only
    the ancestor chains of its pending nodes: pending nodes render, complete
    sub-summaries on a chain are pierced, off-chain complete sub-summaries
    render collapsed, off-chain summarized comments are omitted, and off-chain
    outdated sub-summaries render and auto-expand along their own chains;
  - inside such a restricted region the expansion set is ignored;
  - unsummarized comments render with their children.

Sorting reorders sibling groups for presentation only; stored child order is
never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    BLUE_CIRCLE,
    HALF_SQUARE,
    ORANGE_SQUARE,
    YELLOW_CIRCLE,
    NodeId,
    Page,
    UserId,
)
from .richtext import snippet

SORT_KEYS = ("chronological", "length", "author")


@dataclass(frozen=True)
class DisplayItem:
    node: NodeId
    depth: int
    icon: str
    snippet: str
    unread: bool

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "depth": self.depth,
            "icon": self.icon,
            "snippet": self.snippet,
            "unread": self.unread,
        }


def compute_default_view(
    page: Page,
    viewer: UserId | None = None,
    expansions: set[NodeId] | frozenset[NodeId] = frozenset(),
    snippet_limit: int = 80,
) -> list[DisplayItem]:
    unread = page.unread_set(viewer) if viewer is not None else set()
    items: list[DisplayItem] = []

    def emit(nid: NodeId, depth: int) -> None:
        node = page.nodes[nid]
        items.append(DisplayItem(
            node=nid, depth=depth, icon=page.icon(nid),
            snippet=snippet(node.body.text, snippet_limit),
            unread=nid in unread,
        ))

    def live_targets(pending: set[NodeId]) -> set[NodeId]:
        # Ghost entries (content that moved away) keep a summary outdated but
        # point at nothing to expand.
        return {t for t in pending if t in page.nodes}

    def chain_nodes(targets: set[NodeId]) -> set[NodeId]:
        anc: set[NodeId] = set()
        for t in targets:
            anc.update(page.ancestors(t))
        return anc

    def walk(children: list[NodeId], depth: int, targets: set[NodeId] | None,
             onpath: set[NodeId]) -> None:
        for cid in children:
            node = page.nodes[cid]
            if node.is_comment and node.hidden:
                walk(node.children, depth, targets, onpath)
                continue
            if node.is_comment:
                if targets is not None and cid not in targets and cid not in onpath:
                    continue
                emit(cid, depth)
                walk(node.children, depth + 1, targets, onpath)
                continue
            if node.pending:
                emit(cid, depth)
                sub = live_targets(node.pending)
                if targets is not None:
                    sub |= targets & set(page.subtree(cid))
                walk(node.children, depth + 1, sub, chain_nodes(sub))
                continue
            # complete summary
            if targets is None:
                emit(cid, depth)
                if cid in expansions:
                    walk(node.children, depth + 1, None, set())
            elif cid in targets or cid in onpath:
                emit(cid, depth)
                walk(node.children, depth + 1, targets, onpath)
            else:
                emit(cid, depth)  # frontier: stands in for its subtree

    walk(page.roots, 0, None, set())
    return items


def icon_map(page: Page) -> tuple[dict[NodeId, str], dict[NodeId, tuple[str, ...]]]:
    """Icons for every node and pending sets for every summary, in one pass
    (a per-node icon() call would re-walk ancestors each time)."""
    icons: dict[NodeId, str] = {}
    pending: dict[NodeId, tuple[str, ...]] = {}
    stack: list[tuple[NodeId, NodeId | None]] = [(r, None) for r in reversed(page.roots)]
    while stack:
        nid, nearest = stack.pop()
        node = page.nodes[nid]
        if node.is_summary:
            icons[nid] = HALF_SQUARE if node.pending else ORANGE_SQUARE
            pending[nid] = tuple(sorted(node.pending))
            child_nearest: NodeId | None = nid
        else:
            if nearest is None or nid in page.nodes[nearest].pending:
                icons[nid] = BLUE_CIRCLE
            else:
                icons[nid] = YELLOW_CIRCLE
            child_nearest = nearest
        for child in reversed(node.children):
            stack.append((child, child_nearest))
    return icons, pending


def _nest(items: list[DisplayItem]) -> list[dict]:
    """Rebuild the sibling structure implied by the flat depth sequence."""
    roots: list[dict] = []
    stack: list[tuple[int, dict]] = []
    for item in items:
        entry = {"item": item, "children": []}
        while stack and stack[-1][0] >= item.depth:
            stack.pop()
        if stack:
            stack[-1][1]["children"].append(entry)
        else:
            roots.append(entry)
        stack.append((item.depth, entry))
    return roots


def sort_view(page: Page, items: list[DisplayItem], key: str) -> list[DisplayItem]:
    """Reorder each sibling group of an already-computed view. Ephemeral:
    the page's stored children order is never modified."""
    if key not in SORT_KEYS:
        raise ValueError(f"unknown sort key {key!r}")

    def sort_key(entry: dict):
        node = page.nodes[entry["item"].node]
        if key == "chronological":
            return (node.created_at, node.created_seq)
        if key == "length":
            return (len(node.body.text), node.created_at, node.created_seq)
        return (node.author, node.created_at, node.created_seq)

    out: list[DisplayItem] = []

    def flatten(entries: list[dict]) -> None:
        for entry in sorted(entries, key=sort_key):
            out.append(entry["item"])
            flatten(entry["children"])

    flatten(_nest(items))
    return out
