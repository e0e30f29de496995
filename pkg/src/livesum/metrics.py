"""Activity metrics: words shown in the default view, summarization progress,
and per-user contribution accounting.

default_view_words is the chart measure: words across all top-level summary
bodies plus words across every non-hidden unsummarized comment, anywhere in
the tree (collapsed summarized content contributes only through the summary
that covers it). progress_fraction is the share of non-hidden comments whose
nearest summary ancestor is complete; an empty page counts as fully done.

WordTracker maintains default_view_words incrementally while folding a log so
a long stats replay costs O(touched region) per event; recount() is the
from-scratch formula the tracker must always agree with.
"""

from __future__ import annotations

from .events import (
    COMMENT_ADDED,
    COMMENT_EDITED,
    COMMENT_HIDDEN,
    COMMENT_UNHIDDEN,
    NODE_MOVED,
    SUMMARY_CREATED,
    SUMMARY_DELETED,
    SUMMARY_EDITED,
    SUMMARY_INCORPORATED,
    TREE_IMPORTED,
    Event,
    apply_event,
)
from .model import NodeId, Page


def recount_view_words(page: Page) -> int:
    total = 0
    for rid in page.roots:
        if page.nodes[rid].is_summary:
            total += page.nodes[rid].body.word_count()
    for nid, node in page.nodes.items():
        if node.is_comment and not node.hidden and page.is_unsummarized(nid):
            total += node.body.word_count()
    return total


def progress_fraction(page: Page) -> float:
    comments = [n for n in page.nodes.values() if n.is_comment and not n.hidden]
    if not comments:
        return 1.0
    done = 0
    for node in comments:
        nearest = page.nearest_summary_ancestor(node.id)
        if nearest is not None and not page.nodes[nearest].pending:
            done += 1
    return done / len(comments)


def compute_metrics(page: Page) -> dict:
    return {
        "default_view_words": recount_view_words(page),
        "progress_fraction": progress_fraction(page),
        "per_user_words_added": {
            user: dict(buckets) for user, buckets in sorted(page.words_added.items())
        },
    }


class WordTracker:
    """Incremental default_view_words over a fold.

    Call apply(page, event) instead of events.apply_event; after each call,
    `total` equals recount_view_words(page). Per event only the structurally
    touched region is re-evaluated.
    """

    def __init__(self, page: Page):
        self._counted: dict[NodeId, int] = {}  # node -> words currently counted
        self.total = 0
        self._recount_all(page)

    # -- public ------------------------------------------------------------

    def apply(self, page: Page, event: Event) -> None:
        pre_affected, removed = self._pre(page, event)
        apply_event(page, event)
        if event.kind == TREE_IMPORTED:
            self._recount_all(page)
            return
        for nid in removed:
            self.total -= self._counted.pop(nid, 0)
        affected = pre_affected | self._post_affected(page, event)
        for nid in affected:
            self._reeval(page, nid)

    # -- internals ------------------------------------------------------------

    def _recount_all(self, page: Page) -> None:
        self._counted.clear()
        self.total = 0
        for nid in page.nodes:
            self._reeval(page, nid)

    def _counts_for(self, page: Page, nid: NodeId) -> int:
        node = page.nodes[nid]
        if node.is_summary:
            return node.body.word_count() if node.parent is None else 0
        if node.hidden:
            return 0
        return node.body.word_count() if page.is_unsummarized(nid) else 0

    def _reeval(self, page: Page, nid: NodeId) -> None:
        if nid not in page.nodes:
            self.total -= self._counted.pop(nid, 0)
            return
        new = self._counts_for(page, nid)
        old = self._counted.get(nid, 0)
        if new != old:
            self.total += new - old
        if new:
            self._counted[nid] = new
        else:
            self._counted.pop(nid, None)

    def _pre(self, page: Page, event: Event) -> tuple[set[NodeId], set[NodeId]]:
        """(nodes to re-evaluate that must be captured pre-apply, nodes that
        will no longer exist)."""
        if event.kind == SUMMARY_DELETED:
            nid = event.payload["node"]
            survivors = set(page.subtree(nid)) - {nid}
            return survivors, {nid}
        return set(), set()

    def _post_affected(self, page: Page, event: Event) -> set[NodeId]:
        p = event.payload
        if event.kind == COMMENT_ADDED:
            return {p["node"]}
        if event.kind in (COMMENT_EDITED, COMMENT_HIDDEN, COMMENT_UNHIDDEN):
            return {p["node"]}
        if event.kind in (SUMMARY_CREATED, SUMMARY_EDITED, SUMMARY_INCORPORATED):
            return set(page.subtree(p["node"]))
        if event.kind == NODE_MOVED:
            # A comment's counted state depends on membership in its nearest
            # cover's pending set, never on that cover's status, so only the
            # moved ids themselves can flip.
            return set(page.subtree(p["node"]))
        return set()
