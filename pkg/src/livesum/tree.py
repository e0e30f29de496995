"""State mutations over the page forest, split into check/apply pairs.

check_* functions validate an intended mutation against current state and
raise a typed error; they never mutate. apply_* functions fold an accepted
event into the page and must succeed deterministically; everything they need
is in (state, event). The engine runs check then apply under its serial lock;
the replay path runs apply alone (or check+apply when auditing
serializability).

Out-of-date bookkeeping rules implemented here:
  - new/edited comments dirty every summary ancestor;
  - moves dirty the summary ancestors gained and lost by the subtree (ids that
    left a summary's coverage stay in its pending set as ghosts);
  - deleting a summary reparents its children and dirties the nearest
    remaining summary ancestor with every node whose nearest cover it was;
  - a new summary starts complete unless replies arrived under the summarizer's
    lock after it was acquired (those start out pending);
  - incorporation clears exactly one summary's pending set.
"""

from __future__ import annotations

import re
from typing import TYPE_CHECKING

from . import locks as locks_mod
from .errors import (
    CycleWouldForm,
    DanglingCitation,
    EmptyBody,
    EmptySelection,
    EmptyTag,
    IndexOutOfRange,
    InvalidDimension,
    Locked,
    LockNotHeld,
    MixedParents,
    MoveLockNotHeld,
    NotAComment,
    NotASummary,
    NotAuthor,
    ParseError,
    UnknownCitation,
    UnknownNode,
    UnknownParent,
    ValueOutOfRange,
)
from .model import (
    COMMENT,
    FLAG_DIMENSIONS,
    SUMMARY,
    CITE_QUOTE,
    CITE_REFERENCE,
    Citation,
    Lock,
    Node,
    NodeId,
    Page,
    UserId,
)
from .richtext import RichText, as_richtext

if TYPE_CHECKING:
    from .events import Event

_NODE_ID_RE = re.compile(r"^n(\d+)$")
_LOCK_ID_RE = re.compile(r"^L(\d+)$")


# ---------------------------------------------------------------------------
# shared helpers


def _bump_node_counter(page: Page, nid: NodeId) -> None:
    m = _NODE_ID_RE.match(nid)
    if m:
        page.node_counter = max(page.node_counter, int(m.group(1)))


def _bump_lock_counter(page: Page, lock_id: str) -> None:
    m = _LOCK_ID_RE.match(lock_id)
    if m:
        page.lock_counter = max(page.lock_counter, int(m.group(1)))


def _add_words(page: Page, user: UserId, bucket: str, delta: int) -> None:
    if delta == 0:
        return
    acct = page.words_added.setdefault(user, {"comment": 0, "summary": 0})
    acct[bucket] += delta


def _require_node(page: Page, nid: NodeId) -> Node:
    node = page.nodes.get(nid)
    if node is None:
        raise UnknownNode(nid)
    return node


def _require_comment(page: Page, nid: NodeId) -> Node:
    node = _require_node(page, nid)
    if not node.is_comment:
        raise NotAComment(nid)
    return node


def _require_summary(page: Page, nid: NodeId) -> Node:
    node = _require_node(page, nid)
    if not node.is_summary:
        raise NotASummary(nid)
    return node


def _dirty_ancestors(page: Page, nid: NodeId) -> None:
    for anc in page.summary_ancestors(nid):
        page.nodes[anc].pending.add(nid)


def validate_citations(page: Page, body: RichText, citations: list[Citation]) -> None:
    """Citations may target comments only (so summary deletion cannot dangle
    them); spans index the summary body; quote spans must be verbatim text
    from the target at creation time."""
    for cit in citations:
        target = page.nodes.get(cit.target)
        if target is None or not target.is_comment:
            raise DanglingCitation(f"citation target {cit.target} is not a comment on this page")
        if not (0 <= cit.start <= cit.end <= len(body.text)):
            raise DanglingCitation(f"citation span [{cit.start}, {cit.end}) outside body bounds")
        if cit.mode not in (CITE_QUOTE, CITE_REFERENCE):
            raise DanglingCitation(f"unknown citation mode {cit.mode!r}")
        if cit.mode == CITE_QUOTE:
            quoted = body.text[cit.start:cit.end]
            if quoted not in target.body.text:
                raise DanglingCitation("quote span does not occur in the cited comment")


def parse_citations(raw: object) -> list[Citation]:
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise ParseError("citations must be a list")
    out = []
    for item in raw:
        if not isinstance(item, dict):
            raise ParseError(f"malformed citation: {item!r}")
        try:
            out.append(Citation(
                start=int(item["start"]), end=int(item["end"]),
                target=str(item["target"]), mode=str(item["mode"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed citation: {item!r}") from exc
    return out


# ---------------------------------------------------------------------------
# page / membership


def apply_page_created(page: Page, event: Event) -> None:
    p = event.payload
    page.title = p.get("title", "")
    page.creator = event.actor
    page.mode = p.get("mode", "both")
    page.publicly_commentable = bool(p.get("publicly_commentable", False))
    page.publicly_editable = bool(p.get("publicly_editable", False))
    page.members[event.actor] = "creator"
    page.enrolled_at[event.actor] = event.seq


def apply_member_added(page: Page, event: Event) -> None:
    user = event.payload["user"]
    page.members[user] = event.payload["role"]
    page.enrolled_at.setdefault(user, event.seq)


def apply_permission_changed(page: Page, event: Event) -> None:
    p = event.payload
    if "mode" in p:
        page.mode = p["mode"]
    if "publicly_commentable" in p:
        page.publicly_commentable = bool(p["publicly_commentable"])
    if "publicly_editable" in p:
        page.publicly_editable = bool(p["publicly_editable"])
    for user, role in p.get("roles", {}).items():
        page.members[user] = role
        page.enrolled_at.setdefault(user, event.seq)


# ---------------------------------------------------------------------------
# comments


def check_add_comment(page: Page, parent: NodeId | None, body: RichText) -> None:
    if parent is not None:
        node = page.nodes.get(parent)
        if node is None or (node.is_comment and node.hidden):
            raise UnknownParent(parent or "")
    if body.is_blank():
        raise EmptyBody()


def apply_comment_added(page: Page, event: Event) -> None:
    p = event.payload
    nid = p["node"]
    parent = p.get("parent")
    body = as_richtext(p["body"])
    node = Node(
        id=nid, kind=COMMENT, author=event.actor,
        # imported comments keep their source timestamps for chronology
        created_at=p.get("created_at", event.at),
        created_seq=event.seq, body=body, parent=parent,
    )
    page.nodes[nid] = node
    page.sibling_list(parent).append(nid)
    _bump_node_counter(page, nid)
    _dirty_ancestors(page, nid)
    _add_words(page, event.actor, "comment", body.word_count())


def check_edit_comment(page: Page, nid: NodeId, actor: UserId, body: RichText, now: int) -> None:
    node = _require_comment(page, nid)
    if node.author != actor:
        raise NotAuthor(f"{nid} belongs to {node.author}")
    blocker = locks_mod.covered_by_other(page, {nid}, actor, now)
    if blocker is not None:
        raise Locked(f"{nid} is covered by {blocker.holder}'s summary lock")
    if body.is_blank():
        raise EmptyBody()


def apply_comment_edited(page: Page, event: Event) -> None:
    p = event.payload
    node = page.nodes[p["node"]]
    new_body = as_richtext(p["body"])
    _add_words(page, event.actor, "comment", new_body.word_count() - node.body.word_count())
    node.body = new_body
    _dirty_ancestors(page, node.id)


def check_hide_comment(page: Page, nid: NodeId) -> None:
    _require_comment(page, nid)


def apply_comment_hidden(page: Page, event: Event) -> None:
    page.nodes[event.payload["node"]].hidden = True


def apply_comment_unhidden(page: Page, event: Event) -> None:
    page.nodes[event.payload["node"]].hidden = False


def check_tag_comment(page: Page, nid: NodeId, tag: str) -> None:
    _require_comment(page, nid)
    if not tag or not tag.strip():
        raise EmptyTag()


def apply_comment_tagged(page: Page, event: Event) -> None:
    page.nodes[event.payload["node"]].tags.add(event.payload["tag"])


def apply_comment_untagged(page: Page, event: Event) -> None:
    page.nodes[event.payload["node"]].tags.discard(event.payload["tag"])


def filter_by_tag(page: Page, tag: str) -> list[NodeId]:
    """Non-hidden comments carrying the tag, in pre-order."""
    return [
        nid for nid in page.preorder()
        if page.nodes[nid].is_comment and not page.nodes[nid].hidden
        and tag in page.nodes[nid].tags
    ]


# ---------------------------------------------------------------------------
# summaries


def check_summarize(
    page: Page,
    selection: list[NodeId],
    body: RichText,
    citations: list[Citation],
    actor: UserId,
    now: int,
) -> None:
    if not selection:
        raise EmptySelection()
    seen = set()
    parents = set()
    for nid in selection:
        node = page.nodes.get(nid)
        if node is None or (node.is_comment and node.hidden):
            raise UnknownNode(nid)
        if nid in seen:
            raise ParseError(f"duplicate selection entry {nid}")
        seen.add(nid)
        parents.add(node.parent)
    if len(parents) > 1:
        raise MixedParents(f"selection spans parents {sorted(str(p) for p in parents)}")
    if locks_mod.summary_lock_covering(page, actor, set(selection), now) is None:
        raise LockNotHeld("no live summary lock covers the selection")
    validate_citations(page, body, citations)


def apply_summary_created(page: Page, event: Event) -> None:
    p = event.payload
    nid = p["node"]
    selection = list(p["selection"])
    selected = set(selection)
    parent = page.nodes[selection[0]].parent
    siblings = page.sibling_list(parent)

    body = as_richtext(p["body"])
    node = Node(
        id=nid, kind=SUMMARY, author=event.actor, created_at=event.at,
        created_seq=event.seq, body=body, parent=parent,
        citations=parse_citations(p.get("citations")),
    )

    # Content that arrived under the summarizer's lock after it was acquired
    # (replies to covered nodes stay allowed) starts out pending.
    covered = locks_mod.holder_union_coverage(page, event.actor, event.at)
    subtree_now: set[NodeId] = set()
    for sel in selection:
        subtree_now.update(page.subtree(sel))
    late = subtree_now - covered if covered else set()

    insert_at = min(siblings.index(s) for s in selected)
    kept = [s for s in siblings if s not in selected]
    reparented = [s for s in siblings if s in selected]  # keep outline order
    kept.insert(insert_at, nid)
    if parent is None:
        page.roots[:] = kept
    else:
        page.nodes[parent].children[:] = kept
    node.children = reparented
    for child in reparented:
        page.nodes[child].parent = nid
    node.pending = late
    page.nodes[nid] = node
    _bump_node_counter(page, nid)
    _add_words(page, event.actor, "summary", body.word_count())


def check_edit_summary(
    page: Page,
    nid: NodeId,
    body: RichText,
    citations: list[Citation],
    actor: UserId,
    now: int,
) -> None:
    _require_summary(page, nid)
    if locks_mod.summary_lock_covering(page, actor, {nid}, now) is None:
        raise LockNotHeld(f"no live summary lock covers {nid}")
    validate_citations(page, body, citations)


def apply_summary_edited(page: Page, event: Event) -> None:
    p = event.payload
    node = page.nodes[p["node"]]
    new_body = as_richtext(p["body"])
    _add_words(page, event.actor, "summary", new_body.word_count() - node.body.word_count())
    node.body = new_body
    node.citations = parse_citations(p.get("citations"))
    if p.get("incorporate"):
        node.pending.clear()


def check_incorporate(page: Page, nid: NodeId, actor: UserId, now: int) -> None:
    _require_summary(page, nid)
    if locks_mod.summary_lock_covering(page, actor, {nid}, now) is None:
        raise LockNotHeld(f"no live summary lock covers {nid}")


def apply_summary_incorporated(page: Page, event: Event) -> None:
    page.nodes[event.payload["node"]].pending.clear()


def check_delete_summary(page: Page, nid: NodeId, actor: UserId, now: int) -> None:
    _require_summary(page, nid)
    blocker = locks_mod.covered_by_other(page, set(page.subtree(nid)), actor, now)
    if blocker is not None:
        raise Locked(f"{nid} subtree covered by {blocker.holder}'s summary lock")


def _nearest_cover_set(page: Page, summary: NodeId) -> set[NodeId]:
    """Descendants whose nearest summary ancestor is `summary`: walk down,
    stopping below any other summary."""
    out: set[NodeId] = set()
    stack = list(page.nodes[summary].children)
    while stack:
        cur = stack.pop()
        out.add(cur)
        if not page.nodes[cur].is_summary:
            stack.extend(page.nodes[cur].children)
    return out


def apply_summary_deleted(page: Page, event: Event) -> None:
    nid = event.payload["node"]
    node = page.nodes[nid]
    recovered = _nearest_cover_set(page, nid)
    new_cover = page.nearest_summary_ancestor(nid)

    siblings = page.sibling_list(node.parent)
    at = siblings.index(nid)
    siblings[at:at + 1] = node.children
    for child in node.children:
        page.nodes[child].parent = node.parent

    del page.nodes[nid]
    # Prune the deleted id from every pending set; only the reparent rule
    # below marks coverage change.
    for other in page.nodes.values():
        if other.is_summary:
            other.pending.discard(nid)
    if new_cover is not None:
        page.nodes[new_cover].pending |= recovered
    _add_words(page, event.actor, "summary", -node.body.word_count())


def check_flag_summary(page: Page, nid: NodeId, dimension: str, value: int) -> None:
    _require_summary(page, nid)
    if dimension not in FLAG_DIMENSIONS:
        raise InvalidDimension(dimension)
    if not isinstance(value, int) or not (1 <= value <= 3):
        raise ValueOutOfRange(str(value))


def apply_summary_flagged(page: Page, event: Event) -> None:
    node = page.nodes[event.payload["node"]]
    node.flags[event.payload["dimension"]] = event.payload["value"]


def resolve_citation(page: Page, summary: NodeId, index: int) -> dict:
    """Resolve one citation to its target plus the summary-ancestor chain
    (outermost first) a reader must expand to reach it."""
    node = _require_summary(page, summary)
    if not (0 <= index < len(node.citations)):
        raise UnknownCitation(f"{summary}[{index}]")
    cit = node.citations[index]
    if cit.target not in page.nodes:
        raise UnknownCitation(f"target {cit.target} no longer exists")
    target = page.nodes[cit.target]
    path = list(reversed(page.summary_ancestors(cit.target)))
    return {
        "target": cit.target,
        "body": target.body.to_dict(),
        "path": path,
        "mode": cit.mode,
        "text": node.body.text[cit.start:cit.end],
    }


# ---------------------------------------------------------------------------
# moves


def check_move_node(
    page: Page,
    nid: NodeId,
    new_parent: NodeId | None,
    index: int,
    actor: UserId,
    now: int,
) -> None:
    node = _require_node(page, nid)
    if new_parent is not None:
        if new_parent not in page.nodes:
            raise UnknownNode(new_parent)
        if new_parent == nid or page.is_ancestor(nid, new_parent):
            raise CycleWouldForm(f"{new_parent} is inside {nid}")
    mlock = locks_mod.move_lock(page, now)
    if mlock is None or mlock.holder != actor:
        raise MoveLockNotHeld()
    moved = set(page.subtree(nid))
    blocker = locks_mod.covered_by_other(page, moved, actor, now)
    if blocker is not None:
        raise Locked(f"subtree covered by {blocker.holder}'s summary lock")
    if new_parent is not None:
        dest_blocker = locks_mod.covered_by_other(page, {new_parent}, actor, now)
        if dest_blocker is not None:
            raise Locked(f"destination covered by {dest_blocker.holder}'s summary lock")
    siblings = page.sibling_list(new_parent)
    limit = len(siblings) - (1 if node.parent == new_parent else 0)
    if not (0 <= index <= limit):
        raise IndexOutOfRange(f"index {index} not in [0, {limit}]")


def apply_node_moved(page: Page, event: Event) -> None:
    p = event.payload
    nid = p["node"]
    new_parent = p.get("new_parent")
    index = p["index"]
    node = page.nodes[nid]

    old_covers = set(page.summary_ancestors(nid))
    old_siblings = page.sibling_list(node.parent)
    old_siblings.remove(nid)
    page.sibling_list(new_parent).insert(index, nid)
    node.parent = new_parent
    new_covers = set(page.summary_ancestors(nid))

    # Only coverage actually gained or lost goes out of date; a reorder inside
    # the same summary leaves it complete.
    changed = old_covers ^ new_covers
    if changed:
        moved_ids = set(page.subtree(nid))
        for cover in changed:
            page.nodes[cover].pending |= moved_ids


# ---------------------------------------------------------------------------
# locks / reads / import


def apply_lock_acquired(page: Page, event: Event) -> None:
    p = event.payload["lock"]
    lock = Lock(
        id=p["id"], holder=p["holder"], kind=p["kind"],
        covered=frozenset(p.get("covered", [])),
        acquired_at=p["acquired_at"], expires_at=p["expires_at"],
    )
    page.locks[lock.id] = lock
    _bump_lock_counter(page, lock.id)


def apply_lock_released(page: Page, event: Event) -> None:
    page.locks.pop(event.payload["lock_id"], None)


def apply_lock_expired(page: Page, event: Event) -> None:
    page.locks.pop(event.payload["lock_id"], None)


def apply_read_marked(page: Page, event: Event) -> None:
    p = event.payload
    page.read.setdefault(p["user"], set()).update(p["nodes"])


def apply_tree_imported(page: Page, event: Event) -> None:
    """Wholesale forest install (export_tree round-trip). Only valid on a page
    with no nodes; the engine enforces that."""
    data = event.payload["tree"]
    page.roots = list(data["roots"])
    page.nodes = {}
    for nid, raw in data["nodes"].items():
        node = Node(
            id=nid, kind=raw["kind"], author=raw["author"],
            created_at=raw["created_at"], created_seq=event.seq,
            body=as_richtext(raw["body"]), parent=raw.get("parent"),
            children=list(raw.get("children", [])),
            hidden=bool(raw.get("hidden", False)),
            tags=set(raw.get("tags", [])),
            pending=set(raw.get("pending", [])),
            flags=dict(raw.get("flags", {})),
            citations=parse_citations(raw.get("citations")),
        )
        page.nodes[nid] = node
        _bump_node_counter(page, nid)
