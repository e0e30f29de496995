"""Post-hoc invariant suite over a quiesced event log.

Run after a simulation (or any replayed log) to verify the collaboration
guarantees hold end to end:

  gapless_log        seqs are exactly 1..n
  replay_determinism two independent folds agree byte-for-byte (and with the
                     live engine's state when provided)
  serializability    every event's preconditions re-validate at its position
                     in the serial order
  lock_exclusion     no two live summary locks of different holders ever
                     overlap; never two live move locks
  pending_oracle     every summary's incrementally maintained pending set
                     equals a from-scratch recomputation over the log
  forest_validity    final structure is a consistent, acyclic, orphan-free
                     forest and pending ids reference live nodes

On the first violated invariant the report carries a minimized reproduction:
the shortest log prefix that still violates when replayed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import events as ev
from . import locks as locks_mod
from . import tree
from .errors import LivesumError, PermissionDenied
from .model import LOCK_MOVE, LOCK_SUMMARY, Page
from .permissions import ADMIN, COMMENT, EDIT, FLAG, check_permission
from .richtext import as_richtext
from .store import state_hash

SYSTEM_ACTOR = "system"


@dataclass
class InvariantResult:
    name: str
    ok: bool
    detail: str = ""
    repro_prefix_len: int | None = None

    def to_dict(self) -> dict:
        out = {"invariant": self.name, "ok": self.ok, "detail": self.detail}
        if self.repro_prefix_len is not None:
            out["repro_prefix_len"] = self.repro_prefix_len
        return out


@dataclass
class CheckReport:
    results: list[InvariantResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "invariants": [r.to_dict() for r in self.results]}


# ---------------------------------------------------------------------------
# individual invariants; each returns (ok, detail, violating_seq_or_None)


def _gapless(events: list[ev.Event]) -> tuple[bool, str, int | None]:
    for i, event in enumerate(events):
        if event.seq != i + 1:
            return False, f"expected seq {i + 1}, found {event.seq}", i + 1
    return True, f"{len(events)} events, seqs 1..{len(events)}", None


def _replay_determinism(events: list[ev.Event], final: Page | None) -> tuple[bool, str, int | None]:
    first = state_hash(ev.fold(events))
    second = state_hash(ev.fold(events))
    if first != second:
        return False, "two folds of the same log diverged", len(events)
    if final is not None and state_hash(final) != first:
        return False, "live state differs from fold of its own log", len(events)
    return True, f"fold hash {first[:16]}", None


def _validate_event(page: Page, event: ev.Event, now: int) -> None:
    """Re-run the preconditions the engine must have checked before appending."""
    p = event.payload
    actor = event.actor
    kind = event.kind
    if kind == ev.PAGE_CREATED:
        if page.nodes or page.members:
            raise LivesumError("PageCreated on a non-empty page")
        return
    if kind == ev.LOCK_EXPIRED:
        lock = page.locks.get(p["lock_id"])
        if lock is None:
            raise LivesumError("expiring unknown lock")
        if lock.live(now):
            raise LivesumError(f"lock {lock.id} expired while still live")
        return
    if kind in (ev.MEMBER_ADDED, ev.PERMISSION_CHANGED):
        if not check_permission(page, actor, ADMIN):
            raise PermissionDenied(actor)
        return
    if kind == ev.READ_MARKED:
        if p["user"] not in page.members:
            raise PermissionDenied(p["user"])
        return
    if kind == ev.COMMENT_ADDED:
        if not p.get("imported") and not check_permission(page, actor, COMMENT):
            raise PermissionDenied(actor)
        tree.check_add_comment(page, p.get("parent"), as_richtext(p["body"]))
        return
    if kind == ev.COMMENT_EDITED:
        if not check_permission(page, actor, COMMENT):
            raise PermissionDenied(actor)
        tree.check_edit_comment(page, p["node"], actor, as_richtext(p["body"]), now)
        return
    if kind in (ev.COMMENT_HIDDEN, ev.COMMENT_UNHIDDEN):
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_hide_comment(page, p["node"])
        return
    if kind in (ev.COMMENT_TAGGED, ev.COMMENT_UNTAGGED):
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_tag_comment(page, p["node"], p["tag"])
        return
    if kind == ev.SUMMARY_CREATED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_summarize(page, list(p["selection"]), as_richtext(p["body"]),
                             tree.parse_citations(p.get("citations")), actor, now)
        return
    if kind == ev.SUMMARY_EDITED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_edit_summary(page, p["node"], as_richtext(p["body"]),
                                tree.parse_citations(p.get("citations")), actor, now)
        return
    if kind == ev.SUMMARY_INCORPORATED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_incorporate(page, p["node"], actor, now)
        return
    if kind == ev.SUMMARY_DELETED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_delete_summary(page, p["node"], actor, now)
        return
    if kind == ev.SUMMARY_FLAGGED:
        if not check_permission(page, actor, FLAG):
            raise PermissionDenied(actor)
        tree.check_flag_summary(page, p["node"], p["dimension"], p["value"])
        return
    if kind == ev.NODE_MOVED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        tree.check_move_node(page, p["node"], p.get("new_parent"), p["index"], actor, now)
        return
    if kind == ev.LOCK_ACQUIRED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        lock = p["lock"]
        if lock["holder"] != actor:
            raise LivesumError("lock holder differs from event actor")
        if lock["kind"] == LOCK_SUMMARY:
            locks_mod.check_acquire_summary(page, actor, set(lock["covered"]), now)
        elif lock["kind"] == LOCK_MOVE:
            locks_mod.check_acquire_move(page, actor, now)
        else:
            raise LivesumError(f"unknown lock kind {lock['kind']!r}")
        return
    if kind == ev.LOCK_RELEASED:
        locks_mod.check_release(page, p["lock_id"], actor)
        return
    if kind == ev.TREE_IMPORTED:
        if not check_permission(page, actor, EDIT):
            raise PermissionDenied(actor)
        if page.nodes:
            raise LivesumError("tree import into a non-empty page")
        return
    raise LivesumError(f"unhandled kind {kind}")


def _serializability(events: list[ev.Event]) -> tuple[bool, str, int | None]:
    page: Page | None = None
    for event in events:
        if page is None:
            page = Page(id=event.page)
        try:
            _validate_event(page, event, event.at)
        except LivesumError as exc:
            return False, f"seq {event.seq} {event.kind}: {exc.code}: {exc}", event.seq
        ev.apply_event(page, event)
    return True, "all preconditions held in serial order", None


def _lock_exclusion(events: list[ev.Event]) -> tuple[bool, str, int | None]:
    live: dict[str, dict] = {}
    acquisitions = 0
    for event in events:
        if event.kind == ev.LOCK_ACQUIRED:
            lock = event.payload["lock"]
            acquisitions += 1
            for other in live.values():
                if other["id"] == lock["id"]:
                    continue
                if other["expires_at"] <= event.at:
                    continue
                if other["holder"] == lock["holder"]:
                    continue
                if lock["kind"] == LOCK_SUMMARY and other["kind"] == LOCK_SUMMARY:
                    overlap = set(lock["covered"]) & set(other["covered"])
                    if overlap:
                        return False, (
                            f"seq {event.seq}: {lock['holder']} and {other['holder']} "
                            f"overlap on {sorted(overlap)[:3]}"
                        ), event.seq
                if lock["kind"] == LOCK_MOVE and other["kind"] == LOCK_MOVE:
                    return False, f"seq {event.seq}: two live move locks", event.seq
            live[lock["id"]] = dict(lock)
        elif event.kind in (ev.LOCK_RELEASED, ev.LOCK_EXPIRED):
            live.pop(event.payload["lock_id"], None)
    return True, f"{acquisitions} acquisitions, zero overlaps", None


def recompute_pending(events: list[ev.Event]) -> dict[str, set[str]]:
    """From-scratch pending sets: replay structure + locks only, record when
    each node last became dirt for each summary, compare against the last
    incorporation point."""
    parent: dict[str, str | None] = {}
    children: dict[str, list[str]] = {}
    roots: list[str] = []
    kinds: dict[str, str] = {}
    live_locks: dict[str, dict] = {}
    touch: dict[tuple[str, str], int] = {}
    inc: dict[str, int] = {}

    def sibs(p):
        return roots if p is None else children[p]

    def summary_ancestors(nid):
        out, cur = [], parent[nid]
        while cur is not None:
            if kinds[cur] == "summary":
                out.append(cur)
            cur = parent[cur]
        return out

    def subtree(nid):
        out, stack = [], [nid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(children[cur])
        return out

    for event in events:
        p = event.payload
        seq = event.seq
        if event.kind == ev.COMMENT_ADDED:
            nid = p["node"]
            parent[nid] = p.get("parent")
            children[nid] = []
            kinds[nid] = "comment"
            sibs(p.get("parent")).append(nid)
            for s in summary_ancestors(nid):
                touch[(nid, s)] = seq
        elif event.kind == ev.COMMENT_EDITED:
            for s in summary_ancestors(p["node"]):
                touch[(p["node"], s)] = seq
        elif event.kind == ev.SUMMARY_CREATED:
            nid = p["node"]
            selection = list(p["selection"])
            sel = set(selection)
            par = parent[selection[0]]
            lst = sibs(par)
            at = min(lst.index(x) for x in sel)
            ordered = [x for x in lst if x in sel]
            lst[:] = [x for x in lst if x not in sel]
            lst.insert(at, nid)
            parent[nid] = par
            children[nid] = ordered
            kinds[nid] = "summary"
            for child in ordered:
                parent[child] = nid
            inc[nid] = 0
            covered: set[str] = set()
            for lock in live_locks.values():
                if (lock["kind"] == LOCK_SUMMARY and lock["holder"] == event.actor
                        and event.at < lock["expires_at"]):
                    covered.update(lock["covered"])
            for m in subtree(nid):
                if m != nid and m not in covered:
                    touch[(m, nid)] = seq
        elif event.kind == ev.SUMMARY_EDITED and p.get("incorporate"):
            inc[p["node"]] = seq
        elif event.kind == ev.SUMMARY_INCORPORATED:
            inc[p["node"]] = seq
        elif event.kind == ev.SUMMARY_DELETED:
            nid = p["node"]
            recovered, stack = [], list(children[nid])
            while stack:
                cur = stack.pop()
                recovered.append(cur)
                if kinds[cur] != "summary":
                    stack.extend(children[cur])
            cover = next(iter(summary_ancestors(nid)), None)
            lst = sibs(parent[nid])
            at = lst.index(nid)
            lst[at:at + 1] = children[nid]
            for child in children[nid]:
                parent[child] = parent[nid]
            del parent[nid], children[nid], kinds[nid]
            inc.pop(nid, None)
            if cover is not None:
                for m in recovered:
                    touch[(m, cover)] = seq
        elif event.kind == ev.NODE_MOVED:
            nid = p["node"]
            old = set(summary_ancestors(nid))
            sibs(parent[nid]).remove(nid)
            sibs(p.get("new_parent")).insert(p["index"], nid)
            parent[nid] = p.get("new_parent")
            for s in old ^ set(summary_ancestors(nid)):
                for m in subtree(nid):
                    touch[(m, s)] = seq
        elif event.kind == ev.LOCK_ACQUIRED:
            live_locks[p["lock"]["id"]] = dict(p["lock"])
        elif event.kind in (ev.LOCK_RELEASED, ev.LOCK_EXPIRED):
            live_locks.pop(p["lock_id"], None)
        elif event.kind == ev.TREE_IMPORTED:
            data = p["tree"]
            roots[:] = list(data["roots"])
            for nid, raw in data["nodes"].items():
                parent[nid] = raw.get("parent")
                children[nid] = list(raw.get("children", []))
                kinds[nid] = raw["kind"]
                if raw["kind"] == "summary":
                    inc[nid] = 0
                    for m in raw.get("pending", []):
                        touch[(m, nid)] = seq

    alive = set(kinds)
    return {
        nid: {m for (m, s), t in touch.items() if s == nid and t > inc[nid] and m in alive}
        for nid, kind in kinds.items() if kind == "summary"
    }


def _pending_oracle(events: list[ev.Event], final: Page | None) -> tuple[bool, str, int | None]:
    page = final if final is not None else ev.fold(events)
    expected = recompute_pending(events)
    actual = {nid: set(n.pending) for nid, n in page.nodes.items() if n.is_summary}
    if expected != actual:
        diff = {
            k for k in set(expected) | set(actual)
            if expected.get(k) != actual.get(k)
        }
        return False, f"pending mismatch on {sorted(diff)[:5]}", len(events)
    return True, f"{len(actual)} summaries match the recomputation", None


def _forest_validity(events: list[ev.Event], final: Page | None) -> tuple[bool, str, int | None]:
    page = final if final is not None else ev.fold(events)
    try:
        page.check_forest()
    except AssertionError as exc:
        return False, str(exc), len(events)
    for nid, node in page.nodes.items():
        if node.is_summary:
            missing = [m for m in node.pending if m not in page.nodes]
            if missing:
                return False, f"{nid} pending references dead nodes {missing[:3]}", len(events)
    return True, f"{len(page.nodes)} nodes structurally consistent", None


# ---------------------------------------------------------------------------
# driver + minimization


_CHECKS = (
    ("gapless_log", lambda evs, final: _gapless(evs)),
    ("replay_determinism", _replay_determinism),
    ("serializability", lambda evs, final: _serializability(evs)),
    ("lock_exclusion", lambda evs, final: _lock_exclusion(evs)),
    ("pending_oracle", _pending_oracle),
    ("forest_validity", _forest_validity),
)


def _run_check(check, events: list[ev.Event], final: Page | None) -> tuple[bool, str, int | None]:
    # a structurally broken log (e.g. gapped) can make later checks blow up
    # mid-fold; that is itself a failure of the invariant being checked
    try:
        return check(events, final)
    except LivesumError as exc:
        return False, f"{exc.code}: {exc}", None
    except (AssertionError, KeyError, IndexError, ValueError) as exc:
        return False, f"replay broke: {exc!r}", None


def _minimize(check, events: list[ev.Event], hint_seq: int | None) -> int:
    """Shortest prefix length that still violates the invariant."""
    hi = hint_seq if hint_seq is not None else len(events)
    lo = 1
    while lo < hi:
        mid = (lo + hi) // 2
        ok, _, _ = _run_check(check, events[:mid], None)
        if ok:
            lo = mid + 1
        else:
            hi = mid
    return hi


def check_log(events: list[ev.Event], final: Page | None = None,
              minimize: bool = True) -> CheckReport:
    report = CheckReport()
    for name, check in _CHECKS:
        ok, detail, bad_seq = _run_check(check, events, final)
        prefix = None
        if not ok and minimize:
            prefix = _minimize(check, events, bad_seq)
        report.results.append(InvariantResult(name, ok, detail, prefix))
    return report
