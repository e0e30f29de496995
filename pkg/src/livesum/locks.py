"""Lock queries and acquisition rules.

Two lock kinds guard concurrent editing: summary locks cover a closed node set
(the subtrees being summarized; others may still reply underneath but cannot
edit, move, or re-summarize covered nodes), and a single page-wide move lock
serializes drag-and-drop restructuring.

The lock table lives in page state and is mutated only through Lock* events,
so expiry is itself an event (sweep + append), never a silent read-side check.
Re-acquiring a lock you already hold renews it (same id, fresh expiry).
"""

from __future__ import annotations

from .errors import Conflict, UnknownLock
from .model import LOCK_MOVE, LOCK_SUMMARY, Lock, NodeId, Page, UserId


def live_locks(page: Page, now: int) -> list[Lock]:
    return [lock for lock in page.locks.values() if lock.live(now)]


def expired_lock_ids(page: Page, now: int) -> list[str]:
    """Ids of locks whose TTL has passed, in id order for deterministic sweeps."""
    return sorted(lock.id for lock in page.locks.values() if not lock.live(now))


def summary_lock_covering(page: Page, holder: UserId, nodes: set[NodeId], now: int) -> Lock | None:
    """A live summary lock of `holder` covering every node in `nodes`."""
    for lock in page.locks.values():
        if lock.kind == LOCK_SUMMARY and lock.holder == holder and lock.live(now):
            if nodes <= lock.covered:
                return lock
    return None


def covered_by_other(page: Page, nodes: set[NodeId], user: UserId, now: int) -> Lock | None:
    """A live summary lock of a different holder that overlaps `nodes`."""
    for lock in page.locks.values():
        if lock.kind == LOCK_SUMMARY and lock.holder != user and lock.live(now):
            if nodes & lock.covered:
                return lock
    return None


def move_lock(page: Page, now: int) -> Lock | None:
    for lock in page.locks.values():
        if lock.kind == LOCK_MOVE and lock.live(now):
            return lock
    return None


def holder_union_coverage(page: Page, holder: UserId, now: int) -> set[NodeId]:
    """Everything `holder` currently covers across their live summary locks."""
    covered: set[NodeId] = set()
    for lock in page.locks.values():
        if lock.kind == LOCK_SUMMARY and lock.holder == holder and lock.live(now):
            covered |= lock.covered
    return covered


def check_acquire_summary(page: Page, actor: UserId, covered: set[NodeId], now: int) -> Lock | None:
    """Grant rule: no live summary lock of another holder may overlap.

    Returns an existing identical-coverage lock of the actor (renewal target),
    or None when a fresh lock should be created. Raises Conflict on overlap.
    """
    renewal: Lock | None = None
    for lock in page.locks.values():
        if lock.kind != LOCK_SUMMARY or not lock.live(now):
            continue
        if lock.holder == actor:
            if lock.covered == frozenset(covered):
                renewal = lock
            continue
        if lock.covered & covered:
            raise Conflict(holder=lock.holder)
    return renewal


def check_acquire_move(page: Page, actor: UserId, now: int) -> Lock | None:
    """At most one live move lock per page; the holder may renew."""
    existing = move_lock(page, now)
    if existing is None:
        return None
    if existing.holder == actor:
        return existing
    raise Conflict(holder=existing.holder)


def check_release(page: Page, lock_id: str, actor: UserId) -> Lock:
    lock = page.locks.get(lock_id)
    if lock is None:
        raise UnknownLock(lock_id)
    if lock.holder != actor:
        raise Conflict(holder=lock.holder)
    return lock
