from __future__ import annotations

import itertools

import pytest

from livesum.engine import EngineConfig, PageEngine, Service


class LogicalClock:
    """Deterministic millisecond clock: every call advances by `step`."""

    def __init__(self, start: int = 1_000_000, step: int = 1000):
        self._it = itertools.count(start, step)

    def __call__(self) -> int:
        return next(self._it)


USERS = ["ada", "ben", "cy", "dee"]


def make_service(clock=None, **config_kwargs) -> Service:
    return Service(config=EngineConfig(**config_kwargs), clock=clock or LogicalClock())


def make_page(users=None, clock=None, **config_kwargs) -> PageEngine:
    """A page created by `ada` with everyone else enrolled as editors."""
    users = users or USERS
    svc = make_service(clock=clock, **config_kwargs)
    engine = svc.create_page(users[0], title="Sandbox")
    for user in users[1:]:
        engine.add_member(users[0], user, "editor")
    return engine


@pytest.fixture
def engine() -> PageEngine:
    return make_page()


@pytest.fixture
def service() -> Service:
    return make_service()


# -- lock-wrapped op helpers (acquire -> act -> release) -----------------------


def summarize(engine: PageEngine, user: str, selection: list[str], body,
              citations=None, keep_lock: bool = False) -> str:
    lock_id = engine.acquire_summary_lock(user, selection).payload["lock"]["id"]
    event = engine.summarize(user, selection, body, citations)
    if not keep_lock:
        engine.release_lock(user, lock_id)
    return event.payload["node"]


def incorporate(engine: PageEngine, user: str, summary: str, body=None) -> None:
    lock_id = engine.acquire_summary_lock(user, [summary]).payload["lock"]["id"]
    if body is None:
        engine.incorporate(user, summary)
    else:
        engine.edit_summary(user, summary, body, incorporate=True)
    engine.release_lock(user, lock_id)


def move(engine: PageEngine, user: str, node: str, new_parent: str | None, index: int) -> None:
    lock_id = engine.acquire_move_lock(user).payload["lock"]["id"]
    engine.move_node(user, node, new_parent, index)
    engine.release_lock(user, lock_id)


def icons(engine: PageEngine) -> dict[str, str]:
    return {nid: engine.page.icon(nid) for nid in engine.page.nodes}
