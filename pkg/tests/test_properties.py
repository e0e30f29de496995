"""Cross-cutting properties over random operation sequences: unread
soundness, forest validity, conservation, icon determinism, and the
pending-ghost rule."""

from __future__ import annotations

from conftest import USERS, LogicalClock, make_page
from genops import OpMachine
from livesum.events import fold
from livesum.store import state_hash
from oracles import unread_from_log


def run_machine(seed: int, steps: int = 300):
    engine = make_page(clock=LogicalClock(), build_frames=False)
    OpMachine(engine, USERS, seed=seed).run(steps)
    return engine


def test_unread_sets_match_log_oracle():
    for seed in (2, 14, 77):
        engine = run_machine(seed)
        for user in USERS:
            assert engine.unread_set(user) == unread_from_log(engine.events, user), (seed, user)


def test_unread_soundness_invariants():
    engine = run_machine(31)
    page = engine.page
    for user in USERS:
        unread = engine.unread_set(user)
        read = page.read.get(user, set())
        assert not (unread & read), "read nodes resurfaced as unread"
        enrolled = page.enrolled_at[user]
        for nid, node in page.nodes.items():
            if node.created_seq > enrolled and node.author != user and nid not in read:
                assert nid in unread, (user, nid)


def test_forest_valid_after_any_accepted_sequence():
    for seed in range(8):
        engine = run_machine(seed, 250)
        engine.page.check_forest()


def test_state_equals_fold_of_log():
    for seed in (4, 9):
        engine = run_machine(seed)
        assert state_hash(fold(engine.events, engine.page.id)) == engine.state_hash()


def test_pending_ids_reference_live_nodes():
    # ghosts mark departures but never dangle into deleted ids
    for seed in (3, 18):
        engine = run_machine(seed)
        page = engine.page
        for node in page.nodes.values():
            if node.is_summary:
                assert all(p in page.nodes for p in node.pending)


def test_icon_is_pure_function_of_state():
    engine = run_machine(12)
    from livesum.store import page_from_dict, page_to_dict

    clone = page_from_dict(page_to_dict(engine.page))
    for nid in engine.page.nodes:
        assert clone.icon(nid) == engine.page.icon(nid)
