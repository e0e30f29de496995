"""Sequenced log semantics, live fan-out, read tracking, mentions, and
notification dispatch through the engine."""

from __future__ import annotations

import threading

import pytest

from conftest import make_page, make_service, summarize
from livesum.errors import EmptyBody, PermissionDenied, StaleExpectation, UnknownNode
from livesum.events import fold
from livesum.notify import (
    REASON_MENTION,
    REASON_SUMMARY_OF_YOUR_COMMENT,
    REASON_THREAD_REPLY,
    CollectingSender,
    parse_mentions,
)
from livesum.store import state_hash


def make_noisy_page():
    svc = make_service()
    svc.sender = CollectingSender()
    engine = svc.create_page("ada", title="t")
    engine.sender = svc.sender
    for user in ("ben", "cy", "dee"):
        engine.add_member("ada", user, "editor")
    return engine, svc.sender


# ---------------------------------------------------------------------------
# log discipline


def test_seqs_are_gapless_and_rejections_consume_none(engine):
    engine.add_comment("ada", None, "one")
    before = engine.page.seq
    with pytest.raises(EmptyBody):
        engine.add_comment("ada", None, "  ")
    with pytest.raises(UnknownNode):
        engine.hide_comment("ada", "missing")
    assert engine.page.seq == before
    assert [e.seq for e in engine.events] == list(range(1, before + 1))


def test_fold_reproduces_engine_state(engine):
    engine.add_comment("ada", None, "alpha")
    nid = engine.add_comment("ben", None, "beta").payload["node"]
    summarize(engine, "ada", [nid], "sums beta")
    assert state_hash(fold(engine.events, engine.page.id)) == engine.state_hash()


def test_stale_expectation_rejected(engine):
    engine.add_comment("ada", None, "x")
    seq = engine.page.seq
    engine.add_comment("ben", None, "y")
    with pytest.raises(StaleExpectation):
        engine.add_comment("ada", None, "z", expected_seq=seq)
    event = engine.add_comment("ada", None, "z", expected_seq=engine.page.seq)
    assert event.seq == engine.page.seq


def test_concurrent_appends_serialize():
    engine = make_page()
    errors: list[Exception] = []

    def worker(user: str):
        try:
            for i in range(25):
                engine.add_comment(user, None, f"{user} says {i}")
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(u,)) for u in ("ada", "ben", "cy")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    seqs = [e.seq for e in engine.events]
    assert seqs == list(range(1, len(seqs) + 1))
    engine.page.check_forest()
    assert state_hash(fold(engine.events, engine.page.id)) == engine.state_hash()


# ---------------------------------------------------------------------------
# subscriptions


def test_subscribe_since_zero_replays_everything(engine):
    engine.add_comment("ada", None, "one")
    engine.add_comment("ben", None, "two")
    sub = engine.subscribe_since(0)
    frames = sub.drain()
    assert [f.seq for f in frames] == [e.seq for e in engine.events]
    engine.unsubscribe(sub)


def test_resubscribe_after_disconnect_sees_exactly_once(engine):
    for i in range(5):
        engine.add_comment("ada", None, f"c{i}")
    sub = engine.subscribe_since(0)
    seen = [f.seq for f in sub.drain()]
    engine.unsubscribe(sub)  # disconnect
    for i in range(5):
        engine.add_comment("ben", None, f"d{i}")
    sub2 = engine.subscribe_since(seen[-1])
    engine.add_comment("cy", None, "live one")
    seen2 = [f.seq for f in sub2.drain()]
    engine.unsubscribe(sub2)
    assert seen + seen2 == list(range(1, engine.page.seq + 1))


def test_two_subscribers_get_identical_transcripts(engine):
    base = engine.page.seq
    sub_a = engine.subscribe_since(base)
    sub_b = engine.subscribe_since(base)
    engine.add_comment("ada", None, "one")
    engine.add_comment("ben", None, "two")
    ta = [(f.seq, f.event.kind) for f in sub_a.drain()]
    tb = [(f.seq, f.event.kind) for f in sub_b.drain()]
    assert ta == tb and len(ta) == 2


def test_frames_carry_icon_deltas(engine):
    sub = engine.subscribe_since(0)
    a = engine.add_comment("ada", None, "t").payload["node"]
    s = summarize(engine, "ben", [a], "sums")
    frames = {f.event.kind: f for f in sub.drain()}
    created = frames["SummaryCreated"]
    assert created.icons[a] == "yellow_circle"
    assert created.icons[s] == "orange_square"
    late = engine.add_comment("cy", a, "dirty").payload["node"]
    frame = sub.drain()[-1]
    assert frame.icons[s] == "half_square"
    assert frame.icons[late] == "blue_circle"
    assert frame.pending[s] == [late]


# ---------------------------------------------------------------------------
# read tracking


def test_new_member_starts_with_clean_slate(engine):
    engine.add_comment("ada", None, "before eve")
    engine.add_member("ada", "eve", "editor")
    assert engine.unread_set("eve") == set()
    nid = engine.add_comment("ben", None, "after eve").payload["node"]
    assert engine.unread_set("eve") == {nid}


def test_mark_read_idempotent_and_scoped(engine):
    nid = engine.add_comment("ada", None, "news").payload["node"]
    assert engine.unread_set("ben") == {nid}
    assert engine.mark_read("ben", [nid]) is not None
    assert engine.mark_read("ben", [nid]) is None  # no event the second time
    assert engine.unread_set("ben") == set()
    assert engine.unread_set("cy") == {nid}  # others unaffected


def test_own_comments_never_unread(engine):
    nid = engine.add_comment("ada", None, "mine").payload["node"]
    assert nid not in engine.unread_set("ada")


def test_mark_read_requires_membership_and_known_nodes(engine):
    nid = engine.add_comment("ada", None, "x").payload["node"]
    with pytest.raises(PermissionDenied):
        engine.mark_read("stranger", [nid])
    with pytest.raises(UnknownNode):
        engine.mark_read("ben", ["n999"])


# ---------------------------------------------------------------------------
# mentions + notifications


def test_parse_mentions_longest_match():
    members = ["ada", "ada_b", "ben"]
    assert parse_mentions("@ada please review", members) == {"ada"}
    assert parse_mentions("@ada_b wins the longest match", members) == {"ada_b"}
    assert parse_mentions("email me @nobody", members) == set()
    assert parse_mentions("@ada and @ben both", members) == {"ada", "ben"}


def test_mention_notification_dispatched():
    engine, sender = make_noisy_page()
    engine.add_comment("ada", None, "@ben please review")
    notes = [n for n in sender.sent if n.reason == REASON_MENTION]
    assert [(n.recipient, n.reason) for n in notes] == [("ben", REASON_MENTION)]


def test_thread_reply_notifies_root_author_at_depth_three():
    engine, sender = make_noisy_page()
    a = engine.add_comment("ada", None, "root").payload["node"]
    b = engine.add_comment("ben", a, "depth 2").payload["node"]
    c = engine.add_comment("cy", b, "depth 3").payload["node"]
    thread_notes = [n for n in sender.sent if n.reason == REASON_THREAD_REPLY]
    # ben's reply notified ada; cy's reply notified both ada and ben
    assert {(n.recipient, n.node) for n in thread_notes} == {
        ("ada", b), ("ada", c), ("ben", c),
    }


def test_no_self_notifications():
    engine, sender = make_noisy_page()
    a = engine.add_comment("ada", None, "mine, mentioning @ada").payload["node"]
    engine.add_comment("ada", a, "replying to myself @ada")
    assert all(n.recipient != "ada" for n in sender.sent)


def test_mention_beats_thread_reply_for_same_event():
    engine, sender = make_noisy_page()
    a = engine.add_comment("ada", None, "root").payload["node"]
    engine.add_comment("ben", a, "pinging @ada directly")
    relevant = [n for n in sender.sent if n.recipient == "ada"]
    assert len(relevant) == 1 and relevant[0].reason == REASON_MENTION


def test_summary_notifies_covered_authors():
    engine, sender = make_noisy_page()
    a = engine.add_comment("ada", None, "idea A").payload["node"]
    b = engine.add_comment("ben", a, "idea B").payload["node"]
    summarize(engine, "cy", [a], "both ideas")
    covered = [n for n in sender.sent if n.reason == REASON_SUMMARY_OF_YOUR_COMMENT]
    assert {n.recipient for n in covered} == {"ada", "ben"}


def test_notification_unique_per_event_and_recipient():
    engine, sender = make_noisy_page()
    a = engine.add_comment("ada", None, "one").payload["node"]
    engine.add_comment("ada", a, "two")  # ada thread
    engine.add_comment("ben", a, "reply @ada twice @ada")
    keys = [(n.recipient, n.seq) for n in sender.sent]
    assert len(keys) == len(set(keys))


def test_outbox_file_format(tmp_path):
    import json

    from livesum.notify import Notification, OutboxSender

    path = tmp_path / "outbox.ndjson"
    sender = OutboxSender(path)
    sender.send([Notification("ben", REASON_MENTION, "p1", "n1", 3, 123)])
    line = path.read_text().strip()
    assert json.loads(line) == {
        "recipient": "ben", "reason": "Mention", "page": "p1",
        "node": "n1", "seq": 3, "at": 123,
    }
