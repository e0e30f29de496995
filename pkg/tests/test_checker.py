"""The post-hoc invariant suite: clean logs pass, doctored logs are caught
and minimized."""

from __future__ import annotations

from conftest import USERS, LogicalClock, make_page
from genops import OpMachine
from livesum.checker import check_log, recompute_pending
from livesum.events import Event, LOCK_ACQUIRED
from oracles import pending_sets_from_log


def clean_log(seed=21, steps=350):
    engine = make_page(clock=LogicalClock(), build_frames=False)
    OpMachine(engine, USERS, seed=seed).run(steps)
    return engine


def test_clean_log_passes_every_invariant():
    engine = clean_log()
    report = check_log(engine.events, engine.page)
    assert report.ok, report.to_dict()
    names = [r.name for r in report.results]
    assert names == [
        "gapless_log", "replay_determinism", "serializability",
        "lock_exclusion", "pending_oracle", "forest_validity",
    ]


def test_checker_recompute_agrees_with_test_oracle():
    engine = clean_log(seed=31)
    assert recompute_pending(engine.events) == pending_sets_from_log(engine.events)


def test_gap_detected():
    engine = clean_log(steps=60)
    doctored = [e for e in engine.events if e.seq != 5]
    report = check_log(doctored, minimize=False)
    assert not report.ok
    assert not report.results[0].ok  # gapless_log


def test_lock_overlap_detected_and_minimized():
    engine = clean_log(steps=40)
    nid = next(n for n, node in engine.page.nodes.items() if node.is_comment)
    seq = engine.page.seq
    forged = [
        Event(seq + 1, engine.page.id, "ada", 10**12, LOCK_ACQUIRED, {"lock": {
            "id": "L900", "holder": "ada", "kind": "summary", "covered": [nid],
            "acquired_at": 10**12, "expires_at": 10**12 + 10**9,
        }}),
        Event(seq + 2, engine.page.id, "ben", 10**12, LOCK_ACQUIRED, {"lock": {
            "id": "L901", "holder": "ben", "kind": "summary", "covered": [nid],
            "acquired_at": 10**12, "expires_at": 10**12 + 10**9,
        }}),
    ]
    log = engine.events + forged
    report = check_log(log)
    excl = next(r for r in report.results if r.name == "lock_exclusion")
    assert not excl.ok
    assert excl.repro_prefix_len == seq + 2
    # the minimized prefix still violates when replayed
    again = check_log(log[:excl.repro_prefix_len], minimize=False)
    assert not next(r for r in again.results if r.name == "lock_exclusion").ok


def test_tampered_pending_detected():
    engine = clean_log(steps=120)
    # sneak an unjustified incorporation into the log tail
    sid = next((n for n, node in engine.page.nodes.items()
                if node.is_summary and node.pending), None)
    if sid is None:
        a = engine.add_comment("ada", None, "x").payload["node"]
        lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
        sid = engine.summarize("ada", [a], "s").payload["node"]
        engine.release_lock("ada", lock)
        engine.add_comment("ben", a, "makes it pending")
    from livesum.events import SUMMARY_INCORPORATED

    forged = Event(engine.page.seq + 1, engine.page.id, "ada", 10**12,
                   SUMMARY_INCORPORATED, {"node": sid})
    report = check_log(engine.events + [forged], minimize=False)
    ser = next(r for r in report.results if r.name == "serializability")
    assert not ser.ok  # incorporation without holding the lock


def test_serializability_catches_unauthorized_actor():
    engine = clean_log(steps=30)
    from livesum.events import COMMENT_HIDDEN

    nid = next(n for n, node in engine.page.nodes.items() if node.is_comment)
    forged = Event(engine.page.seq + 1, engine.page.id, "stranger", 10**12,
                   COMMENT_HIDDEN, {"node": nid})
    report = check_log(engine.events + [forged], minimize=False)
    ser = next(r for r in report.results if r.name == "serializability")
    assert not ser.ok
