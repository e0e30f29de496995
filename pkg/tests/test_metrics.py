"""Chart metrics: default-view words, progress fraction, per-user accounting,
and the incremental tracker's agreement with a from-scratch recount."""

from __future__ import annotations

from conftest import USERS, LogicalClock, incorporate, make_page, summarize
from genops import OpMachine
from livesum.metrics import WordTracker, compute_metrics, recount_view_words
from livesum.model import Page
from oracles import view_words


def test_empty_page_vacuously_complete(engine):
    m = engine.metrics()
    assert m["default_view_words"] == 0
    assert m["progress_fraction"] == 1.0
    assert m["per_user_words_added"] == {}


def test_unsummarized_comments_sum_words(engine):
    engine.add_comment("ada", None, "one two three four five")
    engine.add_comment("ben", None, "six seven eight nine ten eleven twelve")
    m = engine.metrics()
    assert m["default_view_words"] == 12
    assert m["progress_fraction"] == 0.0


def test_summarize_all_counts_only_summary_words(engine):
    a = engine.add_comment("ada", None, "one two three four five").payload["node"]
    b = engine.add_comment("ben", None, "six seven eight nine ten eleven twelve").payload["node"]
    body = " ".join(f"w{i}" for i in range(30))
    summarize(engine, "cy", [a, b], body)
    m = engine.metrics()
    assert m["default_view_words"] == 30
    assert m["progress_fraction"] == 1.0
    assert m["default_view_words"] == view_words(engine.page)


def test_mid_tree_summary_bodies_do_not_count(engine):
    a = engine.add_comment("ada", None, "top level words here").payload["node"]
    b = engine.add_comment("ben", a, "nested one two").payload["node"]
    summarize(engine, "cy", [b], "invisible mid words")
    # top-level comment stays blue (the summary is below it)
    assert engine.metrics()["default_view_words"] == 4


def test_progress_counts_comment_fraction(engine):
    a = engine.add_comment("ada", None, "covered").payload["node"]
    engine.add_comment("ben", None, "not covered")
    summarize(engine, "cy", [a], "s")
    assert engine.metrics()["progress_fraction"] == 0.5
    # outdating drops the fraction
    s = [nid for nid, n in engine.page.nodes.items() if n.is_summary][0]
    engine.add_comment("dee", s, "post-summary comment")
    assert engine.metrics()["progress_fraction"] == 0.0


def test_per_user_accounting_splits_comment_and_summary(engine):
    a = engine.add_comment("ada", None, "one two three").payload["node"]
    engine.edit_comment("ada", a, "one two three four five")
    summarize(engine, "ben", [a], "six seven")
    acct = engine.metrics()["per_user_words_added"]
    assert acct["ada"] == {"comment": 5, "summary": 0}
    assert acct["ben"] == {"comment": 0, "summary": 2}


def test_hidden_comments_leave_both_metrics(engine):
    a = engine.add_comment("ada", None, "four words are here").payload["node"]
    engine.hide_comment("ben", a)
    m = engine.metrics()
    assert m["default_view_words"] == 0
    assert m["progress_fraction"] == 1.0  # no visible comments left


def test_incorporation_shrinks_view_words(engine):
    a = engine.add_comment("ada", None, "alpha beta gamma delta").payload["node"]
    s = summarize(engine, "ben", [a], "two words")
    engine.add_comment("cy", a, "lots of new words arriving now")
    grown = engine.metrics()["default_view_words"]
    assert grown == 2 + 6
    incorporate(engine, "ben", s, body="two words plus one")
    assert engine.metrics()["default_view_words"] == 4


def test_tracker_matches_recount_on_random_runs():
    for seed in (11, 23):
        engine = make_page(clock=LogicalClock(), build_frames=False)
        OpMachine(engine, USERS, seed=seed).run(350)
        page = Page(id=engine.page.id)
        tracker = WordTracker(page)
        for event in engine.events:
            tracker.apply(page, event)
            assert tracker.total == recount_view_words(page), (seed, event.seq, event.kind)
        assert tracker.total == view_words(engine.page)


def test_compute_metrics_shape(engine):
    engine.add_comment("ada", None, "x y z")
    m = compute_metrics(engine.page)
    assert set(m) == {"default_view_words", "progress_fraction", "per_user_words_added"}
