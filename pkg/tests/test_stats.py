"""The activity series emitter and its grow/shrink shape."""

from __future__ import annotations

from conftest import incorporate, make_page, summarize
from livesum.stats import per_user_totals, render_series, stats_rows
from oracles import view_words


def test_empty_page_empty_series():
    assert stats_rows([]) == []
    assert render_series([]).strip() == "\t".join(
        ("seq", "at", "kind", "actor", "word_delta",
         "default_view_words", "progress_fraction"))


def test_series_tracks_grow_and_shrink():
    engine = make_page()
    a = engine.add_comment("ada", None, "one two three four five six").payload["node"]
    engine.add_comment("ben", a, "seven eight nine ten")
    s = summarize(engine, "cy", [a], "short recap")
    engine.add_comment("dee", s, "post-summary thought words")
    incorporate(engine, "cy", s, body="short recap updated")

    rows = stats_rows(engine.events)
    series = [r["default_view_words"] for r in rows]
    kinds = [r["kind"] for r in rows]
    # grows with comments
    first_comment = kinds.index("CommentAdded")
    assert series[first_comment + 1] > series[first_comment - 1] if first_comment else True
    # drops at the summarize step
    s_idx = kinds.index("SummaryCreated")
    assert series[s_idx] < series[s_idx - 1]
    # rises at the post-summary comment
    post_idx = kinds.index("CommentAdded", s_idx)
    assert series[post_idx] > series[s_idx]
    # settles after incorporation
    inc_idx = next(i for i, k in enumerate(kinds) if k == "SummaryEdited")
    assert series[inc_idx] < series[post_idx]
    # every row agrees with a recount of the folded prefix
    assert series[-1] == view_words(engine.page)


def test_word_deltas_sum_to_user_totals():
    engine = make_page()
    engine.add_comment("ada", None, "alpha beta gamma")
    nid = engine.add_comment("ben", None, "delta epsilon").payload["node"]
    summarize(engine, "cy", [nid], "zeta eta theta iota")
    rows = stats_rows(engine.events)
    totals = per_user_totals(engine.events)
    assert sum(r["word_delta"] for r in rows) == sum(
        b["comment"] + b["summary"] for b in totals.values())
    assert totals["ada"] == {"comment": 3, "summary": 0}
    assert totals["cy"] == {"comment": 0, "summary": 4}


def test_render_series_is_plottable():
    engine = make_page()
    engine.add_comment("ada", None, "x y z")
    text = render_series(stats_rows(engine.events), delimiter=",")
    lines = text.strip().split("\n")
    assert lines[0].startswith("seq,at,kind")
    assert len(lines) == len(engine.events) + 1
    assert all(len(line.split(",")) == 7 for line in lines)
