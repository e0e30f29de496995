"""Default-view semantics: collapse, click-to-expand, auto-expansion down to
pending comments, and ephemeral sorting."""

from __future__ import annotations

import pytest

from conftest import USERS, LogicalClock, incorporate, make_page, summarize
from genops import OpMachine
from livesum.model import BLUE_CIRCLE, HALF_SQUARE, ORANGE_SQUARE, YELLOW_CIRCLE
from livesum.view import sort_view
from oracles import expected_view


def rows(engine, viewer=None, expansions=frozenset()):
    return [(i.node, i.depth, i.icon) for i in engine.view(viewer, set(expansions))]


def test_full_collapse_shows_single_item(engine):
    a = engine.add_comment("ada", None, "t").payload["node"]
    for _ in range(4):
        a = engine.add_comment("ben", a, "reply chain").payload["node"]
    top = engine.page.roots[0]
    s = summarize(engine, "ada", [top], "everything")
    assert rows(engine) == [(s, 0, ORANGE_SQUARE)]


def test_outdated_summary_expands_down_to_blue_comment(engine):
    a = engine.add_comment("ada", None, "root comment").payload["node"]
    b = engine.add_comment("ben", a, "middle").payload["node"]
    engine.add_comment("cy", a, "sibling that was summarized")
    s = summarize(engine, "ada", [a], "covers the thread")
    assert rows(engine) == [(s, 0, ORANGE_SQUARE)]

    late = engine.add_comment("dee", b, "two levels down").payload["node"]
    # HalfSquare summary, the on-path parents, the blue comment; the
    # summarized sibling stays hidden.
    assert rows(engine) == [
        (s, 0, HALF_SQUARE),
        (a, 1, YELLOW_CIRCLE),
        (b, 2, YELLOW_CIRCLE),
        (late, 3, BLUE_CIRCLE),
    ]
    incorporate(engine, "ada", s)
    assert rows(engine) == [(s, 0, ORANGE_SQUARE)]


def test_expansion_reveals_direct_children(engine):
    a = engine.add_comment("ada", None, "one").payload["node"]
    b = engine.add_comment("ben", None, "two").payload["node"]
    s = summarize(engine, "ada", [a, b], "both")
    assert rows(engine, expansions={s}) == [
        (s, 0, ORANGE_SQUARE),
        (a, 1, YELLOW_CIRCLE),
        (b, 1, YELLOW_CIRCLE),
    ]


def test_offpath_complete_subsummary_collapses_under_outdated(engine):
    a = engine.add_comment("ada", None, "covered A").payload["node"]
    b = engine.add_comment("ben", None, "covered B").payload["node"]
    s1 = summarize(engine, "ada", [a], "inner complete")
    top = summarize(engine, "ben", [s1, b], "big summary")
    late = engine.add_comment("cy", b, "poke").payload["node"]
    # top is outdated via `late` under b; s1 is off that path: collapsed, even
    # if the viewer tried to expand it (restricted regions ignore expansions).
    expected = [
        (top, 0, HALF_SQUARE),
        (s1, 1, ORANGE_SQUARE),
        (b, 1, YELLOW_CIRCLE),
        (late, 2, BLUE_CIRCLE),
    ]
    assert rows(engine) == expected
    assert rows(engine, expansions={s1}) == expected


def test_offpath_outdated_subsummary_still_surfaces_its_pending(engine):
    a = engine.add_comment("ada", None, "A").payload["node"]
    s1 = summarize(engine, "ada", [a], "inner")
    top = summarize(engine, "ben", [s1], "outer")
    in_inner = engine.add_comment("cy", a, "dirties both").payload["node"]
    incorporate(engine, "ben", top)  # outer caught up, inner did not
    elsewhere = engine.add_comment("dee", top, "post-summary comment").payload["node"]
    # top pending = {elsewhere}; s1 pending = {in_inner} (off top's path)
    assert rows(engine) == [
        (top, 0, HALF_SQUARE),
        (s1, 1, HALF_SQUARE),
        (a, 2, YELLOW_CIRCLE),
        (in_inner, 3, BLUE_CIRCLE),
        (elsewhere, 1, BLUE_CIRCLE),
    ]


def test_hidden_comments_skip_but_children_surface(engine):
    a = engine.add_comment("ada", None, "to hide").payload["node"]
    b = engine.add_comment("ben", a, "survivor").payload["node"]
    engine.hide_comment("ada", a)
    assert rows(engine) == [(b, 0, BLUE_CIRCLE)]


def test_unread_flags_follow_viewer(engine):
    a = engine.add_comment("ada", None, "by ada").payload["node"]
    view_ben = engine.view("ben")
    assert [(i.node, i.unread) for i in view_ben] == [(a, True)]
    assert [(i.node, i.unread) for i in engine.view("ada")] == [(a, False)]
    engine.mark_read("ben", [a])
    assert [(i.node, i.unread) for i in engine.view("ben")] == [(a, False)]


def test_random_trees_match_visibility_oracle():
    for seed in range(12):
        engine = make_page(clock=LogicalClock(), build_frames=False)
        OpMachine(engine, USERS, seed=seed).run(300)
        expansions = frozenset(
            nid for nid, n in engine.page.nodes.items()
            if n.is_summary and not n.pending and (seed + len(nid)) % 3 == 0
        )
        got = [(i.node, i.depth) for i in engine.view(expansions=set(expansions))]
        assert got == expected_view(engine.page, expansions), seed


# ---------------------------------------------------------------------------
# sorting


def test_sort_is_ephemeral(engine):
    for u, t in (("ada", "bbb"), ("ben", "a"), ("cy", "cc cc")):
        engine.add_comment(u, None, t)
    stored = list(engine.page.roots)
    items = engine.view()
    sort_view(engine.page, items, "length")
    assert engine.page.roots == stored
    assert [i.node for i in engine.view()] == stored


def test_chronological_sort_orders_by_creation(engine):
    ids = [engine.add_comment("ada", None, f"t{i}").payload["node"] for i in range(3)]
    shuffled = engine.view()
    # stored order is creation order already; reverse it via moves to prove sorting
    from conftest import move
    move(engine, "ada", ids[2], None, 0)
    move(engine, "ada", ids[1], None, 0)
    assert [i.node for i in engine.view()] == [ids[1], ids[2], ids[0]]
    out = sort_view(engine.page, engine.view(), "chronological")
    assert [i.node for i in out] == ids


def test_length_sort_breaks_ties_by_created_at(engine):
    a = engine.add_comment("ada", None, "xx").payload["node"]
    b = engine.add_comment("ben", None, "yy").payload["node"]
    c = engine.add_comment("cy", None, "z").payload["node"]
    out = sort_view(engine.page, engine.view(), "length")
    assert [i.node for i in out] == [c, a, b]
    naive = sorted(
        [a, b, c],
        key=lambda n: (len(engine.page.nodes[n].body.text), engine.page.nodes[n].created_at),
    )
    assert [i.node for i in out] == naive


def test_sort_preserves_hierarchy(engine):
    a = engine.add_comment("ada", None, "thread zz").payload["node"]
    a2 = engine.add_comment("ben", a, "zzzz").payload["node"]
    a1 = engine.add_comment("cy", a, "y").payload["node"]
    b = engine.add_comment("dee", None, "top x").payload["node"]
    out = sort_view(engine.page, engine.view(), "length")
    assert [i.node for i in out] == [b, a, a1, a2]
    assert [i.depth for i in out] == [0, 0, 1, 1]


def test_sort_rejects_unknown_key(engine):
    with pytest.raises(ValueError):
        sort_view(engine.page, engine.view(), "sentiment")


# ---------------------------------------------------------------------------
# collapse arithmetic (unit-scale; the bulk property lives in acceptance)


def test_summarizing_k_clean_items_reduces_view_by_k_minus_1(engine):
    ids = [engine.add_comment("ada", None, f"p{i}").payload["node"] for i in range(5)]
    # make one of them a collapsed summary to mix item kinds
    s0 = summarize(engine, "ben", [ids[0]], "pre-existing summary")
    items_before = len(engine.view())
    k = 4
    selection = [s0] + ids[1:k]
    summarize(engine, "ada", selection, "grouped")
    assert len(engine.view()) == items_before - (k - 1)
