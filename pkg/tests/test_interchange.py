"""Imports of external discussions, document/tree exports, and round-trips."""

from __future__ import annotations

import pytest

from conftest import USERS, LogicalClock, make_page, make_service, summarize
from genops import OpMachine
from livesum.errors import CycleInInput, DanglingParent, ParseError, UnsupportedFormat
from livesum.interchange import export_document, export_tree, parse_tree
from livesum.model import BLUE_CIRCLE, CITE_QUOTE, Citation
from livesum.store import node_to_dict


def doc(items, source="forum"):
    return {"source": source, "items": items}


def item(ext, parent, author, ts, body):
    return {"external_id": ext, "parent_external_id": parent,
            "author": author, "timestamp": ts, "body": body}


# ---------------------------------------------------------------------------
# discussion import


def test_chain_import_preserves_depth(engine):
    mapping = engine.import_discussion("ada", doc([
        item("a", None, "x", 100, "root"),
        item("b", "a", "y", 200, "mid"),
        item("c", "b", "z", 300, "leaf"),
    ]))
    page = engine.page
    assert page.nodes[mapping["b"]].parent == mapping["a"]
    assert page.nodes[mapping["c"]].parent == mapping["b"]
    assert all(page.icon(nid) == BLUE_CIRCLE for nid in mapping.values())


def test_forum_dump_orders_children_by_timestamp(engine):
    mapping = engine.import_discussion("ada", doc([
        item("r2", None, "u", 500, "second root"),
        item("r1", None, "u", 100, "first root"),
        item("c3", "r1", "v", 900, "late reply"),
        item("c1", "r1", "v", 200, "early reply"),
        item("c2", "r1", "w", 300, "middle reply"),
        item("c4", "r2", "v", 600, "only reply"),
        item("c5", "r2", "w", 700, "another"),
    ]))
    page = engine.page
    assert page.roots == [mapping["r1"], mapping["r2"]]
    assert page.nodes[mapping["r1"]].children == [mapping["c1"], mapping["c2"], mapping["c3"]]
    assert page.nodes[mapping["r2"]].children == [mapping["c4"], mapping["c5"]]
    # adjacency fidelity: child -> parent edges exactly as the source
    source_edges = {("c1", "r1"), ("c2", "r1"), ("c3", "r1"), ("c4", "r2"), ("c5", "r2")}
    got_edges = {
        (ext, next(e for e, nid2 in mapping.items() if nid2 == page.nodes[nid].parent))
        for ext, nid in mapping.items() if page.nodes[nid].parent is not None
    }
    assert got_edges == source_edges


def test_dangling_parent_appends_nothing(engine):
    before = engine.page.seq
    with pytest.raises(DanglingParent):
        engine.import_discussion("ada", doc([
            item("a", None, "x", 1, "fine"),
            item("b", "ghost", "y", 2, "dangling"),
        ]))
    assert engine.page.seq == before
    assert not engine.page.nodes


def test_cycle_in_input_rejected(engine):
    with pytest.raises(CycleInInput):
        engine.import_discussion("ada", doc([
            item("a", "b", "x", 1, "loop"),
            item("b", "a", "y", 2, "loop"),
        ]))


def test_import_preserves_source_timestamps(engine):
    mapping = engine.import_discussion("ada", doc([item("a", None, "x", 123456, "old")]))
    assert engine.page.nodes[mapping["a"]].created_at == 123456


def test_imported_authors_do_not_need_membership(engine):
    mapping = engine.import_discussion("ada", doc([
        item("a", None, "outsider9", 1, "historical voice"),
    ]))
    assert engine.page.nodes[mapping["a"]].author == "outsider9"


# ---------------------------------------------------------------------------
# tree round-trip


def test_tree_round_trip_structural_identity():
    svc = make_service()
    for seed in range(8):
        engine = make_page(clock=LogicalClock(), build_frames=False)
        OpMachine(engine, USERS, seed=seed).run(200)
        blob = export_tree(engine.page)
        fresh = svc.create_page("ada", title="import target")
        fresh.install_tree("ada", parse_tree(blob))
        src, dst = engine.page, fresh.page
        assert src.roots == dst.roots
        assert set(src.nodes) == set(dst.nodes)
        strip = lambda d: {k: v for k, v in d.items() if k != "created_seq"}
        for nid in src.nodes:
            assert strip(node_to_dict(src.nodes[nid])) == strip(node_to_dict(dst.nodes[nid]))
        assert export_tree(dst) == blob  # second export is byte-identical


def test_tree_import_requires_empty_page(engine):
    engine.add_comment("ada", None, "occupied")
    blob = export_tree(engine.page)
    from livesum.errors import ValidationError

    with pytest.raises(ValidationError):
        engine.install_tree("ada", parse_tree(blob))


def test_parse_tree_rejects_garbage():
    with pytest.raises(ParseError):
        parse_tree(b"not json")
    with pytest.raises(ParseError):
        parse_tree(b'{"format": "other"}')
    with pytest.raises(DanglingParent):
        parse_tree(b'{"format": "livesum-tree", "v": 1, "tree": {"roots": [], '
                   b'"nodes": {"n1": {"parent": "n9", "kind": "comment"}}}}')


# ---------------------------------------------------------------------------
# document export


def build_document_page():
    engine = make_page()
    a = engine.add_comment("ada", None, "we should keep the quotable cafeteria open").payload["node"]
    b = engine.add_comment("ben", a, "agreed, with longer hours").payload["node"]
    body = "Consensus: keep the cafeteria open. quotable"
    s = summarize(engine, "cy", [a], body, [
        Citation(start=len(body) - 8, end=len(body), target=a, mode=CITE_QUOTE),
        Citation(start=0, end=9, target=b, mode="cite"),
    ])
    return engine, s


def test_document_export_renders_sections_and_footnotes():
    engine, s = build_document_page()
    out = export_document(engine.page, "portable-markup").decode()
    # footnote markers sit at their span ends, inside the flowing text
    assert "Consensus[2]: keep the cafeteria open. quotable[1]" in out
    assert '[1]: ada -- "we should keep the quotable cafeteria open"' in out
    assert '[2]: ben -- "agreed, with longer hours"' in out
    assert "Unsynthesized discussion" not in out  # everything is covered


def test_document_export_is_deterministic():
    engine, _ = build_document_page()
    assert export_document(engine.page, "portable-markup") == \
        export_document(engine.page, "portable-markup")


def test_unsummarized_appendix_lists_leftovers(engine):
    a = engine.add_comment("ada", None, "covered idea").payload["node"]
    summarize(engine, "ben", [a], "the covered idea")
    engine.add_comment("cy", None, "stray thought one")
    engine.add_comment("dee", None, "stray thought two")
    out = export_document(engine.page, "portable-markup").decode()
    assert "## Unsynthesized discussion" in out
    assert "- cy: stray thought one" in out
    assert "- dee: stray thought two" in out


def test_web_page_export_escapes_and_links():
    engine, _ = build_document_page()
    html = export_document(engine.page, "web-page").decode()
    assert html.startswith("<!doctype html>")
    assert '<a href="#fn1">[1]</a>' in html
    assert '<li id="fn1">ada' in html


def test_unknown_format_rejected(engine):
    with pytest.raises(UnsupportedFormat):
        export_document(engine.page, "pdf")
