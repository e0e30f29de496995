"""Rich text bodies: coercion, canonical form, counting, snippets."""

from __future__ import annotations

import pytest

from livesum.errors import ParseError
from livesum.richtext import Mark, RichText, as_richtext, snippet


def test_plain_string_coerces():
    rt = as_richtext("hello there")
    assert rt.text == "hello there" and rt.marks == ()


def test_dict_round_trip_is_identity():
    rt = RichText("bold and linked", (
        Mark(0, 4, "bold"),
        Mark(9, 15, "link", "https://x"),
    ))
    again = as_richtext(rt.to_dict())
    assert again.to_dict() == rt.to_dict()


def test_canonical_order_is_stable():
    a = RichText("ab", (Mark(1, 2, "bold"), Mark(0, 1, "italic")))
    b = RichText("ab", (Mark(0, 1, "italic"), Mark(1, 2, "bold")))
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("bad", [
    {"text": 5},
    {"text": "x", "marks": "nope"},
    {"text": "x", "marks": [[0, 9, "bold", None]]},        # span out of bounds
    {"text": "x", "marks": [[0, 1, "sparkle", None]]},     # unknown kind
    {"text": "x", "marks": [["a", 1, "bold", None]]},
    42,
])
def test_malformed_bodies_rejected(bad):
    with pytest.raises(ParseError):
        as_richtext(bad)


def test_word_count_uses_unicode_whitespace():
    assert RichText("a b\tc  d\n").word_count() == 4
    assert RichText("").word_count() == 0


def test_snippet_cuts_at_word_boundary():
    text = "word " * 40
    out = snippet(text, 80)
    assert len(out) <= 80
    assert not out.endswith(" ")
    assert out == ("word " * 16).strip()


def test_snippet_flattens_whitespace():
    assert snippet("line one\nline   two", 80) == "line one line two"


def test_snippet_hard_cuts_unbroken_runs():
    assert snippet("x" * 100, 10) == "x" * 10
