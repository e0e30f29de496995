"""Rich text bodies: plain text plus inline format marks.

A body is stored as the plain text string and a list of marks, each a half-open
[start, end) span with a kind (bold, italic, link, bullet) and an optional
attribute (the link href). Citation spans are stored separately on summary
nodes; they index into the same text. This keeps word counting, snippets, and
span-based citations format-independent while still round-tripping formatting.

Canonical serialization (wire + storage + hashing): ``{"text": ..., "marks":
[[start, end, kind, attr], ...]}`` with marks sorted by (start, end, kind,
attr). Serializing then parsing is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError

MARK_KINDS = ("bold", "italic", "link", "bullet")


@dataclass(frozen=True)
class Mark:
    start: int
    end: int
    kind: str
    attr: str | None = None


@dataclass(frozen=True)
class RichText:
    text: str = ""
    marks: tuple[Mark, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        ordered = sorted(self.marks, key=lambda m: (m.start, m.end, m.kind, m.attr or ""))
        return {
            "text": self.text,
            "marks": [[m.start, m.end, m.kind, m.attr] for m in ordered],
        }

    def word_count(self) -> int:
        # Unicode-whitespace-delimited tokens over the plain text.
        return len(self.text.split())

    def is_blank(self) -> bool:
        return not self.text.strip()


def as_richtext(value: object) -> RichText:
    """Coerce user input (plain string or canonical dict) into a RichText.

    Raises ParseError for malformed structures; mark spans are clamped checked
    against the text bounds.
    """
    if isinstance(value, RichText):
        return value
    if isinstance(value, str):
        return RichText(text=value)
    if not isinstance(value, dict):
        raise ParseError(f"body must be a string or object, got {type(value).__name__}")
    text = value.get("text", "")
    if not isinstance(text, str):
        raise ParseError("body.text must be a string")
    raw_marks = value.get("marks", [])
    if not isinstance(raw_marks, list):
        raise ParseError("body.marks must be a list")
    marks = []
    for raw in raw_marks:
        if isinstance(raw, dict):
            raw = [raw.get("start"), raw.get("end"), raw.get("kind"), raw.get("attr")]
        if not isinstance(raw, (list, tuple)) or len(raw) not in (3, 4):
            raise ParseError(f"malformed mark: {raw!r}")
        start, end, kind = raw[0], raw[1], raw[2]
        attr = raw[3] if len(raw) == 4 else None
        if not isinstance(start, int) or not isinstance(end, int):
            raise ParseError("mark offsets must be integers")
        if kind not in MARK_KINDS:
            raise ParseError(f"unknown mark kind: {kind!r}")
        if not (0 <= start <= end <= len(text)):
            raise ParseError(f"mark span [{start}, {end}) outside text bounds")
        if attr is not None and not isinstance(attr, str):
            raise ParseError("mark attr must be a string")
        marks.append(Mark(start, end, kind, attr))
    return RichText(text=text, marks=tuple(marks))


def snippet(text: str, limit: int = 80) -> str:
    """First characters of a body, cut at a word boundary, for outline rows."""
    flat = " ".join(text.split())
    if len(flat) <= limit:
        return flat
    cut = flat.rfind(" ", 0, limit + 1)
    if cut <= 0:
        cut = limit
    return flat[:cut].rstrip()
