"""Activity time series: one row per event with the chart measures after it
applied (words shown in the default view, summarization progress) plus the
actor's net word delta: the data behind grow-and-shrink activity charts."""

from __future__ import annotations

import io

from .events import Event
from .metrics import WordTracker, progress_fraction
from .model import Page

COLUMNS = ("seq", "at", "kind", "actor", "word_delta",
           "default_view_words", "progress_fraction")


def _total_words(page: Page) -> int:
    return sum(b["comment"] + b["summary"] for b in page.words_added.values())


def stats_rows(events: list[Event], page_id: str | None = None) -> list[dict]:
    page = Page(id=page_id or (events[0].page if events else ""))
    tracker = WordTracker(page)
    rows: list[dict] = []
    prev_words = 0
    for event in events:
        tracker.apply(page, event)
        total = _total_words(page)
        rows.append({
            "seq": event.seq,
            "at": event.at,
            "kind": event.kind,
            "actor": event.actor,
            "word_delta": total - prev_words,
            "default_view_words": tracker.total,
            "progress_fraction": round(progress_fraction(page), 6),
        })
        prev_words = total
    return rows


def per_user_totals(events: list[Event]) -> dict[str, dict[str, int]]:
    from .events import fold

    page = fold(events)
    return {user: dict(buckets) for user, buckets in sorted(page.words_added.items())}


def render_series(rows: list[dict], delimiter: str = "\t") -> str:
    out = io.StringIO()
    out.write(delimiter.join(COLUMNS) + "\n")
    for row in rows:
        out.write(delimiter.join(str(row[c]) for c in COLUMNS) + "\n")
    return out.getvalue()
