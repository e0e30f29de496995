"""Interchange: importing external threaded discussions and exporting the
living document or the complete tree.

Discussion import format (JSON, field names are the contract):

    {"source": "...", "items": [
        {"external_id": "...", "parent_external_id": "..." | null,
         "author": "...", "timestamp": <numberepochms>, "body": "..." | {...}}
    ]}

Items replay as one CommentAdded event each, parents before children and
siblings by timestamp, so the initial tree mirrors the source reply structure
exactly. Import is atomic: any dangling parent or cycle rejects the whole
document before events are appended.

Document export renders the top-level summaries in child order (that is the
living proposal), each citation becoming a numbered footnote naming the cited
comment's author and a snippet, followed by an appendix of all unsummarized
discussion so the export is never silently lossy. Tree export/import is the
lossless whole-forest form.
"""

from __future__ import annotations

import html as html_mod
import json

from .errors import CycleInInput, DanglingParent, ParseError, UnsupportedFormat
from .model import Node, NodeId, Page
from .richtext import RichText, as_richtext, snippet
from .store import node_to_dict

TREE_FORMAT = "livesum-tree"
TREE_VERSION = 1

DOC_MARKUP = "portable-markup"
DOC_WEB = "web-page"
EXPORT_FORMATS = (DOC_MARKUP, DOC_WEB, "tree")


# ---------------------------------------------------------------------------
# discussion import


def parse_discussion(doc: dict) -> list[dict]:
    if not isinstance(doc, dict) or not isinstance(doc.get("items"), list):
        raise ParseError("discussion document must be an object with an items list")
    items = []
    seen: set[str] = set()
    for raw in doc["items"]:
        if not isinstance(raw, dict):
            raise ParseError(f"malformed item: {raw!r}")
        try:
            ext = str(raw["external_id"])
            author = str(raw["author"])
            ts = raw["timestamp"]
            body = raw["body"]
        except KeyError as exc:
            raise ParseError(f"item missing field {exc}") from exc
        if ext in seen:
            raise ParseError(f"duplicate external_id {ext}")
        seen.add(ext)
        if not isinstance(ts, (int, float)):
            raise ParseError(f"timestamp must be a number: {ts!r}")
        parent = raw.get("parent_external_id")
        items.append({
            "external_id": ext,
            "parent_external_id": None if parent is None else str(parent),
            "author": author,
            "timestamp": int(ts),
            "body": as_richtext(body),
        })
    return items


def order_discussion(items: list[dict]) -> list[dict]:
    """Parent-first, then timestamp (then external_id for full determinism)."""
    by_id = {item["external_id"]: item for item in items}
    depth: dict[str, int] = {}

    def depth_of(ext: str, trail: set[str]) -> int:
        if ext in depth:
            return depth[ext]
        if ext in trail:
            raise CycleInInput(f"cycle through {ext}")
        trail.add(ext)
        parent = by_id[ext]["parent_external_id"]
        if parent is None:
            d = 0
        else:
            if parent not in by_id:
                raise DanglingParent(f"{ext} references missing parent {parent}")
            d = depth_of(parent, trail) + 1
        trail.discard(ext)
        depth[ext] = d
        return d

    for item in items:
        depth_of(item["external_id"], set())
    return sorted(items, key=lambda i: (depth[i["external_id"]], i["timestamp"], i["external_id"]))


def prepare_discussion_import(page: Page, doc: dict) -> tuple[list[tuple[str, dict]], dict[str, NodeId]]:
    """Validate + order a discussion document and pre-assign node ids.

    Returns ([(author, CommentAdded payload), ...], external_id -> NodeId).
    """
    ordered = order_discussion(parse_discussion(doc))
    mapping: dict[str, NodeId] = {}
    out: list[tuple[str, dict]] = []
    counter = page.node_counter
    for item in ordered:
        counter += 1
        nid = f"n{counter}"
        mapping[item["external_id"]] = nid
        parent_ext = item["parent_external_id"]
        out.append((item["author"], {
            "node": nid,
            "parent": mapping[parent_ext] if parent_ext is not None else None,
            "body": item["body"].to_dict(),
            "created_at": item["timestamp"],
            # historical content: exempt from live-commenter permission checks
            # and from notification fan-out
            "imported": True,
        }))
    return out, mapping


# ---------------------------------------------------------------------------
# tree export / import


def _portable_node(node: Node) -> dict:
    out = node_to_dict(node)
    # per-page bookkeeping, not part of the portable tree
    out.pop("created_seq")
    return out


def export_tree(page: Page) -> bytes:
    data = {
        "format": TREE_FORMAT,
        "v": TREE_VERSION,
        "tree": {
            "roots": list(page.roots),
            "nodes": {nid: _portable_node(page.nodes[nid]) for nid in sorted(page.nodes)},
        },
    }
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def parse_tree(raw: bytes | str) -> dict:
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed tree document: {exc}") from exc
    if not isinstance(data, dict) or data.get("format") != TREE_FORMAT:
        raise ParseError("not a tree export document")
    if data.get("v") != TREE_VERSION:
        raise ParseError(f"unsupported tree version {data.get('v')!r}")
    tree = data.get("tree")
    if not isinstance(tree, dict) or "roots" not in tree or "nodes" not in tree:
        raise ParseError("tree document missing roots/nodes")
    nodes = tree["nodes"]
    for nid, raw_node in nodes.items():
        parent = raw_node.get("parent")
        if parent is not None and parent not in nodes:
            raise DanglingParent(f"{nid} references missing parent {parent}")
    return tree


# ---------------------------------------------------------------------------
# document export


def _render_markup(body: RichText, footnote_refs: list[tuple[int, int]]) -> str:
    """Body text with inline marks as markdown and [n] citation refs inserted
    at their span ends. footnote_refs: (offset, footnote number)."""
    inserts: dict[int, list[str]] = {}
    for offset, number in footnote_refs:
        inserts.setdefault(offset, []).append(f"[{number}]")
    for mark in body.marks:
        if mark.kind == "bold":
            inserts.setdefault(mark.start, []).append("**")
            inserts.setdefault(mark.end, []).insert(0, "**")
        elif mark.kind == "italic":
            inserts.setdefault(mark.start, []).append("*")
            inserts.setdefault(mark.end, []).insert(0, "*")
        elif mark.kind == "link":
            inserts.setdefault(mark.start, []).append("[")
            inserts.setdefault(mark.end, []).insert(0, f"]({mark.attr or ''})")
        elif mark.kind == "bullet":
            inserts.setdefault(mark.start, []).append("- ")
    out = []
    for i, ch in enumerate(body.text):
        if i in inserts:
            out.extend(inserts[i])
        out.append(ch)
    if len(body.text) in inserts:
        out.extend(inserts[len(body.text)])
    return "".join(out)


def _blue_comments(page: Page) -> list[Node]:
    return [
        page.nodes[nid] for nid in page.preorder()
        if page.nodes[nid].is_comment and not page.nodes[nid].hidden
        and page.is_unsummarized(nid)
    ]


def export_document(page: Page, format: str) -> bytes:
    if format == "tree":
        return export_tree(page)
    if format not in (DOC_MARKUP, DOC_WEB):
        raise UnsupportedFormat(format)

    sections: list[tuple[Node, list[tuple[int, int]], list[tuple[int, Node]]]] = []
    footnotes: list[tuple[int, Node]] = []
    counter = 0
    for rid in page.roots:
        root = page.nodes[rid]
        if not root.is_summary:
            continue
        refs = []
        notes = []
        for cit in root.citations:
            counter += 1
            target = page.nodes[cit.target]
            refs.append((cit.end, counter))
            notes.append((counter, target))
        footnotes.extend(notes)
        sections.append((root, refs, notes))
    leftovers = _blue_comments(page)

    if format == DOC_MARKUP:
        lines: list[str] = [f"# {page.title}".rstrip(), ""] if page.title else []
        for node, refs, _ in sections:
            lines.append(_render_markup(node.body, refs))
            lines.append("")
        if footnotes:
            for number, target in footnotes:
                lines.append(f"[{number}]: {target.author} -- \"{snippet(target.body.text, 60)}\"")
            lines.append("")
        if leftovers:
            lines.append("## Unsynthesized discussion")
            lines.append("")
            for node in leftovers:
                lines.append(f"- {node.author}: {node.body.text}")
            lines.append("")
        return ("\n".join(lines).rstrip("\n") + "\n").encode("utf-8")

    parts = ["<!doctype html>", "<html><head><meta charset=\"utf-8\">"]
    parts.append(f"<title>{html_mod.escape(page.title or page.id)}</title></head><body>")
    if page.title:
        parts.append(f"<h1>{html_mod.escape(page.title)}</h1>")
    for node, refs, _ in sections:
        text = html_mod.escape(node.body.text)
        suffix = "".join(
            f'<sup><a href="#fn{num}">[{num}]</a></sup>'
            for _, num in sorted(refs, key=lambda r: r[1])
        )
        parts.append(f"<section><p>{text}{suffix}</p></section>")
    if footnotes:
        parts.append("<hr><ol>")
        for number, target in footnotes:
            parts.append(
                f'<li id="fn{number}">{html_mod.escape(target.author)} -- '
                f'&quot;{html_mod.escape(snippet(target.body.text, 60))}&quot;</li>'
            )
        parts.append("</ol>")
    if leftovers:
        parts.append("<h2>Unsynthesized discussion</h2><ul>")
        for node in leftovers:
            parts.append(
                f"<li>{html_mod.escape(node.author)}: {html_mod.escape(node.body.text)}</li>"
            )
        parts.append("</ul>")
    parts.append("</body></html>")
    return "\n".join(parts).encode("utf-8")
