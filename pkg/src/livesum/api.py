"""HTTP boundary: JSON endpoints for every mutation and query plus the
long-lived per-page frame stream.

All writes delegate to the page engine's serial append path; nothing here
bypasses permission or lock checks. Error responses carry the engine's stable
machine-readable codes ({"error": code, "detail": text}) with 400 for
validation, 401/403 for auth/permission, 404 for unknown ids, and 409 for
lock conflicts and stale expectations. Mutation responses always carry the
resulting seq.

The stream is newline-delimited JSON: one frame per event ({seq, event,
icons, pending, removed}) interleaved with {"heartbeat": true} keepalives; it
resumes from any seq and closes when the subscriber loses read access.
"""

from __future__ import annotations

import json
from typing import Any

from fastapi import Depends, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response, StreamingResponse
from pydantic import BaseModel

from .engine import PageEngine, Service
from .errors import LivesumError, PermissionDenied, ValidationError
from .model import ANON_USER
from .richtext import as_richtext
from .tree import parse_citations


class CommentIn(BaseModel):
    body: Any
    parent: str | None = None
    expected_seq: int | None = None


class SummaryIn(BaseModel):
    selection: list[str]
    body: Any
    citations: list[dict] | None = None
    expected_seq: int | None = None


class SummaryPatch(BaseModel):
    body: Any | None = None
    citations: list[dict] | None = None
    incorporate: bool = False
    expected_seq: int | None = None


class MoveIn(BaseModel):
    node: str
    new_parent: str | None = None
    index: int
    expected_seq: int | None = None


class TagIn(BaseModel):
    tag: str


class FlagIn(BaseModel):
    dimension: str
    value: int


class LockIn(BaseModel):
    kind: str
    covered: list[str] | None = None


class ReadMarksIn(BaseModel):
    nodes: list[str]


class PermissionsIn(BaseModel):
    mode: str | None = None
    publicly_commentable: bool | None = None
    publicly_editable: bool | None = None
    members: list[dict] | None = None


class PageIn(BaseModel):
    title: str = ""
    mode: str = "both"
    publicly_commentable: bool = False
    publicly_editable: bool = False


def create_app(service: Service, heartbeat_seconds: float = 15.0) -> FastAPI:
    app = FastAPI(title="livesum", version="0.1.0")
    app.state.service = service
    app.state.heartbeat_seconds = heartbeat_seconds

    async def actor(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header:
            return ANON_USER
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise PermissionDenied("malformed authorization header")
        user = service.user_for_token(token.strip())
        if user is None:
            raise _InvalidToken()
        return user

    def engine_of(page_id: str) -> PageEngine:
        return service.get_page(page_id)

    @app.exception_handler(LivesumError)
    async def livesum_error(request: Request, exc: LivesumError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": exc.code, "detail": str(exc)},
        )

    @app.exception_handler(_InvalidToken)
    async def invalid_token(request: Request, exc: _InvalidToken):
        return JSONResponse(status_code=401,
                            content={"error": "invalid_token", "detail": "unknown bearer token"})

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "validation", "detail": str(exc.errors()[:3])})

    # -- pages -----------------------------------------------------------

    @app.post("/pages")
    async def create_page(body: PageIn, user: str = Depends(actor)):
        if user == ANON_USER:
            raise PermissionDenied("page creation requires a signed-in user")
        engine = service.create_page(
            user, title=body.title, mode=body.mode,
            publicly_commentable=body.publicly_commentable,
            publicly_editable=body.publicly_editable,
        )
        return {"page": engine.page.id, "seq": engine.page.seq}

    @app.get("/pages/{page_id}")
    async def get_page(page_id: str, user: str = Depends(actor)):
        engine = engine_of(page_id)
        engine.require_read(user)
        return engine.page_doc(user)

    @app.get("/pages/{page_id}/view")
    async def get_view(page_id: str, user: str = Depends(actor),
                       since: int | None = Query(default=None),
                       expand: str = Query(default="")):
        engine = engine_of(page_id)
        engine.require_read(user)
        seq = engine.page.seq
        if since is not None and seq <= since:
            return {"seq": seq, "items": None}
        expansions = {e for e in expand.split(",") if e}
        viewer = None if user == ANON_USER else user
        items = engine.view(viewer, expansions)
        return {"seq": engine.page.seq, "items": [i.to_dict() for i in items]}

    # -- discussion ---------------------------------------------------------

    @app.post("/pages/{page_id}/comments")
    async def add_comment(page_id: str, body: CommentIn, user: str = Depends(actor)):
        event = engine_of(page_id).add_comment(
            user, body.parent, as_richtext(body.body), expected_seq=body.expected_seq)
        return {"seq": event.seq, "node": event.payload["node"]}

    @app.post("/pages/{page_id}/summaries")
    async def create_summary(page_id: str, body: SummaryIn, user: str = Depends(actor)):
        event = engine_of(page_id).summarize(
            user, body.selection, as_richtext(body.body),
            parse_citations(body.citations), expected_seq=body.expected_seq)
        return {"seq": event.seq, "node": event.payload["node"]}

    @app.patch("/pages/{page_id}/summaries/{sid}")
    async def edit_summary(page_id: str, sid: str, body: SummaryPatch, user: str = Depends(actor)):
        engine = engine_of(page_id)
        if body.body is None:
            if not body.incorporate:
                raise ValidationError("nothing to do: provide body and/or incorporate")
            event = engine.incorporate(user, sid, expected_seq=body.expected_seq)
        else:
            event = engine.edit_summary(
                user, sid, as_richtext(body.body), parse_citations(body.citations),
                incorporate=body.incorporate, expected_seq=body.expected_seq)
        return {"seq": event.seq}

    @app.delete("/pages/{page_id}/summaries/{sid}")
    async def delete_summary(page_id: str, sid: str, user: str = Depends(actor)):
        event = engine_of(page_id).delete_summary(user, sid)
        return {"seq": event.seq}

    @app.post("/pages/{page_id}/move")
    async def move_node(page_id: str, body: MoveIn, user: str = Depends(actor)):
        event = engine_of(page_id).move_node(
            user, body.node, body.new_parent, body.index, expected_seq=body.expected_seq)
        return {"seq": event.seq}

    @app.post("/pages/{page_id}/nodes/{nid}/tags")
    async def add_tag(page_id: str, nid: str, body: TagIn, user: str = Depends(actor)):
        engine = engine_of(page_id)
        event = engine.tag_comment(user, nid, body.tag, add=True)
        return {"seq": event.seq if event else engine.page.seq}

    @app.delete("/pages/{page_id}/nodes/{nid}/tags")
    async def remove_tag(page_id: str, nid: str, user: str = Depends(actor),
                         tag: str = Query(default="")):
        if not tag:
            raise ValidationError("tag query parameter required")
        engine = engine_of(page_id)
        event = engine.tag_comment(user, nid, tag, add=False)
        return {"seq": event.seq if event else engine.page.seq}

    @app.post("/pages/{page_id}/nodes/{nid}/hide")
    async def hide(page_id: str, nid: str, user: str = Depends(actor)):
        engine = engine_of(page_id)
        event = engine.hide_comment(user, nid)
        return {"seq": event.seq if event else engine.page.seq}

    @app.post("/pages/{page_id}/nodes/{nid}/unhide")
    async def unhide(page_id: str, nid: str, user: str = Depends(actor)):
        engine = engine_of(page_id)
        event = engine.unhide_comment(user, nid)
        return {"seq": event.seq if event else engine.page.seq}

    @app.post("/pages/{page_id}/summaries/{sid}/flags")
    async def flag(page_id: str, sid: str, body: FlagIn, user: str = Depends(actor)):
        event = engine_of(page_id).flag_summary(user, sid, body.dimension, body.value)
        return {"seq": event.seq}

    # -- locks ----------------------------------------------------------

    @app.post("/pages/{page_id}/locks")
    async def acquire_lock(page_id: str, body: LockIn, user: str = Depends(actor)):
        engine = engine_of(page_id)
        if body.kind == "summary":
            event = engine.acquire_summary_lock(user, body.covered or [])
        elif body.kind == "move":
            event = engine.acquire_move_lock(user)
        else:
            raise ValidationError(f"unknown lock kind {body.kind!r}")
        return {"seq": event.seq, "lock": event.payload["lock"]}

    @app.delete("/pages/{page_id}/locks/{lid}")
    async def release_lock(page_id: str, lid: str, user: str = Depends(actor)):
        event = engine_of(page_id).release_lock(user, lid)
        return {"seq": event.seq}

    # -- reads, permissions ------------------------------------------------

    @app.post("/pages/{page_id}/read-marks")
    async def mark_read(page_id: str, body: ReadMarksIn, user: str = Depends(actor)):
        engine = engine_of(page_id)
        event = engine.mark_read(user, body.nodes)
        return {"seq": event.seq if event else engine.page.seq}

    @app.put("/pages/{page_id}/permissions")
    async def put_permissions(page_id: str, body: PermissionsIn, user: str = Depends(actor)):
        engine = engine_of(page_id)
        roles = None
        if body.members:
            roles = {}
            for entry in body.members:
                if "user" not in entry or "role" not in entry:
                    raise ValidationError("members entries need user and role")
                roles[entry["user"]] = entry["role"]
        event = engine.set_permissions(
            user, mode=body.mode,
            publicly_commentable=body.publicly_commentable,
            publicly_editable=body.publicly_editable, roles=roles)
        return {"seq": event.seq if event else engine.page.seq}

    # -- history, interchange, stats ---------------------------------------

    @app.get("/pages/{page_id}/events")
    async def get_events(page_id: str, user: str = Depends(actor),
                         since: int = Query(default=0)):
        engine = engine_of(page_id)
        engine.require_read(user)
        return {
            "seq": engine.page.seq,
            "events": [e.to_record() for e in engine.events_since(since)],
        }

    @app.get("/pages/{page_id}/export")
    async def export(page_id: str, user: str = Depends(actor),
                     format: str = Query(default="portable-markup")):
        engine = engine_of(page_id)
        engine.require_read(user)
        blob = engine.export(format)
        if format == "tree":
            return Response(blob, media_type="application/json")
        media = "text/markdown" if format == "portable-markup" else "text/html"
        return Response(blob, media_type=f"{media}; charset=utf-8")

    @app.post("/pages/{page_id}/import")
    async def import_discussion(page_id: str, request: Request, user: str = Depends(actor)):
        engine = engine_of(page_id)
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON: {exc}") from exc
        mapping = engine.import_discussion(user, doc)
        return {"seq": engine.page.seq, "mapping": mapping}

    @app.get("/pages/{page_id}/stats")
    async def stats(page_id: str, user: str = Depends(actor)):
        engine = engine_of(page_id)
        engine.require_read(user)
        return {"seq": engine.page.seq, **engine.metrics()}

    # -- stream ----------------------------------------------------------

    @app.get("/pages/{page_id}/stream")
    def stream(page_id: str, user: str = Depends(actor),
               since: int = Query(default=0)):
        engine = engine_of(page_id)
        engine.require_read(user)

        def frames():
            sub = engine.subscribe_since(since)
            try:
                while True:
                    frame = sub.get(timeout=app.state.heartbeat_seconds)
                    if frame is None:
                        # heartbeat tick doubles as the revocation check
                        try:
                            engine.require_read(user)
                        except PermissionDenied:
                            return
                        yield json.dumps({"heartbeat": True, "seq": engine.page.seq}) + "\n"
                        continue
                    yield frame.to_line() + "\n"
            finally:
                engine.unsubscribe(sub)

        return StreamingResponse(frames(), media_type="application/x-ndjson")

    return app


class _InvalidToken(Exception):
    pass
