"""Operator tooling: serve the API, import/export pages, replay and audit
logs, run multi-client simulations, and emit activity statistics.

Config file (JSON):

    {
      "listen": "127.0.0.1:8437",
      "storage_dir": "./data",
      "snapshot_interval": 500,
      "summary_lock_ttl_s": 600,
      "move_lock_ttl_s": 120,
      "snippet_length": 80,
      "users": [{"name": "ada", "token": "..."}]
    }

Every command exits non-zero on failure with the core error code printed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .engine import EngineConfig, Service
from .errors import LivesumError
from .events import fold
from .store import PageStore, state_hash

EXIT_ERROR = 2


def _fail(exc: LivesumError | str, code: str = "error") -> None:
    if isinstance(exc, LivesumError):
        click.echo(f"error[{exc.code}]: {exc}", err=True)
    else:
        click.echo(f"error[{code}]: {exc}", err=True)
    sys.exit(EXIT_ERROR)


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        _fail(f"config not found: {path}", "config")
    try:
        config = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        _fail(f"config is not valid JSON: {exc}", "config")
    if not isinstance(config, dict):
        _fail("config must be a JSON object", "config")
    return config


def service_from_config(config: dict) -> Service:
    engine_config = EngineConfig(
        summary_lock_ttl_ms=int(config.get("summary_lock_ttl_s", 600)) * 1000,
        move_lock_ttl_ms=int(config.get("move_lock_ttl_s", 120)) * 1000,
        snippet_length=int(config.get("snippet_length", 80)),
        snapshot_interval=int(config.get("snapshot_interval", 500)),
        fsync=bool(config.get("fsync", True)),
    )
    storage = config.get("storage_dir")
    service = Service(storage_dir=storage, config=engine_config)
    if storage:
        from .notify import OutboxSender

        service.sender = OutboxSender(Path(storage) / "outbox.ndjson")
    for user in config.get("users", []):
        service.add_user(user["name"], user.get("token"))
    return service


@click.group()
def main() -> None:
    """Collaborative discussion-and-summarization server tooling."""


@main.command()
@click.option("--config", "config_path", required=True, help="JSON config file")
def serve(config_path: str) -> None:
    """Run the HTTP API server."""
    import uvicorn

    from .api import create_app

    config = load_config(config_path)
    service = service_from_config(config)
    listen = config.get("listen", "127.0.0.1:8437")
    host, _, port = listen.partition(":")
    app = create_app(service)
    click.echo(f"serving on http://{listen}")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8437), log_level="info")


def _open_store(storage_dir: str, page: str) -> PageStore:
    path = Path(storage_dir) / "pages" / page
    if not path.is_dir():
        _fail(f"page {page} not found under {storage_dir}", "unknown_page")
    return PageStore(path)


@main.command("import")
@click.option("--page", required=True, help="page id (created if missing)")
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.option("--storage-dir", required=True)
@click.option("--actor", default="importer", help="member performing the import")
@click.option("--format", "fmt", default="discussion",
              type=click.Choice(["discussion", "tree"]))
def import_cmd(page: str, file_path: str, storage_dir: str, actor: str, fmt: str) -> None:
    """Import an external discussion (or a full tree export) into a page."""
    service = Service(storage_dir=storage_dir, config=EngineConfig())
    try:
        try:
            engine = service.get_page(page)
        except LivesumError:
            engine = service.create_page(actor, title=page)
            click.echo(f"created page {engine.page.id}", err=True)
        raw = Path(file_path).read_bytes()
        if fmt == "discussion":
            mapping = engine.import_discussion(actor, json.loads(raw))
            click.echo(json.dumps({"page": engine.page.id, "imported": len(mapping),
                                   "mapping": mapping}, indent=2))
        else:
            from .interchange import parse_tree

            engine.install_tree(actor, parse_tree(raw))
            click.echo(json.dumps({"page": engine.page.id,
                                   "nodes": len(engine.page.nodes)}, indent=2))
    except json.JSONDecodeError as exc:
        _fail(f"input is not valid JSON: {exc}", "parse_error")
    except LivesumError as exc:
        _fail(exc)


@main.command()
@click.option("--page", required=True)
@click.option("--format", "fmt", default="portable-markup",
              type=click.Choice(["portable-markup", "web-page", "tree"]))
@click.option("--storage-dir", required=True)
@click.option("--out", type=click.Path(), default=None, help="output file (default stdout)")
def export(page: str, fmt: str, storage_dir: str, out: str | None) -> None:
    """Export the living document or the full tree."""
    store = _open_store(storage_dir, page)
    try:
        state = fold(store.read_events(), page)
        from .interchange import export_document

        blob = export_document(state, fmt)
    except LivesumError as exc:
        _fail(exc)
    if out:
        Path(out).write_bytes(blob)
        click.echo(f"wrote {len(blob)} bytes to {out}", err=True)
    else:
        sys.stdout.buffer.write(blob)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True),
              help="event log file (or a page directory containing events.log)")
@click.option("--no-minimize", is_flag=True, default=False)
def replay(log_path: str, no_minimize: bool) -> None:
    """Refold a log, audit every invariant, and print the state hash."""
    from .checker import check_log
    from .events import decode_event

    path = Path(log_path)
    if path.is_dir():
        path = path / "events.log"
    try:
        events = [decode_event(line) for line in path.read_text().splitlines() if line.strip()]
        page = fold(events)
        report = check_log(events, page, minimize=not no_minimize)
    except LivesumError as exc:
        _fail(exc)
    click.echo(json.dumps({
        "events": len(events),
        "final_seq": page.seq,
        "state_hash": state_hash(page),
        **report.to_dict(),
    }, indent=2))
    if not report.ok:
        sys.exit(1)


@main.command()
@click.option("--seed", default=1, type=int)
@click.option("--clients", default=4, type=int)
@click.option("--ops", default=200, type=int, help="total ops across all clients")
@click.option("--mix", default="two-phase",
              help="two-phase | uniform | adversarial | comment=5,reply=3,...")
@click.option("--mode", default="lockstep", type=click.Choice(["lockstep", "concurrent"]))
@click.option("--out", type=click.Path(), default=None, help="write the event log here")
def simulate(seed: int, clients: int, ops: int, mix: str, mode: str, out: str | None) -> None:
    """Drive N synthetic clients through the real API, then audit the log."""
    from .events import encode_event
    from .sim import run_simulation

    try:
        report, events = run_simulation(seed=seed, clients=clients, ops=ops,
                                        mix=mix, mode=mode)
    except LivesumError as exc:
        _fail(exc)
    if out:
        Path(out).write_text("".join(encode_event(e) + "\n" for e in events))
    click.echo(json.dumps(report.to_dict(), indent=2))
    if not report.ok:
        sys.exit(1)


@main.command()
@click.option("--page", required=True)
@click.option("--storage-dir", required=True)
@click.option("--out", type=click.Path(), default=None, help="output file (default stdout)")
@click.option("--delimiter", default="\t")
def stats(page: str, storage_dir: str, out: str | None, delimiter: str) -> None:
    """Emit the per-event activity series (view words, progress, deltas)."""
    from .stats import render_series, stats_rows

    store = _open_store(storage_dir, page)
    try:
        rows = stats_rows(store.read_events(), page)
    except LivesumError as exc:
        _fail(exc)
    text = render_series(rows, delimiter)
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {len(rows)} rows to {out}", err=True)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
