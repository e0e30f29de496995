"""Multi-client simulation against the real HTTP API, plus the post-run
invariant audit.

N synthetic clients share one op budget and perform weighted random actions
(commenting, replying, post-summary comments, lock+summarize,
lock+edit+incorporate, moves, tags, flags, hides, disconnect/reconnect)
through the same endpoints a browser would use. Afterwards the quiesced log
runs the full checker suite and the report carries accepted/rejected counts
per action.

Two modes:
  lockstep    one thread, clients take turns round-robin, logical clock:
              identical (seed, clients, ops, mix) yields a byte-identical
              event log and report;
  concurrent  one thread per client against a live TCP server, real streams
              with resume-after-disconnect, exercising genuine interleaving
              (log contents then depend on the race outcomes).
"""

from __future__ import annotations

import json
import random
import socket
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

import httpx

from .checker import CheckReport, check_log
from .engine import EngineConfig, Service
from .errors import ValidationError
from .events import Event
from .store import state_hash

MIX_NAMES = ("two-phase", "uniform", "adversarial")

ACTIONS = (
    "comment", "reply", "post_summary_comment", "lock_summarize",
    "lock_edit_incorporate", "move", "tag", "flag", "hide",
    "disconnect_reconnect",
)

_PHASE1 = {
    "comment": 5.0, "reply": 5.0, "tag": 0.6, "hide": 0.2,
    "disconnect_reconnect": 0.4,
}
_PHASE2 = {
    "lock_summarize": 5.0, "lock_edit_incorporate": 3.0,
    "post_summary_comment": 1.6, "reply": 1.0, "move": 1.0, "flag": 0.8,
    "hide": 0.2, "disconnect_reconnect": 0.4,
}
_UNIFORM = {a: 1.0 for a in ACTIONS}
_ADVERSARIAL = {"lock_summarize": 9.0, "comment": 1.0}

WORDS = (
    "grading tuition workload exams resources dining menu vendor hours cost "
    "remote hybrid option pro con vote plan draft revise merge detail scope"
).split()


def parse_mix(spec: str | dict | None) -> str | dict[str, float]:
    if spec is None or spec == "two-phase":
        return "two-phase"
    if isinstance(spec, dict):
        return {a: float(w) for a, w in spec.items()}
    if spec in MIX_NAMES:
        return spec
    weights: dict[str, float] = {}
    for part in spec.split(","):
        name, _, value = part.partition("=")
        name = name.strip()
        if name not in ACTIONS:
            raise ValidationError(f"unknown action {name!r} in mix")
        weights[name] = float(value)
    if not weights:
        raise ValidationError("empty mix")
    return weights


def _weights_for(mix: str | dict[str, float], progress: float) -> dict[str, float]:
    if isinstance(mix, dict):
        return mix
    if mix == "uniform":
        return _UNIFORM
    if mix == "adversarial":
        return _ADVERSARIAL
    return _PHASE1 if progress < 0.5 else _PHASE2


@dataclass
class SimReport:
    seed: int
    clients: int
    ops: int
    mix: str
    mode: str
    accepted: Counter = field(default_factory=Counter)
    rejected: Counter = field(default_factory=Counter)
    final_seq: int = 0
    final_hash: str = ""
    transcripts_ok: bool = True
    transcript_detail: str = ""
    check: CheckReport | None = None

    @property
    def ok(self) -> bool:
        return self.transcripts_ok and (self.check is None or self.check.ok)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "clients": self.clients,
            "ops": self.ops,
            "mix": self.mix,
            "mode": self.mode,
            "accepted": dict(sorted(self.accepted.items())),
            "rejected": dict(sorted(self.rejected.items())),
            "accepted_total": sum(self.accepted.values()),
            "rejected_total": sum(self.rejected.values()),
            "final_seq": self.final_seq,
            "final_hash": self.final_hash,
            "transcripts_ok": self.transcripts_ok,
            "transcript_detail": self.transcript_detail,
            "invariants": self.check.to_dict() if self.check else None,
            "ok": self.ok,
        }


class _StreamReader:
    """Background consumer of /pages/{id}/stream collecting frame seqs.

    Server heartbeats double as wakeups: every line gives the loop a chance
    to notice stop() without re-entering the response iterator."""

    def __init__(self, base_url: str, page: str, headers: dict, since: int):
        self.seqs: list[int] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._run, args=(base_url, page, headers, since), daemon=True)
        self._thread.start()

    def _run(self, base_url, page, headers, since):
        try:
            with httpx.Client(base_url=base_url, timeout=httpx.Timeout(10, read=30)) as http:
                with http.stream("GET", f"/pages/{page}/stream",
                                 params={"since": since}, headers=headers) as res:
                    for line in res.iter_lines():
                        if self._stop.is_set():
                            return
                        if not line.strip():
                            continue
                        data = json.loads(line)
                        if not data.get("heartbeat"):
                            self.seqs.append(data["seq"])
        except httpx.HTTPError:
            return

    def stop(self) -> list[int]:
        self._stop.set()
        self._thread.join(timeout=8)
        return self.seqs


class SimClient:
    """One synthetic collaborator speaking the HTTP API."""

    REFRESH_EVERY = 5

    def __init__(self, index: int, base_url: str, page: str, token: str,
                 seed: int, report: SimReport, use_streams: bool, http=None):
        self.name = f"client{index}"
        self.page = page
        self.headers = {"Authorization": f"Bearer {token}"}
        self.rng = random.Random((seed << 8) | index)
        self.report = report
        self.base_url = base_url
        self.http = http if http is not None else httpx.Client(base_url=base_url, timeout=30)
        self.use_streams = use_streams
        self.nodes: dict[str, dict] = {}
        self.roots: list[str] = []
        self.seq = 0
        self.last_seen = 0
        self.transcript: list[int] = []
        self.reader: _StreamReader | None = None
        self._ops_done = 0

    # -- http helpers ------------------------------------------------------

    def _request(self, method: str, path: str, action: str, **kwargs):
        res = self.http.request(method, path, headers=self.headers, **kwargs)
        if res.status_code == 200:
            self.report.accepted[action] += 1
            return res.json()
        self.report.rejected[action] += 1
        return None

    def refresh(self) -> None:
        res = self.http.get(f"/pages/{self.page}", headers=self.headers)
        if res.status_code != 200:
            return
        doc = res.json()
        self.nodes = doc["nodes"]
        self.roots = doc["roots"]
        self.seq = doc["seq"]

    # -- target pickers (over the possibly stale local cache) ----------------

    def _text(self, lo=3, hi=16) -> str:
        return " ".join(self.rng.choice(WORDS) for _ in range(self.rng.randint(lo, hi)))

    def _any(self, pred) -> str | None:
        pool = [nid for nid, raw in sorted(self.nodes.items()) if pred(raw)]
        return self.rng.choice(pool) if pool else None

    def _any_node(self):
        return self._any(lambda raw: True)

    def _any_comment(self):
        return self._any(lambda raw: raw["kind"] == "comment" and not raw["hidden"])

    def _any_summary(self, outdated=None):
        def pred(raw):
            if raw["kind"] != "summary":
                return False
            if outdated is True:
                return bool(raw["pending"])
            if outdated is False:
                return not raw["pending"]
            return True
        return self._any(pred)

    def _sibling_selection(self) -> list[str] | None:
        anchor = self._any_node()
        if anchor is None:
            return None
        parent = self.nodes[anchor].get("parent")
        siblings = self.roots if parent is None else self.nodes[parent]["children"]
        visible = [
            s for s in siblings
            if s in self.nodes
            and not (self.nodes[s]["kind"] == "comment" and self.nodes[s]["hidden"])
        ]
        if not visible:
            return None
        k = self.rng.randint(1, min(4, len(visible)))
        return sorted(self.rng.sample(visible, k), key=siblings.index)

    # -- actions -------------------------------------------------------------

    def comment(self):
        self._request("POST", f"/pages/{self.page}/comments", "comment",
                      json={"body": self._text()})

    def reply(self):
        parent = self._any_node()
        if parent is None:
            return self.comment()
        self._request("POST", f"/pages/{self.page}/comments", "reply",
                      json={"body": self._text(), "parent": parent})

    def post_summary_comment(self):
        summary = self._any_summary()
        if summary is None:
            return self.reply()
        self._request("POST", f"/pages/{self.page}/comments", "post_summary_comment",
                      json={"body": self._text(), "parent": summary})

    def _with_summary_lock(self, covered: list[str], action: str, fn) -> None:
        res = self._request("POST", f"/pages/{self.page}/locks", action,
                            json={"kind": "summary", "covered": covered})
        if res is None:
            return
        fn()
        self._request("DELETE", f"/pages/{self.page}/locks/{res['lock']['id']}", action)

    def lock_summarize(self):
        selection = self._sibling_selection()
        if not selection:
            return
        covered_words = sum(
            len(self.nodes[s]["body"]["text"].split())
            for s in selection if s in self.nodes
        )
        body_words = max(3, min(24, covered_words // 3 or 3))
        body = " ".join(self.rng.choice(WORDS) for _ in range(body_words))

        def act():
            self._request("POST", f"/pages/{self.page}/summaries", "lock_summarize",
                          json={"selection": selection, "body": body})

        self._with_summary_lock(selection, "lock_summarize", act)

    def lock_edit_incorporate(self):
        summary = self._any_summary(outdated=True) or self._any_summary()
        if summary is None:
            return

        def act():
            self._request("PATCH", f"/pages/{self.page}/summaries/{summary}",
                          "lock_edit_incorporate",
                          json={"body": self._text(3, 10), "incorporate": True})

        self._with_summary_lock([summary], "lock_edit_incorporate", act)

    def move(self):
        nid = self._any_node()
        if nid is None:
            return
        res = self._request("POST", f"/pages/{self.page}/locks", "move",
                            json={"kind": "move"})
        if res is None:
            return
        candidates = [None] + [c for c in sorted(self.nodes) if c != nid]
        new_parent = self.rng.choice(candidates)
        if new_parent is None:
            limit = len(self.roots)
        else:
            limit = len(self.nodes[new_parent]["children"])
        self._request("POST", f"/pages/{self.page}/move", "move",
                      json={"node": nid, "new_parent": new_parent,
                            "index": self.rng.randint(0, max(0, limit))})
        self._request("DELETE", f"/pages/{self.page}/locks/{res['lock']['id']}", "move")

    def tag(self):
        nid = self._any_comment()
        if nid is None:
            return
        self._request("POST", f"/pages/{self.page}/nodes/{nid}/tags", "tag",
                      json={"tag": self.rng.choice(["pro", "con", "meta", "todo"])})

    def flag(self):
        summary = self._any_summary()
        if summary is None:
            return
        self._request("POST", f"/pages/{self.page}/summaries/{summary}/flags", "flag",
                      json={"dimension": self.rng.choice(
                          ["neutrality", "comprehensiveness", "writing_quality"]),
                          "value": self.rng.randint(1, 3)})

    def hide(self):
        nid = self._any_comment()
        if nid is None:
            return
        self._request("POST", f"/pages/{self.page}/nodes/{nid}/hide", "hide")

    def disconnect_reconnect(self):
        if self.use_streams:
            if self.reader is not None:
                seqs = self.reader.stop()
                self.transcript.extend(seqs)
                if seqs:
                    self.last_seen = max(self.last_seen, max(seqs))
                self.reader = None
            self.reader = _StreamReader(self.base_url, self.page, self.headers, self.last_seen)
            self.report.accepted["disconnect_reconnect"] += 1
            return
        res = self._request("GET", f"/pages/{self.page}/events", "disconnect_reconnect",
                            params={"since": self.last_seen})
        if res is None:
            return
        seqs = [r["seq"] for r in res["events"]]
        self.transcript.extend(seqs)
        if seqs:
            self.last_seen = max(self.last_seen, max(seqs))

    # -- driver ---------------------------------------------------------------

    def step(self, progress: float, mix) -> None:
        if self._ops_done % self.REFRESH_EVERY == 0 or not self.nodes:
            self.refresh()
        weights = _weights_for(mix, progress)
        names = sorted(weights)
        action = self.rng.choices(names, weights=[weights[n] for n in names], k=1)[0]
        getattr(self, action)()
        self._ops_done += 1

    def finish(self) -> None:
        if self.reader is not None:
            seqs = self.reader.stop()
            self.transcript.extend(seqs)
            self.reader = None
        self.http.close()

    def transcript_problem(self) -> str | None:
        """Transcript must be strictly increasing, gapless from its first seq."""
        if not self.transcript:
            return None
        expected = list(range(self.transcript[0], self.transcript[0] + len(self.transcript)))
        if self.transcript != expected:
            return f"{self.name}: transcript not gapless/duplicate-free"
        return None


# ---------------------------------------------------------------------------
# server plumbing


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


class LiveServer:
    """uvicorn on an ephemeral port, in a daemon thread."""

    def __init__(self, app):
        import uvicorn

        self.port = free_port()
        self._server = uvicorn.Server(uvicorn.Config(
            app, host="127.0.0.1", port=self.port, log_level="error"))
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        deadline = time.time() + 15
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("server failed to start")
            time.sleep(0.01)
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)


class _LockstepHttp:
    """Adapter giving SimClient the httpx.Client surface over a TestClient,
    so lockstep runs need no sockets and stay deterministic."""

    def __init__(self, test_client):
        self._tc = test_client

    def request(self, method, path, **kwargs):
        return self._tc.request(method, path, **kwargs)

    def get(self, path, **kwargs):
        return self._tc.get(path, **kwargs)

    def close(self):
        pass


# ---------------------------------------------------------------------------
# entry point


def _logical_clock(start: int = 1_700_000_000_000, step: int = 1000):
    state = {"now": start}

    def clock() -> int:
        state["now"] += step
        return state["now"]

    return clock


def run_simulation(seed: int, clients: int, ops: int,
                   mix: str | dict | None = None,
                   mode: str = "lockstep",
                   check: bool = True) -> tuple[SimReport, list[Event]]:
    """Run one simulation; returns (report, event log). `ops` is the total
    budget shared across clients."""
    if mode not in ("lockstep", "concurrent"):
        raise ValidationError(f"unknown mode {mode!r}")
    mix = parse_mix(mix)
    mix_label = mix if isinstance(mix, str) else ",".join(f"{k}={v}" for k, v in sorted(mix.items()))
    report = SimReport(seed=seed, clients=clients, ops=ops,
                       mix=mix_label, mode=mode)

    service = Service(config=EngineConfig(), clock=_logical_clock())
    for i in range(clients):
        service.add_user(f"client{i}", f"tok-{seed}-{i}")
    engine = service.create_page("client0", title=f"simulation {seed}")
    for i in range(1, clients):
        engine.add_member("client0", f"client{i}", "editor")
    page_id = engine.page.id
    from .api import create_app

    app = create_app(service, heartbeat_seconds=0.3)

    def build_clients(url, http_factory=None) -> list[SimClient]:
        return [
            SimClient(i, url, page_id, f"tok-{seed}-{i}", seed, report,
                      use_streams=(mode == "concurrent"),
                      http=http_factory() if http_factory else None)
            for i in range(clients)
        ]

    if mode == "lockstep":
        from fastapi.testclient import TestClient

        with TestClient(app) as tc:
            sims = build_clients("http://testserver", lambda: _LockstepHttp(tc))
            for op_index in range(ops):
                client = sims[op_index % clients]
                client.step(op_index / max(1, ops), mix)
            for client in sims:
                client.disconnect_reconnect()  # final catch-up for transcripts
                client.finish()
    else:
        with LiveServer(app) as server:
            sims = build_clients(server.url)
            budgets = [ops // clients + (1 if i < ops % clients else 0)
                       for i in range(clients)]
            errors: list[BaseException] = []

            def run_client(client: SimClient, budget: int):
                try:
                    for k in range(budget):
                        client.step(k / max(1, budget), mix)
                except BaseException as exc:  # pragma: no cover
                    errors.append(exc)

            threads = [threading.Thread(target=run_client, args=(c, b))
                       for c, b in zip(sims, budgets)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            time.sleep(0.3)  # let stream readers drain the tail
            for client in sims:
                client.finish()
            if errors:
                raise errors[0]

    problems = [p for c in sims if (p := c.transcript_problem())]
    report.transcripts_ok = not problems
    report.transcript_detail = "; ".join(problems) if problems else (
        f"{sum(len(c.transcript) for c in sims)} frames across {clients} transcripts")

    events = list(service.get_page(page_id).events)
    final_page = service.get_page(page_id).page
    report.final_seq = final_page.seq
    report.final_hash = state_hash(final_page)
    if check:
        report.check = check_log(events, final_page)
    return report, events
