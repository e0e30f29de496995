#!/usr/bin/env python3
"""Record engine interactions as client test fixtures.

Each fidelity fixture captures: the page document a viewer would fetch, the
stream frames that followed, and the engine's DisplayItems at checkpoints and
at the end — the client must render identical rows after folding the frames.

Run from the repository root:  python3 frontend/tools/make_fixtures.py
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tests"))

from conftest import USERS, LogicalClock, make_page  # noqa: E402
from genops import OpMachine  # noqa: E402
from livesum.events import fold  # noqa: E402
from livesum.view import compute_default_view  # noqa: E402

OUT = ROOT / "frontend" / "test" / "fixtures"


def view_dicts(page, viewer, expansions):
    return [i.to_dict() for i in compute_default_view(page, viewer, set(expansions))]


def page_doc(engine, viewer):
    return engine.page_doc(viewer)


def snapshot_view_at(engine, seq, viewer, expansions):
    page = fold(engine.events[:seq], engine.page.id)
    return view_dicts(page, viewer, expansions)


def build_fixture(name, engine, viewer, base_seq, expansions, checkpoints=()):
    frames = [f.to_dict() for f in engine.frames[base_seq:]]
    doc = snapshot_doc(engine, base_seq, viewer)
    fixture = {
        "name": name,
        "viewer": viewer,
        "expansions": sorted(expansions),
        "page": doc,
        "frames": frames,
        "checkpoints": [
            {"after_seq": seq, "expected": snapshot_view_at(engine, seq, viewer, expansions)}
            for seq in checkpoints
        ],
        "expected": view_dicts(engine.page, viewer, expansions),
    }
    return fixture


def snapshot_doc(engine, seq, viewer):
    """The GET /pages/{id} payload as of `seq` (client's initial fetch)."""
    from livesum.store import node_to_dict

    page = fold(engine.events[:seq], engine.page.id)
    return {
        "id": page.id,
        "title": page.title,
        "creator": page.creator,
        "seq": page.seq,
        "mode": page.mode,
        "publicly_commentable": page.publicly_commentable,
        "publicly_editable": page.publicly_editable,
        "members": dict(page.members),
        "roots": list(page.roots),
        "nodes": {nid: node_to_dict(n) for nid, n in page.nodes.items()},
        "locks": {lid: lock.to_dict() for lid, lock in page.locks.items()},
        "unread": sorted(page.unread_set(viewer)),
    }


def random_fixtures(count, start_seed):
    fixtures = []
    for i in range(count):
        seed = start_seed + i
        rng = random.Random(seed)
        engine = make_page(clock=LogicalClock())
        machine = OpMachine(engine, USERS, seed=seed)
        machine.run(rng.randint(30, 90))
        base_seq = max(1, engine.page.seq - rng.randint(10, 40))
        machine.run(rng.randint(20, 60))
        viewer = rng.choice(USERS)
        complete = [
            nid for nid, n in engine.page.nodes.items()
            if n.is_summary and not n.pending
        ]
        expansions = rng.sample(complete, min(len(complete), rng.randint(0, 2)))
        span = engine.page.seq - base_seq
        checkpoints = sorted({base_seq + span // 3, base_seq + (2 * span) // 3} - {base_seq})
        fixtures.append(build_fixture(
            f"random-{seed}", engine, viewer, base_seq, expansions, checkpoints))
    return fixtures


def scripted_fixtures():
    out = []

    # the canonical comment -> summarize -> recurse -> post-summary ->
    # incorporate cycle, viewed by a non-participant
    engine = make_page(clock=LogicalClock())
    base = engine.page.seq
    t1 = engine.add_comment("ada", None, "first thread root").payload["node"]
    t2 = engine.add_comment("ben", None, "second thread").payload["node"]
    r1 = engine.add_comment("cy", t1, "supporting reply").payload["node"]
    lock = engine.acquire_summary_lock("ada", [t1, t2]).payload["lock"]["id"]
    s1 = engine.summarize("ada", [t1, t2], "both threads condensed").payload["node"]
    engine.release_lock("ada", lock)
    stage_summarized = engine.page.seq
    late = engine.add_comment("dee", r1, "late objection").payload["node"]
    stage_outdated = engine.page.seq
    lock = engine.acquire_summary_lock("ada", [s1]).payload["lock"]["id"]
    engine.edit_summary("ada", s1, "both threads plus the objection", incorporate=True)
    engine.release_lock("ada", lock)
    out.append(build_fixture("workflow-cycle", engine, "ben", base, [],
                             [stage_summarized, stage_outdated]))

    # lock greying: fixture ends right after a lock frame
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "contested region").payload["node"]
    b = engine.add_comment("ben", a, "inside it").payload["node"]
    base = engine.page.seq
    engine.acquire_summary_lock("cy", [a])
    out.append(build_fixture("lock-greys-region", engine, "ben", base, []))

    # unread bolding and read marks
    engine = make_page(clock=LogicalClock())
    base = engine.page.seq
    n1 = engine.add_comment("ada", None, "news for ben").payload["node"]
    n2 = engine.add_comment("cy", None, "more news").payload["node"]
    engine.mark_read("ben", [n1])
    out.append(build_fixture("unread-marks", engine, "ben", base, []))

    # hidden comments: children surface in place
    engine = make_page(clock=LogicalClock())
    h = engine.add_comment("ada", None, "to be hidden").payload["node"]
    child = engine.add_comment("ben", h, "survivor child").payload["node"]
    base = engine.page.seq
    engine.hide_comment("cy", h)
    engine.add_comment("dee", child, "grandchild arrives").payload["node"]
    out.append(build_fixture("hidden-splice", engine, "ada", base, []))

    # move between summaries: both go half, ghost stays invisible
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "thread a content").payload["node"]
    b = engine.add_comment("ben", None, "thread b content").payload["node"]
    lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
    sa = engine.summarize("ada", [a], "covers a").payload["node"]
    engine.release_lock("ada", lock)
    lock = engine.acquire_summary_lock("ben", [b]).payload["lock"]["id"]
    sb = engine.summarize("ben", [b], "covers b").payload["node"]
    engine.release_lock("ben", lock)
    base = engine.page.seq
    mlock = engine.acquire_move_lock("cy").payload["lock"]["id"]
    engine.move_node("cy", a, sb, 0)
    engine.release_lock("cy", mlock)
    out.append(build_fixture("move-outdates-both", engine, "dee", base, []))

    # delete splice under an outer summary
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "thread").payload["node"]
    r = engine.add_comment("ben", a, "reply").payload["node"]
    lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
    s1 = engine.summarize("ada", [a], "inner").payload["node"]
    engine.release_lock("ada", lock)
    lock = engine.acquire_summary_lock("ben", [s1]).payload["lock"]["id"]
    s2 = engine.summarize("ben", [s1], "outer").payload["node"]
    engine.release_lock("ben", lock)
    base = engine.page.seq
    engine.delete_summary("cy", s1)
    out.append(build_fixture("delete-inner-splice", engine, "ada", base, []))

    # nested outdated with an off-path outdated sub-summary
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "A").payload["node"]
    lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
    s1 = engine.summarize("ada", [a], "inner").payload["node"]
    engine.release_lock("ada", lock)
    lock = engine.acquire_summary_lock("ben", [s1]).payload["lock"]["id"]
    top = engine.summarize("ben", [s1], "outer").payload["node"]
    engine.release_lock("ben", lock)
    base = engine.page.seq
    engine.add_comment("cy", a, "dirties both")
    lock = engine.acquire_summary_lock("ben", [top]).payload["lock"]["id"]
    engine.incorporate("ben", top)
    engine.release_lock("ben", lock)
    engine.add_comment("dee", top, "post-summary comment")
    out.append(build_fixture("nested-offpath-outdated", engine, "cy", base, []))

    # expansion of a complete summary (viewer clicked to expand)
    engine = make_page(clock=LogicalClock())
    ids = [engine.add_comment(u, None, f"point {u}").payload["node"] for u in USERS[:3]]
    base = engine.page.seq
    lock = engine.acquire_summary_lock("ada", ids).payload["lock"]["id"]
    s = engine.summarize("ada", ids, "all three points").payload["node"]
    engine.release_lock("ada", lock)
    out.append(build_fixture("expanded-summary", engine, "ben", base, [s]))

    # tags and flags flow through without breaking rendering
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "tag me").payload["node"]
    lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
    s = engine.summarize("ada", [a], "flag me").payload["node"]
    engine.release_lock("ada", lock)
    base = engine.page.seq
    engine.tag_comment("ben", a, "logistics", True)
    engine.flag_summary("cy", s, "neutrality", 2)
    engine.flag_summary("dee", s, "neutrality", 3)
    out.append(build_fixture("tags-and-flags", engine, "ada", base, [s]))

    # reply during a lock lands pending on the new summary
    engine = make_page(clock=LogicalClock())
    a = engine.add_comment("ada", None, "locked thread").payload["node"]
    base = engine.page.seq
    lock = engine.acquire_summary_lock("ada", [a]).payload["lock"]["id"]
    engine.add_comment("ben", a, "reply while locked")
    engine.summarize("ada", [a], "summary under lock")
    engine.release_lock("ada", lock)
    out.append(build_fixture("late-reply-pending", engine, "cy", base, []))

    return out


def two_session_fixture():
    """A recorded multi-user interaction for the two-browser test: alice
    comments, locks, summarizes, and incorporates while bob watches."""
    engine = make_page(users=["alice", "bob"], clock=LogicalClock())
    seed_comment = engine.add_comment("bob", None, "bob's starting point").payload["node"]
    base = engine.page.seq
    docs = {
        "alice": snapshot_doc(engine, base, "alice"),
        "bob": snapshot_doc(engine, base, "bob"),
    }
    actions = []

    ev = engine.add_comment("alice", None, "alice's idea")
    actions.append({"seq": ev.seq, "action": "comment", "node": ev.payload["node"]})
    c1 = ev.payload["node"]

    ev = engine.acquire_summary_lock("alice", [seed_comment, c1])
    actions.append({"seq": ev.seq, "action": "lock",
                    "covered": ev.payload["lock"]["covered"],
                    "lock": ev.payload["lock"]["id"]})

    ev = engine.summarize("alice", [seed_comment, c1], "both points condensed")
    summary = ev.payload["node"]
    actions.append({"seq": ev.seq, "action": "summarize", "node": summary})

    ev = engine.release_lock("alice", actions[-2]["lock"])
    actions.append({"seq": ev.seq, "action": "release"})

    ev = engine.add_comment("bob", summary, "bob pushes back")
    actions.append({"seq": ev.seq, "action": "post_summary_comment",
                    "node": ev.payload["node"]})

    lock = engine.acquire_summary_lock("alice", [summary])
    actions.append({"seq": lock.seq, "action": "lock",
                    "covered": lock.payload["lock"]["covered"],
                    "lock": lock.payload["lock"]["id"]})
    ev = engine.edit_summary("alice", summary, "condensed, with bob's pushback",
                             incorporate=True)
    actions.append({"seq": ev.seq, "action": "incorporate", "node": summary})
    ev = engine.release_lock("alice", lock.payload["lock"]["id"])
    actions.append({"seq": ev.seq, "action": "release"})

    return {
        "name": "two-session",
        "base_seq": base,
        "docs": docs,
        "frames": [f.to_dict() for f in engine.frames[base:]],
        "actions": actions,
        "summary": summary,
        "final_views": {
            "alice": view_dicts(engine.page, "alice", []),
            "bob": view_dicts(engine.page, "bob", []),
        },
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    fixtures = scripted_fixtures()
    fixtures.extend(random_fixtures(25 - len(fixtures), start_seed=9000))
    names = set()
    for fixture in fixtures:
        assert fixture["name"] not in names
        names.add(fixture["name"])
        (OUT / f"{fixture['name']}.json").write_text(
            json.dumps(fixture, indent=1, sort_keys=True))
    (OUT / "two-session.json").write_text(
        json.dumps(two_session_fixture(), indent=1, sort_keys=True))
    manifest = sorted(names)
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=1))
    print(f"wrote {len(fixtures)} fidelity fixtures + two-session fixture to {OUT}")


if __name__ == "__main__":
    main()
