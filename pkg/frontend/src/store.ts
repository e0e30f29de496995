/**
 * Client-side page state: seeded from GET /pages/{id}, advanced strictly by
 * stream frames. Structural edits replay the event payloads; icon and pending
 * state always comes from the server's frame deltas (never recomputed here),
 * so rendering cannot drift from the engine's derived status.
 */

import type {
  EventRecord,
  Frame,
  Icon,
  LockDoc,
  NodeDoc,
  NodeId,
  PageDoc,
  RichTextDoc,
  Seq,
  UserId,
} from "./types.js";

interface TreeImportNode {
  kind: "comment" | "summary";
  author: UserId;
  created_at: number;
  body: RichTextDoc;
  parent: NodeId | null;
  children: NodeId[];
  hidden?: boolean;
  tags?: string[];
  pending?: NodeId[];
  flags?: Record<string, number>;
}

export class PageStore {
  readonly me: UserId;
  pageId = "";
  seq: Seq = 0;
  roots: NodeId[] = [];
  nodes = new Map<NodeId, NodeDoc>();
  icons = new Map<NodeId, Icon>();
  locks = new Map<string, LockDoc>();
  unread = new Set<NodeId>();

  constructor(me: UserId) {
    this.me = me;
  }

  loadPage(doc: PageDoc): void {
    this.pageId = doc.id;
    this.seq = doc.seq;
    this.roots = [...doc.roots];
    this.nodes = new Map(Object.entries(doc.nodes).map(([id, n]) => [id, structuredClone(n)]));
    this.locks = new Map(Object.entries(doc.locks));
    this.unread = new Set(doc.unread);
    this.recomputeIcons();
  }

  /** Initial icon derivation (frames carry deltas from here on). */
  private recomputeIcons(): void {
    this.icons.clear();
    const walk = (ids: NodeId[], nearestSummary: NodeId | null): void => {
      for (const id of ids) {
        const node = this.nodes.get(id);
        if (!node) continue;
        if (node.kind === "summary") {
          this.icons.set(id, node.pending.length ? "half_square" : "orange_square");
          walk(node.children, id);
        } else {
          const blue =
            nearestSummary === null ||
            (this.nodes.get(nearestSummary)?.pending ?? []).includes(id);
          this.icons.set(id, blue ? "blue_circle" : "yellow_circle");
          walk(node.children, nearestSummary);
        }
      }
    };
    walk(this.roots, null);
  }

  siblings(parent: NodeId | null): NodeId[] {
    if (parent === null) return this.roots;
    return this.nodes.get(parent)?.children ?? [];
  }

  applyFrame(frame: Frame): void {
    if (frame.seq <= this.seq) return; // duplicate delivery guard
    this.applyEvent(frame.event);
    this.seq = frame.seq;
    for (const [nid, icon] of Object.entries(frame.icons)) this.icons.set(nid, icon);
    for (const [nid, pending] of Object.entries(frame.pending)) {
      const node = this.nodes.get(nid);
      if (node) node.pending = [...pending];
    }
    for (const nid of frame.removed) {
      this.icons.delete(nid);
      this.unread.delete(nid);
    }
  }

  private blankNode(id: NodeId, kind: "comment" | "summary", event: EventRecord,
                    body: RichTextDoc, parent: NodeId | null): NodeDoc {
    return {
      id, kind, author: event.actor, created_at: event.at, body,
      parent, children: [], hidden: false, tags: [], pending: [],
      flags: {}, citations: [],
    };
  }

  private applyEvent(event: EventRecord): void {
    const p = event.payload as Record<string, any>;
    switch (event.kind) {
      case "CommentAdded": {
        const node = this.blankNode(p.node, "comment", event, p.body, p.parent ?? null);
        if (typeof p.created_at === "number") node.created_at = p.created_at;
        this.nodes.set(p.node, node);
        this.siblings(node.parent).push(p.node);
        if (event.actor !== this.me) this.unread.add(p.node);
        break;
      }
      case "CommentEdited": {
        const node = this.nodes.get(p.node);
        if (node) node.body = p.body;
        break;
      }
      case "CommentHidden":
      case "CommentUnhidden": {
        const node = this.nodes.get(p.node);
        if (node) node.hidden = event.kind === "CommentHidden";
        break;
      }
      case "CommentTagged": {
        const node = this.nodes.get(p.node);
        if (node && !node.tags.includes(p.tag)) node.tags.push(p.tag);
        break;
      }
      case "CommentUntagged": {
        const node = this.nodes.get(p.node);
        if (node) node.tags = node.tags.filter((t) => t !== p.tag);
        break;
      }
      case "SummaryCreated": {
        const selection: NodeId[] = p.selection;
        const selected = new Set(selection);
        const first = this.nodes.get(selection[0]!);
        const parent = first?.parent ?? null;
        const sibs = this.siblings(parent);
        const insertAt = Math.min(...selection.map((s) => sibs.indexOf(s)));
        const ordered = sibs.filter((s) => selected.has(s));
        const kept = sibs.filter((s) => !selected.has(s));
        kept.splice(insertAt, 0, p.node);
        if (parent === null) this.roots = kept;
        else this.nodes.get(parent)!.children = kept;

        const node = this.blankNode(p.node, "summary", event, p.body, parent);
        node.children = ordered;
        node.citations = p.citations ?? [];
        this.nodes.set(p.node, node);
        for (const child of ordered) this.nodes.get(child)!.parent = p.node;
        if (event.actor !== this.me) this.unread.add(p.node);
        break;
      }
      case "SummaryEdited": {
        const node = this.nodes.get(p.node);
        if (node) {
          node.body = p.body;
          node.citations = p.citations ?? [];
        }
        break;
      }
      case "SummaryIncorporated":
        break; // pending delta arrives with the frame
      case "SummaryFlagged": {
        const node = this.nodes.get(p.node);
        if (node) node.flags[p.dimension] = p.value;
        break;
      }
      case "SummaryDeleted": {
        const node = this.nodes.get(p.node);
        if (!node) break;
        const sibs = this.siblings(node.parent);
        const at = sibs.indexOf(p.node);
        sibs.splice(at, 1, ...node.children);
        for (const child of node.children) this.nodes.get(child)!.parent = node.parent;
        this.nodes.delete(p.node);
        break;
      }
      case "NodeMoved": {
        const node = this.nodes.get(p.node);
        if (!node) break;
        const from = this.siblings(node.parent);
        from.splice(from.indexOf(p.node), 1);
        this.siblings(p.new_parent ?? null).splice(p.index, 0, p.node);
        node.parent = p.new_parent ?? null;
        break;
      }
      case "LockAcquired":
        this.locks.set(p.lock.id, p.lock);
        break;
      case "LockReleased":
      case "LockExpired":
        this.locks.delete(p.lock_id);
        break;
      case "ReadMarked":
        if (p.user === this.me) {
          for (const nid of p.nodes as NodeId[]) this.unread.delete(nid);
        }
        break;
      case "MemberAdded":
      case "PermissionChanged":
      case "PageCreated":
        break;
      case "TreeImported": {
        const tree = p.tree as { roots: NodeId[]; nodes: Record<NodeId, TreeImportNode> };
        this.roots = [...tree.roots];
        this.nodes = new Map(
          Object.entries(tree.nodes).map(([id, raw]) => [id, {
            id,
            kind: raw.kind,
            author: raw.author,
            created_at: raw.created_at,
            body: raw.body,
            parent: raw.parent,
            children: [...raw.children],
            hidden: raw.hidden ?? false,
            tags: raw.tags ?? [],
            pending: raw.pending ?? [],
            flags: raw.flags ?? {},
            citations: [],
          }]),
        );
        break;
      }
      default:
        break; // forward compatibility: unknown kinds only move seq
    }
  }

  /** Node sets covered by other users' live summary locks (for greying). */
  lockedByOthers(now: number): Set<NodeId> {
    const covered = new Set<NodeId>();
    for (const lock of this.locks.values()) {
      if (lock.kind === "summary" && lock.holder !== this.me && lock.expires_at > now) {
        for (const nid of lock.covered) covered.add(nid);
      }
    }
    return covered;
  }
}
