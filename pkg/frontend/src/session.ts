/**
 * A live client session: loads the page, consumes the frame stream, resumes
 * after disconnects via since=seq, and owns the interaction state the outline
 * needs (expansions, selection, the active lock, queued input).
 *
 * Rendering policy: a user's own comment adds may render optimistically (the
 * composer echoes locally), but every summary, move, lock, and flag effect
 * renders strictly from server frames. Comments typed while offline are
 * queued and submitted exactly once on reconnect, or surfaced as failed,
 * never dropped silently.
 */

import { computeOutline } from "./outline.js";
import { PageStore } from "./store.js";
import type { Frame, NodeId, OutlineRow, PageDoc, StreamMessage, UserId } from "./types.js";
import { isHeartbeat } from "./types.js";

export interface WireResponse {
  status: number;
  json: any;
}

export interface StreamHandle {
  close(): void;
}

/** Transport abstraction: HTTP requests plus the NDJSON frame stream. */
export interface Wire {
  request(method: string, path: string, body?: unknown): Promise<WireResponse>;
  openStream(path: string, onMessage: (msg: StreamMessage) => void,
             onClose: (error?: unknown) => void): StreamHandle;
}

export interface QueuedComment {
  parent: NodeId | null;
  body: string;
  state: "queued" | "sent" | "failed";
  detail?: string;
}

export type ConnectionState = "idle" | "connecting" | "live" | "offline";

export class ClientSession {
  readonly store: PageStore;
  readonly expansions = new Set<NodeId>();
  selection = new Set<NodeId>();
  activeLock: string | null = null;
  connection: ConnectionState = "idle";
  queue: QueuedComment[] = [];
  onChange: (() => void) | null = null;

  private stream: StreamHandle | null = null;

  constructor(private wire: Wire, private pageId: string, readonly me: UserId) {
    this.store = new PageStore(me);
  }

  // -- lifecycle -------------------------------------------------------

  async connect(): Promise<void> {
    this.connection = "connecting";
    const res = await this.wire.request("GET", `/pages/${this.pageId}`);
    if (res.status !== 200) {
      this.connection = "offline";
      throw new Error(`page load failed: ${res.status}`);
    }
    this.store.loadPage(res.json as PageDoc);
    this.openStream();
    await this.flushQueue();
    this.notify();
  }

  private openStream(): void {
    this.stream = this.wire.openStream(
      `/pages/${this.pageId}/stream?since=${this.store.seq}`,
      (msg) => this.onMessage(msg),
      () => {
        this.connection = "offline";
        this.notify();
      },
    );
    this.connection = "live";
  }

  disconnect(): void {
    this.stream?.close();
    this.stream = null;
    this.connection = "offline";
    this.notify();
  }

  async reconnect(): Promise<void> {
    this.stream?.close();
    this.openStream();
    await this.flushQueue();
    this.notify();
  }

  private onMessage(msg: StreamMessage): void {
    if (isHeartbeat(msg)) return;
    this.applyFrame(msg);
  }

  applyFrame(frame: Frame): void {
    const touched = this.frameFootprint(frame);
    this.store.applyFrame(frame);
    // a remote mutation overlapping the selection invalidates it
    if (frame.event.actor !== this.me && this.selection.size) {
      for (const nid of touched) {
        if (this.selection.has(nid)) {
          this.selection.clear();
          break;
        }
      }
    }
    for (const nid of frame.removed) {
      this.selection.delete(nid);
      this.expansions.delete(nid);
    }
    this.notify();
  }

  private frameFootprint(frame: Frame): Set<NodeId> {
    const p = frame.event.payload as Record<string, any>;
    const out = new Set<NodeId>();
    if (typeof p.node === "string") out.add(p.node);
    for (const sel of (p.selection as NodeId[] | undefined) ?? []) out.add(sel);
    for (const covered of (p.lock?.covered as NodeId[] | undefined) ?? []) out.add(covered);
    for (const nid of Object.keys(frame.icons)) out.add(nid);
    return out;
  }

  private notify(): void {
    this.onChange?.();
  }

  // -- outline -----------------------------------------------------------

  outline(): OutlineRow[] {
    return computeOutline(this.store, this.expansions);
  }

  /** Rows plus interaction affordances (greyed = inside another's lock). */
  outlineWithLocks(now: number): (OutlineRow & { greyed: boolean })[] {
    const locked = this.store.lockedByOthers(now);
    return this.outline().map((row) => ({ ...row, greyed: locked.has(row.node) }));
  }

  toggleExpansion(summary: NodeId): void {
    if (this.expansions.has(summary)) this.expansions.delete(summary);
    else this.expansions.add(summary);
    this.notify();
  }

  select(nodes: NodeId[]): void {
    this.selection = new Set(nodes);
    this.notify();
  }

  // -- interactions (each issues exactly one API call) ---------------------

  async composeComment(parent: NodeId | null, body: string): Promise<QueuedComment> {
    const entry: QueuedComment = { parent, body, state: "queued" };
    if (this.connection !== "live") {
      this.queue.push(entry);
      this.notify();
      return entry;
    }
    await this.submitComment(entry);
    return entry;
  }

  private async submitComment(entry: QueuedComment): Promise<void> {
    try {
      const res = await this.wire.request("POST", `/pages/${this.pageId}/comments`,
                                          { body: entry.body, parent: entry.parent });
      if (res.status === 200) {
        entry.state = "sent";
      } else {
        entry.state = "failed";
        entry.detail = res.json?.error ?? `http ${res.status}`;
      }
    } catch (exc) {
      entry.state = "failed";
      entry.detail = String(exc);
    }
    this.notify();
  }

  private async flushQueue(): Promise<void> {
    const pending = this.queue.filter((q) => q.state === "queued");
    for (const entry of pending) {
      await this.submitComment(entry);
    }
  }

  /** Summarize modal: acquires the lock on open, releases on close/cancel. */
  async openSummarizeModal(selection: NodeId[]): Promise<boolean> {
    const res = await this.wire.request("POST", `/pages/${this.pageId}/locks`,
                                        { kind: "summary", covered: selection });
    if (res.status !== 200) return false;
    this.activeLock = res.json.lock.id;
    this.selection = new Set(selection);
    this.notify();
    return true;
  }

  async submitSummary(body: string, citations: unknown[] = []): Promise<boolean> {
    const res = await this.wire.request("POST", `/pages/${this.pageId}/summaries`,
                                        { selection: [...this.selection], body, citations });
    if (res.status === 200) await this.closeSummarizeModal();
    return res.status === 200;
  }

  async incorporateSummary(summary: NodeId, body: string | null): Promise<boolean> {
    const res = await this.wire.request("PATCH", `/pages/${this.pageId}/summaries/${summary}`,
                                        body === null ? { incorporate: true }
                                                      : { body, incorporate: true });
    return res.status === 200;
  }

  async closeSummarizeModal(): Promise<void> {
    if (this.activeLock !== null) {
      await this.wire.request("DELETE", `/pages/${this.pageId}/locks/${this.activeLock}`);
      this.activeLock = null;
    }
    this.selection.clear();
    this.notify();
  }

  async dragMove(node: NodeId, newParent: NodeId | null, index: number): Promise<boolean> {
    const lock = await this.wire.request("POST", `/pages/${this.pageId}/locks`,
                                         { kind: "move" });
    if (lock.status !== 200) return false;
    const res = await this.wire.request("POST", `/pages/${this.pageId}/move`,
                                        { node, new_parent: newParent, index });
    await this.wire.request("DELETE", `/pages/${this.pageId}/locks/${lock.json.lock.id}`);
    return res.status === 200;
  }

  async flagSummary(summary: NodeId, dimension: string, value: number): Promise<boolean> {
    const res = await this.wire.request("POST",
                                        `/pages/${this.pageId}/summaries/${summary}/flags`,
                                        { dimension, value });
    return res.status === 200;
  }

  /** Hover/click on a bolded row clears its unread marker. */
  async markRead(nodes: NodeId[]): Promise<void> {
    const fresh = nodes.filter((n) => this.store.unread.has(n));
    if (!fresh.length) return;
    await this.wire.request("POST", `/pages/${this.pageId}/read-marks`, { nodes: fresh });
  }

  /** Citation click: resolve the expansion path and scroll target. */
  citationPath(summary: NodeId, index: number): NodeId[] {
    const node = this.store.nodes.get(summary);
    const citation = node?.citations[index];
    if (!citation || !this.store.nodes.has(citation.target)) return [];
    const path: NodeId[] = [];
    let cur = this.store.nodes.get(citation.target)?.parent ?? null;
    while (cur !== null) {
      const anc = this.store.nodes.get(cur);
      if (anc?.kind === "summary") path.unshift(cur);
      cur = anc?.parent ?? null;
    }
    for (const sid of path) this.expansions.add(sid);
    this.notify();
    return path;
  }
}
