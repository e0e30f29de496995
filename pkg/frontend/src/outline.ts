/**
 * The outline view-model: collapsed-by-default rows computed from the store.
 *
 * Collapse rules match the server's default view exactly (fidelity-tested
 * against engine fixtures): hidden comments skipped with children surfacing
 * in place, complete summaries collapsed unless expanded, outdated summaries
 * auto-expanded along the ancestor chains of their pending nodes, off-chain
 * summarized comments omitted, off-chain complete summaries collapsed, and
 * the expansion set ignored inside restricted regions.
 */

import type { PageStore } from "./store.js";
import type { NodeId, OutlineRow } from "./types.js";

export const SNIPPET_LIMIT = 80;

/** First characters of a body, flattened and cut at a word boundary. */
export function snippet(text: string, limit: number = SNIPPET_LIMIT): string {
  const flat = text.split(/\s+/).filter(Boolean).join(" ");
  if (flat.length <= limit) return flat;
  const cut = flat.lastIndexOf(" ", limit);
  const at = cut <= 0 ? limit : cut;
  return flat.slice(0, at).replace(/\s+$/, "");
}

export function computeOutline(
  store: PageStore,
  expansions: ReadonlySet<NodeId> = new Set(),
): OutlineRow[] {
  const rows: OutlineRow[] = [];

  const emit = (nid: NodeId, depth: number): void => {
    const node = store.nodes.get(nid)!;
    rows.push({
      node: nid,
      depth,
      icon: store.icons.get(nid) ?? "blue_circle",
      snippet: snippet(node.body.text),
      unread: store.unread.has(nid),
    });
  };

  const liveTargets = (pending: NodeId[]): Set<NodeId> =>
    new Set(pending.filter((t) => store.nodes.has(t)));

  const ancestorsOf = (nid: NodeId): NodeId[] => {
    const out: NodeId[] = [];
    let cur = store.nodes.get(nid)?.parent ?? null;
    while (cur !== null) {
      out.push(cur);
      cur = store.nodes.get(cur)?.parent ?? null;
    }
    return out;
  };

  const chainNodes = (targets: Set<NodeId>): Set<NodeId> => {
    const anc = new Set<NodeId>();
    for (const t of targets) for (const a of ancestorsOf(t)) anc.add(a);
    return anc;
  };

  const subtree = (nid: NodeId): Set<NodeId> => {
    const out = new Set<NodeId>();
    const stack = [nid];
    while (stack.length) {
      const cur = stack.pop()!;
      out.add(cur);
      for (const child of store.nodes.get(cur)?.children ?? []) stack.push(child);
    }
    return out;
  };

  const walk = (
    children: readonly NodeId[],
    depth: number,
    targets: Set<NodeId> | null,
    onpath: Set<NodeId>,
  ): void => {
    for (const cid of children) {
      const node = store.nodes.get(cid);
      if (!node) continue;
      if (node.kind === "comment" && node.hidden) {
        walk(node.children, depth, targets, onpath);
        continue;
      }
      if (node.kind === "comment") {
        if (targets !== null && !targets.has(cid) && !onpath.has(cid)) continue;
        emit(cid, depth);
        walk(node.children, depth + 1, targets, onpath);
        continue;
      }
      if (node.pending.length) {
        emit(cid, depth);
        const sub = liveTargets(node.pending);
        if (targets !== null) {
          const inside = subtree(cid);
          for (const t of targets) if (inside.has(t)) sub.add(t);
        }
        walk(node.children, depth + 1, sub, chainNodes(sub));
        continue;
      }
      // complete summary
      if (targets === null) {
        emit(cid, depth);
        if (expansions.has(cid)) walk(node.children, depth + 1, null, new Set());
      } else if (targets.has(cid) || onpath.has(cid)) {
        emit(cid, depth);
        walk(node.children, depth + 1, targets, onpath);
      } else {
        emit(cid, depth); // frontier: collapsed stand-in for its subtree
      }
    }
  };

  walk(store.roots, 0, null, new Set());
  return rows;
}
