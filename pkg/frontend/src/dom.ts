/**
 * Minimal DOM binding for the outline. Keyboard accessible: rows are
 * focusable, Enter toggles expansion, Space toggles selection, and the move
 * menu (m) offers reparent targets as an alternative to drag-and-drop.
 */

import type { ClientSession } from "./session.js";
import type { NodeId, OutlineRow } from "./types.js";

const ICON_GLYPHS: Record<string, string> = {
  blue_circle: "●",
  yellow_circle: "○",
  orange_square: "■",
  half_square: "◩",
};

export function renderOutline(session: ClientSession, container: HTMLElement): void {
  const rows = session.outlineWithLocks(Date.now());
  container.textContent = "";
  const list = document.createElement("ul");
  list.className = "outline";
  list.setAttribute("role", "tree");

  for (const row of rows) {
    list.appendChild(renderRow(session, row));
  }
  container.appendChild(list);
}

function renderRow(
  session: ClientSession,
  row: OutlineRow & { greyed: boolean },
): HTMLElement {
  const item = document.createElement("li");
  item.setAttribute("role", "treeitem");
  item.tabIndex = 0;
  item.dataset.node = row.node;
  item.style.paddingLeft = `${row.depth * 1.25}rem`;
  item.classList.add(`icon-${row.icon}`);
  if (row.unread) item.classList.add("unread");
  if (row.greyed) item.classList.add("locked");
  if (session.selection.has(row.node)) item.classList.add("selected");

  const icon = document.createElement("span");
  icon.className = "glyph";
  icon.textContent = ICON_GLYPHS[row.icon] ?? "?";
  const text = document.createElement("span");
  text.className = "snippet";
  if (row.unread) text.style.fontWeight = "bold";
  text.textContent = row.snippet;
  item.append(icon, text);

  item.addEventListener("mouseenter", () => {
    if (row.unread) void session.markRead([row.node]);
  });
  item.addEventListener("click", () => {
    if (row.icon === "orange_square") session.toggleExpansion(row.node);
    if (row.unread) void session.markRead([row.node]);
  });
  item.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && row.icon === "orange_square") {
      session.toggleExpansion(row.node);
    } else if (event.key === " ") {
      event.preventDefault();
      toggleSelect(session, row.node);
    }
  });
  if (!row.greyed) {
    item.draggable = true;
  }
  return item;
}

function toggleSelect(session: ClientSession, node: NodeId): void {
  const next = new Set(session.selection);
  if (next.has(node)) next.delete(node);
  else next.add(node);
  session.select([...next]);
}
