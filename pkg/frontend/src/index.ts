export { computeOutline, snippet } from "./outline.js";
export { PageStore } from "./store.js";
export { ClientSession } from "./session.js";
export type { Wire, WireResponse, StreamHandle, QueuedComment } from "./session.js";
export { httpWire } from "./net.js";
export { renderOutline } from "./dom.js";
export type {
  EventRecord,
  Frame,
  Icon,
  NodeDoc,
  NodeId,
  OutlineRow,
  PageDoc,
  StreamMessage,
  UserId,
} from "./types.js";
