/** Wire types mirroring the server's JSON schemas. */

export type NodeId = string;
export type UserId = string;
export type Seq = number;

export type Icon = "blue_circle" | "yellow_circle" | "orange_square" | "half_square";

export interface RichTextDoc {
  text: string;
  marks: [number, number, string, string | null][];
}

export interface CitationDoc {
  start: number;
  end: number;
  target: NodeId;
  mode: "quote" | "cite";
}

export interface NodeDoc {
  id: NodeId;
  kind: "comment" | "summary";
  author: UserId;
  created_at: number;
  body: RichTextDoc;
  parent: NodeId | null;
  children: NodeId[];
  hidden: boolean;
  tags: string[];
  pending: NodeId[];
  flags: Record<string, number>;
  citations: CitationDoc[];
}

export interface LockDoc {
  id: string;
  holder: UserId;
  kind: "summary" | "move";
  covered: NodeId[];
  acquired_at: number;
  expires_at: number;
}

export interface PageDoc {
  id: string;
  title: string;
  creator: UserId;
  seq: Seq;
  mode: string;
  publicly_commentable: boolean;
  publicly_editable: boolean;
  members: Record<UserId, string>;
  roots: NodeId[];
  nodes: Record<NodeId, NodeDoc>;
  locks: Record<string, LockDoc>;
  unread: NodeId[];
}

export interface EventRecord {
  v: "v1";
  seq: Seq;
  page: string;
  actor: UserId;
  at: number;
  kind: string;
  payload: Record<string, unknown>;
}

/** One stream frame: the event plus server-derived icon/pending deltas. */
export interface Frame {
  seq: Seq;
  event: EventRecord;
  icons: Record<NodeId, Icon>;
  pending: Record<NodeId, NodeId[]>;
  removed: NodeId[];
}

export interface Heartbeat {
  heartbeat: true;
  seq: Seq;
}

export type StreamMessage = Frame | Heartbeat;

export function isHeartbeat(msg: StreamMessage): msg is Heartbeat {
  return (msg as Heartbeat).heartbeat === true;
}

/** A rendered outline row (must agree with the server's DisplayItems). */
export interface OutlineRow {
  node: NodeId;
  depth: number;
  icon: Icon;
  snippet: string;
  unread: boolean;
}
