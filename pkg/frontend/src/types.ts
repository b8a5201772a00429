/**
 * JSON shapes served by the mcpcare gateway.
 *
 * The dashboard renders these verbatim; it never derives task states,
 * verdicts, or chain status on its own.
 */

export type Role = "physician" | "engineer" | "auditor";

export type DecisionKind = "approve" | "modify" | "reject";

export type Scalar = string | number;

export interface PendingItem {
  document_id: string;
  task_id: string;
  kind: string;
  payload: Record<string, Scalar>;
  confidence: number;
  requires_approval: boolean;
  rationale: string;
  flags: string[];
}

export interface PendingResponse {
  document_id: string;
  version: number;
  items: PendingItem[];
}

export interface DocumentListResponse {
  documents: string[];
}

export interface DecisionResponse {
  document_id: string;
  version: number;
  task_id: string;
  decision: string;
}

export interface SnapshotTree {
  document_id: string;
  document_version: number;
  pending_verifications: string[];
  task_states: Record<string, string>;
  timeline_length: number;
}

export interface SimulateResponse {
  document_id: string;
  snapshot: SnapshotTree;
  delta: Record<string, [string, string]>;
}

export interface AuditEventTree {
  seq: number;
  timestamp: string;
  document_id: string;
  document_version: number;
  actor: string;
  event_kind: string;
  payload_digest: string;
  detail: string;
  prev_hash: string;
  this_hash: string;
}

export type ChainVerification =
  | { ok: true; head_hash: string; length: number }
  | { ok: false; break_seq: number };

export interface AuditResponse {
  document_id: string;
  closed: boolean;
  events: AuditEventTree[];
  verification: ChainVerification;
}

export interface TaskTree {
  id: string;
  kind: string;
  payload: Record<string, Scalar>;
  state: string;
  confidence: number;
  requires_approval: boolean;
  depends_on: string[];
  fallback_task: string | null;
}

/** The slice of the document tree the dashboard reads. */
export interface DocumentTree {
  header: { schema_version: string; id: string; version: number };
  task_plan: TaskTree[];
}

export interface VersionConflictBody {
  error: "version_conflict";
  expected: number | null;
  actual: number;
}

export function isVersionConflict(body: unknown): body is VersionConflictBody {
  return (
    typeof body === "object" &&
    body !== null &&
    (body as { error?: unknown }).error === "version_conflict"
  );
}
