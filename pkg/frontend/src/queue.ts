/**
 * The verification queue: every task the gateway reports as waiting for a
 * physician, across all documents the session can see.
 */

import type { GatewayClient } from "./client";
import { canDecide, readOnlyBanner, type Session } from "./session";
import { GatewayError } from "./transport";
import type { PendingItem, Scalar } from "./types";

export interface QueueEntry {
  documentId: string;
  /** Document version the item was rendered from; sent back with decisions. */
  documentVersion: number;
  taskId: string;
  kind: string;
  payload: Record<string, Scalar>;
  payloadSummary: string;
  confidence: number;
  requiresApproval: boolean;
  rationale: string;
  flags: string[];
  traceHref: string;
}

export interface QueueView {
  kind: "queue";
  entries: QueueEntry[];
  count: number;
  emptyState: string | null;
  decisionsEnabled: boolean;
  banner: string | null;
}

/** 401 and 403 render as distinct states, never as a generic failure. */
export interface QueueErrorView {
  kind: "queue-error";
  status: number;
  reason: "unauthenticated" | "forbidden" | "error";
  message: string;
}

/** Values verbatim from the API; no rounding, no unit conversion. */
export function summarizePayload(payload: Record<string, Scalar>): string {
  return Object.entries(payload)
    .map(([key, value]) => `${key}=${value}`)
    .join("; ");
}

export function toEntry(item: PendingItem, documentVersion: number): QueueEntry {
  return {
    documentId: item.document_id,
    documentVersion,
    taskId: item.task_id,
    kind: item.kind,
    payload: item.payload,
    payloadSummary: summarizePayload(item.payload),
    confidence: item.confidence,
    requiresApproval: item.requires_approval,
    rationale: item.rationale,
    flags: item.flags,
    traceHref: `#/documents/${item.document_id}/trace`,
  };
}

export async function documentEntries(
  client: GatewayClient,
  documentId: string,
): Promise<{ version: number; entries: QueueEntry[] }> {
  const pending = await client.pending(documentId);
  return {
    version: pending.version,
    entries: pending.items.map((item) => toEntry(item, pending.version)),
  };
}

function queueError(error: GatewayError): QueueErrorView {
  const reason =
    error.status === 401 ? "unauthenticated" : error.status === 403 ? "forbidden" : "error";
  const message =
    error.status === 401
      ? "sign-in required: the gateway rejected this session's credentials"
      : error.status === 403
        ? "this role is not permitted to view the queue"
        : `gateway error ${error.status}`;
  return { kind: "queue-error", status: error.status, reason, message };
}

/**
 * Lowest confidence first, so the least certain proposals get attention
 * before the routine ones. Ties keep gateway order.
 */
export async function viewQueue(
  client: GatewayClient,
  session: Session,
): Promise<QueueView | QueueErrorView> {
  let entries: QueueEntry[] = [];
  try {
    const listing = await client.listDocuments();
    for (const documentId of listing.documents) {
      const { entries: docEntries } = await documentEntries(client, documentId);
      entries = entries.concat(docEntries);
    }
  } catch (error) {
    if (error instanceof GatewayError) {
      return queueError(error);
    }
    throw error;
  }
  entries.sort((a, b) => a.confidence - b.confidence);
  return {
    kind: "queue",
    entries,
    count: entries.length,
    emptyState: entries.length === 0 ? "no tasks are waiting for verification" : null,
    decisionsEnabled: canDecide(session),
    banner: readOnlyBanner(session),
  };
}
