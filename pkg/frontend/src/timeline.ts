/**
 * Audit timeline: the document's ledger rendered chronologically, with the
 * chain verification the gateway computed shown as a badge. A broken chain
 * is the loudest thing on the page.
 */

import { GatewayClient } from "./client";
import type { AuditEventTree } from "./types";

export interface ChainBadge {
  state: "verified" | "broken";
  text: string;
  headHash: string | null;
  length: number | null;
  breakSeq: number | null;
}

export interface TimelineRow {
  seq: number;
  timestamp: string;
  actor: string;
  /** Module id when a reasoning module wrote the event, else null. */
  moduleId: string | null;
  eventKind: string;
  detail: string;
  /** Task or target the event points at, parsed from its detail. */
  taskRef: string | null;
  /** Proposal confidence of the referenced task, when the plan still has it. */
  confidence: number | null;
}

export interface TimelineView {
  kind: "timeline";
  documentId: string;
  sealed: boolean;
  badge: ChainBadge;
  rows: TimelineRow[];
  placeholder: string | null;
}

const MODULE_PREFIX = "module:";

export function taskRefOf(detail: string): string | null {
  const match = /(?:^|\s)(?:task|target)=([^\s]+)/.exec(detail);
  return match === null ? null : (match[1] ?? null);
}

export function toRow(event: AuditEventTree, confidences: Record<string, number>): TimelineRow {
  const taskRef = taskRefOf(event.detail);
  return {
    seq: event.seq,
    timestamp: event.timestamp,
    actor: event.actor,
    moduleId: event.actor.startsWith(MODULE_PREFIX)
      ? event.actor.slice(MODULE_PREFIX.length)
      : null,
    eventKind: event.event_kind,
    detail: event.detail,
    taskRef,
    confidence: taskRef !== null && taskRef in confidences ? (confidences[taskRef] ?? null) : null,
  };
}

export async function viewTrace(client: GatewayClient, documentId: string): Promise<TimelineView> {
  const audit = await client.audit(documentId);
  const doc = await client.getDocument(documentId);
  const confidences: Record<string, number> = {};
  for (const task of doc.task_plan) {
    confidences[task.id] = task.confidence;
  }
  const rows = audit.events
    .map((event) => toRow(event, confidences))
    .sort((a, b) => a.seq - b.seq);
  const badge: ChainBadge = audit.verification.ok
    ? {
        state: "verified",
        text: `verified (${audit.verification.length} events)`,
        headHash: audit.verification.head_hash,
        length: audit.verification.length,
        breakSeq: null,
      }
    : {
        state: "broken",
        text: `broken at seq ${audit.verification.break_seq}`,
        headHash: null,
        length: null,
        breakSeq: audit.verification.break_seq,
      };
  return {
    kind: "timeline",
    documentId,
    sealed: audit.closed,
    badge,
    rows,
    placeholder: rows.length === 0 ? "no events yet: awaiting ingestion" : null,
  };
}
