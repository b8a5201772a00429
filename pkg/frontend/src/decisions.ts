/**
 * Posting physician decisions and editing modify payloads.
 *
 * A decision is posted at most once per user action. A version conflict is
 * an answer, not a transient fault: the view refreshes and asks the
 * physician to re-review, it never retries on its own.
 */

import { type DecisionRequest, GatewayClient } from "./client";
import { documentEntries, type QueueEntry } from "./queue";
import { GatewayError } from "./transport";
import { isVersionConflict, type Scalar } from "./types";

export interface ModificationDraft {
  fields: Record<string, Scalar>;
}

/** The editor starts from the payload exactly as the gateway served it. */
export function seedDraft(entry: QueueEntry): ModificationDraft {
  return { fields: { ...entry.payload } };
}

/**
 * Editor-side checks before a modify is allowed to submit: every field the
 * proposal carried must stay present, values must stay scalar and non-blank.
 * The gateway revalidates; this only stops doomed submissions early.
 */
export function draftProblems(entry: QueueEntry, draft: ModificationDraft): string[] {
  const problems: string[] = [];
  const keys = Object.keys(draft.fields);
  if (keys.length === 0) {
    problems.push("modification is empty");
  }
  for (const key of Object.keys(entry.payload)) {
    if (!(key in draft.fields)) {
      problems.push(`missing field ${key}`);
    }
  }
  for (const key of keys) {
    const value = draft.fields[key];
    if (typeof value === "string" && value.trim() === "") {
      problems.push(`field ${key} is blank`);
    } else if (typeof value !== "string" && typeof value !== "number") {
      problems.push(`field ${key} must be text or a number`);
    }
  }
  return problems;
}

export type DecisionOutcome =
  | {
      kind: "decided";
      taskId: string;
      decision: string;
      documentVersion: number;
      queue: { version: number; entries: QueueEntry[] };
    }
  | {
      kind: "conflict";
      expected: number | null;
      actual: number;
      prompt: string;
      queue: { version: number; entries: QueueEntry[] };
    }
  | { kind: "denied"; status: number; message: string }
  | { kind: "invalid"; detail: unknown }
  | { kind: "rejected-input"; problems: string[] };

/**
 * Post one decision for a queue entry and report what the gateway said.
 *
 * The entry's document version rides along as X-Expected-Version, so a
 * decision taken against a stale view is refused instead of landing on
 * state the physician never saw.
 */
export async function decide(
  client: GatewayClient,
  entry: QueueEntry,
  request: DecisionRequest,
): Promise<DecisionOutcome> {
  if (request.decision === "modify") {
    const draft: ModificationDraft = { fields: request.modification ?? {} };
    const problems = draftProblems(entry, draft);
    if (problems.length > 0) {
      return { kind: "rejected-input", problems };
    }
  }
  try {
    const decided = await client.decide(entry.documentId, entry.taskId, request, entry.documentVersion);
    const queue = await documentEntries(client, entry.documentId);
    return {
      kind: "decided",
      taskId: decided.task_id,
      decision: decided.decision,
      documentVersion: decided.version,
      queue,
    };
  } catch (error) {
    if (!(error instanceof GatewayError)) {
      throw error;
    }
    if (error.status === 409 && isVersionConflict(error.detail)) {
      const conflict = error.detail;
      const queue = await documentEntries(client, entry.documentId);
      return {
        kind: "conflict",
        expected: conflict.expected,
        actual: conflict.actual,
        prompt:
          "the document changed while this item was on screen; " +
          "re-review the refreshed queue before deciding again",
        queue,
      };
    }
    if (error.status === 401 || error.status === 403) {
      return { kind: "denied", status: error.status, message: String(error.detail) };
    }
    return { kind: "invalid", detail: error.detail };
  }
}
