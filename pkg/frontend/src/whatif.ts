/**
 * What-if views: ask the gateway to simulate a decision on scratch state
 * and render the outcome. Nothing here executes; the label says so on
 * every view, and the same question always renders the same answer.
 */

import { type DecisionRequest, GatewayClient } from "./client";
import { GatewayError } from "./transport";

export const NOT_EXECUTED_LABEL = "simulation only: nothing was executed or recorded";

export interface WhatIfDelta {
  taskId: string;
  before: string;
  after: string;
}

export interface WhatIfView {
  kind: "what-if";
  label: typeof NOT_EXECUTED_LABEL;
  documentId: string;
  /** Human description of the alternative that was simulated. */
  alternative: string;
  endState: Record<string, string>;
  pendingAfter: string[];
  deltas: WhatIfDelta[];
}

export interface WhatIfErrorView {
  kind: "what-if-error";
  status: number;
  /** Gateway's own words, unedited. */
  detail: unknown;
}

export function describeAlternative(taskId: string, request: DecisionRequest): string {
  const base = `${request.decision} ${taskId}`;
  return request.decision === "modify" && request.modification !== undefined
    ? `${base} with edited payload`
    : base;
}

export async function whatIf(
  client: GatewayClient,
  target: { documentId: string; taskId: string },
  request: DecisionRequest,
): Promise<WhatIfView | WhatIfErrorView> {
  let response;
  try {
    response = await client.simulate(target.documentId, target.taskId, request);
  } catch (error) {
    if (error instanceof GatewayError) {
      return { kind: "what-if-error", status: error.status, detail: error.detail };
    }
    throw error;
  }
  const deltas = Object.entries(response.delta)
    .map(([taskId, [before, after]]) => ({ taskId, before, after }))
    .sort((a, b) => (a.taskId < b.taskId ? -1 : a.taskId > b.taskId ? 1 : 0));
  return {
    kind: "what-if",
    label: NOT_EXECUTED_LABEL,
    documentId: response.document_id,
    alternative: describeAlternative(target.taskId, request),
    endState: response.snapshot.task_states,
    pendingAfter: response.snapshot.pending_verifications,
    deltas,
  };
}
