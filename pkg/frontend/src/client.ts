/**
 * Typed calls for the slice of the gateway API the dashboard uses.
 *
 * Every method performs exactly one request and throws GatewayError on a
 * non-2xx answer; the view layer decides which failures are part of normal
 * operation (conflicts, denied roles) and which are displayed raw.
 */

import { GatewayError, type GatewayRequest, type Transport } from "./transport";
import type { Session } from "./session";
import type {
  AuditResponse,
  DecisionKind,
  DecisionResponse,
  DocumentListResponse,
  DocumentTree,
  PendingResponse,
  Scalar,
  SimulateResponse,
} from "./types";

export interface DecisionRequest {
  decision: DecisionKind;
  note?: string;
  modification?: Record<string, Scalar>;
}

/** Wire body for decisions and simulations; modification rides only on modify. */
export function decisionBody(taskId: string, request: DecisionRequest): Record<string, unknown> {
  const body: Record<string, unknown> = {
    task_id: taskId,
    decision: request.decision,
    note: request.note ?? "",
  };
  if (request.decision === "modify" && request.modification !== undefined) {
    body.modification = request.modification;
  }
  return body;
}

export class GatewayClient {
  constructor(
    private readonly transport: Transport,
    private readonly session: Session,
  ) {}

  private headers(extra?: Record<string, string>): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.session.token !== null) {
      headers.authorization = `Bearer ${this.session.token}`;
    }
    return headers;
  }

  private async call<T>(request: GatewayRequest): Promise<T> {
    const res = await this.transport.send(request);
    if (res.status < 200 || res.status >= 300) {
      throw new GatewayError(res.status, res.body);
    }
    return res.body as T;
  }

  listDocuments(): Promise<DocumentListResponse> {
    return this.call({ method: "GET", path: "/documents", headers: this.headers() });
  }

  getDocument(documentId: string): Promise<DocumentTree> {
    return this.call({ method: "GET", path: `/documents/${documentId}`, headers: this.headers() });
  }

  pending(documentId: string): Promise<PendingResponse> {
    return this.call({
      method: "GET",
      path: `/documents/${documentId}/pending`,
      headers: this.headers(),
    });
  }

  /** One POST per call; callers must not retry decisions on their own. */
  decide(
    documentId: string,
    taskId: string,
    request: DecisionRequest,
    expectedVersion: number,
  ): Promise<DecisionResponse> {
    return this.call({
      method: "POST",
      path: `/documents/${documentId}/decisions`,
      headers: this.headers({ "x-expected-version": String(expectedVersion) }),
      body: decisionBody(taskId, request),
    });
  }

  simulate(documentId: string, taskId: string, request: DecisionRequest): Promise<SimulateResponse> {
    return this.call({
      method: "POST",
      path: `/documents/${documentId}/simulate`,
      headers: this.headers(),
      body: decisionBody(taskId, request),
    });
  }

  audit(documentId: string): Promise<AuditResponse> {
    return this.call({
      method: "GET",
      path: `/documents/${documentId}/audit`,
      headers: this.headers(),
    });
  }
}
