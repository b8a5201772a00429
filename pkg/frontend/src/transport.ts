/** HTTP plumbing between the dashboard and the gateway. */

export interface GatewayRequest {
  method: "GET" | "POST";
  path: string;
  /** Lowercase header names; only headers that matter to the gateway. */
  headers: Record<string, string>;
  body?: unknown;
}

export interface GatewayResponse {
  status: number;
  body: unknown;
}

export interface Transport {
  send(request: GatewayRequest): Promise<GatewayResponse>;
}

/** Non-2xx answer from the gateway, body preserved verbatim. */
export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: unknown,
  ) {
    super(`gateway responded ${status}`);
    this.name = "GatewayError";
  }

  /** FastAPI wraps error payloads in a "detail" envelope. */
  get detail(): unknown {
    if (typeof this.body === "object" && this.body !== null && "detail" in this.body) {
      return (this.body as { detail: unknown }).detail;
    }
    return this.body;
  }
}

export class HttpTransport implements Transport {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async send(request: GatewayRequest): Promise<GatewayResponse> {
    const headers: Record<string, string> = { ...request.headers };
    const init: RequestInit = { method: request.method, headers };
    if (request.body !== undefined) {
      headers["content-type"] = "application/json";
      init.body = JSON.stringify(request.body);
    }
    const res = await this.fetchFn(this.baseUrl + request.path, init);
    let body: unknown = null;
    const text = await res.text();
    if (text !== "") {
      try {
        body = JSON.parse(text);
      } catch {
        body = text;
      }
    }
    return { status: res.status, body };
  }
}
