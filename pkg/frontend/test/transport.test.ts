import { describe, expect, it } from "vitest";

import { decisionBody } from "../src/client";
import { canDecide, readOnlyBanner } from "../src/session";
import { GatewayError, HttpTransport } from "../src/transport";

function stubFetch(status: number, text: string) {
  const calls: { url: string; init: RequestInit }[] = [];
  const fetchFn = (async (url: unknown, init?: RequestInit) => {
    calls.push({ url: String(url), init: init ?? {} });
    return { status, text: async () => text } as Response;
  }) as typeof fetch;
  return { calls, fetchFn };
}

describe("transport", () => {
  it("joins the base url, serializes the body, and tags it as json", async () => {
    const { calls, fetchFn } = stubFetch(200, '{"ok": true}');
    const transport = new HttpTransport("http://127.0.0.1:8800", fetchFn);

    const res = await transport.send({
      method: "POST",
      path: "/documents/MCP-FXS-013/decisions",
      headers: { authorization: "Bearer tok-physician-chen", "x-expected-version": "3" },
      body: { task_id: "t-fxs-fmr1-lab", decision: "approve", note: "" },
    });

    expect(res).toEqual({ status: 200, body: { ok: true } });
    expect(calls).toHaveLength(1);
    expect(calls[0]?.url).toBe("http://127.0.0.1:8800/documents/MCP-FXS-013/decisions");
    expect(calls[0]?.init.method).toBe("POST");
    expect(calls[0]?.init.headers).toEqual({
      authorization: "Bearer tok-physician-chen",
      "x-expected-version": "3",
      "content-type": "application/json",
    });
    expect(calls[0]?.init.body).toBe('{"task_id":"t-fxs-fmr1-lab","decision":"approve","note":""}');
  });

  it("sends no body or content-type on reads and passes non-json text through", async () => {
    const { calls, fetchFn } = stubFetch(500, "internal error");
    const transport = new HttpTransport("http://127.0.0.1:8800", fetchFn);

    const res = await transport.send({ method: "GET", path: "/documents", headers: {} });
    expect(res).toEqual({ status: 500, body: "internal error" });
    expect(calls[0]?.init.body).toBeUndefined();
    expect(calls[0]?.init.headers).toEqual({});
  });

  it("maps an empty response body to null", async () => {
    const { fetchFn } = stubFetch(204, "");
    const transport = new HttpTransport("http://127.0.0.1:8800", fetchFn);
    const res = await transport.send({ method: "GET", path: "/documents", headers: {} });
    expect(res.body).toBeNull();
  });

  it("unwraps the detail envelope on errors and leaves bare bodies alone", () => {
    const wrapped = new GatewayError(403, { detail: "role 'auditor' may not perform this action" });
    expect(wrapped.detail).toBe("role 'auditor' may not perform this action");
    const bare = new GatewayError(500, "boom");
    expect(bare.detail).toBe("boom");
  });

  it("builds decision bodies with modification only on modify", () => {
    expect(decisionBody("t-1", { decision: "approve" })).toEqual({
      task_id: "t-1",
      decision: "approve",
      note: "",
    });
    expect(
      decisionBody("t-1", { decision: "approve", modification: { reason: "x" } }),
    ).not.toHaveProperty("modification");
    expect(
      decisionBody("t-1", { decision: "modify", note: "n", modification: { reason: "x" } }),
    ).toEqual({
      task_id: "t-1",
      decision: "modify",
      note: "n",
      modification: { reason: "x" },
    });
  });

  it("gates decision controls on the physician role", () => {
    expect(canDecide({ token: "t", role: "physician" })).toBe(true);
    expect(canDecide({ token: "t", role: "auditor" })).toBe(false);
    expect(readOnlyBanner({ token: "t", role: "physician" })).toBeNull();
    expect(readOnlyBanner({ token: "t", role: "engineer" })).toContain("engineer");
    expect(readOnlyBanner({ token: null, role: null })).toContain("anonymous");
  });
});
