import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("createSession posts the student id and returns the session id", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({ session_id: "abc" }, 201));
    const client = new ApiClient("http://svc", fetchMock);
    await expect(client.createSession("alice")).resolves.toBe("abc");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://svc/api/sessions");
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({ student_id: "alice" });
  });

  it("fetchTopReport sends the bearer token and query params", async () => {
    const report = {
      course_id: "c",
      registry_version: "v",
      window: { start: null, end: null },
      entries: [],
      sessions_counted: 0,
    };
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(report));
    const client = new ApiClient("", fetchMock);
    await client.fetchTopReport("sekrit", 5, "lecture");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("/api/reports/top?n=5&window=lecture");
    expect((init as RequestInit).headers).toMatchObject({ Authorization: "Bearer sekrit" });
  });

  it("surfaces API error payloads", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse({ error: "instructor token required" }, 401));
    const client = new ApiClient("", fetchMock);
    await expect(client.fetchTopReport("wrong", 5)).rejects.toThrow("401");
  });

  it("sendMessageStream feeds deltas from the SSE body", async () => {
    const encoder = new TextEncoder();
    const body = new ReadableStream<Uint8Array>({
      start(controller) {
        controller.enqueue(encoder.encode('data: {"delta": "partial "}\n\n'));
        controller.enqueue(encoder.encode('data: {"delta": "reply"}\n\ndata: [DONE]\n\n'));
        controller.close();
      },
    });
    const fetchMock = vi.fn().mockResolvedValue(
      new Response(body, { status: 200, headers: { "Content-Type": "text/event-stream" } }),
    );
    const client = new ApiClient("", fetchMock);
    const deltas: string[] = [];
    const full = await client.sendMessageStream("s1", "hi there", (d) => deltas.push(d));
    expect(full).toBe("partial reply");
    expect(deltas).toEqual(["partial ", "reply"]);
    const [, init] = fetchMock.mock.calls[0];
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({ text: "hi there" });
  });
});
