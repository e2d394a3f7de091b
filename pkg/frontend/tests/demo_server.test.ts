// End-to-end against a real demo-mode server: spawns `gaplens serve --demo`
// and drives it with the same client code the browser uses (streaming chat,
// transcript reload, instructor report).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { initialChatState, restoreTranscript } from "../src/chat.js";
import { applyReport, barsFromReport, initialDashboardState } from "../src/dashboard.js";

const PORT = 8740 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const TOKEN = "demo";

let server: ChildProcess;
let workDir: string;
const client = new ApiClient(BASE);

async function waitForHealth(deadlineMs: number): Promise<void> {
  const deadline = Date.now() + deadlineMs;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // server not up yet
    }
    if (Date.now() > deadline) throw new Error("demo server did not come up");
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

async function waitForDrain(deadlineMs: number): Promise<void> {
  const deadline = Date.now() + deadlineMs;
  for (;;) {
    const health = (await (await fetch(`${BASE}/healthz`)).json()) as {
      pending_analysis: number;
      sessions_recorded: number;
    };
    if (health.pending_analysis === 0 && health.sessions_recorded > 0) return;
    if (Date.now() > deadline) throw new Error("analysis worker did not drain");
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "gaplens-ui-"));
  server = spawn(
    "python3",
    [
      "-m",
      "gaplens.cli",
      "serve",
      "--demo",
      "--port",
      String(PORT),
      "--log-path",
      join(workDir, "events.ndjson"),
    ],
    { stdio: "ignore" },
  );
  await waitForHealth(20_000);
}, 30_000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

describe("demo server round trip", () => {
  it("streams a tutor reply, restores the transcript, and reports the gap", async () => {
    const sessionId = await client.createSession("ui-test-student");
    expect(sessionId.length).toBeGreaterThan(0);

    const deltas: string[] = [];
    const reply = await client.sendMessageStream(
      sessionId,
      "what does clf.score(X_test, y_test) actually measure for my logistic regression?",
      (delta) => deltas.push(delta),
    );
    expect(deltas.length).toBeGreaterThan(1); // incremental, not one blob
    expect(deltas.join("")).toBe(reply);
    expect(reply).toContain("accuracy");

    // Reload: the chat view rebuilt from GET /api/sessions/{id} matches what
    // was exchanged, in order.
    const transcript = await client.getTranscript(sessionId);
    const restored = restoreTranscript(initialChatState(), transcript);
    expect(restored.messages.map((m) => m.role)).toEqual(["user", "assistant"]);
    expect(restored.messages[1].content).toBe(reply);

    await waitForDrain(10_000);

    const report = await client.fetchTopReport(TOKEN, 5, "all");
    const dashboard = applyReport(initialDashboardState(), report);
    const bars = barsFromReport(dashboard.report, dashboard.topN);
    expect(bars.length).toBeGreaterThan(0);
    expect(bars[0].kcId).toBe("KC1.2.1");
    expect(bars[0].count).toBeGreaterThanOrEqual(1);
  }, 30_000);

  it("rejects report access without the instructor token", async () => {
    await expect(client.fetchTopReport("wrong-token", 5)).rejects.toThrow("401");
  });
});
