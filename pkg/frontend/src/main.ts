// Browser entry point: wires the chat pane and the instructor dashboard to
// the gaplens API. The instructor token lives in a module variable only; it
// is never persisted.

import { ApiClient } from "./api.js";
import {
  ChatViewState,
  applyDelta,
  beginSend,
  canSend,
  completeReply,
  failReply,
  initialChatState,
  openSession,
  restoreTranscript,
  setInput,
} from "./chat.js";
import {
  DashboardViewState,
  applyError,
  applyReport,
  barsFromReport,
  initialDashboardState,
  selectedEntry,
  setTopN,
  toggleKc,
} from "./dashboard.js";

const api = new ApiClient("");

let chat: ChatViewState = initialChatState();
let dashboard: DashboardViewState = initialDashboardState();
let instructorToken: string | null = null;
let pollTimer: number | null = null;
let pollInFlight = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

// --- chat pane ---

function renderChat(): void {
  const list = el<HTMLDivElement>("chat-messages");
  list.innerHTML = "";
  for (const message of chat.messages) {
    const row = document.createElement("div");
    row.className = `msg msg-${message.role}${message.streaming ? " msg-streaming" : ""}`;
    row.textContent = message.content || "…";
    list.appendChild(row);
  }
  list.scrollTop = list.scrollHeight;

  el<HTMLInputElement>("chat-input").value = chat.input;
  el<HTMLButtonElement>("chat-send").disabled = !canSend(chat);
  el<HTMLInputElement>("chat-input").disabled = chat.streaming || chat.sessionId === null;
  el<HTMLSpanElement>("chat-session").textContent = chat.sessionId ?? "(none)";
  el<HTMLDivElement>("chat-error").textContent = chat.error ?? "";
}

async function startSession(): Promise<void> {
  const student = el<HTMLInputElement>("student-id").value.trim() || undefined;
  const sessionId = await api.createSession(student);
  chat = openSession(chat, sessionId);
  window.location.hash = sessionId;
  renderChat();
}

async function resumeSessionFromHash(): Promise<void> {
  const sessionId = window.location.hash.slice(1);
  if (!sessionId) return;
  try {
    const transcript = await api.getTranscript(sessionId);
    chat = restoreTranscript(initialChatState(), transcript);
  } catch {
    chat = initialChatState();
    window.location.hash = "";
  }
  renderChat();
}

async function sendCurrentMessage(): Promise<void> {
  if (!canSend(chat) || chat.sessionId === null) return;
  const sessionId = chat.sessionId;
  const text = chat.input.trim();
  chat = beginSend(chat);
  renderChat();
  try {
    await api.sendMessageStream(sessionId, text, (delta) => {
      chat = applyDelta(chat, delta);
      renderChat();
    });
    chat = completeReply(chat);
  } catch (error) {
    chat = failReply(chat, error instanceof Error ? error.message : String(error));
  }
  renderChat();
}

// --- dashboard pane ---

function renderDashboard(): void {
  const chart = el<HTMLDivElement>("dash-chart");
  chart.innerHTML = "";
  const bars = barsFromReport(dashboard.report, dashboard.topN);
  if (bars.length === 0) {
    const empty = document.createElement("p");
    empty.className = "dash-empty";
    empty.textContent = dashboard.report
      ? "No knowledge gaps recorded yet for this course."
      : "Unlock the dashboard with the instructor token.";
    chart.appendChild(empty);
  }
  for (const bar of bars) {
    const row = document.createElement("div");
    row.className = "bar-row";
    if (dashboard.selectedKc === bar.kcId) row.classList.add("bar-selected");
    row.dataset.kc = bar.kcId;

    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = bar.kcId;

    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    fill.style.width = `${bar.widthPct}%`;
    const count = document.createElement("span");
    count.className = "bar-count";
    count.textContent = String(bar.count);
    track.appendChild(fill);
    track.appendChild(count);

    row.appendChild(label);
    row.appendChild(track);
    row.addEventListener("click", () => {
      dashboard = toggleKc(dashboard, bar.kcId);
      renderDashboard();
    });
    chart.appendChild(row);
  }

  const drill = el<HTMLDivElement>("dash-drilldown");
  const entry = selectedEntry(dashboard);
  if (entry) {
    const samples = entry.sample_misconceptions.length
      ? entry.sample_misconceptions.map((s) => `<li>${s}</li>`).join("")
      : "<li>(no misconception samples)</li>";
    drill.innerHTML = `<h3>${entry.kc_id} · ${entry.count} student${
      entry.count === 1 ? "" : "s"
    }</h3><ul>${samples}</ul>`;
  } else {
    drill.innerHTML = "<p>Click a bar for sample misconceptions.</p>";
  }

  const meta = dashboard.report
    ? `${dashboard.report.sessions_counted} sessions · registry ${dashboard.report.registry_version.slice(0, 8)}`
    : "";
  el<HTMLSpanElement>("dash-meta").textContent = meta;
  el<HTMLDivElement>("dash-error").textContent = dashboard.lastError ?? "";
}

async function refreshReport(): Promise<void> {
  if (!instructorToken || pollInFlight) return;
  pollInFlight = true;
  try {
    const windowChoice = el<HTMLSelectElement>("dash-window").value as "lecture" | "all";
    const report = await api.fetchTopReport(instructorToken, dashboard.topN, windowChoice);
    dashboard = applyReport(dashboard, report);
  } catch (error) {
    dashboard = applyError(dashboard, error instanceof Error ? error.message : String(error));
  } finally {
    pollInFlight = false;
  }
  renderDashboard();
}

function startPolling(): void {
  if (pollTimer !== null) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(refreshReport, dashboard.refreshSeconds * 1000);
}

function unlockDashboard(): void {
  const token = el<HTMLInputElement>("dash-token").value.trim();
  if (!token) return;
  instructorToken = token;
  el<HTMLInputElement>("dash-token").value = "";
  void refreshReport();
  startPolling();
}

export function boot(): void {
  el<HTMLButtonElement>("chat-start").addEventListener("click", () => void startSession());
  el<HTMLButtonElement>("chat-send").addEventListener("click", () => void sendCurrentMessage());
  el<HTMLInputElement>("chat-input").addEventListener("input", (event) => {
    chat = setInput(chat, (event.target as HTMLInputElement).value);
    el<HTMLButtonElement>("chat-send").disabled = !canSend(chat);
  });
  el<HTMLInputElement>("chat-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void sendCurrentMessage();
  });
  el<HTMLButtonElement>("dash-unlock").addEventListener("click", unlockDashboard);
  el<HTMLSelectElement>("dash-topn").addEventListener("change", (event) => {
    dashboard = setTopN(dashboard, Number((event.target as HTMLSelectElement).value));
    void refreshReport();
  });
  el<HTMLSelectElement>("dash-window").addEventListener("change", () => void refreshReport());

  renderChat();
  renderDashboard();
  void resumeSessionFromHash();
}

if (typeof document !== "undefined" && document.getElementById("chat-messages")) {
  boot();
}
