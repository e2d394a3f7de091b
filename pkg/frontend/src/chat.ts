// Chat view state. Pure transition functions so the streaming lifecycle
// (send -> deltas -> complete / fail) is testable without a DOM; rendered
// message order always equals the server transcript order.

import type { Transcript } from "./api.js";

export interface ChatMessageView {
  role: "user" | "assistant";
  content: string;
  streaming: boolean;
}

export interface ChatViewState {
  sessionId: string | null;
  messages: ChatMessageView[];
  input: string;
  streaming: boolean;
  error: string | null;
}

export function initialChatState(): ChatViewState {
  return { sessionId: null, messages: [], input: "", streaming: false, error: null };
}

export function openSession(state: ChatViewState, sessionId: string): ChatViewState {
  return { ...initialChatState(), sessionId };
}

export function setInput(state: ChatViewState, input: string): ChatViewState {
  return { ...state, input };
}

// Send is disabled while a reply streams or when there is nothing to send.
export function canSend(state: ChatViewState): boolean {
  return state.sessionId !== null && !state.streaming && state.input.trim().length > 0;
}

export function beginSend(state: ChatViewState): ChatViewState {
  if (!canSend(state)) {
    throw new Error("send is disabled in this state");
  }
  const text = state.input.trim();
  return {
    ...state,
    input: "",
    streaming: true,
    error: null,
    messages: [
      ...state.messages,
      { role: "user", content: text, streaming: false },
      { role: "assistant", content: "", streaming: true },
    ],
  };
}

export function applyDelta(state: ChatViewState, delta: string): ChatViewState {
  const messages = [...state.messages];
  const last = messages[messages.length - 1];
  if (!last || !last.streaming) {
    return state;
  }
  messages[messages.length - 1] = { ...last, content: last.content + delta };
  return { ...state, messages };
}

export function completeReply(state: ChatViewState): ChatViewState {
  const messages = state.messages.map((message) =>
    message.streaming ? { ...message, streaming: false } : message,
  );
  return { ...state, messages, streaming: false };
}

// On failure the empty placeholder is dropped; the user message stays, which
// mirrors how the server keeps it in the transcript.
export function failReply(state: ChatViewState, error: string): ChatViewState {
  const messages = state.messages.filter(
    (message) => !(message.streaming && message.content === ""),
  );
  return {
    ...state,
    messages: messages.map((m) => ({ ...m, streaming: false })),
    streaming: false,
    error,
  };
}

export function restoreTranscript(state: ChatViewState, transcript: Transcript): ChatViewState {
  return {
    ...state,
    sessionId: transcript.session_id,
    streaming: false,
    error: null,
    messages: transcript.messages.map((message) => ({
      role: message.role,
      content: message.content,
      streaming: false,
    })),
  };
}
