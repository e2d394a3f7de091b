// Minimal server-sent-events consumer for the chat reply stream. The server
// emits `data: {"delta": ...}` events and terminates with `data: [DONE]`.

export interface SseEvent {
  delta?: string;
  done: boolean;
}

export function parseSseData(data: string): SseEvent {
  if (data === "[DONE]") {
    return { done: true };
  }
  const payload = JSON.parse(data) as { delta?: string };
  return { delta: payload.delta ?? "", done: false };
}

// Incremental parser: network chunks can split events anywhere, so a buffer
// accumulates until a blank line closes each event.
export class SseBuffer {
  private buffer = "";

  push(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let boundary = this.buffer.indexOf("\n\n");
    while (boundary !== -1) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      for (const line of block.split("\n")) {
        if (line.startsWith("data: ")) {
          events.push(parseSseData(line.slice("data: ".length)));
        }
      }
      boundary = this.buffer.indexOf("\n\n");
    }
    return events;
  }
}

export async function consumeSseStream(
  body: ReadableStream<Uint8Array>,
  onDelta: (delta: string) => void,
): Promise<string> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  const sse = new SseBuffer();
  let full = "";
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    for (const event of sse.push(decoder.decode(value, { stream: true }))) {
      if (event.done) {
        return full;
      }
      if (event.delta) {
        full += event.delta;
        onDelta(event.delta);
      }
    }
  }
  return full;
}
