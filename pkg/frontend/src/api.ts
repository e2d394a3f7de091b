// Typed client for the gaplens HTTP API. The UI performs no analysis of its
// own; everything rendered comes straight from these endpoints.

export interface TranscriptMessage {
  role: "user" | "assistant";
  content: string;
}

export interface Transcript {
  session_id: string;
  course_id: string;
  created_at: number;
  updated_at: number;
  messages: TranscriptMessage[];
}

export interface FrequencyEntry {
  kc_id: string;
  count: number;
  sample_misconceptions: string[];
}

export interface FrequencyReport {
  course_id: string;
  registry_version: string;
  window: { start: number | null; end: number | null };
  entries: FrequencyEntry[];
  sessions_counted: number;
}

export type FetchLike = typeof fetch;

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = `${response.status}: ${body.error}`;
    } catch {
      // non-JSON error body; keep the status code
    }
    throw new Error(`request failed (${detail})`);
  }
  return response;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  async createSession(studentId?: string): Promise<string> {
    const response = await expectOk(
      await this.fetchImpl(`${this.baseUrl}/api/sessions`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(studentId ? { student_id: studentId } : {}),
      }),
    );
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async getTranscript(sessionId: string): Promise<Transcript> {
    const response = await expectOk(
      await this.fetchImpl(`${this.baseUrl}/api/sessions/${sessionId}`),
    );
    return (await response.json()) as Transcript;
  }

  // Streams the tutor reply; onDelta fires per chunk, and the full reply is
  // returned once the server sends [DONE].
  async sendMessageStream(
    sessionId: string,
    text: string,
    onDelta: (delta: string) => void,
  ): Promise<string> {
    const response = await expectOk(
      await this.fetchImpl(`${this.baseUrl}/api/sessions/${sessionId}/messages`, {
        method: "POST",
        headers: { "Content-Type": "application/json", Accept: "text/event-stream" },
        body: JSON.stringify({ text }),
      }),
    );
    if (!response.body) {
      throw new Error("response has no body to stream");
    }
    const { consumeSseStream } = await import("./sse.js");
    return consumeSseStream(response.body, onDelta);
  }

  async fetchTopReport(token: string, n: number, window: "lecture" | "all" = "all"): Promise<FrequencyReport> {
    const params = new URLSearchParams({ n: String(n), window });
    const response = await expectOk(
      await this.fetchImpl(`${this.baseUrl}/api/reports/top?${params}`, {
        headers: { Authorization: `Bearer ${token}` },
      }),
    );
    return (await response.json()) as FrequencyReport;
  }
}
