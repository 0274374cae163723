import type { LabelValue, Progress, SubmitAck, Task, TaskKind } from "./types.js";

/** Error from the annotation service carrying the HTTP status code. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

interface FetchLike {
  (url: string, init?: RequestInit): Promise<Response>;
}

/**
 * Typed client for the annotation service.
 *
 * All methods reject with ApiError on non-2xx responses (message taken
 * from the service's JSON error body when present) and with the
 * underlying error on network failure.
 */
export class AnnotationClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  /** Lease the next open task of the given kind; null when none remain. */
  async nextTask(kind: TaskKind): Promise<Task | null> {
    const body = await this.request(
      "GET",
      `/api/tasks/next?kind=${encodeURIComponent(kind)}`,
    );
    const parsed = JSON.parse(body) as { task: Task | null };
    return parsed.task;
  }

  async submitLabel(
    taskId: string,
    label: LabelValue,
    annotator: string,
  ): Promise<SubmitAck> {
    const body = await this.request(
      "POST",
      `/api/tasks/${encodeURIComponent(taskId)}/label`,
      { label, annotator },
    );
    return JSON.parse(body) as SubmitAck;
  }

  /** Raw export bytes for one kind (JSONL for quality/variant, CoNLL for pos). */
  async exportKind(kind: TaskKind): Promise<string> {
    return this.request("GET", `/api/export?kind=${encodeURIComponent(kind)}`);
  }

  async progress(): Promise<Progress> {
    const body = await this.request("GET", "/api/progress");
    return JSON.parse(body) as Progress;
  }

  private async request(
    method: "GET" | "POST",
    path: string,
    payload?: unknown,
  ): Promise<string> {
    const init: RequestInit = { method };
    if (payload !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(payload);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, errorMessage(response.status, text));
    }
    return text;
  }
}

function errorMessage(status: number, body: string): string {
  try {
    const parsed = JSON.parse(body) as { error?: string };
    if (typeof parsed.error === "string" && parsed.error) {
      return parsed.error;
    }
  } catch {
    // Non-JSON error body; fall through to the generic message.
  }
  return `request failed with status ${status}`;
}
