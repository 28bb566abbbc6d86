/** Typed client for the annotation task API.
 *
 * Three routes, all JSON: GET /tasks/next hands this annotator their next
 * open task, POST /records submits one answer, GET /progress reports
 * aggregate counts. Submissions carry an idempotency token so a retry
 * after a lost response cannot double-count a vote.
 */

export interface TaskView {
  task_id: string;
  segment_id: string;
  station: string;
  text: string;
  candidates: string[];
}

export interface Progress {
  schema_version: number;
  tasks: number;
  resolved: number;
  open: number;
  exhausted: number;
  records: number;
}

export interface SubmitResult {
  created: boolean;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

function newToken(): string {
  const c = globalThis.crypto;
  if (c && "randomUUID" in c) return c.randomUUID();
  return `t-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 12)}`;
}

async function body(res: Response): Promise<Record<string, unknown>> {
  try {
    return (await res.json()) as Record<string, unknown>;
  } catch {
    return {};
  }
}

function errorText(payload: Record<string, unknown>, status: number): string {
  return typeof payload.error === "string" ? payload.error : `request failed (${status})`;
}

export class Client {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly retries: number = 2,
    private readonly retryDelayMs: number = 200,
  ) {}

  async nextTask(annotator: string): Promise<TaskView | null> {
    const res = await this.fetchFn(
      `${this.base}/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
    const payload = await body(res);
    if (!res.ok) throw new ApiError(res.status, errorText(payload, res.status));
    return payload.task as TaskView | null;
  }

  /**
   * Submit one record. Network failures are retried with the same token,
   * which the server treats as an exact repeat; an HTTP rejection (bad
   * choice, closed task, changed answer) is final and raises ApiError.
   */
  async submit(record: {
    task_id: string;
    annotator: string;
    choice: string;
    token?: string;
  }): Promise<SubmitResult> {
    const payload = JSON.stringify({ token: newToken(), ...record });
    let lastFailure: unknown = new Error("no attempt made");
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) await sleep(this.retryDelayMs * attempt);
      let res: Response;
      try {
        res = await this.fetchFn(`${this.base}/records`, {
          method: "POST",
          headers: { "Content-Type": "application/json; charset=utf-8" },
          body: payload,
        });
      } catch (failure) {
        lastFailure = failure;
        continue;
      }
      const parsed = await body(res);
      if (!res.ok) throw new ApiError(res.status, errorText(parsed, res.status));
      return { created: parsed.created === true };
    }
    throw lastFailure;
  }

  async progress(): Promise<Progress> {
    const res = await this.fetchFn(`${this.base}/progress`);
    const payload = await body(res);
    if (!res.ok) throw new ApiError(res.status, errorText(payload, res.status));
    return payload as unknown as Progress;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
