/** Typed client for the annotation task API.
 *
 * Three routes, all JSON: GET /tasks/next hands this annotator their next
 * open task, POST /records submits one answer, GET /progress reports
 * aggregate counts. Submissions carry an idempotency token so a retry
 * after a lost response cannot double-count a vote.
 */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
        this.name = "ApiError";
    }
}
function newToken() {
    const c = globalThis.crypto;
    if (c && "randomUUID" in c)
        return c.randomUUID();
    return `t-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 12)}`;
}
async function body(res) {
    try {
        return (await res.json());
    }
    catch {
        return {};
    }
}
function errorText(payload, status) {
    return typeof payload.error === "string" ? payload.error : `request failed (${status})`;
}
export class Client {
    base;
    fetchFn;
    retries;
    retryDelayMs;
    constructor(base = "", fetchFn = (input, init) => fetch(input, init), retries = 2, retryDelayMs = 200) {
        this.base = base;
        this.fetchFn = fetchFn;
        this.retries = retries;
        this.retryDelayMs = retryDelayMs;
    }
    async nextTask(annotator) {
        const res = await this.fetchFn(`${this.base}/tasks/next?annotator=${encodeURIComponent(annotator)}`);
        const payload = await body(res);
        if (!res.ok)
            throw new ApiError(res.status, errorText(payload, res.status));
        return payload.task;
    }
    /**
     * Submit one record. Network failures are retried with the same token,
     * which the server treats as an exact repeat; an HTTP rejection (bad
     * choice, closed task, changed answer) is final and raises ApiError.
     */
    async submit(record) {
        const payload = JSON.stringify({ token: newToken(), ...record });
        let lastFailure = new Error("no attempt made");
        for (let attempt = 0; attempt <= this.retries; attempt++) {
            if (attempt > 0)
                await sleep(this.retryDelayMs * attempt);
            let res;
            try {
                res = await this.fetchFn(`${this.base}/records`, {
                    method: "POST",
                    headers: { "Content-Type": "application/json; charset=utf-8" },
                    body: payload,
                });
            }
            catch (failure) {
                lastFailure = failure;
                continue;
            }
            const parsed = await body(res);
            if (!res.ok)
                throw new ApiError(res.status, errorText(parsed, res.status));
            return { created: parsed.created === true };
        }
        throw lastFailure;
    }
    async progress() {
        const res = await this.fetchFn(`${this.base}/progress`);
        const payload = await body(res);
        if (!res.ok)
            throw new ApiError(res.status, errorText(payload, res.status));
        return payload;
    }
}
function sleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
}
