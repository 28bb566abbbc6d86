import { describe, expect, it } from "vitest";
import { ApiError, Client, type TaskView } from "../src/api.js";

const TASK: TaskView = {
  task_id: "t1",
  segment_id: "s1",
  station: "FNC",
  text: "jobs report beats forecasts",
  candidates: ["economy", "guns", "taxes"],
};

interface Call {
  input: string;
  init?: RequestInit;
}

function json(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function client(handler: (call: Call) => Response | Promise<Response>, calls?: Call[]) {
  return new Client(
    "",
    (input, init) => {
      const call = { input, init };
      calls?.push(call);
      return Promise.resolve(handler(call));
    },
    2,
    1,
  );
}

describe("nextTask", () => {
  it("parses the offered task and url-encodes the annotator", async () => {
    const calls: Call[] = [];
    const c = client(() => json(200, { schema_version: 1, task: TASK }), calls);
    const task = await c.nextTask("a b/c");
    expect(task).toEqual(TASK);
    expect(calls[0]?.input).toBe("/tasks/next?annotator=a%20b%2Fc");
  });

  it("returns null when the queue is exhausted", async () => {
    const c = client(() => json(200, { schema_version: 1, task: null }));
    expect(await c.nextTask("ann")).toBeNull();
  });

  it("raises ApiError with a fallback message when the body is not JSON", async () => {
    const c = client(() => new Response("boom", { status: 500 }));
    await expect(c.nextTask("ann")).rejects.toMatchObject({
      name: "ApiError",
      status: 500,
      message: "request failed (500)",
    });
  });
});

describe("submit", () => {
  const record = { task_id: "t1", annotator: "ann", choice: "economy" };

  it("reports created on 201 and duplicate on 200", async () => {
    expect(await client(() => json(201, { created: true })).submit(record)).toEqual({
      created: true,
    });
    expect(await client(() => json(200, { created: false })).submit(record)).toEqual({
      created: false,
    });
  });

  it("retries a network failure with the byte-identical payload", async () => {
    const calls: Call[] = [];
    let attempt = 0;
    const c = client(() => {
      attempt++;
      if (attempt === 1) throw new TypeError("socket reset");
      return json(201, { created: true });
    }, calls);
    expect(await c.submit(record)).toEqual({ created: true });
    expect(calls).toHaveLength(2);
    // same token both times: the server must see an exact repeat
    expect(calls[0]?.init?.body).toBe(calls[1]?.init?.body);
    const sent = JSON.parse(calls[1]?.init?.body as string);
    expect(typeof sent.token).toBe("string");
    expect(sent.token.length).toBeGreaterThan(0);
  });

  it("does not retry an HTTP rejection", async () => {
    const calls: Call[] = [];
    const c = client(() => json(409, { error: "task 't1' is closed" }), calls);
    await expect(c.submit(record)).rejects.toMatchObject({
      status: 409,
      message: "task 't1' is closed",
    });
    expect(calls).toHaveLength(1);
  });

  it("gives up after the configured retries and rethrows the failure", async () => {
    const calls: Call[] = [];
    const c = client(() => {
      throw new TypeError("socket down");
    }, calls);
    await expect(c.submit(record)).rejects.toThrow("socket down");
    expect(calls).toHaveLength(3); // first try + 2 retries
  });

  it("keeps a caller-provided token", async () => {
    const calls: Call[] = [];
    const c = client(() => json(201, { created: true }), calls);
    await c.submit({ ...record, token: "fixed-token" });
    expect(JSON.parse(calls[0]?.init?.body as string).token).toBe("fixed-token");
  });
});

describe("progress", () => {
  it("returns the aggregate counters", async () => {
    const counts = {
      schema_version: 1,
      tasks: 10,
      resolved: 4,
      open: 5,
      exhausted: 1,
      records: 23,
    };
    const c = client(() => json(200, counts));
    expect(await c.progress()).toEqual(counts);
  });

  it("raises ApiError on a server error", async () => {
    const c = client(() => json(500, { error: "store unavailable" }));
    await expect(c.progress()).rejects.toBeInstanceOf(ApiError);
  });
});
