import { describe, expect, it } from "vitest";
import { Client, type TaskView } from "../src/api.js";
import { NONE_CHOICE, labelSession, validChoice } from "../src/session.js";

function task(id: string): TaskView {
  return {
    task_id: id,
    segment_id: `seg-${id}`,
    station: "CNN",
    text: `text of ${id}`,
    candidates: ["economy", "guns", "taxes"],
  };
}

function json(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/**
 * Minimal scripted server: hands out `tasks` in order, advancing past a
 * task once its submit has been answered (whatever the outcome), and
 * lets a test override individual submit responses by task id.
 */
function scriptedClient(
  tasks: TaskView[],
  submitOutcome: (taskId: string) => Response = () => json(201, { created: true }),
) {
  let cursor = 0;
  const posts: string[] = [];
  const client = new Client(
    "",
    (input, init) => {
      if (input.startsWith("/tasks/next")) {
        return Promise.resolve(json(200, { schema_version: 1, task: tasks[cursor] ?? null }));
      }
      if (input === "/records") {
        const body = JSON.parse(init?.body as string);
        posts.push(`${body.task_id}:${body.choice}`);
        cursor++;
        return Promise.resolve(submitOutcome(body.task_id));
      }
      return Promise.resolve(
        json(200, {
          schema_version: 1,
          tasks: tasks.length,
          resolved: cursor,
          open: tasks.length - cursor,
          exhausted: 0,
          records: cursor,
        }),
      );
    },
    0,
    1,
  );
  return { client, posts };
}

describe("labelSession", () => {
  it("labels every offered task and reports the summary", async () => {
    const { client, posts } = scriptedClient([task("t1"), task("t2"), task("t3")]);
    const seen: string[] = [];
    const progressCalls: number[] = [];
    const summary = await labelSession(
      client,
      "ann",
      (t) => t.candidates[0] as string,
      {
        onTask: (t) => seen.push(t.task_id),
        onProgress: (p) => progressCalls.push(p.resolved),
      },
    );
    expect(summary).toEqual({ submitted: 3, duplicates: 0, conflicts: 0 });
    expect(seen).toEqual(["t1", "t2", "t3"]);
    expect(posts).toEqual(["t1:economy", "t2:economy", "t3:economy"]);
    expect(progressCalls).toEqual([1, 2, 3]);
  });

  it("skips past a task that closed underneath it and keeps going", async () => {
    const { client, posts } = scriptedClient(
      [task("t1"), task("t2"), task("t3")],
      (id) => (id === "t2" ? json(409, { error: "task 't2' is closed" }) : json(201, { created: true })),
    );
    const conflicts: string[] = [];
    const summary = await labelSession(client, "ann", () => NONE_CHOICE, {
      onConflict: (t, message) => conflicts.push(`${t.task_id}: ${message}`),
    });
    expect(summary).toEqual({ submitted: 2, duplicates: 0, conflicts: 1 });
    expect(conflicts).toEqual(["t2: task 't2' is closed"]);
    expect(posts).toHaveLength(3);
  });

  it("counts an idempotent repeat as a duplicate, not a submission", async () => {
    const { client } = scriptedClient([task("t1")], () => json(200, { created: false }));
    const summary = await labelSession(client, "ann", () => "guns");
    expect(summary).toEqual({ submitted: 0, duplicates: 1, conflicts: 0 });
  });

  it("refuses a choice outside the offered set before it reaches the wire", async () => {
    const { client, posts } = scriptedClient([task("t1")]);
    await expect(labelSession(client, "ann", () => "astrology")).rejects.toThrow(
      /not offered by task t1/,
    );
    expect(posts).toHaveLength(0);
  });

  it("rejects a blank annotator id", async () => {
    const { client, posts } = scriptedClient([task("t1")]);
    await expect(labelSession(client, "  ", () => NONE_CHOICE)).rejects.toThrow(
      /annotator id/,
    );
    expect(posts).toHaveLength(0);
  });

  it("propagates any rejection that is not a conflict", async () => {
    const { client } = scriptedClient([task("t1")], () =>
      json(400, { error: "unknown annotator" }),
    );
    await expect(labelSession(client, "ann", () => "taxes")).rejects.toMatchObject({
      status: 400,
      message: "unknown annotator",
    });
  });
});

describe("validChoice", () => {
  it("accepts candidates and the none sentinel, nothing else", () => {
    const t = task("t1");
    expect(validChoice(t, "economy")).toBe(true);
    expect(validChoice(t, NONE_CHOICE)).toBe(true);
    expect(validChoice(t, "")).toBe(false);
    expect(validChoice(t, "Economy")).toBe(false);
  });
});
