/** The fetch-next/submit loop, shared by the app and scripted sessions. */

import { ApiError, Client, Progress, TaskView } from "./api.js";

export const NONE_CHOICE = "none";

export interface SessionHooks {
  onTask?(task: TaskView): void;
  onSubmitted?(task: TaskView, choice: string, created: boolean): void;
  /** A 409: the task closed under us, or a changed answer was refused. */
  onConflict?(task: TaskView, message: string): void;
  onProgress?(progress: Progress): void;
}

export interface SessionSummary {
  submitted: number;
  duplicates: number;
  conflicts: number;
}

export function validChoice(task: TaskView, choice: string): boolean {
  return choice === NONE_CHOICE || task.candidates.includes(choice);
}

/**
 * Label tasks until the server has none left for this annotator.
 *
 * `decide` maps a task to a choice: the interactive app resolves it on a
 * keypress or click, scripted runs return immediately. A choice outside
 * the task's candidate set (plus "none") never reaches the wire; the
 * client refuses it before the server would.
 */
export async function labelSession(
  client: Client,
  annotator: string,
  decide: (task: TaskView) => string | Promise<string>,
  hooks: SessionHooks = {},
): Promise<SessionSummary> {
  if (!annotator.trim()) throw new Error("annotator id must be non-empty");
  const summary: SessionSummary = { submitted: 0, duplicates: 0, conflicts: 0 };
  for (;;) {
    const task = await client.nextTask(annotator);
    if (task === null) break;
    hooks.onTask?.(task);
    const choice = await decide(task);
    if (!validChoice(task, choice)) {
      throw new Error(`choice ${JSON.stringify(choice)} is not offered by task ${task.task_id}`);
    }
    try {
      const result = await client.submit({ task_id: task.task_id, annotator, choice });
      if (result.created) summary.submitted++;
      else summary.duplicates++;
      hooks.onSubmitted?.(task, choice, result.created);
    } catch (failure) {
      if (failure instanceof ApiError && failure.status === 409) {
        // the server stops offering a closed or already-answered task,
        // so fetching again always makes progress
        summary.conflicts++;
        hooks.onConflict?.(task, failure.message);
      } else {
        throw failure;
      }
    }
    if (hooks.onProgress) hooks.onProgress(await client.progress());
  }
  return summary;
}
