/** The fetch-next/submit loop, shared by the app and scripted sessions. */
import { ApiError } from "./api.js";
export const NONE_CHOICE = "none";
export function validChoice(task, choice) {
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
export async function labelSession(client, annotator, decide, hooks = {}) {
    if (!annotator.trim())
        throw new Error("annotator id must be non-empty");
    const summary = { submitted: 0, duplicates: 0, conflicts: 0 };
    for (;;) {
        const task = await client.nextTask(annotator);
        if (task === null)
            break;
        hooks.onTask?.(task);
        const choice = await decide(task);
        if (!validChoice(task, choice)) {
            throw new Error(`choice ${JSON.stringify(choice)} is not offered by task ${task.task_id}`);
        }
        try {
            const result = await client.submit({ task_id: task.task_id, annotator, choice });
            if (result.created)
                summary.submitted++;
            else
                summary.duplicates++;
            hooks.onSubmitted?.(task, choice, result.created);
        }
        catch (failure) {
            if (failure instanceof ApiError && failure.status === 409) {
                // the server stops offering a closed or already-answered task,
                // so fetching again always makes progress
                summary.conflicts++;
                hooks.onConflict?.(task, failure.message);
            }
            else {
                throw failure;
            }
        }
        if (hooks.onProgress)
            hooks.onProgress(await client.progress());
    }
    return summary;
}
