/** DOM wiring: render the current task, collect one choice, repeat.
 *
 * All annotation state lives on the server; the page holds nothing but
 * the task being shown, so a refresh mid-session resumes exactly where
 * the server says this annotator left off.
 */
import { choiceForKey } from "./keymap.js";
import { labelSession, NONE_CHOICE } from "./session.js";
function view(root) {
    const grab = (id) => {
        const el = root.getElementById(id);
        if (!el)
            throw new Error(`missing #${id} in page`);
        return el;
    };
    return {
        station: grab("station"),
        text: grab("segment-text"),
        candidates: grab("candidates"),
        banner: grab("banner"),
        progressFill: grab("progress-fill"),
        progressText: grab("progress-text"),
        card: grab("task-card"),
        done: grab("done"),
        annotator: grab("annotator-id"),
    };
}
function renderTask(v, task, pick) {
    v.station.textContent = task.station;
    v.text.textContent = task.text;
    v.candidates.replaceChildren();
    const options = task.candidates.map((topic, i) => ({ key: String(i + 1), topic }));
    options.push({ key: "0", topic: NONE_CHOICE });
    for (const { key, topic } of options) {
        const button = document.createElement("button");
        button.type = "button";
        button.className = "candidate";
        button.dataset.choice = topic;
        const hint = document.createElement("kbd");
        hint.textContent = key;
        button.append(hint, ` ${topic.replace(/_/g, " ")}`);
        button.addEventListener("click", () => pick(topic));
        v.candidates.append(button);
    }
}
function renderProgress(v, p) {
    const pct = p.tasks ? Math.round((100 * p.resolved) / p.tasks) : 0;
    v.progressFill.style.width = `${pct}%`;
    v.progressText.textContent =
        `${p.resolved} of ${p.tasks} resolved, ${p.open} open, ${p.records} records`;
}
function flashBanner(v, message) {
    v.banner.textContent = message;
    v.banner.classList.add("visible");
    setTimeout(() => v.banner.classList.remove("visible"), 4000);
}
export async function startApp(root, client, annotator) {
    const v = view(root);
    v.annotator.textContent = annotator;
    let pick = null;
    let currentTask = null;
    root.addEventListener("keydown", (event) => {
        if (pick === null || currentTask === null)
            return;
        if (event.altKey || event.ctrlKey || event.metaKey)
            return;
        const choice = choiceForKey(currentTask, event.key);
        if (choice !== null)
            pick(choice);
    });
    renderProgress(v, await client.progress());
    const summary = await labelSession(client, annotator, (task) => new Promise((resolve) => {
        const choose = (choice) => {
            pick = null;
            currentTask = null;
            resolve(choice);
        };
        currentTask = task;
        pick = choose;
        renderTask(v, task, choose);
    }), {
        onConflict: (task, message) => flashBanner(v, `Task ${task.task_id} was closed elsewhere: ${message}`),
        onProgress: (p) => renderProgress(v, p),
    });
    v.card.hidden = true;
    v.done.hidden = false;
    v.done.textContent =
        `No tasks left for you. Submitted ${summary.submitted}, ` +
            `skipped ${summary.conflicts} conflict${summary.conflicts === 1 ? "" : "s"}.`;
    return summary;
}
