/** Digit shortcuts: 1..3 pick a candidate topic, 0 picks "none". */
import { NONE_CHOICE } from "./session.js";
export function choiceForKey(task, key) {
    if (key === "0")
        return NONE_CHOICE;
    if (!/^[1-9]$/.test(key))
        return null;
    const candidate = task.candidates[Number(key) - 1];
    return candidate ?? null;
}
