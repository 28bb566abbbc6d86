import { Client } from "./api.js";
import { startApp } from "./app.js";
/** Pick the annotator id: URL query beats saved value beats prompt. */
function resolveAnnotator() {
    const fromQuery = new URLSearchParams(window.location.search).get("annotator");
    if (fromQuery !== null && fromQuery.trim() !== "") {
        window.localStorage.setItem("annotator", fromQuery.trim());
        return fromQuery.trim();
    }
    const saved = window.localStorage.getItem("annotator");
    if (saved !== null && saved.trim() !== "")
        return saved;
    // prompt() returns null on cancel; loop until we get something usable
    for (;;) {
        const typed = window.prompt("Annotator id (e.g. your initials):");
        if (typed !== null && typed.trim() !== "") {
            window.localStorage.setItem("annotator", typed.trim());
            return typed.trim();
        }
    }
}
const annotator = resolveAnnotator();
startApp(document, new Client(""), annotator).catch((err) => {
    const banner = document.getElementById("banner");
    if (banner !== null) {
        banner.textContent = `Session failed: ${err instanceof Error ? err.message : String(err)}`;
        banner.classList.add("visible", "error");
    }
    console.error(err);
});
