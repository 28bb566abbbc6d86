"""Launch the browser annotation UI over a generated task set.

Builds a small world, writes a config next to it, and hands off to the
CLI server. Open the printed URL, pick an annotator id, and label away;
records append to records.jsonl in the scratch directory. Ctrl-C stops.

Build the UI once first:

    cd frontend && npm install && npm run build

then:

    python3 demos/serve_ui.py
"""

import os
import sys
import tempfile
from pathlib import Path

import yaml

from newslens.fixtures import FixtureSpec, build_world

repo = Path(__file__).resolve().parent.parent
static = repo / "frontend" / "static"
if not (static / "js" / "main.js").exists():
    sys.exit("frontend/static/js/main.js missing; run npm run build in frontend/ first")

root = Path(tempfile.mkdtemp(prefix="newslens-ui-"))
spec = FixtureSpec(n_episodes=40, sentences_per_episode=(4, 6), seed=9, n_panelists=0)
world = build_world(root / "world", spec, stations=("FNC", "CNN"))

cfg_path = root / "newslens.yaml"
cfg_path.write_text(yaml.safe_dump({
    "annotation": {"per_cell": 3, "seed": 1},
    "paths": {
        "workdir": str(root / "work"),
        "episodes": str(world.episodes_path),
        "records": str(root / "records.jsonl"),
    },
}), encoding="utf-8")
print(f"scratch directory: {root}")

os.execvp(sys.executable, [
    sys.executable, "-m", "newslens.cli",
    "-c", str(cfg_path),
    "serve-annotation", "--static", str(static),
])
