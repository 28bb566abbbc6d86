"""Serve a small synthetic task set over HTTP for the browser-client tests.

Prints one JSON line {"port": ..., "tasks": ...} once the server is up,
then waits for "DONE" on stdin. On DONE it compares the ground truth
aggregated from the live service against the same records imported back
from the on-disk store, prints the verdict as a second JSON line, and
exits.
"""

import json
import sys
import tempfile
import threading
from datetime import date
from pathlib import Path

from newslens.annotation import (
    aggregate_records,
    ground_truth_labels,
    import_records,
)
from newslens.annotation_service import AnnotationService, make_server
from newslens.config import config_from_dict
from newslens.fixtures import FixtureSpec, build_world
from newslens.pipeline import Pipeline


def build_tasks(root: Path):
    spec = FixtureSpec(
        n_episodes=60,
        sentences_per_episode=(4, 6),
        seed=11,
        start=date(2017, 1, 1),
        end=date(2018, 12, 31),
        n_panelists=0,
    )
    world = build_world(root / "world", spec, stations=("FNC", "CNN"))
    cfg = config_from_dict({
        "annotation": {"per_cell": 2, "seed": 5},
        "paths": {
            "workdir": str(root / "work"),
            "episodes": str(world.episodes_path),
        },
    })
    pipe = Pipeline(cfg, oracle=world.oracle)
    return pipe.sample_annotation()


def main() -> None:
    root = Path(tempfile.mkdtemp(prefix="annot-ui-"))
    tasks = build_tasks(root)
    store = root / "records.jsonl"
    service = AnnotationService(tasks, store_path=store)
    server = make_server(service, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    print(json.dumps({"port": server.server_address[1], "tasks": len(tasks)}), flush=True)

    for line in sys.stdin:
        if line.strip() == "DONE":
            break

    server.shutdown()
    by_id = {t.task_id: t for t in tasks}
    live = ground_truth_labels(by_id, service.resolutions())
    records, issues = import_records(store, by_id)
    imported = ground_truth_labels(by_id, aggregate_records(records))
    print(
        json.dumps(
            {
                "equal": live == imported,
                "labels": len(live),
                "issues": len(issues),
                "records": len(records),
            }
        ),
        flush=True,
    )


if __name__ == "__main__":
    main()
