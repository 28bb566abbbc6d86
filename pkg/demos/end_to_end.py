"""Full pipeline walkthrough on a generated corpus.

Builds a two-station synthetic world, runs every stage from transcript
validation to figure export, and prints what each stage produced. The
whole thing runs in a scratch directory and takes a minute or two.

    python3 demos/end_to_end.py
"""

import tempfile
from datetime import date
from pathlib import Path

from newslens.config import config_from_dict
from newslens.fixtures import (
    FixtureSpec,
    build_world,
    simulate_annotators,
    write_records,
)
from newslens.pipeline import Pipeline

root = Path(tempfile.mkdtemp(prefix="newslens-demo-"))
print(f"scratch directory: {root}\n")

spec = FixtureSpec(
    n_episodes=150,
    sentences_per_episode=(4, 7),
    seed=3,
    start=date(2015, 9, 1),
    end=date(2020, 6, 30),
    n_panelists=15,
    panel_start=date(2016, 1, 1),
    panel_end=date(2016, 12, 1),
)
world = build_world(root / "world", spec, stations=("FNC", "CNN"))
print(f"episodes written to {world.episodes_path}")

records_path = root / "records.jsonl"
cfg = config_from_dict({
    "annotation": {"per_cell": 16, "seed": 3},
    "classify": {"l2_grid": [1e-5, 1e-4], "n_folds": 3, "max_iter": 1200},
    "paths": {
        "workdir": str(root / "work"),
        "episodes": str(world.episodes_path),
        "panel": str(world.panel_path),
        "records": str(records_path),
    },
})

# the generating process doubles as the dictionary oracle here; on real
# transcripts the default distributional oracle builds dictionaries from
# co-occurrence instead
pipe = Pipeline(cfg, oracle=world.oracle)

report = pipe.ingest()
print(f"ingest: {len(report.episodes)} episodes, {len(report.issues)} issues")

segments = pipe.segment()
print(f"segment: {len(segments)} segments")

labels = pipe.weak_classify()
coverage = sum(1 for lab in labels.values() if lab.topics)
print(f"weak-classify: {coverage}/{len(labels)} segments matched a topic")

tasks = pipe.sample_annotation()
print(f"sample-annotation: {len(tasks)} tasks")

# stand in for the human annotators: four scripted raters who answer
# from the planted truth, disagreeing now and then
write_records(records_path, simulate_annotators(tasks, world.truth))
truth, issues = pipe.import_annotations()
print(f"import-annotations: {len(truth)} resolved labels, {len(issues)} skipped")

models = pipe.train()
rep = models["report"]
print(f"train: {rep.n_cells} cells, held-out precision {rep.mean_precision:.3f}")

refined = pipe.refine()
kept = sum(len(v) for v in refined["members"].values())
weak_n = sum(len(v) for v in refined["weak_members"].values())
print(f"refine: kept {kept} of {weak_n} weak assignments")

print(f"polarization: {len(pipe.polarization())} rows")
print(f"divergence: {len(pipe.divergence())} rows")
print(f"consumption: {len(pipe.consumption())} rows")

print("\nfigure exports:")
for name, path in sorted(pipe.export_figures().items()):
    print(f"  {name}: {path}")
