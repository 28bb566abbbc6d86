"""Command line front end for the measurement pipeline.

Each subcommand drives one stage. Stages pull their upstream artifacts
through the cache, so running a late stage on a fresh workdir builds
everything before it; re-running with unchanged inputs is a no-op.

Exit codes: 0 success, 1 usage, 2 invalid configuration or content,
3 missing input file or upstream artifact.
"""

from __future__ import annotations

import argparse
import sys
from typing import Any, Sequence

from .annotation_service import AnnotationService, make_server
from .config import ConfigError, load_config
from .corpus import SnapshotError
from .pipeline import (
    InputValidationError,
    MissingInputError,
    Pipeline,
    PipelineError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_MISSING = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; that slot is taken
    def error(self, message: str):
        raise UsageError(message)


def cmd_ingest(pipe: Pipeline, args: argparse.Namespace) -> int:
    report = pipe.ingest()
    print(f"episodes: {len(report.episodes)}")
    print(f"issues: {len(report.issues)}")
    for issue in report.issues[:20]:
        print(f"  line {issue.line_no}: {issue.message}")
    if len(report.issues) > 20:
        print(f"  ... and {len(report.issues) - 20} more")
    return EXIT_OK


def cmd_segment(pipe: Pipeline, args: argparse.Namespace) -> int:
    segments = pipe.segment()
    print(f"segments: {len(segments)}")
    print(f"artifact: {pipe.path('segments.pkl')}")
    return EXIT_OK


def cmd_expand_dict(pipe: Pipeline, args: argparse.Namespace) -> int:
    dicts = pipe.expand_dict()
    total = sum(len(d.words) for d in dicts)
    print(f"topics: {len(dicts)}")
    print(f"dictionary words: {total}")
    print(f"artifact: {pipe.path('dictionaries.json')}")
    return EXIT_OK


def cmd_weak_classify(pipe: Pipeline, args: argparse.Namespace) -> int:
    labels = pipe.weak_classify()
    labeled = sum(1 for lab in labels.values() if lab.topics)
    print(f"segments: {len(labels)}")
    print(f"with at least one topic: {labeled}")
    print(f"artifact: {pipe.path('weak_labels.pkl')}")
    return EXIT_OK


def cmd_sample_annotation(pipe: Pipeline, args: argparse.Namespace) -> int:
    tasks = pipe.sample_annotation()
    print(f"tasks: {len(tasks)}")
    print(f"artifact: {pipe.path('tasks.jsonl')}")
    return EXIT_OK


def cmd_serve_annotation(pipe: Pipeline, args: argparse.Namespace) -> int:
    tasks = pipe.sample_annotation()
    store = args.records or pipe.config.paths.records or str(
        pipe.path("records.jsonl")
    )
    ann = pipe.config.annotation
    service = AnnotationService(
        tasks,
        min_annotators=ann.min_annotators,
        cap=ann.annotator_cap,
        store_path=store,
    )
    server = make_server(service, host=args.host, port=args.port,
                         static_dir=args.static)
    host, port = server.server_address[:2]
    print(f"serving {len(tasks)} tasks on http://{host}:{port}/")
    print(f"records append to {store}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return EXIT_OK


def cmd_import_annotations(pipe: Pipeline, args: argparse.Namespace) -> int:
    labels, issues = pipe.import_annotations(records_path=args.records)
    print(f"resolved labels: {len(labels)}")
    print(f"skipped records: {len(issues)}")
    for issue in issues[:20]:
        print(f"  {issue}", file=sys.stderr)
    if issues and not labels:
        print("error: no usable annotation records", file=sys.stderr)
        return EXIT_INVALID
    print(f"artifact: {pipe.path('ground_truth.jsonl')}")
    return EXIT_OK


def cmd_train(pipe: Pipeline, args: argparse.Namespace) -> int:
    models = pipe.train(jobs=args.jobs)
    report = models["report"]
    print(f"cells trained: {report.n_cells}")
    print(f"cells skipped: {report.n_skipped}")
    print(f"held-out precision: {report.mean_precision:.4f} "
          f"(sd {report.sd_precision:.4f})")
    print(f"artifact: {pipe.path('models.pkl')}")
    return EXIT_OK


def cmd_refine(pipe: Pipeline, args: argparse.Namespace) -> int:
    refined = pipe.refine()
    n_weak = sum(len(v) for v in refined["weak_members"].values())
    n_kept = sum(len(v) for v in refined["members"].values())
    print(f"weak member assignments: {n_weak}")
    print(f"kept after refinement: {n_kept}")
    print(f"artifact: {pipe.path('refined.pkl')}")
    return EXIT_OK


def cmd_polarization(pipe: Pipeline, args: argparse.Namespace) -> int:
    rows = pipe.polarization()
    print(f"rows: {len(rows)}")
    print(f"export: {pipe.path('polarization.csv')}")
    return EXIT_OK


def cmd_divergence(pipe: Pipeline, args: argparse.Namespace) -> int:
    rows = pipe.divergence()
    print(f"rows: {len(rows)}")
    print(f"export: {pipe.path('divergence.csv')}")
    return EXIT_OK


def cmd_consumption(pipe: Pipeline, args: argparse.Namespace) -> int:
    rows = pipe.consumption()
    print(f"rows: {len(rows)}")
    print(f"export: {pipe.path('consumption.csv')}")
    return EXIT_OK


def cmd_export_figures(pipe: Pipeline, args: argparse.Namespace) -> int:
    paths = pipe.export_figures()
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="newslens",
        description="Topic selection and language polarization measurements "
                    "over broadcast transcripts.",
    )
    parser.add_argument("-c", "--config", default="newslens.yaml",
                        help="pipeline configuration file (default: %(default)s)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override annotation and training seeds")
    parser.add_argument("--threshold", type=float, default=None,
                        help="override the weak-label overlap threshold")
    parser.add_argument("--window", type=int, default=None,
                        help="override the figure smoothing window")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.set_defaults(func=func)
        return cmd

    add("ingest", cmd_ingest, "validate the transcript file")
    add("segment", cmd_segment, "split episodes into segments")
    add("expand-dict", cmd_expand_dict, "build topic dictionaries")
    add("weak-classify", cmd_weak_classify, "dictionary-overlap topic labels")
    add("sample-annotation", cmd_sample_annotation,
        "draw segments for human annotation")

    serve = add("serve-annotation", cmd_serve_annotation,
                "run the annotation HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--records", default=None,
                       help="append submitted records here "
                            "(default: paths.records)")
    serve.add_argument("--static", default=None,
                       help="also serve a browser UI from this directory")

    imp = add("import-annotations", cmd_import_annotations,
              "aggregate annotator records into ground truth")
    imp.add_argument("--records", default=None,
                     help="annotator record file (default: paths.records)")

    train = add("train", cmd_train, "fit per-cell supervised models")
    train.add_argument("--jobs", type=int, default=1,
                       help="cells trained in parallel")

    add("refine", cmd_refine, "filter weak labels through trained models")
    add("polarization", cmd_polarization, "leave-out polarization series")
    add("divergence", cmd_divergence, "topic-selection divergence series")
    add("consumption", cmd_consumption, "audience consumption shares")
    add("export-figures", cmd_export_figures, "tabular exports per figure")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    if args.seed is not None:
        out["annotation"] = {"seed": args.seed}
        out["classify"] = {"seed": args.seed}
    if args.threshold is not None:
        out["weak"] = {"overlap_threshold": args.threshold}
    if args.window is not None:
        out["export"] = {"smooth_window": args.window}
    return out


def load_pipeline(args: argparse.Namespace) -> Pipeline:
    config = load_config(args.config, overrides=_overrides(args))
    return Pipeline(config)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        pipe = load_pipeline(args)
        return args.func(pipe, args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, InputValidationError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
