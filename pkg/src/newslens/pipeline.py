"""Staged batch pipeline over a shared working directory.

Each stage writes one artifact stamped with the configuration hash and the
content hashes of its inputs. Running a stage whose artifact is already
consistent with the current configuration and inputs is a no-op, so the
pipeline can be resumed or partially re-run after editing the config; any
semantic config change invalidates every downstream artifact at once.

Exchange files that other tools consume (annotation tasks, annotator
records, ground truth) stay in their plain line-oriented formats and carry
their freshness metadata in a sidecar instead. Tabular results are CSV
with leading ``#`` comment lines holding the same hashes, so exports are
self-describing and byte-stable: two runs from one config and one input
corpus produce identical files regardless of where the workdirs live.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import annotation, classify, corpus, metrics, polarize, weaksup
from .config import PipelineConfig
from .corpus import Segment, SnapshotError, file_sha256
from .weaksup import ReplacementOracle, TopicDictionary, WeakLabel

SEGMENTS_FILE = "segments.pkl"
DICTIONARIES_FILE = "dictionaries.json"
WEAK_FILE = "weak_labels.pkl"
TASKS_FILE = "tasks.jsonl"
GROUND_TRUTH_FILE = "ground_truth.jsonl"
MODELS_FILE = "models.pkl"
REFINED_FILE = "refined.pkl"
POLARIZATION_FILE = "polarization.csv"
DIVERGENCE_FILE = "divergence.csv"
CONSUMPTION_FILE = "consumption.csv"
FIGURES_DIR = "figures"

FIGURE_FILES = (
    "fig1_topic_shares.csv",
    "fig2_divergence.csv",
    "fig3_polarization.csv",
    "fig4_consumption.csv",
    "fig5_partisan_phrases.csv",
    "fig6_refinement.csv",
)


class PipelineError(Exception):
    """A stage cannot run with the inputs it was given."""


class MissingInputError(PipelineError):
    """Missing input file or unbuilt upstream artifact."""


class InputValidationError(PipelineError):
    """An input file exists but its content does not validate."""


@dataclass(frozen=True)
class TrainReport:
    n_cells: int
    n_skipped: int
    mean_precision: float
    sd_precision: float


def _rolling_mean(values: Sequence[float], window: int) -> list[float]:
    """Centered rolling mean over consecutive positions (window 1 = identity)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    left = (window - 1) // 2
    right = window // 2
    out = []
    n = len(values)
    for i in range(n):
        lo = max(0, i - left)
        hi = min(n, i + right + 1)
        out.append(sum(values[lo:hi]) / (hi - lo))
    return out


class Pipeline:
    """Runs the measurement stages against one configuration.

    ``oracle`` overrides the configured replacement oracle, which keeps the
    expensive distributional fit out of tests and lets callers plug in a
    custom language model.
    """

    def __init__(self, config: PipelineConfig, oracle: ReplacementOracle | None = None):
        self.config = config
        self._oracle_override = oracle
        self._oracle: ReplacementOracle | None = None
        self._segments_cache: tuple[str, tuple[Segment, ...]] | None = None
        self.workdir = Path(config.paths.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------------
    # artifact bookkeeping
    # ------------------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.workdir / name

    def _require_file(self, path: str | Path, what: str) -> Path:
        p = Path(path)
        if not str(path):
            raise MissingInputError(f"no {what} configured")
        if not p.exists():
            raise MissingInputError(f"{what} not found: {p}")
        return p

    def _input_hashes(self, inputs: Mapping[str, Path]) -> dict[str, str]:
        return {name: file_sha256(p) for name, p in sorted(inputs.items())}

    def _fresh_pickle(self, name: str, inputs: Mapping[str, Path]) -> dict | None:
        path = self.path(name)
        if not path.exists():
            return None
        try:
            payload = corpus.load_snapshot(path, self.config.config_hash)
        except SnapshotError:
            return None
        if payload.get("stage_inputs") != self._input_hashes(inputs):
            return None
        return payload

    def _save_pickle(self, name: str, payload: dict, inputs: Mapping[str, Path]) -> None:
        payload = {"stage_inputs": self._input_hashes(inputs), **payload}
        corpus.save_snapshot(self.path(name), payload, self.config.config_hash)

    def _fresh_json(self, name: str, inputs: Mapping[str, Path]) -> dict | None:
        path = self.path(name)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if doc.get("format_version") != corpus.SNAPSHOT_FORMAT_VERSION:
            return None
        if doc.get("config_hash") != self.config.config_hash:
            return None
        if doc.get("stage_inputs") != self._input_hashes(inputs):
            return None
        return doc

    def _save_json(self, name: str, payload: dict, inputs: Mapping[str, Path]) -> None:
        doc = {
            "format_version": corpus.SNAPSHOT_FORMAT_VERSION,
            "config_hash": self.config.config_hash,
            "stage_inputs": self._input_hashes(inputs),
            **payload,
        }
        self.path(name).write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    # sidecars guard exchange files whose format other tools rely on
    def _meta_fresh(self, name: str, inputs: Mapping[str, Path]) -> bool:
        path = self.path(name)
        meta_path = self.path(name + ".meta.json")
        if not path.exists() or not meta_path.exists():
            return False
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return False
        return (
            meta.get("config_hash") == self.config.config_hash
            and meta.get("stage_inputs") == self._input_hashes(inputs)
            and meta.get("output_sha256") == file_sha256(path)
        )

    def _write_meta(self, name: str, inputs: Mapping[str, Path]) -> None:
        meta = {
            "format_version": corpus.SNAPSHOT_FORMAT_VERSION,
            "config_hash": self.config.config_hash,
            "stage_inputs": self._input_hashes(inputs),
            "output_sha256": file_sha256(self.path(name)),
        }
        self.path(name + ".meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )

    def _csv_fresh(self, path: Path, inputs: Mapping[str, Path]) -> bool:
        if not path.exists():
            return False
        want = {f"# input {k}={v}" for k, v in self._input_hashes(inputs).items()}
        want.add(f"# config_hash={self.config.config_hash}")
        got = set()
        try:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.startswith("#"):
                        break
                    if not line.startswith("# format_version"):
                        got.add(line.rstrip("\n"))
        except OSError:
            return False
        return got == want

    def _write_csv(
        self,
        path: Path,
        header: Sequence[str],
        rows: Iterable[Sequence[object]],
        inputs: Mapping[str, Path],
    ) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# format_version={corpus.SNAPSHOT_FORMAT_VERSION}"]
        lines.append(f"# config_hash={self.config.config_hash}")
        for k, v in self._input_hashes(inputs).items():
            lines.append(f"# input {k}={v}")
        lines.append(",".join(header))
        for row in rows:
            cells = [str(c) for c in row]
            for c in cells:
                if "," in c or "\n" in c:
                    raise ValueError(f"CSV cell would need quoting: {c!r}")
            lines.append(",".join(cells))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def read_csv(path: str | Path) -> list[dict[str, str]]:
        """Rows of one of this pipeline's CSV exports, comments skipped."""
        rows = []
        header: list[str] | None = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                rows.append(dict(zip(header, line.split(","))))
        return rows

    # ------------------------------------------------------------------
    # corpus stages
    # ------------------------------------------------------------------

    def episodes_path(self) -> Path:
        return self._require_file(self.config.paths.episodes, "episode transcript file")

    def ingest(self) -> corpus.IngestResult:
        """Validate the transcript file; no artifact is written."""
        return corpus.ingest_episodes(self.episodes_path(), stations=self.config.stations)

    def segment(self, force: bool = False) -> tuple[Segment, ...]:
        inputs = {"episodes": self.episodes_path()}
        if not force:
            payload = self._fresh_pickle(SEGMENTS_FILE, inputs)
            if payload is not None:
                self._segments_cache = (
                    file_sha256(self.path(SEGMENTS_FILE)), payload["segments"]
                )
                return payload["segments"]
        result = self.ingest()
        segments: list[Segment] = []
        for ep in result.episodes:
            segments.extend(corpus.segment_episode(ep, self.config.segmentation.max_words))
        out = tuple(segments)
        self._save_pickle(SEGMENTS_FILE, {
            "segments": out,
            "issues": tuple(result.issues),
            "n_episodes": len(result.episodes),
        }, inputs)
        self._segments_cache = (file_sha256(self.path(SEGMENTS_FILE)), out)
        return out

    def _segments(self) -> tuple[Segment, ...]:
        # the memory shortcut is only honest while the artifact on disk is
        # the one it was read from; another config sharing the workdir may
        # have restamped it in between
        path = self.path(SEGMENTS_FILE)
        if self._segments_cache is not None and path.exists():
            sha, segs = self._segments_cache
            if file_sha256(path) == sha:
                return segs
        return self.segment()

    def _segment_tokens(self) -> list[tuple[str, list[str]]]:
        return [(s.id, corpus.tokenize(s.text)) for s in self._segments()]

    def _get_oracle(self) -> ReplacementOracle:
        if self._oracle_override is not None:
            return self._oracle_override
        if self._oracle is None:
            weak = self.config.weak
            if weak.oracle == "file":
                path = self._require_file(
                    self.config.paths.replacements, "replacement list file"
                )
                self._oracle = weaksup.FileBackedOracle.from_file(path)
            else:
                oracle = weaksup.DistributionalOracle(
                    window=weak.window, min_count=weak.min_count
                )
                oracle.fit(tokens for _, tokens in self._segment_tokens())
                self._oracle = oracle
        return self._oracle

    # ------------------------------------------------------------------
    # topic layers
    # ------------------------------------------------------------------

    def expand_dict(self, force: bool = False) -> list[TopicDictionary]:
        inputs = {"segments": self.path(SEGMENTS_FILE)}
        self._segments()
        if not force:
            doc = self._fresh_json(DICTIONARIES_FILE, inputs)
            if doc is not None:
                return [
                    TopicDictionary(d["topic_id"], d["label"], tuple(d["words"]))
                    for d in doc["dictionaries"]
                ]
        oracle = self._get_oracle()
        seg_tokens = self._segment_tokens()
        weak_cfg = self.config.weak
        dictionaries = []
        for spec in sorted(self.config.topics, key=lambda t: t.id):
            label_tokens = corpus.tokenize(spec.label)
            lists = weaksup.collect_replacements(
                seg_tokens, label_tokens, oracle, k=weak_cfg.top_k
            )
            words = weaksup.build_class_vocabulary(lists, cap=weak_cfg.vocab_cap)
            d = TopicDictionary(spec.id, spec.label, words)
            removals = weak_cfg.removals.get(spec.id, ())
            if removals:
                d = weaksup.review_vocabulary(d, removals)
            dictionaries.append(d)
        self._save_json(DICTIONARIES_FILE, {
            "dictionaries": [
                {"topic_id": d.topic_id, "label": d.label, "words": list(d.words)}
                for d in dictionaries
            ],
        }, inputs)
        return dictionaries

    def weak_classify(self, force: bool = False) -> dict[str, WeakLabel]:
        inputs = {
            "segments": self.path(SEGMENTS_FILE),
            "dictionaries": self.path(DICTIONARIES_FILE),
        }
        dictionaries = self.expand_dict()
        if not force:
            payload = self._fresh_pickle(WEAK_FILE, inputs)
            if payload is not None:
                return payload["weak_labels"]
        weak_cfg = self.config.weak
        labels = weaksup.weak_classify_corpus(
            self._segment_tokens(),
            self._get_oracle(),
            dictionaries,
            k=weak_cfg.top_k,
            threshold=weak_cfg.overlap_threshold,
        )
        self._save_pickle(WEAK_FILE, {"weak_labels": labels}, inputs)
        return labels

    # ------------------------------------------------------------------
    # annotation stages
    # ------------------------------------------------------------------

    def sample_annotation(self, force: bool = False) -> list[annotation.AnnotationTask]:
        inputs = {
            "segments": self.path(SEGMENTS_FILE),
            "weak_labels": self.path(WEAK_FILE),
        }
        weak_labels = self.weak_classify()
        if not force and self._meta_fresh(TASKS_FILE, inputs):
            return annotation.import_tasks(self.path(TASKS_FILE))
        ann = self.config.annotation
        tasks = annotation.sample_tasks(
            weak_labels,
            self._segments(),
            topics=self.config.topic_ids(),
            stations=self.config.stations,
            per_cell=ann.per_cell,
            n_candidates=ann.n_candidates,
            seed=ann.seed,
        )
        annotation.export_tasks(self.path(TASKS_FILE), tasks)
        self._write_meta(TASKS_FILE, inputs)
        return tasks

    def import_annotations(
        self,
        records_path: str | Path | None = None,
        force: bool = False,
    ) -> tuple[list[annotation.GroundTruthLabel], list[annotation.RecordIssue]]:
        records_file = self._require_file(
            records_path if records_path is not None else self.config.paths.records,
            "annotator record file",
        )
        inputs = {"tasks": self.path(TASKS_FILE), "records": records_file}
        tasks = {t.task_id: t for t in self.sample_annotation()}
        if not force and self._meta_fresh(GROUND_TRUTH_FILE, inputs):
            return annotation.import_ground_truth(self.path(GROUND_TRUTH_FILE)), []
        records, issues = annotation.import_records(records_file, tasks)
        resolutions = annotation.aggregate_records(
            records, min_annotators=self.config.annotation.min_annotators
        )
        labels = annotation.ground_truth_labels(tasks, resolutions)
        annotation.export_ground_truth(self.path(GROUND_TRUTH_FILE), labels)
        self._write_meta(GROUND_TRUTH_FILE, inputs)
        return labels, issues

    # ------------------------------------------------------------------
    # supervised layer
    # ------------------------------------------------------------------

    def _phrase_vector(self, segment: Segment) -> corpus.PhraseVector:
        return corpus.phrase_counts(
            segment.text,
            stoplist=frozenset(self.config.stoplist),
            confounders=self.config.confounders,
        )

    def train(self, jobs: int = 1, force: bool = False) -> dict:
        inputs = {
            "segments": self.path(SEGMENTS_FILE),
            "ground_truth": self.path(GROUND_TRUTH_FILE),
        }
        if not self.path(GROUND_TRUTH_FILE).exists():
            raise MissingInputError(
                "no ground truth artifact; run import-annotations first"
            )
        if not force:
            payload = self._fresh_pickle(MODELS_FILE, inputs)
            if payload is not None:
                return payload
        labels = annotation.import_ground_truth(self.path(GROUND_TRUTH_FILE))
        by_id = {s.id: s for s in self._segments()}
        cls_cfg = self.config.classify

        per_station: dict[str, list[annotation.GroundTruthLabel]] = {}
        for lab in labels:
            seg = by_id.get(lab.segment_id)
            if seg is not None:
                per_station.setdefault(seg.station, []).append(lab)

        cells: dict[tuple[str, str], classify.CellModel] = {}
        skipped: dict[tuple[str, str], str] = {}
        vocabularies: dict[str, tuple[str, ...]] = {}
        jobs_list: list[tuple[str, str, object, object, classify.Vocabulary]] = []

        for station in sorted(per_station):
            station_labels = sorted(per_station[station], key=lambda l: l.segment_id)
            pvs = [self._phrase_vector(by_id[l.segment_id]) for l in station_labels]
            vocab = classify.build_vocabulary(pvs, min_df=cls_cfg.min_df)
            if len(vocab) == 0:
                for z in self.config.topic_ids():
                    skipped[(z, station)] = "empty vocabulary"
                continue
            vocabularies[station] = vocab.words
            X = classify.featurize_batch(pvs, vocab)
            truths = [l.topic for l in station_labels]
            for z in self.config.topic_ids():
                pos_rows = [i for i, t in enumerate(truths) if t == z]
                neg_rows = [i for i, t in enumerate(truths) if t != z]
                if not pos_rows or not neg_rows:
                    skipped[(z, station)] = (
                        f"needs both classes ({len(pos_rows)} positive "
                        f"of {len(truths)})"
                    )
                    continue
                # the annotated pool is dominated by other topics; keep a
                # bounded multiple of the positives so the grid separates
                cap = max(int(round(cls_cfg.negative_ratio * len(pos_rows))), 1)
                if len(neg_rows) > cap:
                    neg_rng = random.Random(
                        f"{cls_cfg.seed}:negatives:{z}:{station}"
                    )
                    neg_rows = neg_rng.sample(neg_rows, cap)
                rows = sorted(pos_rows + neg_rows)
                y = [1.0 if truths[i] == z else 0.0 for i in rows]
                jobs_list.append((z, station, X[rows], y, vocab))

        def run(args):
            z, station, X, y, vocab = args
            return (z, station), classify.train_cell(
                z, station, X, np.asarray(y), vocab,
                l2_grid=cls_cfg.l2_grid,
                n_folds=cls_cfg.n_folds,
                seed=cls_cfg.seed,
                max_iter=cls_cfg.max_iter,
            )

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run, jobs_list))
        else:
            results = [run(args) for args in jobs_list]
        for key, model in sorted(results, key=lambda kv: kv[0]):
            cells[key] = model

        trained = list(cells.values())
        mean_p, sd_p = classify.precision_summary(trained)
        payload = {
            "cells": cells,
            "skipped": dict(sorted(skipped.items())),
            "vocabularies": vocabularies,
            "report": TrainReport(
                n_cells=len(cells),
                n_skipped=len(skipped),
                mean_precision=mean_p,
                sd_precision=sd_p,
            ),
        }
        self._save_pickle(MODELS_FILE, payload, inputs)
        return payload

    def refine(self, force: bool = False) -> dict:
        inputs = {
            "segments": self.path(SEGMENTS_FILE),
            "weak_labels": self.path(WEAK_FILE),
            "models": self.path(MODELS_FILE),
        }
        weak_labels = self.weak_classify()
        models = self.train()
        if not force:
            payload = self._fresh_pickle(REFINED_FILE, inputs)
            if payload is not None:
                return payload

        by_id = {s.id: s for s in self._segments()}
        weak_members: dict[tuple[str, str], list[str]] = {}
        for sid in sorted(weak_labels):
            seg = by_id.get(sid)
            if seg is None:
                continue
            for z in weak_labels[sid].topics:
                weak_members.setdefault((z, seg.station), []).append(sid)

        vocab_by_station = {
            st: classify.Vocabulary(words)
            for st, words in models["vocabularies"].items()
        }
        members: dict[tuple[str, str], tuple[str, ...]] = {}
        fallback: list[tuple[str, str]] = []
        for key in sorted(weak_members):
            z, station = key
            sids = weak_members[key]
            cell = models["cells"].get(key)
            vocab = vocab_by_station.get(station)
            if cell is None or vocab is None:
                members[key] = tuple(sids)
                fallback.append(key)
                continue
            X = classify.featurize_batch(
                [self._phrase_vector(by_id[sid]) for sid in sids], vocab
            )
            kept = classify.refine_members(cell, sids, X, vocab.hash)
            members[key] = tuple(kept)

        precision = self._refinement_precision(weak_members, members)
        payload = {
            "members": members,
            "weak_members": {k: tuple(v) for k, v in weak_members.items()},
            "fallback_cells": tuple(fallback),
            "precision": precision,
        }
        self._save_pickle(REFINED_FILE, payload, inputs)
        return payload

    def _refinement_precision(
        self,
        weak_members: Mapping[tuple[str, str], Sequence[str]],
        refined_members: Mapping[tuple[str, str], Sequence[str]],
    ) -> dict[str, dict[str, float]]:
        """Annotated-segment precision of both layers, per topic."""
        truth_path = self.path(GROUND_TRUTH_FILE)
        if not truth_path.exists():
            return {}
        truth = {
            l.segment_id: l.topic
            for l in annotation.import_ground_truth(truth_path)
        }
        out: dict[str, dict[str, float]] = {}
        for z in self.config.topic_ids():
            stats = {}
            for name, table in (("weak", weak_members), ("refined", refined_members)):
                claimed = {
                    sid
                    for (topic, _station), sids in table.items()
                    if topic == z
                    for sid in sids
                    if sid in truth
                }
                stats[f"n_{name}"] = float(len(claimed))
                stats[name] = (
                    sum(1 for sid in claimed if truth[sid] == z) / len(claimed)
                    if claimed else 0.0
                )
            out[z] = stats
        return out

    def topic_members(self) -> dict[str, set[str]]:
        """Refined segment ids per topic, pooled over stations."""
        refined = self.refine()
        out: dict[str, set[str]] = {}
        for (z, _station), sids in refined["members"].items():
            out.setdefault(z, set()).update(sids)
        return out

    # ------------------------------------------------------------------
    # measurement stages
    # ------------------------------------------------------------------

    def _windows(self, days: Sequence[date]) -> list[tuple[str, str, list[date]]]:
        """(kind, name, window days) for months and eras in the data range."""
        if not days:
            return []
        first, last = min(days), max(days)
        out: list[tuple[str, str, list[date]]] = []
        for month in metrics.iter_months(first, last):
            window = metrics.days_in_range(month, metrics.next_month(month))
            out.append(("month", f"{month.year:04d}-{month.month:02d}", window))
        all_days = metrics.days_in_range(first, last + timedelta(days=1))
        for era in metrics.ERA_NAMES:
            window = [d for d in all_days if metrics.era_of(d) == era]
            if window:
                out.append(("era", era, window))
        return out

    def polarization(self, force: bool = False) -> list[dict]:
        pol = self.config.polarization
        inputs = {"segments": self.path(SEGMENTS_FILE)}
        if pol.by_topic:
            inputs["refined"] = self.path(REFINED_FILE)
        self._segments()
        if pol.by_topic:
            self.refine()
        out_path = self.path(POLARIZATION_FILE)
        if not force and self._csv_fresh(out_path, inputs):
            return self._parse_polarization(out_path)

        segments = self._segments()
        stoplist = frozenset(self.config.stoplist)
        confounders = self.config.confounders
        source_set = set(pol.source_stations)
        target_set = set(pol.target_stations)

        def vectors(segs: Iterable[Segment]) -> list[corpus.PhraseVector]:
            return [
                corpus.phrase_counts(s.text, stoplist=stoplist, confounders=confounders)
                for s in segs
            ]

        topic_tables: list[tuple[str, set[str] | None]] = [("all", None)]
        if pol.by_topic:
            members = self.topic_members()
            topic_tables += [(z, members.get(z, set())) for z in self.config.topic_ids()]

        rows = []
        days = [s.air_date for s in segments]
        for kind, name, window in self._windows(days):
            in_window = set(window)
            for topic, member_set in topic_tables:
                src = [
                    s for s in segments
                    if s.station in source_set and s.air_date in in_window
                    and (member_set is None or s.id in member_set)
                ]
                tgt = [
                    s for s in segments
                    if s.station in target_set and s.air_date in in_window
                    and (member_set is None or s.id in member_set)
                ]
                vs, vt = vectors(src), vectors(tgt)
                if not any(not v.is_empty() for v in vs) or not any(
                    not v.is_empty() for v in vt
                ):
                    continue
                lo = polarize.leave_out_estimate(vs, vt, zero_division=pol.zero_division)
                plug = polarize.plug_in_estimate(vs, vt)
                rows.append({
                    "window_kind": kind,
                    "window": name,
                    "topic": topic,
                    "n_source": len(src),
                    "n_target": len(tgt),
                    "leave_out": lo,
                    "plug_in": plug,
                })
        self._write_csv(
            out_path,
            ["window_kind", "window", "topic", "n_source", "n_target",
             "leave_out", "plug_in"],
            [[r["window_kind"], r["window"], r["topic"], r["n_source"],
              r["n_target"], r["leave_out"], r["plug_in"]] for r in rows],
            inputs,
        )
        return rows

    def _parse_polarization(self, path: Path) -> list[dict]:
        rows = []
        for r in self.read_csv(path):
            rows.append({
                "window_kind": r["window_kind"],
                "window": r["window"],
                "topic": r["topic"],
                "n_source": int(r["n_source"]),
                "n_target": int(r["n_target"]),
                "leave_out": float(r["leave_out"]),
                "plug_in": float(r["plug_in"]),
            })
        return rows

    def _daily_shares(self) -> dict[tuple[str, date], dict[str, float]]:
        members = self.topic_members()
        segment_topics: dict[str, set[str]] = {}
        for z, sids in members.items():
            for sid in sids:
                segment_topics.setdefault(sid, set()).add(z)
        return metrics.compute_daily_shares(
            self._segments(), segment_topics, self.config.topic_ids()
        )

    def divergence(self, force: bool = False) -> list[dict]:
        inputs = {
            "segments": self.path(SEGMENTS_FILE),
            "refined": self.path(REFINED_FILE),
        }
        self.refine()
        out_path = self.path(DIVERGENCE_FILE)
        if not force and self._csv_fresh(out_path, inputs):
            return [
                {**r, "divergence": float(r["divergence"])}
                for r in self.read_csv(out_path)
            ]
        daily = self._daily_shares()
        topics = self.config.topic_ids()
        stations = self.config.stations
        days = [s.air_date for s in self._segments()]
        rows = []
        for kind, name, window in self._windows(days):
            for i, st_a in enumerate(stations):
                for st_b in stations[i + 1:]:
                    d = metrics.divergence_between(daily, st_a, st_b, window, topics)
                    if d is None:
                        continue
                    rows.append({
                        "window_kind": kind,
                        "window": name,
                        "station_a": st_a,
                        "station_b": st_b,
                        "divergence": d,
                    })
        self._write_csv(
            out_path,
            ["window_kind", "window", "station_a", "station_b", "divergence"],
            [[r["window_kind"], r["window"], r["station_a"], r["station_b"],
              r["divergence"]] for r in rows],
            inputs,
        )
        return rows

    def consumption(self, force: bool = False) -> list[dict]:
        panel_path = self._require_file(self.config.paths.panel, "viewing panel file")
        inputs = {"panel": panel_path}
        out_path = self.path(CONSUMPTION_FILE)
        cons = self.config.consumption
        metric_keys = ["active"] + [
            f"{name}_{int(round(thr * 100))}"
            for name in sorted(cons.station_sets)
            for thr in cons.thresholds
        ]
        if not force and self._csv_fresh(out_path, inputs):
            out = []
            for r in self.read_csv(out_path):
                row: dict = {"month": date.fromisoformat(r["month"])}
                for k in metric_keys:
                    row[k] = float(r[k])
                out.append(row)
            return out
        rows, issues = metrics.read_panel(panel_path, stations=self.config.stations)
        if issues:
            raise InputValidationError(
                f"viewing panel file has {len(issues)} invalid rows; "
                f"first: line {issues[0].line_no}: {issues[0].message}"
            )
        series = metrics.consumption_series(rows, cons.station_sets, cons.thresholds)
        self._write_csv(
            out_path,
            ["month"] + metric_keys,
            [[e["month"].isoformat()] + [e[k] for k in metric_keys] for e in series],
            inputs,
        )
        return series

    # ------------------------------------------------------------------
    # figure exports
    # ------------------------------------------------------------------

    def export_figures(self, force: bool = False) -> dict[str, Path]:
        fig_dir = self.path(FIGURES_DIR)
        fig_dir.mkdir(parents=True, exist_ok=True)
        window = self.config.export.smooth_window
        out: dict[str, Path] = {}

        # shares and divergence need the refined topic layer
        self.refine()
        seg_days = [s.air_date for s in self._segments()]
        months = metrics.iter_months(min(seg_days), max(seg_days)) if seg_days else []

        common = {
            "segments": self.path(SEGMENTS_FILE),
            "refined": self.path(REFINED_FILE),
        }

        path = fig_dir / FIGURE_FILES[0]
        out["fig1"] = path
        if force or not self._csv_fresh(path, common):
            daily = self._daily_shares()
            rows = []
            for station in self.config.stations:
                per_topic: dict[str, list[tuple[str, float]]] = {}
                for month in months:
                    days = metrics.days_in_range(month, metrics.next_month(month))
                    mean = metrics.window_mean_shares(
                        daily, station, days, self.config.topic_ids()
                    )
                    if mean is None:
                        continue
                    label = f"{month.year:04d}-{month.month:02d}"
                    for z in self.config.topic_ids():
                        per_topic.setdefault(z, []).append((label, mean[z]))
                for z in sorted(per_topic):
                    labels = [m for m, _ in per_topic[z]]
                    vals = _rolling_mean([v for _, v in per_topic[z]], window)
                    for m, v in zip(labels, vals):
                        rows.append([station, m, z, v])
            self._write_csv(path, ["station", "month", "topic", "share"], rows, common)

        path = fig_dir / FIGURE_FILES[1]
        out["fig2"] = path
        div_inputs = {"divergence": self.path(DIVERGENCE_FILE)}
        div_rows = self.divergence()
        if force or not self._csv_fresh(path, div_inputs):
            rows = []
            monthly = [r for r in div_rows if r["window_kind"] == "month"]
            pairs = sorted({(r["station_a"], r["station_b"]) for r in monthly})
            for st_a, st_b in pairs:
                series = [r for r in monthly
                          if (r["station_a"], r["station_b"]) == (st_a, st_b)]
                series.sort(key=lambda r: r["window"])
                vals = _rolling_mean([r["divergence"] for r in series], window)
                for r, v in zip(series, vals):
                    rows.append([st_a, st_b, r["window"], v])
            self._write_csv(path, ["station_a", "station_b", "month", "divergence"],
                            rows, div_inputs)

        path = fig_dir / FIGURE_FILES[2]
        out["fig3"] = path
        pol_inputs = {"polarization": self.path(POLARIZATION_FILE)}
        pol_rows = self.polarization()
        if force or not self._csv_fresh(path, pol_inputs):
            series = [r for r in pol_rows
                      if r["window_kind"] == "month" and r["topic"] == "all"]
            series.sort(key=lambda r: r["window"])
            lo = _rolling_mean([r["leave_out"] for r in series], window)
            plug = _rolling_mean([r["plug_in"] for r in series], window)
            rows = [[r["window"], a, b] for r, a, b in zip(series, lo, plug)]
            self._write_csv(path, ["month", "leave_out", "plug_in"], rows, pol_inputs)

        path = fig_dir / FIGURE_FILES[3]
        if self.config.paths.panel:
            out["fig4"] = path
            cons_inputs = {"consumption": self.path(CONSUMPTION_FILE)}
            cons_rows = self.consumption()
            if force or not self._csv_fresh(path, cons_inputs):
                cons = self.config.consumption
                metric_keys = ["active"] + [
                    f"{name}_{int(round(thr * 100))}"
                    for name in sorted(cons.station_sets)
                    for thr in cons.thresholds
                ]
                cons_rows = sorted(cons_rows, key=lambda r: r["month"])
                smoothed = {
                    k: _rolling_mean([r[k] for r in cons_rows], window)
                    for k in metric_keys
                }
                rows = [
                    [r["month"].isoformat()] + [smoothed[k][i] for k in metric_keys]
                    for i, r in enumerate(cons_rows)
                ]
                self._write_csv(path, ["month"] + metric_keys, rows, cons_inputs)

        path = fig_dir / FIGURE_FILES[4]
        out["fig5"] = path
        seg_inputs = {"segments": self.path(SEGMENTS_FILE)}
        if force or not self._csv_fresh(path, seg_inputs):
            rows = []
            exp = self.config.export
            pol = self.config.polarization
            stoplist = frozenset(self.config.stoplist)
            segments = self._segments()
            for kind, name, window in self._windows(seg_days):
                if kind != "era":
                    continue
                in_window = set(window)
                vs = [corpus.phrase_counts(s.text, stoplist=stoplist,
                                           confounders=self.config.confounders)
                      for s in segments
                      if s.station in set(pol.source_stations)
                      and s.air_date in in_window]
                vt = [corpus.phrase_counts(s.text, stoplist=stoplist,
                                           confounders=self.config.confounders)
                      for s in segments
                      if s.station in set(pol.target_stations)
                      and s.air_date in in_window]
                if not any(not v.is_empty() for v in vs) or not any(
                    not v.is_empty() for v in vt
                ):
                    continue
                scored = [
                    s for s in polarize.partisan_scores(vs, vt)
                    if s.count_source + s.count_target >= exp.min_phrase_count
                ]
                for rank, s in enumerate(scored[:exp.top_phrases], start=1):
                    rows.append([name, rank, s.phrase, s.rho,
                                 s.count_source, s.count_target])
            self._write_csv(
                path,
                ["era", "rank", "phrase", "rho", "count_source", "count_target"],
                rows, seg_inputs,
            )

        path = fig_dir / FIGURE_FILES[5]
        out["fig6"] = path
        ref_inputs = {"refined": self.path(REFINED_FILE)}
        if force or not self._csv_fresh(path, ref_inputs):
            refined = self.refine()
            rows = []
            for z in self.config.topic_ids():
                stats = refined["precision"].get(z)
                if not stats:
                    continue
                rows.append([z, stats["weak"], stats["refined"],
                             int(stats["n_weak"]), int(stats["n_refined"])])
            self._write_csv(
                path,
                ["topic", "weak_precision", "refined_precision",
                 "n_weak_annotated", "n_refined_annotated"],
                rows, ref_inputs,
            )
        return out
