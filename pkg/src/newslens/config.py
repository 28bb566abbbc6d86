"""Pipeline configuration: YAML loading, validation, and content hashing.

Every stage artifact and CSV export is stamped with ``config_hash``, a
digest of the semantic settings (filesystem paths excluded, so moving a
project directory does not invalidate results). Unknown keys anywhere in
the file are rejected outright; a typo must fail loudly, not silently run
with a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .corpus import DEFAULT_STATIONS

CONFIG_FORMAT_VERSION = 1

DEFAULT_TOPICS: tuple[tuple[str, str], ...] = (
    ("abortion", "abortion"),
    ("china", "china"),
    ("climate_change", "climate change"),
    ("congress", "congress"),
    ("crime", "crime"),
    ("disasters", "disasters"),
    ("drugs", "drugs"),
    ("economy", "economy"),
    ("education", "education"),
    ("elections", "elections"),
    ("energy", "energy"),
    ("ethnicity", "ethnicity"),
    ("government", "government"),
    ("guns", "guns"),
    ("healthcare", "healthcare"),
    ("immigration", "immigration"),
    ("military", "military"),
    ("religion", "religion"),
    ("russia", "russia"),
    ("scandals", "scandals"),
    ("taxes", "taxes"),
    ("technology", "technology"),
    ("terrorism", "terrorism"),
    ("vaccination", "vaccination"),
)

DEFAULT_STOPLIST = (
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from",
    "had", "has", "have", "he", "her", "his", "i", "in", "is", "it", "its",
    "of", "on", "or", "she", "that", "the", "they", "this", "to", "was",
    "we", "were", "will", "with", "you",
)


class ConfigError(Exception):
    """Configuration file is malformed or inconsistent."""


@dataclass(frozen=True)
class TopicSpec:
    id: str
    label: str


@dataclass(frozen=True)
class SegmentationConfig:
    max_words: int = 150


@dataclass(frozen=True)
class WeakConfig:
    oracle: str = "distributional"  # or "file"
    top_k: int = 50
    vocab_cap: int = 100
    overlap_threshold: float = 0.20
    window: int = 5
    min_count: int = 2
    removals: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class AnnotationConfig:
    per_cell: int = 50
    n_candidates: int = 3
    min_annotators: int = 4
    annotator_cap: int = 7
    seed: int = 0


@dataclass(frozen=True)
class ClassifyConfig:
    l2_grid: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    n_folds: int = 5
    min_df: int = 2
    # batch descent on L1-normalized counts moves slowly; fewer iterations
    # tends to leave cell models stuck near the class prior
    max_iter: int = 1200
    # negatives kept per positive when training a cell; annotated pools are
    # dominated by other-topic segments and the grid expects rough balance
    negative_ratio: float = 3.0
    seed: int = 0


@dataclass(frozen=True)
class PolarizationConfig:
    source_stations: tuple[str, ...] = ("FNC",)
    target_stations: tuple[str, ...] = ("CNN", "MSNBC")
    zero_division: str = "neutral"
    by_topic: bool = False


@dataclass(frozen=True)
class ConsumptionConfig:
    thresholds: tuple[float, ...] = (0.50, 0.75)
    station_sets: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: {
        "broadcast": ("ABC", "CBS", "NBC"),
        "left_cable": ("CNN", "MSNBC"),
        "right_cable": ("FNC",),
    })


@dataclass(frozen=True)
class ExportConfig:
    smooth_window: int = 1
    top_phrases: int = 50
    min_phrase_count: int = 10


@dataclass(frozen=True)
class PathsConfig:
    workdir: str = "work"
    episodes: str = ""
    panel: str = ""
    replacements: str = ""
    records: str = ""


@dataclass(frozen=True)
class PipelineConfig:
    stations: tuple[str, ...] = DEFAULT_STATIONS
    topics: tuple[TopicSpec, ...] = tuple(TopicSpec(i, l) for i, l in DEFAULT_TOPICS)
    stoplist: tuple[str, ...] = DEFAULT_STOPLIST
    confounders: tuple[str, ...] = ()
    segmentation: SegmentationConfig = SegmentationConfig()
    weak: WeakConfig = WeakConfig()
    annotation: AnnotationConfig = AnnotationConfig()
    classify: ClassifyConfig = ClassifyConfig()
    polarization: PolarizationConfig = PolarizationConfig()
    consumption: ConsumptionConfig = ConsumptionConfig()
    export: ExportConfig = ExportConfig()
    paths: PathsConfig = PathsConfig()

    def topic_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.topics)

    def semantic_dict(self) -> dict:
        """Everything that affects results; paths are deliberately left out."""
        d = dataclasses.asdict(self)
        del d["paths"]
        d["format_version"] = CONFIG_FORMAT_VERSION
        return d

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def workdir(self) -> Path:
        return Path(self.paths.workdir)


def _check_keys(section: str, obj: Mapping[str, Any], allowed: Sequence[str]) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown keys in {section}: {', '.join(sorted(unknown))}"
        )


def _tuple_of_str(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{where} must be a list of strings")
    return tuple(value)


def _section(cls, raw: Mapping[str, Any] | None, name: str, convert=None):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{name} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(name, raw, list(fields))
    kwargs = dict(raw)
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {name} section: {exc}") from exc


def config_from_dict(raw: Mapping[str, Any]) -> PipelineConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a mapping")
    top_level = (
        "stations", "topics", "stoplist", "confounders", "segmentation", "weak",
        "annotation", "classify", "polarization", "consumption", "export", "paths",
    )
    _check_keys("config", raw, top_level)

    kwargs: dict[str, Any] = {}
    if "stations" in raw:
        kwargs["stations"] = _tuple_of_str(raw["stations"], "stations")
    if "topics" in raw:
        topics = []
        for i, entry in enumerate(raw["topics"]):
            if not isinstance(entry, Mapping):
                raise ConfigError(f"topics[{i}] must be a mapping with id and label")
            _check_keys(f"topics[{i}]", entry, ("id", "label"))
            if "id" not in entry:
                raise ConfigError(f"topics[{i}] is missing an id")
            topic_id = str(entry["id"])
            topics.append(TopicSpec(topic_id, str(entry.get("label", topic_id))))
        kwargs["topics"] = tuple(topics)
    if "stoplist" in raw:
        kwargs["stoplist"] = _tuple_of_str(raw["stoplist"], "stoplist")
    if "confounders" in raw:
        kwargs["confounders"] = _tuple_of_str(raw["confounders"], "confounders")

    def conv_weak(kw):
        if "removals" in kw:
            if not isinstance(kw["removals"], Mapping):
                raise ConfigError("weak.removals must map topic id to a word list")
            kw["removals"] = {
                str(k): _tuple_of_str(v, f"weak.removals[{k}]")
                for k, v in kw["removals"].items()
            }
        return kw

    def conv_classify(kw):
        if "l2_grid" in kw:
            kw["l2_grid"] = tuple(float(x) for x in kw["l2_grid"])
        return kw

    def conv_polar(kw):
        for key in ("source_stations", "target_stations"):
            if key in kw:
                kw[key] = _tuple_of_str(kw[key], f"polarization.{key}")
        return kw

    def conv_consumption(kw):
        if "thresholds" in kw:
            kw["thresholds"] = tuple(float(x) for x in kw["thresholds"])
        if "station_sets" in kw:
            if not isinstance(kw["station_sets"], Mapping):
                raise ConfigError("consumption.station_sets must be a mapping")
            kw["station_sets"] = {
                str(k): _tuple_of_str(v, f"consumption.station_sets[{k}]")
                for k, v in kw["station_sets"].items()
            }
        return kw

    kwargs["segmentation"] = _section(SegmentationConfig, raw.get("segmentation"), "segmentation")
    kwargs["weak"] = _section(WeakConfig, raw.get("weak"), "weak", conv_weak)
    kwargs["annotation"] = _section(AnnotationConfig, raw.get("annotation"), "annotation")
    kwargs["classify"] = _section(ClassifyConfig, raw.get("classify"), "classify", conv_classify)
    kwargs["polarization"] = _section(PolarizationConfig, raw.get("polarization"), "polarization", conv_polar)
    kwargs["consumption"] = _section(ConsumptionConfig, raw.get("consumption"), "consumption", conv_consumption)
    kwargs["export"] = _section(ExportConfig, raw.get("export"), "export")
    kwargs["paths"] = _section(PathsConfig, raw.get("paths"), "paths")

    config = PipelineConfig(**kwargs)
    validate_config(config)
    return config


def validate_config(config: PipelineConfig) -> None:
    if not config.stations:
        raise ConfigError("stations must not be empty")
    if len(set(config.stations)) != len(config.stations):
        raise ConfigError("stations contains duplicates")
    ids = config.topic_ids()
    if not ids:
        raise ConfigError("topics must not be empty")
    if len(set(ids)) != len(ids):
        raise ConfigError("topic ids contain duplicates")
    if config.segmentation.max_words < 1:
        raise ConfigError("segmentation.max_words must be >= 1")
    if config.weak.oracle not in ("distributional", "file"):
        raise ConfigError("weak.oracle must be 'distributional' or 'file'")
    if not 0.0 < config.weak.overlap_threshold <= 1.0:
        raise ConfigError("weak.overlap_threshold must be in (0, 1]")
    if config.weak.top_k < 1 or config.weak.vocab_cap < 1:
        raise ConfigError("weak.top_k and weak.vocab_cap must be positive")
    unknown_removals = set(config.weak.removals) - set(ids)
    if unknown_removals:
        raise ConfigError(
            f"weak.removals references unknown topics: {', '.join(sorted(unknown_removals))}"
        )
    ann = config.annotation
    if ann.per_cell < 1 or ann.n_candidates < 1:
        raise ConfigError("annotation.per_cell and n_candidates must be positive")
    if ann.min_annotators < 1 or ann.annotator_cap < ann.min_annotators:
        raise ConfigError("need 1 <= annotation.min_annotators <= annotator_cap")
    cls = config.classify
    if not cls.l2_grid or any(lam < 0 for lam in cls.l2_grid):
        raise ConfigError("classify.l2_grid must be non-empty and non-negative")
    if cls.n_folds < 2:
        raise ConfigError("classify.n_folds must be >= 2")
    if cls.negative_ratio <= 0:
        raise ConfigError("classify.negative_ratio must be positive")
    pol = config.polarization
    station_set = set(config.stations)
    for key, group in (("source_stations", pol.source_stations),
                       ("target_stations", pol.target_stations)):
        if not group:
            raise ConfigError(f"polarization.{key} must not be empty")
        missing = set(group) - station_set
        if missing:
            raise ConfigError(
                f"polarization.{key} references unknown stations: "
                f"{', '.join(sorted(missing))}"
            )
    if set(pol.source_stations) & set(pol.target_stations):
        raise ConfigError("polarization source and target stations overlap")
    if pol.zero_division not in ("neutral", "drop"):
        raise ConfigError("polarization.zero_division must be 'neutral' or 'drop'")
    for thr in config.consumption.thresholds:
        if not 0.0 < thr <= 1.0:
            raise ConfigError("consumption.thresholds must lie in (0, 1]")
    for name, group in config.consumption.station_sets.items():
        missing = set(group) - station_set
        if missing:
            raise ConfigError(
                f"consumption.station_sets[{name}] references unknown stations: "
                f"{', '.join(sorted(missing))}"
            )
    if config.export.smooth_window < 1:
        raise ConfigError("export.smooth_window must be >= 1")


def load_config(
    path: str | Path,
    overrides: Mapping[str, Mapping[str, Any]] | None = None,
) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if overrides:
        # section -> key -> value, layered on top of the file before validation
        raw = dict(raw)
        for section, kv in overrides.items():
            merged = dict(raw.get(section) or {})
            merged.update(kv)
            raw[section] = merged
    config = config_from_dict(raw)
    # relative paths resolve against the config file's directory
    base = path.parent
    resolved = PathsConfig(**{
        f.name: (str((base / v)) if v and not Path(v).is_absolute() else v)
        for f in dataclasses.fields(PathsConfig)
        for v in [getattr(config.paths, f.name)]
    })
    return dataclasses.replace(config, paths=resolved)
