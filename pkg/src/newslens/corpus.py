"""Transcript ingestion, ad stripping, segmentation, and phrase counting.

The unit of analysis is the segment: a chunk of at most ``max_words``
whitespace words cut from one episode's ad-free transcript. Segments are
later represented as sparse unigram+bigram count vectors ("phrase
vectors") after stopword and confounder filtering.
"""

from __future__ import annotations

import hashlib
import json
import pickle
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, time
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

DEFAULT_STATIONS = ("ABC", "CBS", "NBC", "CNN", "FNC", "MSNBC")

PROGRAM_CATEGORIES = (
    "hard news",
    "talk shows",
    "partisan/opinion news",
    "soft news",
    "local news",
    "other",
)

SNAPSHOT_FORMAT_VERSION = 1

# A token is a maximal run of letters/digits, allowing internal apostrophes
# ("don't" stays one token, "o'brien's" too). Everything else separates.
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")

# Sentence boundary: terminal punctuation followed by whitespace.
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class SnapshotError(Exception):
    """Corpus snapshot is missing, stale, or from an incompatible format."""


@dataclass(frozen=True)
class Episode:
    id: str
    station: str
    program_title: str
    category: str
    air_date: date
    air_time: time
    duration_min: int
    text: str
    ad_spans: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Segment:
    episode_id: str
    index: int
    text: str
    word_count: int
    station: str
    category: str
    air_date: date

    @property
    def id(self) -> str:
        return f"{self.episode_id}:{self.index:04d}"


@dataclass(frozen=True)
class PhraseVector:
    """Sparse unigram+bigram counts for one segment.

    ``total`` is the number of surviving phrase occurrences (the m_i that
    normalizes per-segment frequencies downstream).
    """

    counts: Mapping[str, int]
    total: int

    @classmethod
    def from_counts(cls, counts: Mapping[str, int]) -> "PhraseVector":
        kept = {p: c for p, c in counts.items() if c > 0}
        return cls(counts=kept, total=sum(kept.values()))

    def is_empty(self) -> bool:
        return self.total == 0


@dataclass(frozen=True)
class ValidationIssue:
    line_no: int
    record_id: str | None
    message: str


@dataclass
class IngestResult:
    episodes: list[Episode]
    issues: list[ValidationIssue]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

_EPISODE_FIELDS = {
    "id", "station", "program_title", "category", "air_date", "air_time",
    "duration_min", "text", "ad_spans",
}


def _parse_ad_spans(raw, text_len: int) -> tuple[tuple[int, int], ...]:
    """Validate and normalize [start, end) spans; raises ValueError."""
    spans = []
    for item in raw:
        if len(item) != 2:
            raise ValueError(f"ad span {item!r} is not a [start, end) pair")
        start, end = int(item[0]), int(item[1])
        if not (0 <= start < end <= text_len):
            raise ValueError(f"ad span [{start}, {end}) out of bounds for text of length {text_len}")
        spans.append((start, end))
    spans.sort()
    for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise ValueError(f"ad spans [{s0}, {e0}) and [{s1}, {e1}) overlap")
    return tuple(spans)


def parse_episode_record(obj: dict, stations: Sequence[str] = DEFAULT_STATIONS) -> Episode:
    """Build an Episode from one decoded record, raising ValueError on any violation."""
    missing = _EPISODE_FIELDS - set(obj)
    if missing:
        raise ValueError(f"missing fields: {', '.join(sorted(missing))}")
    unknown = set(obj) - _EPISODE_FIELDS
    if unknown:
        raise ValueError(f"unknown fields: {', '.join(sorted(unknown))}")
    if obj["station"] not in stations:
        raise ValueError(f"unknown station {obj['station']!r}")
    if obj["category"] not in PROGRAM_CATEGORIES:
        raise ValueError(f"unknown category {obj['category']!r}")
    text = obj["text"]
    if not isinstance(text, str) or not text.strip():
        raise ValueError("empty text")
    duration = int(obj["duration_min"])
    if duration <= 0:
        raise ValueError(f"duration_min must be positive, got {duration}")
    air_date = date.fromisoformat(obj["air_date"])
    hh, mm = obj["air_time"].split(":")
    air_time = time(int(hh), int(mm))
    return Episode(
        id=str(obj["id"]),
        station=obj["station"],
        program_title=str(obj["program_title"]),
        category=obj["category"],
        air_date=air_date,
        air_time=air_time,
        duration_min=duration,
        text=text,
        ad_spans=_parse_ad_spans(obj["ad_spans"], len(text)),
    )


def ingest_episodes(path: str | Path, stations: Sequence[str] = DEFAULT_STATIONS) -> IngestResult:
    """Read newline-delimited episode records from ``path``.

    Returns all valid episodes plus a per-record validation report; invalid
    records are rejected individually and never abort the run.
    """
    episodes: list[Episode] = []
    issues: list[ValidationIssue] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                issues.append(ValidationIssue(line_no, None, f"malformed record: {exc}"))
                continue
            rec_id = str(obj.get("id", "")) if isinstance(obj, dict) else None
            try:
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                episode = parse_episode_record(obj, stations)
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                issues.append(ValidationIssue(line_no, rec_id or None, str(exc)))
                continue
            if episode.id in seen_ids:
                issues.append(ValidationIssue(line_no, episode.id, "duplicate episode id"))
                continue
            seen_ids.add(episode.id)
            episodes.append(episode)
    episodes.sort(key=lambda e: e.id)
    return IngestResult(episodes=episodes, issues=issues)


# ---------------------------------------------------------------------------
# Ad stripping and segmentation
# ---------------------------------------------------------------------------

def strip_ads(episode: Episode) -> str:
    """Remove all ad spans, preserving the order of the remaining characters."""
    if not episode.ad_spans:
        return episode.text
    pieces = []
    cursor = 0
    for start, end in episode.ad_spans:
        pieces.append(episode.text[cursor:start])
        cursor = end
    pieces.append(episode.text[cursor:])
    return "".join(pieces)


def canonical_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces (the separator policy)."""
    return " ".join(text.split())


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace.

    Unpunctuated text (common in closed captions) comes back as one
    "sentence" and is handled by the hard word split downstream.
    """
    return [s for s in _SENTENCE_RE.split(text) if s]


def segment_text(text: str, max_words: int = 150) -> list[str]:
    """Cut ad-free text into segment strings of at most ``max_words`` words.

    Whole sentences are packed greedily; a single sentence longer than
    ``max_words`` is hard-split at the word limit, and its tail chunk keeps
    accumulating subsequent sentences. Joining the results with single
    spaces reproduces the whitespace-canonicalized input.
    """
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    text = canonical_text(text)
    if not text:
        return []

    segments: list[str] = []
    current: list[str] = []  # words of the segment under construction
    for sentence in split_sentences(text):
        words = sentence.split()
        if len(words) > max_words:
            # Oversized sentence: flush, then hard-split at the word limit.
            if current:
                segments.append(" ".join(current))
                current = []
            while len(words) > max_words:
                segments.append(" ".join(words[:max_words]))
                words = words[max_words:]
            current = words
        elif len(current) + len(words) > max_words:
            segments.append(" ".join(current))
            current = list(words)
        else:
            current.extend(words)
    if current:
        segments.append(" ".join(current))
    return segments


def segment_episode(episode: Episode, max_words: int = 150) -> list[Segment]:
    """Strip ads and cut one episode into Segment objects."""
    texts = segment_text(strip_ads(episode), max_words=max_words)
    return [
        Segment(
            episode_id=episode.id,
            index=i,
            text=t,
            word_count=len(t.split()),
            station=episode.station,
            category=episode.category,
            air_date=episode.air_date,
        )
        for i, t in enumerate(texts)
    ]


# ---------------------------------------------------------------------------
# Tokenization and phrase counting
# ---------------------------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Lowercase and extract alphanumeric tokens with internal apostrophes."""
    return _TOKEN_RE.findall(text.lower())


def normalize_phrase(phrase: str) -> tuple[str, ...]:
    """Normalize a stoplist/confounder entry to its token tuple."""
    return tuple(tokenize(phrase))


def _confounder_mask(tokens: Sequence[str], confounders: Iterable[str]) -> list[bool]:
    """Mark token positions covered by any confounder phrase occurrence."""
    covered = [False] * len(tokens)
    for phrase in confounders:
        pat = normalize_phrase(phrase)
        if not pat:
            continue
        n = len(pat)
        for i in range(len(tokens) - n + 1):
            if tuple(tokens[i:i + n]) == pat:
                for j in range(i, i + n):
                    covered[j] = True
    return covered


def iter_phrases(
    tokens: Sequence[str],
    stoplist: frozenset[str] | set[str] = frozenset(),
    confounders: Iterable[str] = (),
) -> Iterator[str]:
    """Yield surviving unigram and adjacent-bigram phrases, one per occurrence.

    Filtering rules: a phrase is dropped when every word in it is a stopword
    (mixed bigrams survive), and any phrase touching a token covered by a
    confounder match is dropped along with the covered tokens themselves.
    """
    covered = _confounder_mask(tokens, confounders) if confounders else None
    n = len(tokens)
    for i, tok in enumerate(tokens):
        if covered is not None and covered[i]:
            continue
        if tok not in stoplist:
            yield tok
    for i in range(n - 1):
        if covered is not None and (covered[i] or covered[i + 1]):
            continue
        a, b = tokens[i], tokens[i + 1]
        if a in stoplist and b in stoplist:
            continue
        yield f"{a} {b}"


def phrase_counts(
    text_or_tokens: str | Sequence[str],
    stoplist: frozenset[str] | set[str] = frozenset(),
    confounders: Iterable[str] = (),
) -> PhraseVector:
    """Count filtered unigram+bigram phrases of one segment.

    With empty filters, a segment of n tokens yields total 2n - 1 phrase
    occurrences (n unigrams plus n - 1 bigrams).
    """
    tokens = tokenize(text_or_tokens) if isinstance(text_or_tokens, str) else list(text_or_tokens)
    counts = Counter(iter_phrases(tokens, stoplist, confounders))
    return PhraseVector.from_counts(counts)


# ---------------------------------------------------------------------------
# Snapshot cache
# ---------------------------------------------------------------------------

def save_snapshot(path: str | Path, payload: dict, config_hash: str) -> None:
    """Write a versioned binary snapshot stamped with the config hash."""
    wrapped = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "config_hash": config_hash,
        "payload": payload,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        pickle.dump(wrapped, fh, protocol=4)


def load_snapshot(path: str | Path, config_hash: str | None = None) -> dict:
    """Load a snapshot, refusing stale caches and foreign formats."""
    path = Path(path)
    if not path.exists():
        raise SnapshotError(f"snapshot not found: {path}")
    with open(path, "rb") as fh:
        wrapped = pickle.load(fh)
    version = wrapped.get("format_version")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise SnapshotError(f"snapshot format version {version} != {SNAPSHOT_FORMAT_VERSION}")
    if config_hash is not None and wrapped.get("config_hash") != config_hash:
        raise SnapshotError(
            f"snapshot config hash {wrapped.get('config_hash')} does not match {config_hash}; "
            "rebuild the stage"
        )
    return wrapped["payload"]


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
