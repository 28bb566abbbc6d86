"""Synthetic news worlds with known ground truth.

Generates an episode corpus, a replacement oracle, annotator behavior,
and a viewing panel whose true topic structure is known exactly, so every
pipeline stage can be measured against planted truth. The construction
mirrors the real data's difficulty knobs:

* every topic has a designated sibling sharing twenty vocabulary words,
  so the first (dictionary) layer systematically over-assigns the sibling
  and the supervised layer has something real to fix;
* sentences are sized so that one sentence becomes exactly one segment,
  keeping generator truth aligned with pipeline segment ids;
* cable stations speak with slanted filler words, giving the polarization
  measures a real signal, while broadcast stations stay neutral;
* commercial breaks are injected with recorded character spans.

Everything is driven by one seed and is byte-reproducible.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence

from .annotation import NONE_CHOICE, AnnotationRecord, AnnotationTask
from .config import DEFAULT_TOPICS
from .corpus import DEFAULT_STATIONS, PROGRAM_CATEGORIES
from .weaksup import ReplacementOracle

N_EXCLUSIVE = 40
N_SHARED = 20
N_COMMON = 300
N_SLANT = 30

COMMON_WORDS = tuple(f"common{i:03d}" for i in range(N_COMMON))
RED_WORDS = tuple(f"redfiller{i:02d}" for i in range(N_SLANT))
BLUE_WORDS = tuple(f"bluefiller{i:02d}" for i in range(N_SLANT))
FILLER_STOPWORDS = ("the", "a", "of", "to", "and", "in", "that", "for", "on", "with")

RED_STATIONS = ("FNC",)
BLUE_STATIONS = ("CNN", "MSNBC")

AD_TEXTS = (
    "limited offer call now for the amazing chopper deal",
    "this hour brought you by premium mattress warehouse",
    "ask your doctor about brand new pills today",
)


@dataclass(frozen=True)
class PlantedTopic:
    topic_id: str
    label: str
    label_tokens: tuple[str, ...]
    exclusive: tuple[str, ...]
    shared: tuple[str, ...]  # identical tuple for both members of a pair
    sibling: str

    def ranked_words(self) -> tuple[str, ...]:
        """Candidate order used by the oracle: label first, then shared and
        exclusive words interleaved so sibling-shared words rank high."""
        out = list(self.label_tokens)
        for i in range(max(len(self.shared), len(self.exclusive))):
            if i < len(self.shared):
                out.append(self.shared[i])
            if i < len(self.exclusive):
                out.append(self.exclusive[i])
        return tuple(out)

    def word_set(self) -> frozenset[str]:
        return frozenset(self.label_tokens) | frozenset(self.exclusive) | frozenset(self.shared)


@dataclass(frozen=True)
class FixtureSpec:
    n_episodes: int = 600
    sentences_per_episode: tuple[int, int] = (6, 12)
    sentence_words: tuple[int, int] = (80, 140)
    seed: int = 0
    start: date = date(2015, 6, 1)
    end: date = date(2022, 10, 31)
    topic_word_rate: float = 0.35
    profile_decay: float = 0.9
    label_rate: float = 0.35
    slant_rate: float = 0.08
    single_rate: float = 0.70
    dual_rate: float = 0.15  # remainder is background-only
    ad_rate: float = 0.5
    n_panelists: int = 60
    panel_start: date = date(2016, 1, 1)
    panel_end: date = date(2022, 10, 1)


def build_topic_vocab(
    topics: Sequence[tuple[str, str]] = DEFAULT_TOPICS,
) -> dict[str, PlantedTopic]:
    """Pair topics in listed order; each pair shares a 20-word block."""
    if len(topics) % 2 != 0:
        raise ValueError("topic list must pair up evenly")
    out: dict[str, PlantedTopic] = {}
    for p in range(len(topics) // 2):
        (id_a, label_a), (id_b, label_b) = topics[2 * p], topics[2 * p + 1]
        shared = tuple(f"pair{p:02d}sh{i:02d}" for i in range(N_SHARED))
        for topic_id, label, sibling in ((id_a, label_a, id_b), (id_b, label_b, id_a)):
            base = topic_id.replace("_", "")
            out[topic_id] = PlantedTopic(
                topic_id=topic_id,
                label=label,
                label_tokens=tuple(label.split()),
                exclusive=tuple(f"{base}ex{i:02d}" for i in range(N_EXCLUSIVE)),
                shared=shared,
                sibling=sibling,
            )
    return out


class PlantedOracle(ReplacementOracle):
    """Replacement lists derived from each segment's planted topic mix.

    For a masked slot, the slot's own topic membership is subtracted from
    the segment's topic-word counts, the remaining counts allocate the k
    candidate slots proportionally, and each topic contributes its ranked
    words (label first, shared before deep exclusives). Background-only
    contexts yield a segment-specific background list.
    """

    def __init__(
        self,
        vocab: Mapping[str, PlantedTopic],
        affinities: Mapping[str, Mapping[str, int]],
        seed: int,
    ):
        self.vocab = dict(vocab)
        self.affinities = {sid: dict(aff) for sid, aff in affinities.items()}
        self.seed = seed
        self._membership: dict[str, frozenset[str]] = {}
        for topic in vocab.values():
            for w in topic.word_set():
                self._membership[w] = self._membership.get(w, frozenset()) | {topic.topic_id}
            joined = " ".join(topic.label_tokens)
            self._membership[joined] = self._membership.get(joined, frozenset()) | {topic.topic_id}
        self._bg_cache: dict[str, tuple[str, ...]] = {}
        self._list_cache: dict[tuple[str, frozenset[str], int], tuple[str, ...]] = {}

    def _background(self, segment_id: str) -> tuple[str, ...]:
        cached = self._bg_cache.get(segment_id)
        if cached is None:
            rng = random.Random(f"{self.seed}:bg:{segment_id}")
            cached = tuple(rng.sample(COMMON_WORDS, 50))
            self._bg_cache[segment_id] = cached
        return cached

    def _list_for(self, segment_id: str, masked: frozenset[str], k: int) -> tuple[str, ...]:
        key = (segment_id, masked, k)
        cached = self._list_cache.get(key)
        if cached is not None:
            return cached
        aff = self.affinities.get(segment_id, {})
        adj = {z: c - (1 if z in masked else 0) for z, c in aff.items()}
        adj = {z: c for z, c in adj.items() if c > 0}
        words: list[str] = []
        seen: set[str] = set()
        if adj:
            total = sum(adj.values())
            order = sorted(adj, key=lambda z: (-adj[z], z))
            slots = {z: math.floor(k * adj[z] / total) for z in order}
            leftover = k - sum(slots.values())
            frac = sorted(order, key=lambda z: (-(k * adj[z] / total - slots[z]), z))
            for z in frac[:leftover]:
                slots[z] += 1
            for z in order:
                added = 0
                for w in self.vocab[z].ranked_words():
                    if added >= slots[z]:
                        break
                    if w not in seen:
                        seen.add(w)
                        words.append(w)
                        added += 1
        for w in self._background(segment_id):
            if len(words) >= k:
                break
            if w not in seen:
                seen.add(w)
                words.append(w)
        result = tuple(words[:k])
        self._list_cache[key] = result
        return result

    def predict(self, tokens, position, k, segment_id=None):
        if segment_id is None:
            return []
        masked = self._membership.get(tokens[position], frozenset())
        words = self._list_for(segment_id, masked, k)
        n = len(words)
        return [(w, (n - i) / n) for i, w in enumerate(words)]

    def predict_segment(self, tokens, k, segment_id=None):
        if segment_id is None:
            return [], [-1] * len(tokens)
        unique: list[tuple[str, ...]] = []
        index_of: dict[tuple[str, ...], int] = {}
        assignment = []
        for tok in tokens:
            masked = self._membership.get(tok, frozenset())
            words = self._list_for(segment_id, masked, k)
            idx = index_of.get(words)
            if idx is None:
                idx = len(unique)
                index_of[words] = idx
                unique.append(words)
            assignment.append(idx)
        return unique, assignment


@dataclass
class PlantedWorld:
    spec: FixtureSpec
    episodes_path: Path
    panel_path: Path
    vocab: dict[str, PlantedTopic]
    truth: dict[str, tuple[str, ...]]  # segment id -> true topics, () = none
    affinities: dict[str, dict[str, int]]
    oracle: PlantedOracle = field(init=False)

    def __post_init__(self):
        self.oracle = PlantedOracle(self.vocab, self.affinities, self.spec.seed)

    def true_members(self, topic_id: str) -> set[str]:
        return {sid for sid, zs in self.truth.items() if topic_id in zs}


def _topic_profiles(
    vocab: Mapping[str, PlantedTopic],
    seed: int,
    decay: float,
) -> dict[str, tuple[list[str], list[float]]]:
    """Fixed per-topic draw weights over the topic's planted words.

    Coverage vocabulary is heavy-tailed: a topic leans on a handful of
    recurring terms. A geometric profile over a seeded shuffle gives
    frequency features both within-segment repetition and cross-segment
    document frequency.
    """
    out: dict[str, tuple[list[str], list[float]]] = {}
    for z in sorted(vocab):
        pool = list(vocab[z].exclusive + vocab[z].shared)
        random.Random(f"{seed}:profile:{z}").shuffle(pool)
        cum: list[float] = []
        acc = 0.0
        for i in range(len(pool)):
            acc += decay ** i
            cum.append(acc)
        out[z] = (pool, cum)
    return out


def _sentence(
    rng: random.Random,
    spec: FixtureSpec,
    vocab: Mapping[str, PlantedTopic],
    profiles: Mapping[str, tuple[list[str], list[float]]],
    seg_topics: tuple[str, ...],
    station: str,
) -> tuple[list[str], dict[str, int]]:
    """One sentence's words plus per-topic planted-word counts."""
    n_words = rng.randint(*spec.sentence_words)
    slant: Sequence[str] = ()
    if station in RED_STATIONS:
        slant = RED_WORDS
    elif station in BLUE_STATIONS:
        slant = BLUE_WORDS
    words: list[str] = []
    counts: dict[str, int] = {}

    def bump(word: str) -> None:
        for z, topic in vocab.items():
            if word in topic.word_set():
                counts[z] = counts.get(z, 0) + 1

    for _ in range(n_words):
        r = rng.random()
        if seg_topics and r < spec.topic_word_rate:
            z = seg_topics[rng.randrange(len(seg_topics))]
            pool, cum = profiles[z]
            w = rng.choices(pool, cum_weights=cum, k=1)[0]
            words.append(w)
            bump(w)
        elif slant and r < spec.topic_word_rate + spec.slant_rate:
            words.append(slant[rng.randrange(len(slant))])
        elif r < spec.topic_word_rate + spec.slant_rate + 0.12:
            words.append(FILLER_STOPWORDS[rng.randrange(len(FILLER_STOPWORDS))])
        else:
            words.append(COMMON_WORDS[rng.randrange(N_COMMON)])
    for z in seg_topics:
        if rng.random() < spec.label_rate:
            pos = rng.randrange(len(words))
            label = vocab[z].label_tokens
            words[pos:pos + 1] = list(label)
            for tok in label:
                counts[z] = counts.get(z, 0) + 1
    return words, counts


def build_world(
    out_dir: str | Path,
    spec: FixtureSpec = FixtureSpec(),
    topics: Sequence[tuple[str, str]] = DEFAULT_TOPICS,
    stations: Sequence[str] = DEFAULT_STATIONS,
) -> PlantedWorld:
    """Generate episodes and panel files under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    vocab = build_topic_vocab(topics)
    topic_ids = sorted(vocab)
    profiles = _topic_profiles(vocab, spec.seed, spec.profile_decay)

    truth: dict[str, tuple[str, ...]] = {}
    affinities: dict[str, dict[str, int]] = {}
    episodes_path = out_dir / "episodes.jsonl"
    n_days = (spec.end - spec.start).days + 1

    with open(episodes_path, "w", encoding="utf-8") as fh:
        for e in range(spec.n_episodes):
            episode_id = f"ep{e:05d}"
            station = stations[e % len(stations)]
            air_date = spec.start + timedelta(days=rng.randrange(n_days))
            category = PROGRAM_CATEGORIES[rng.randrange(3)]
            n_sent = rng.randint(*spec.sentences_per_episode)

            sentences: list[str] = []
            for s in range(n_sent):
                r = rng.random()
                if r < spec.single_rate:
                    seg_topics = (topic_ids[rng.randrange(len(topic_ids))],)
                elif r < spec.single_rate + spec.dual_rate:
                    pair = rng.sample(topic_ids, 2)
                    seg_topics = tuple(sorted(pair))
                else:
                    seg_topics = ()
                words, counts = _sentence(
                    rng, spec, vocab, profiles, seg_topics, station
                )
                sid = f"{episode_id}:{s:04d}"
                truth[sid] = seg_topics
                affinities[sid] = counts
                sentences.append(" ".join(words) + ".")

            text = sentences[0]
            ad_spans: list[list[int]] = []
            for sent in sentences[1:]:
                if rng.random() < spec.ad_rate / max(n_sent - 1, 1) * 2:
                    ad = AD_TEXTS[rng.randrange(len(AD_TEXTS))]
                    start = len(text) + 1
                    text += " " + ad
                    ad_spans.append([start, len(text) + 1])
                text += " " + sent
            fh.write(json.dumps({
                "id": episode_id,
                "station": station,
                "program_title": f"{station} {category} hour",
                "category": category,
                "air_date": air_date.isoformat(),
                "air_time": f"{17 + e % 5}:00",
                "duration_min": 60,
                "text": text,
                "ad_spans": ad_spans,
            }, sort_keys=True) + "\n")

    panel_path = out_dir / "panel.jsonl"
    _write_panel(panel_path, spec, stations)
    return PlantedWorld(
        spec=spec,
        episodes_path=episodes_path,
        panel_path=panel_path,
        vocab=vocab,
        truth=truth,
        affinities=affinities,
    )


def _write_panel(path: Path, spec: FixtureSpec, stations: Sequence[str]) -> None:
    """Panelist-months with heavy, light, and boundary viewing habits."""
    rng = random.Random(f"{spec.seed}:panel")
    profiles = []
    for p in range(spec.n_panelists):
        kind = ("red", "blue", "broadcast", "light", "boundary")[p % 5]
        profiles.append((f"panelist{p:03d}", kind, 0.5 + rng.random() * 2.0))
    months = []
    cur = spec.panel_start.replace(day=1)
    while cur <= spec.panel_end:
        months.append(cur)
        cur = date(cur.year + 1, 1, 1) if cur.month == 12 else date(cur.year, cur.month + 1, 1)

    with open(path, "w", encoding="utf-8") as fh:
        for month in months:
            for pid, kind, weight in profiles:
                minutes: dict[str, float] = {}
                if kind == "red":
                    minutes["FNC"] = round(rng.uniform(60, 600), 1)
                    minutes["ABC"] = round(rng.uniform(0, 40), 1)
                elif kind == "blue":
                    minutes["CNN"] = round(rng.uniform(30, 300), 1)
                    minutes["MSNBC"] = round(rng.uniform(30, 300), 1)
                    minutes["NBC"] = round(rng.uniform(0, 40), 1)
                elif kind == "broadcast":
                    for st in ("ABC", "CBS", "NBC"):
                        minutes[st] = round(rng.uniform(10, 120), 1)
                elif kind == "light":
                    if rng.random() < 0.5:
                        minutes[stations[rng.randrange(len(stations))]] = round(
                            rng.uniform(0, 29.9), 1
                        )
                else:  # boundary: exactly at the activity bar, split half and half
                    minutes["FNC"] = 15.0
                    minutes["CNN"] = 15.0
                tracked = sum(minutes.values())
                if kind == "boundary":
                    untracked = 0.0  # keep the 30-minute bar exact
                else:
                    untracked = round(rng.uniform(0, 60), 1)
                news = round(tracked + untracked, 1)
                fh.write(json.dumps({
                    "panelist_id": pid,
                    "month": f"{month.year:04d}-{month.month:02d}",
                    "weight": round(weight, 3),
                    "minutes": minutes,
                    "total_news_minutes": news,
                    "total_tv_minutes": round(news + rng.uniform(30, 600), 1),
                }, sort_keys=True) + "\n")


def write_records(path: str | Path, records: Sequence[AnnotationRecord]) -> Path:
    """Write annotator records in the line format the import stage reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({
                "task_id": r.task_id,
                "annotator": r.annotator,
                "choice": r.choice,
                "token": r.token,
            }, sort_keys=True) + "\n")
    return path


def simulate_annotators(
    tasks: Sequence[AnnotationTask],
    truth: Mapping[str, tuple[str, ...]],
    n_annotators: int = 4,
    none_every: int = 7,
) -> list[AnnotationRecord]:
    """Deterministic annotator behavior over sampled tasks.

    Every annotator picks the lexicographically first true topic offered by
    the task's candidates (or "none" when no candidate is true); the last
    annotator answers "none" on every ``none_every``-th of their tasks,
    which exercises disagreement without blocking strict majorities.
    """
    records: list[AnnotationRecord] = []
    ordered = sorted(tasks, key=lambda t: t.task_id)
    for i, task in enumerate(ordered):
        true_topics = set(truth.get(task.segment_id, ()))
        offered = [z for z in sorted(true_topics) if z in task.candidates]
        honest = offered[0] if offered else NONE_CHOICE
        for a in range(n_annotators):
            annotator = f"a{a + 1}"
            if a == n_annotators - 1 and (i + 1) % none_every == 0:
                choice = NONE_CHOICE
            else:
                choice = honest
            records.append(AnnotationRecord(
                task_id=task.task_id,
                annotator=annotator,
                choice=choice,
                token=f"{annotator}:{task.task_id}",
            ))
    return records
