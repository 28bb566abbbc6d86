"""Weakly supervised topic dictionaries and first-layer classification.

Each topic starts from a single label word (or short label phrase). A
replacement oracle proposes, for any masked token slot, the words most
likely to fill it. Collecting the oracle's top-k lists at every occurrence
of the label and ranking candidates by how many lists they appear in
yields a class vocabulary; after manual review it becomes the topic
dictionary. A segment is weakly labeled with topic z when, at some token
position, the oracle's top-k replacement list overlaps dictionary z by at
least the assignment threshold.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

DEFAULT_TOP_K = 50
DEFAULT_VOCAB_CAP = 100
DEFAULT_OVERLAP_THRESHOLD = 0.20


class VocabularyReviewError(Exception):
    """Manual review left a topic dictionary unusable."""


@dataclass(frozen=True)
class TopicDictionary:
    topic_id: str
    label: str
    words: tuple[str, ...]  # ranked, most supported first

    def word_set(self) -> frozenset[str]:
        return frozenset(self.words)


@dataclass(frozen=True)
class WeakLabel:
    """First-layer result for one segment.

    ``scores`` holds, per topic, the maximum replacement-list overlap seen
    at any position (topics that never overlapped are omitted); ``topics``
    are the ids whose score reached the threshold, sorted.
    """

    segment_id: str | None
    scores: Mapping[str, float]
    topics: tuple[str, ...]


# ---------------------------------------------------------------------------
# Replacement oracles
# ---------------------------------------------------------------------------

class ReplacementOracle:
    """Ranks candidate fillers for a masked token slot.

    ``predict`` returns up to k (word, score) pairs, best first, with a
    deterministic order. ``predict_segment`` batches a whole segment and
    deduplicates identical lists so downstream overlap scores can be cached
    per distinct list instead of per position.
    """

    def predict(
        self,
        tokens: Sequence[str],
        position: int,
        k: int,
        segment_id: str | None = None,
    ) -> list[tuple[str, float]]:
        raise NotImplementedError

    def predict_segment(
        self,
        tokens: Sequence[str],
        k: int,
        segment_id: str | None = None,
    ) -> tuple[list[tuple[str, ...]], list[int]]:
        """Return (unique replacement lists, per-position index into them).

        Positions with no prediction map to -1.
        """
        unique: list[tuple[str, ...]] = []
        index_of: dict[tuple[str, ...], int] = {}
        assignment: list[int] = []
        for pos in range(len(tokens)):
            words = tuple(w for w, _ in self.predict(tokens, pos, k, segment_id=segment_id))
            if not words:
                assignment.append(-1)
                continue
            idx = index_of.get(words)
            if idx is None:
                idx = len(unique)
                index_of[words] = idx
                unique.append(words)
            assignment.append(idx)
        return unique, assignment


class FileBackedOracle(ReplacementOracle):
    """Replacement lists precomputed elsewhere, keyed by (segment_id, position).

    The file is newline-delimited JSON with ``segment_id``, ``position``,
    and ``replacements`` (ranked words, optionally [word, score] pairs).
    """

    def __init__(self, table: Mapping[tuple[str, int], list[tuple[str, float]]]):
        self._table = dict(table)

    @classmethod
    def from_file(cls, path: str | Path) -> "FileBackedOracle":
        table: dict[tuple[str, int], list[tuple[str, float]]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                try:
                    key = (str(obj["segment_id"]), int(obj["position"]))
                    raw = obj["replacements"]
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"line {line_no}: bad replacement record: {exc}") from exc
                scored: list[tuple[str, float]] = []
                n = len(raw)
                for rank, item in enumerate(raw):
                    if isinstance(item, str):
                        scored.append((item, (n - rank) / n))
                    else:
                        scored.append((str(item[0]), float(item[1])))
                table[key] = scored
        return cls(table)

    def predict(self, tokens, position, k, segment_id=None):
        if segment_id is None:
            return []
        return self._table.get((segment_id, position), [])[:k]


class DistributionalOracle(ReplacementOracle):
    """Corpus-trained oracle scoring fillers by context similarity.

    Fit a symmetric windowed co-occurrence matrix over the training corpus,
    reweight it with positive PMI, and L2-normalize the rows. A masked
    slot's surrounding window becomes a context count vector; candidate
    fillers are vocabulary words ranked by cosine similarity between their
    PPMI row and that vector. Only strictly positive similarities qualify,
    and ties break lexicographically, so output order is deterministic.
    """

    def __init__(self, window: int = 5, min_count: int = 2):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self.min_count = min_count
        self.vocab: list[str] = []
        self._index: dict[str, int] = {}
        self._rows: sp.csr_matrix | None = None

    def fit(self, corpus: Iterable[Sequence[str]]) -> "DistributionalOracle":
        corpus = [list(tokens) for tokens in corpus]
        counts = Counter(tok for tokens in corpus for tok in tokens)
        self.vocab = sorted(w for w, c in counts.items() if c >= self.min_count)
        self._index = {w: i for i, w in enumerate(self.vocab)}
        n = len(self.vocab)
        if n == 0:
            raise ValueError("no vocabulary at this min_count")

        cooc: Counter[tuple[int, int]] = Counter()
        for tokens in corpus:
            ids = [self._index.get(t, -1) for t in tokens]
            for i, wi in enumerate(ids):
                if wi < 0:
                    continue
                lo = max(0, i - self.window)
                hi = min(len(ids), i + self.window + 1)
                for j in range(lo, hi):
                    wj = ids[j]
                    if j != i and wj >= 0:
                        cooc[(wi, wj)] += 1
        if not cooc:
            raise ValueError("no co-occurrences observed")

        keys = np.array(list(cooc.keys()), dtype=np.int64)
        vals = np.array(list(cooc.values()), dtype=np.float64)
        mat = sp.coo_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(n, n)).tocsr()

        total = mat.sum()
        row_sums = np.asarray(mat.sum(axis=1)).ravel()
        col_sums = np.asarray(mat.sum(axis=0)).ravel()
        mat = mat.tocoo()
        with np.errstate(divide="ignore"):
            pmi = np.log(mat.data * total / (row_sums[mat.row] * col_sums[mat.col]))
        pmi = np.maximum(pmi, 0.0)
        rows = sp.csr_matrix((pmi, (mat.row, mat.col)), shape=(n, n))
        norms = np.sqrt(np.asarray(rows.multiply(rows).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0
        self._rows = sp.diags(1.0 / norms) @ rows
        return self

    def predict(self, tokens, position, k, segment_id=None):
        if self._rows is None:
            raise RuntimeError("oracle is not fitted")
        if not (0 <= position < len(tokens)):
            raise IndexError(f"position {position} out of range")
        lo = max(0, position - self.window)
        hi = min(len(tokens), position + self.window + 1)
        ctx = Counter(
            self._index[tokens[j]]
            for j in range(lo, hi)
            if j != position and tokens[j] in self._index
        )
        if not ctx:
            return []
        vec = np.zeros(len(self.vocab))
        for idx, c in ctx.items():
            vec[idx] = c
        vec /= np.linalg.norm(vec)
        sims = self._rows @ vec
        hits = np.flatnonzero(sims > 0)
        if hits.size == 0:
            return []
        ranked = sorted(((-sims[i], self.vocab[i]) for i in hits))[:k]
        return [(w, -neg) for neg, w in ranked]


# ---------------------------------------------------------------------------
# Dictionary expansion
# ---------------------------------------------------------------------------

def find_label_occurrences(tokens: Sequence[str], label_tokens: Sequence[str]) -> list[int]:
    """Start positions of every (possibly overlapping) label occurrence."""
    n = len(label_tokens)
    if n == 0:
        return []
    pat = tuple(label_tokens)
    return [i for i in range(len(tokens) - n + 1) if tuple(tokens[i:i + n]) == pat]


def collapse_label(tokens: Sequence[str], start: int, n_label: int) -> tuple[list[str], int]:
    """Replace an n-token label occurrence with one slot at ``start``.

    A multiword label is masked as a single unit so the oracle sees the
    words around the whole phrase, not around its pieces.
    """
    joined = " ".join(tokens[start:start + n_label])
    return list(tokens[:start]) + [joined] + list(tokens[start + n_label:]), start


def collect_replacements(
    segments: Iterable[tuple[str, Sequence[str]]],
    label_tokens: Sequence[str],
    oracle: ReplacementOracle,
    k: int = DEFAULT_TOP_K,
) -> list[tuple[str, ...]]:
    """Gather the oracle's top-k list at every label occurrence in the corpus."""
    lists: list[tuple[str, ...]] = []
    for segment_id, tokens in segments:
        for start in find_label_occurrences(tokens, label_tokens):
            masked, pos = collapse_label(tokens, start, len(label_tokens))
            preds = oracle.predict(masked, pos, k, segment_id=segment_id)
            if preds:
                lists.append(tuple(w for w, _ in preds))
    return lists


def build_class_vocabulary(
    replacement_lists: Sequence[Sequence[str]],
    cap: int = DEFAULT_VOCAB_CAP,
) -> tuple[str, ...]:
    """Rank candidates by how many replacement lists contain them.

    Ties break lexicographically; at most ``cap`` words are kept.
    """
    support = Counter()
    for lst in replacement_lists:
        support.update(set(lst))
    ranked = sorted(support, key=lambda w: (-support[w], w))
    return tuple(ranked[:cap])


def review_vocabulary(
    dictionary: TopicDictionary,
    removals: Iterable[str],
) -> TopicDictionary:
    """Apply manually flagged removals to a topic dictionary.

    Removals not present are ignored (shared removal lists are allowed), but
    a review that empties the vocabulary is an error, not a silent no-op.
    """
    drop = set(removals)
    kept = tuple(w for w in dictionary.words if w not in drop)
    if dictionary.words and not kept:
        raise VocabularyReviewError(
            f"review removed every word of topic {dictionary.topic_id!r}"
        )
    return TopicDictionary(dictionary.topic_id, dictionary.label, kept)


# ---------------------------------------------------------------------------
# Weak classification
# ---------------------------------------------------------------------------

def list_overlap(words: Sequence[str], dictionary_words: frozenset[str], k: int) -> float:
    """Fraction of the requested k slots filled by dictionary words.

    The denominator is k even when the oracle returned fewer candidates, so
    a thin list cannot inflate the score.
    """
    return sum(1 for w in words[:k] if w in dictionary_words) / k


def weak_classify(
    tokens: Sequence[str],
    oracle: ReplacementOracle,
    dictionaries: Sequence[TopicDictionary],
    k: int = DEFAULT_TOP_K,
    threshold: float = DEFAULT_OVERLAP_THRESHOLD,
    segment_id: str | None = None,
    _word_sets: Sequence[frozenset[str]] | None = None,
    _overlap_cache: dict | None = None,
) -> WeakLabel:
    """Assign every topic whose dictionary overlap reaches the threshold
    for at least one masked position of the segment."""
    word_sets = _word_sets if _word_sets is not None else [d.word_set() for d in dictionaries]
    cache = _overlap_cache if _overlap_cache is not None else {}

    best = np.zeros(len(dictionaries))
    unique_lists, _ = oracle.predict_segment(tokens, k, segment_id=segment_id)
    for words in unique_lists:
        scores = cache.get(words)
        if scores is None:
            scores = np.array([list_overlap(words, ws, k) for ws in word_sets])
            cache[words] = scores
        np.maximum(best, scores, out=best)

    scores = {
        d.topic_id: float(best[z]) for z, d in enumerate(dictionaries) if best[z] > 0
    }
    topics = tuple(sorted(
        d.topic_id for z, d in enumerate(dictionaries) if best[z] >= threshold
    ))
    return WeakLabel(segment_id=segment_id, scores=scores, topics=topics)


def weak_classify_corpus(
    segments: Iterable[tuple[str, Sequence[str]]],
    oracle: ReplacementOracle,
    dictionaries: Sequence[TopicDictionary],
    k: int = DEFAULT_TOP_K,
    threshold: float = DEFAULT_OVERLAP_THRESHOLD,
) -> dict[str, WeakLabel]:
    """Weakly classify many segments, sharing the list-overlap cache."""
    word_sets = [d.word_set() for d in dictionaries]
    cache: dict = {}
    out: dict[str, WeakLabel] = {}
    for segment_id, tokens in segments:
        out[segment_id] = weak_classify(
            tokens, oracle, dictionaries, k=k, threshold=threshold,
            segment_id=segment_id, _word_sets=word_sets, _overlap_cache=cache,
        )
    return out


# ---------------------------------------------------------------------------
# Dictionary file I/O
# ---------------------------------------------------------------------------

def save_dictionaries(path: str | Path, dictionaries: Sequence[TopicDictionary]) -> None:
    payload = {
        d.topic_id: {"label": d.label, "words": list(d.words)}
        for d in dictionaries
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dictionaries(path: str | Path) -> list[TopicDictionary]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out = []
    for topic_id in sorted(payload):
        entry = payload[topic_id]
        out.append(TopicDictionary(
            topic_id=topic_id,
            label=str(entry["label"]),
            words=tuple(str(w) for w in entry["words"]),
        ))
    return out
